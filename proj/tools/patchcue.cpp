// patchcue: batch front end over the scoring, conversion, curation and
// GRPO modules, plus the HTTP service launcher.
//
// Exit codes: 0 success, 1 operational failure (bind failure, --strict
// escalation, bad flag values), 2 I/O failure. Per-record problems never
// abort a run; they are embedded in the output line for that record.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "patchcue/records.hpp"
#include "patchcue/service.hpp"
#include "patchcue/version.hpp"

namespace {

using nlohmann::json;
using namespace patchcue;

bool blank_line(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isspace(c) != 0;
    });
}

// Streams JSONL through fn with a bounded window: up to `window` lines are
// in flight, workers pull by index, and results are written back in input
// order, so output bytes do not depend on the parallelism level. fn must
// be thread-safe and non-throwing.
template <typename Fn>
bool process_jsonl(std::istream& in, std::ostream& out, int parallelism,
                   Fn&& fn) {
    const std::size_t window =
        std::max<std::size_t>(static_cast<std::size_t>(parallelism) * 8, 64);
    std::vector<std::string> lines;
    std::vector<std::string> results;
    std::string line;
    bool eof = false;
    while (!eof) {
        lines.clear();
        while (lines.size() < window) {
            if (!std::getline(in, line)) {
                eof = true;
                break;
            }
            if (blank_line(line)) continue;
            lines.push_back(line);
        }
        if (lines.empty()) continue;

        results.assign(lines.size(), {});
        const std::size_t workers =
            std::min<std::size_t>(static_cast<std::size_t>(parallelism),
                                  lines.size());
        if (workers > 1) {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w)
                pool.emplace_back([&] {
                    for (std::size_t i;
                         (i = next.fetch_add(1)) < lines.size();)
                        results[i] = fn(lines[i]);
                });
            for (auto& t : pool) t.join();
        } else {
            for (std::size_t i = 0; i < lines.size(); ++i)
                results[i] = fn(lines[i]);
        }
        for (const auto& r : results) out << r << '\n';
    }
    return out.good();
}

bool open_input(const std::string& path, std::ifstream& in) {
    in.open(path);
    if (!in) {
        std::cerr << "error: cannot open input file '" << path << "'\n";
        return false;
    }
    return true;
}

bool open_output(const std::string& path, std::ofstream& out) {
    out.open(path);
    if (!out) {
        std::cerr << "error: cannot open output file '" << path << "'\n";
        return false;
    }
    return true;
}

std::string loose_id(const json& j, const char* key) {
    if (j.is_object() && j.contains(key) && j.at(key).is_string())
        return j.at(key).get<std::string>();
    return "";
}

json error_line(const char* id_key, const std::string& id,
                const std::string& message) {
    return json{{id_key, id}, {"error", message}};
}

struct ScoreSummary {
    std::mutex mu;
    long long scored = 0;
    long long errors = 0;
    double acc = 0, format = 0, cue = 0, total = 0;
};

int run_score(const std::string& input_path, const std::string& gt_path,
              const std::string& out_path, double tau, int patch_size,
              int parallelism, bool strict) {
    std::ifstream gt_in;
    if (!open_input(gt_path, gt_in)) return 2;

    ScoringDefaults defaults;
    defaults.tau = tau;
    defaults.patch_height = patch_size;
    defaults.patch_width = patch_size;

    std::unordered_map<std::string, GtRecord> gt;
    std::string line;
    std::size_t gt_line = 0;
    while (std::getline(gt_in, line)) {
        ++gt_line;
        if (blank_line(line)) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            std::cerr << "error: gt line " << gt_line << " is not valid JSON\n";
            return 2;
        }
        try {
            GtRecord record = gt_record_from_json(j);
            if (!gt.emplace(record.id, std::move(record)).second)
                std::cerr << "warning: duplicate ground-truth id '"
                          << loose_id(j, "id") << "', keeping the first\n";
        } catch (const ParseError& e) {
            std::cerr << "error: gt line " << gt_line << ": " << e.what()
                      << "\n";
            return 2;
        }
    }

    std::ifstream in;
    std::ofstream out;
    if (!open_input(input_path, in)) return 2;
    if (!open_output(out_path, out)) return 2;

    ScoreSummary summary;
    auto score_line = [&](const std::string& text) -> std::string {
        json j = json::parse(text, nullptr, false);
        json result;
        if (j.is_discarded()) {
            result = error_line("id", "", "line is not valid JSON");
        } else {
            try {
                TraceRecord trace = trace_record_from_json(j);
                auto it = gt.find(trace.id);
                if (it == gt.end()) {
                    result = error_line("id", trace.id,
                                        "no ground truth for this id");
                } else {
                    ScoreRequest request;
                    request.id = trace.id;
                    request.prediction = trace.prediction;
                    request.ground_truth = it->second.ground_truth;
                    request.grid = it->second.grid;
                    ScoreResponse response = score_one(request, defaults);
                    result = score_response_to_json(response);
                    std::lock_guard<std::mutex> lock(summary.mu);
                    ++summary.scored;
                    summary.acc += response.breakdown.r_acc;
                    summary.format += response.breakdown.r_format;
                    summary.cue += response.breakdown.r_cue;
                    summary.total += response.breakdown.r_total;
                }
            } catch (const std::exception& e) {
                result = error_line("id", loose_id(j, "id"), e.what());
            }
        }
        if (result.contains("error")) {
            std::lock_guard<std::mutex> lock(summary.mu);
            ++summary.errors;
        }
        return result.dump();
    };

    if (!process_jsonl(in, out, parallelism, score_line)) {
        std::cerr << "error: writing '" << out_path << "' failed\n";
        return 2;
    }

    if (summary.scored > 0) {
        const double n = static_cast<double>(summary.scored);
        std::fprintf(stderr,
                     "scored %lld records, %lld errors\n"
                     "mean r_total %.6f (r_acc %.6f, r_format %.6f, "
                     "r_cue %.6f)\n",
                     summary.scored, summary.errors, summary.total / n,
                     summary.acc / n, summary.format / n, summary.cue / n);
    } else {
        std::fprintf(stderr, "scored 0 records, %lld errors\n",
                     summary.errors);
    }
    return strict && summary.errors > 0 ? 1 : 0;
}

int run_convert(const std::string& mode, const std::string& input_path,
                const std::string& out_path, int patch_size, int parallelism,
                bool strict) {
    std::ifstream in;
    std::ofstream out;
    if (!open_input(input_path, in)) return 2;
    if (!open_output(out_path, out)) return 2;

    ScoringDefaults defaults;
    defaults.patch_height = patch_size;
    defaults.patch_width = patch_size;
    const bool to_patch = mode == "pixel2patch";

    std::atomic<long long> converted{0}, errors{0};
    auto convert_line = [&](const std::string& text) -> std::string {
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded()) {
            ++errors;
            return error_line("id", "", "line is not valid JSON").dump();
        }
        try {
            json result = to_patch ? convert_pixel_to_patch(j, defaults)
                                   : convert_patch_to_pixel(j, defaults);
            ++converted;
            return result.dump();
        } catch (const std::exception& e) {
            ++errors;
            return error_line("id", loose_id(j, "id"), e.what()).dump();
        }
    };

    if (!process_jsonl(in, out, parallelism, convert_line)) {
        std::cerr << "error: writing '" << out_path << "' failed\n";
        return 2;
    }
    std::fprintf(stderr, "converted %lld records, %lld errors\n",
                 converted.load(), errors.load());
    return strict && errors.load() > 0 ? 1 : 0;
}

int run_filter(const std::string& mode, const std::string& input_path,
               const std::string& kept_path, const std::string& rejected_path,
               double iou_threshold, int patch_size, bool strict) {
    std::ifstream in;
    std::ofstream kept_out, rejected_out;
    if (!open_input(input_path, in)) return 2;
    if (!open_output(kept_path, kept_out)) return 2;
    if (!open_output(rejected_path, rejected_out)) return 2;

    ConsensusConfig consensus;
    consensus.iou_threshold = iou_threshold;
    consensus.patch_height = patch_size;
    consensus.patch_width = patch_size;

    long long kept = 0, rejected = 0, errors = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (blank_line(line)) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            ++errors;
            rejected_out << error_line("sample_id", "",
                                       "line is not valid JSON")
                                .dump()
                         << '\n';
            continue;
        }
        try {
            if (mode == "consensus") {
                ConsensusSampleResult result = consensus_sample_filter(
                    consensus_sample_from_json(j), consensus);
                if (result.retained) {
                    ++kept;
                    kept_out << consensus_result_to_json(result).dump() << '\n';
                } else {
                    ++rejected;
                    rejected_out << consensus_result_to_json(result).dump()
                                 << '\n';
                }
            } else {
                AttemptRecord record = attempt_record_from_json(j);
                const bool keep = mode == "sft" ? sft_difficulty_filter(record)
                                                : rl_difficulty_filter(record);
                if (keep) {
                    ++kept;
                    kept_out << attempt_record_to_json(record).dump() << '\n';
                } else {
                    ++rejected;
                    json r = attempt_record_to_json(record);
                    const bool all_correct =
                        std::all_of(record.attempts.begin(),
                                    record.attempts.end(),
                                    [](int a) { return a == 1; });
                    r["reason"] = all_correct ? "all_correct" : "all_incorrect";
                    rejected_out << r.dump() << '\n';
                }
            }
        } catch (const std::exception& e) {
            ++errors;
            rejected_out << error_line("sample_id", loose_id(j, "sample_id"),
                                       e.what())
                                .dump()
                         << '\n';
        }
    }
    if (!kept_out.good() || !rejected_out.good()) {
        std::cerr << "error: writing filter outputs failed\n";
        return 2;
    }
    std::fprintf(stderr, "kept %lld, rejected %lld, errors %lld\n", kept,
                 rejected, errors);
    return strict && errors > 0 ? 1 : 0;
}

int run_stats(const std::string& input_path, const std::string& out_path,
              bool emit_plot_data, int patch_size) {
    std::ifstream in;
    std::ofstream out;
    if (!open_input(input_path, in)) return 2;
    if (!open_output(out_path, out)) return 2;

    ScoringDefaults defaults;
    defaults.patch_height = patch_size;
    defaults.patch_width = patch_size;

    DatasetStats stats;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank_line(line)) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            ++stats.skipped;
            stats.diagnostics.push_back("line " + std::to_string(line_no) +
                                        " skipped: not valid JSON");
            continue;
        }
        try {
            stats.add(stats_record_from_json(j, defaults));
        } catch (const std::exception& e) {
            ++stats.skipped;
            stats.diagnostics.push_back("line " + std::to_string(line_no) +
                                        " skipped: " + e.what());
        }
    }

    out << dataset_stats_to_json(stats).dump(2) << '\n';
    if (!out.good()) {
        std::cerr << "error: writing '" << out_path << "' failed\n";
        return 2;
    }

    if (emit_plot_data) {
        const std::string csv_path = out_path + ".csv";
        std::ofstream csv;
        if (!open_output(csv_path, csv)) return 2;
        csv << "histogram,bin,count\n";
        for (const auto& [count, n] : stats.cue_count_histogram)
            csv << "cue_count," << count << ',' << n << '\n';
        for (std::size_t i = 0; i < stats.area_histogram.size(); ++i)
            csv << "area," << i << ',' << stats.area_histogram[i] << '\n';
        if (!csv.good()) {
            std::cerr << "error: writing '" << csv_path << "' failed\n";
            return 2;
        }
    }

    std::fprintf(stderr, "samples %lld, cues %lld, skipped %lld\n",
                 stats.samples, stats.cues, stats.skipped);
    return 0;
}

int run_grpo(const std::string& input_path, const std::string& out_path,
             double epsilon, double beta, double std_floor, int parallelism,
             bool strict) {
    std::ifstream in;
    std::ofstream out;
    if (!open_input(input_path, in)) return 2;
    if (!open_output(out_path, out)) return 2;

    GrpoConfig config;
    config.epsilon = epsilon;
    config.beta = beta;
    config.std_floor = std_floor;

    std::atomic<long long> groups{0}, errors{0};
    auto grpo_line = [&](const std::string& text) -> std::string {
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded()) {
            ++errors;
            return error_line("group_id", "", "line is not valid JSON").dump();
        }
        try {
            GroupRecord record = group_record_from_json(j);
            const std::vector<double> advantages =
                group_advantages(record.group.rewards, config.std_floor);
            const double objective = grpo_objective(record.group, config);
            ++groups;
            return group_result_to_json(record.group_id, advantages, objective)
                .dump();
        } catch (const std::exception& e) {
            ++errors;
            return error_line("group_id", loose_id(j, "group_id"), e.what())
                .dump();
        }
    };

    if (!process_jsonl(in, out, parallelism, grpo_line)) {
        std::cerr << "error: writing '" << out_path << "' failed\n";
        return 2;
    }
    std::fprintf(stderr, "processed %lld groups, %lld errors\n", groups.load(),
                 errors.load());
    return strict && errors.load() > 0 ? 1 : 0;
}

int run_serve(const std::string& bind, double tau, int patch_size,
              std::size_t max_batch) {
    ServiceConfig config;
    const std::size_t colon = bind.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == bind.size()) {
        std::cerr << "error: --bind must look like host:port\n";
        return 1;
    }
    config.bind_host = bind.substr(0, colon);
    try {
        config.bind_port = std::stoi(bind.substr(colon + 1));
    } catch (const std::exception&) {
        std::cerr << "error: --bind port is not a number\n";
        return 1;
    }
    config.defaults.tau = tau;
    config.defaults.patch_height = patch_size;
    config.defaults.patch_width = patch_size;
    config.max_batch = max_batch;

    // Block the shutdown signals before the server threads spawn so they
    // inherit the mask and only sigwait below ever sees them.
    sigset_t mask;
    sigemptyset(&mask);
    sigaddset(&mask, SIGINT);
    sigaddset(&mask, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &mask, nullptr);

    RewardService service(config);
    const int port = service.start_async();
    if (port < 0) {
        std::cerr << "error: failed to bind " << config.bind_host << ":"
                  << config.bind_port << "\n";
        return 1;
    }
    std::cerr << "patchcue " << kVersion << " listening on "
              << config.bind_host << ":" << port << "\n";

    int sig = 0;
    sigwait(&mask, &sig);
    std::cerr << "received signal " << sig
              << ", draining in-flight requests\n";
    service.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"patch-cue reward scoring and data curation toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string input_path, gt_path, out_path, rejected_path, mode, bind;
    double tau = kDefaultTau;
    double iou_threshold = 0.5;
    double epsilon = 0.1, beta = 0.0, std_floor = kDefaultStdFloor;
    int patch_size = kDefaultPatchSize;
    int parallelism = 1;
    std::size_t max_batch = 1024;
    bool strict = false, emit_plot_data = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--input", input_path, "input JSONL file")
            ->required()
            ->envname("PATCHCUE_INPUT");
        cmd->add_flag("--strict", strict,
                      "exit 1 when any record carried an embedded error")
            ->envname("PATCHCUE_STRICT");
    };

    CLI::App* score = app.add_subcommand(
        "score", "score reasoning traces against ground truth");
    add_common(score);
    score->add_option("--gt", gt_path, "ground-truth JSONL file")
        ->required()
        ->envname("PATCHCUE_GT");
    score->add_option("--out", out_path, "output JSONL file")
        ->required()
        ->envname("PATCHCUE_OUT");
    score->add_option("--tau", tau, "cue match threshold in (0, 1]")
        ->envname("PATCHCUE_TAU");
    score->add_option("--patch-size", patch_size, "square patch size")
        ->envname("PATCHCUE_PATCH_SIZE");
    score
        ->add_option("--parallelism,-j", parallelism,
                     "worker threads (output is order-stable)")
        ->envname("PATCHCUE_PARALLELISM");

    CLI::App* convert =
        app.add_subcommand("convert", "convert boxes between pixel and patch");
    add_common(convert);
    convert->add_option("--mode", mode, "pixel2patch or patch2pixel")
        ->required()
        ->check(CLI::IsMember({"pixel2patch", "patch2pixel"}))
        ->envname("PATCHCUE_MODE");
    convert->add_option("--out", out_path, "output JSONL file")
        ->required()
        ->envname("PATCHCUE_OUT");
    convert->add_option("--patch-size", patch_size, "square patch size")
        ->envname("PATCHCUE_PATCH_SIZE");
    convert
        ->add_option("--parallelism,-j", parallelism,
                     "worker threads (output is order-stable)")
        ->envname("PATCHCUE_PARALLELISM");

    CLI::App* filter =
        app.add_subcommand("filter", "difficulty and consensus filters");
    add_common(filter);
    filter->add_option("--mode", mode, "sft, rl, or consensus")
        ->required()
        ->check(CLI::IsMember({"sft", "rl", "consensus"}))
        ->envname("PATCHCUE_MODE");
    filter->add_option("--out", out_path, "kept records JSONL")
        ->required()
        ->envname("PATCHCUE_OUT");
    filter->add_option("--rejected", rejected_path, "rejected records JSONL")
        ->required()
        ->envname("PATCHCUE_REJECTED");
    filter
        ->add_option("--iou-threshold", iou_threshold,
                     "pairwise IoU agreement threshold")
        ->envname("PATCHCUE_IOU_THRESHOLD");
    filter->add_option("--patch-size", patch_size, "square patch size")
        ->envname("PATCHCUE_PATCH_SIZE");

    CLI::App* stats = app.add_subcommand("stats", "dataset cue statistics");
    add_common(stats);
    stats->add_option("--out", out_path, "output JSON file")
        ->required()
        ->envname("PATCHCUE_OUT");
    stats
        ->add_flag("--emit-plot-data", emit_plot_data,
                   "also write <out>.csv with histogram rows")
        ->envname("PATCHCUE_EMIT_PLOT_DATA");
    stats->add_option("--patch-size", patch_size, "square patch size")
        ->envname("PATCHCUE_PATCH_SIZE");

    CLI::App* grpo =
        app.add_subcommand("grpo", "group advantages and objective");
    add_common(grpo);
    grpo->add_option("--out", out_path, "output JSONL file")
        ->required()
        ->envname("PATCHCUE_OUT");
    grpo->add_option("--epsilon", epsilon, "clip range")
        ->envname("PATCHCUE_EPSILON");
    grpo->add_option("--beta", beta, "KL penalty weight")
        ->envname("PATCHCUE_BETA");
    grpo->add_option("--std-floor", std_floor, "advantage std floor")
        ->envname("PATCHCUE_STD_FLOOR");
    grpo->add_option("--parallelism,-j", parallelism,
                     "worker threads (output is order-stable)")
        ->envname("PATCHCUE_PARALLELISM");

    CLI::App* serve = app.add_subcommand("serve", "run the reward service");
    serve->add_option("--bind", bind, "host:port to listen on")
        ->envname("PATCHCUE_BIND")
        ->default_val("127.0.0.1:8787");
    serve->add_option("--tau", tau, "cue match threshold in (0, 1]")
        ->envname("PATCHCUE_TAU");
    serve->add_option("--patch-size", patch_size, "square patch size")
        ->envname("PATCHCUE_PATCH_SIZE");
    serve->add_option("--max-batch", max_batch, "batch endpoint size limit")
        ->envname("PATCHCUE_MAX_BATCH");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (!(tau > 0.0) || tau > 1.0) {
        std::cerr << "error: --tau must lie in (0, 1]\n";
        return 1;
    }
    if (patch_size < 1) {
        std::cerr << "error: --patch-size must be >= 1\n";
        return 1;
    }
    if (parallelism < 1) {
        std::cerr << "error: --parallelism must be >= 1\n";
        return 1;
    }

    if (score->parsed())
        return run_score(input_path, gt_path, out_path, tau, patch_size,
                         parallelism, strict);
    if (convert->parsed())
        return run_convert(mode, input_path, out_path, patch_size, parallelism,
                           strict);
    if (filter->parsed())
        return run_filter(mode, input_path, out_path, rejected_path,
                          iou_threshold, patch_size, strict);
    if (stats->parsed())
        return run_stats(input_path, out_path, emit_plot_data, patch_size);
    if (grpo->parsed())
        return run_grpo(input_path, out_path, epsilon, beta, std_floor,
                        parallelism, strict);
    if (serve->parsed()) return run_serve(bind, tau, patch_size, max_batch);
    return 1;
}
