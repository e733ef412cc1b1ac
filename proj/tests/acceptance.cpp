// Acceptance gate: one numbered check per release criterion, each printing
// a single PASS/FAIL line. The process exits nonzero when any check fails.
// Tolerances are pinned here, next to the checks that use them.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "patchcue/annotation.hpp"
#include "patchcue/geometry.hpp"
#include "patchcue/grpo.hpp"
#include "patchcue/hungarian.hpp"
#include "patchcue/pipeline.hpp"
#include "patchcue/records.hpp"
#include "patchcue/reward.hpp"
#include "patchcue/service.hpp"
#include "patchcue/trace.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace patchcue;
using nlohmann::json;
using testsupport::brute_assign;
using testsupport::build_table;
using testsupport::enumerate_box;
using testsupport::GridTable;
using testsupport::make_trace_text;
using testsupport::random_patch_bbox;
using testsupport::Rng;
using testsupport::tag_mutations;
using testsupport::tag_occurrences;

namespace {

int g_failures = 0;

// Both paths come from the build; an environment override lets the binary
// run against an installed CLI or relocated assets.
const char* cli_path() {
    if (const char* env = std::getenv("PATCHCUE_CLI_PATH")) return env;
#ifdef PATCHCUE_CLI_PATH
    return PATCHCUE_CLI_PATH;
#else
    return nullptr;
#endif
}

const char* prompt_dir() {
    if (const char* env = std::getenv("PATCHCUE_PROMPT_DIR")) return env;
#ifdef PATCHCUE_PROMPT_DIR
    return PATCHCUE_PROMPT_DIR;
#else
    return nullptr;
#endif
}

template <typename F>
void criterion(int number, const char* name, F&& fn) {
    bool ok = false;
    std::string note;
    try {
        ok = fn();
    } catch (const std::exception& e) {
        note = std::string(" (") + e.what() + ")";
    }
    std::printf("%s criterion %2d: %s%s\n", ok ? "PASS" : "FAIL", number, name,
                note.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
}

// Tables are reused across draws; building them is the expensive part of
// the pixel-binning oracle.
GridTable& table_for(std::map<std::pair<int, int>, GridTable>& cache, int rows,
                     int cols) {
    auto it = cache.find({rows, cols});
    if (it == cache.end())
        it = cache.emplace(std::make_pair(rows, cols),
                           build_table(make_grid(rows * 28, cols * 28)))
                 .first;
    return it->second;
}

// 10,000 random points and 10,000 random boxes against the pixel-binning
// oracle, grids up to 10x10 patches of 28. Zero mismatches, under 5s.
bool check_pixel_conversions() {
    Rng rng(101);
    std::map<std::pair<int, int>, GridTable> cache;
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 10000; ++i) {
        const GridTable& t =
            table_for(cache, rng.uniform(1, 10), rng.uniform(1, 10));
        const int x = rng.uniform(0, t.grid.image_width - 1);
        const int y = rng.uniform(0, t.grid.image_height - 1);
        const PatchCoord got = pixel_to_patch({x, y}, t.grid);
        if (got != t.at(x, y)) return false;

        const int x2 = rng.uniform(x, t.grid.image_width - 1);
        const int y2 = rng.uniform(y, t.grid.image_height - 1);
        const PixelBBox box{static_cast<double>(x), static_cast<double>(y),
                            static_cast<double>(x2), static_cast<double>(y2),
                            false};
        if (pixel_bbox_to_patch_bbox(box, t.grid) !=
            enumerate_box(t, x, y, x2, y2))
            return false;
    }
    return seconds_since(start) < 5.0;
}

// Every pixel contained in a converted box must land in the box's cell set.
bool check_box_coverage() {
    Rng rng(202);
    std::map<std::pair<int, int>, GridTable> cache;
    for (int i = 0; i < 1000; ++i) {
        const GridTable& t =
            table_for(cache, rng.uniform(1, 8), rng.uniform(1, 8));
        const int x1 = rng.uniform(0, t.grid.image_width - 1);
        const int y1 = rng.uniform(0, t.grid.image_height - 1);
        const int x2 = rng.uniform(x1, t.grid.image_width - 1);
        const int y2 = rng.uniform(y1, t.grid.image_height - 1);
        const PatchBBox pb = pixel_bbox_to_patch_bbox(
            {static_cast<double>(x1), static_cast<double>(y1),
             static_cast<double>(x2), static_cast<double>(y2), false},
            t.grid);
        const PatchSet cells = expand_patch_set(pb);
        for (int y = y1; y <= y2; ++y)
            for (int x = x1; x <= x2; ++x)
                if (!cells.contains(pixel_to_patch({x, y}, t.grid)))
                    return false;
    }
    return true;
}

// 500 random cost matrices up to 6x6 against exhaustive permutation search.
// Total costs must agree exactly, under 10s.
bool check_assignment_optimality() {
    Rng rng(303);
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 500; ++i) {
        const int n = rng.uniform(1, 6);
        const int m = rng.uniform(1, 6);
        std::vector<std::vector<double>> cost(n, std::vector<double>(m));
        for (auto& row : cost)
            for (auto& v : row) v = rng.real(0.0, 1.0);
        if (assign(cost).total_cost != brute_assign(cost).min_cost)
            return false;
    }
    return seconds_since(start) < 10.0;
}

// The documented cue-reward cases plus threshold monotonicity: raising tau
// can only lower the reward.
bool check_cue_reward_semantics() {
    const PatchGrid grid = make_grid(280, 280);
    if (cue_reward({}, {}, grid).reward != 1.0) return false;
    if (cue_reward({{0, 0, 0, 0}, {1, 1, 1, 1}, {2, 2, 2, 2}},
                   {{0, 0, 0, 0}, {1, 1, 1, 1}}, grid)
            .reward != 0.0)
        return false;
    if (cue_reward({{0, 0, 0, 0}}, {{0, 0, 0, 0}, {5, 5, 6, 6}}, grid, 0.5)
            .reward != 0.5)
        return false;

    Rng rng(404);
    for (int i = 0; i < 100; ++i) {
        const int n_gt = rng.uniform(1, 4);
        std::vector<PatchBBox> gt, pred;
        for (int k = 0; k < n_gt; ++k) gt.push_back(random_patch_bbox(rng, grid));
        const int n_pred = rng.uniform(0, n_gt);
        for (int k = 0; k < n_pred; ++k)
            pred.push_back(random_patch_bbox(rng, grid));
        double previous = 2.0;
        for (double tau = 0.1; tau < 0.95; tau += 0.1) {
            const double reward = cue_reward(pred, gt, grid, tau).reward;
            if (reward > previous) return false;
            previous = reward;
        }
    }
    return true;
}

std::string corrupt_one_tag(const std::string& text, Rng& rng) {
    const auto occ = tag_occurrences(text);
    if (occ.empty()) return text;
    const auto& [pos, tag] = occ[static_cast<std::size_t>(
        rng.uniform(0, static_cast<int>(occ.size()) - 1))];
    std::string out = text;
    out.erase(pos, tag.size());
    return out;
}

// 1,000 random fixtures: the total must decompose bit-exactly and stay in
// [0, 3], malformed traces included.
bool check_total_reward_decomposition() {
    Rng rng(505);
    const PatchGrid grid = make_grid(280, 280);
    const char* const answers[] = {"87", "(A) 87", "3.50", "keylor navas",
                                   "12"};
    for (int i = 0; i < 1000; ++i) {
        std::vector<PatchBBox> gt_cues, pred_cues;
        for (int k = rng.uniform(0, 4); k > 0; --k)
            gt_cues.push_back(random_patch_bbox(rng, grid));
        for (int k = rng.uniform(0, 4); k > 0; --k)
            pred_cues.push_back(random_patch_bbox(rng, grid));
        const std::string expected = answers[rng.uniform(0, 4)];
        const std::string predicted =
            rng.chance(0.5) ? expected : answers[rng.uniform(0, 4)];
        std::string text = make_trace_text(pred_cues, predicted, &rng);
        if (rng.chance(0.2)) text = corrupt_one_tag(text, rng);
        if (rng.chance(0.05)) text = "unstructured guess: " + predicted;

        const RewardBreakdown b =
            total_reward(text, expected, gt_cues, grid);
        if (b.r_total != b.r_acc + b.r_format + b.r_cue) return false;
        if (b.r_total < 0.0 || b.r_total > 3.0) return false;
    }
    return true;
}

// 50 hand-built well-formed traces score format 1; every single-tag
// deletion, duplication and reorder scores 0. 100% discrimination.
bool check_format_discrimination() {
    Rng rng(606);
    const PatchGrid grid = make_grid(280, 280);
    const char* const answers[] = {"87", "(B) 14", "0.5", "six"};
    for (int i = 0; i < 50; ++i) {
        std::vector<PatchBBox> cues;
        for (int k = rng.uniform(0, 3); k > 0; --k)
            cues.push_back(random_patch_bbox(rng, grid));
        const std::string text =
            make_trace_text(cues, answers[rng.uniform(0, 3)], &rng);
        if (format_reward(text) != 1) return false;
        const auto mutants = tag_mutations(text);
        if (mutants.empty()) return false;
        for (const auto& mutant : mutants)
            if (format_reward(mutant) != 0) return false;
    }
    return true;
}

// Advantage normalization, KL positivity, and the clipped-surrogate bound.
bool check_grpo_invariants() {
    constexpr double kSumTol = 1e-9;
    constexpr double kKlTol = 1e-12;
    constexpr double kSurrogateTol = 1e-12;
    Rng rng(707);

    for (int i = 0; i < 1000; ++i) {
        std::vector<double> rewards(static_cast<std::size_t>(rng.uniform(2, 8)));
        for (auto& r : rewards) r = rng.real(-2.0, 4.0);
        const std::vector<double> a = group_advantages(rewards);

        double sum = 0.0;
        for (double v : a) sum += v;
        if (std::fabs(sum) >= kSumTol) return false;

        const double shift = rng.real(-5.0, 5.0);
        const double scale = rng.real(0.1, 4.0);
        std::vector<double> shifted = rewards, scaled = rewards;
        for (auto& r : shifted) r += shift;
        for (auto& r : scaled) r *= scale;
        const std::vector<double> a_shift = group_advantages(shifted);
        const std::vector<double> a_scale = group_advantages(scaled);
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (std::fabs(a[k] - a_shift[k]) >= kSumTol) return false;
            if (std::fabs(a[k] - a_scale[k]) >= kSumTol) return false;
        }
    }

    for (int i = 0; i < 10000; ++i) {
        const double lp_new = rng.real(-8.0, 0.0);
        const double lp_ref = rng.real(-8.0, 0.0);
        const double kl = kl_estimate(lp_new, lp_ref);
        if (kl < 0.0) return false;
        if (std::fabs(lp_new - lp_ref) > 1e-5 && kl <= kKlTol) return false;
        if (kl_estimate(lp_new, lp_new) > kKlTol) return false;
    }

    for (int i = 0; i < 10000; ++i) {
        const double ratio = rng.real(0.01, 3.0);
        const double advantage = rng.real(-2.0, 2.0);
        const double eps = rng.real(0.01, 0.5);
        if (clipped_surrogate(ratio, advantage, eps) >
            ratio * advantage + kSurrogateTol)
            return false;
    }
    return true;
}

// Consensus: identical candidates always pass, and raising the threshold
// can only flip retained -> rejected, never the reverse.
bool check_consensus_monotonicity() {
    Rng rng(808);
    ConsensusInput input;
    input.image_height = 280;
    input.image_width = 280;

    const auto random_box = [&rng]() {
        PixelBBox b;
        b.x1 = rng.uniform(0, 279);
        b.y1 = rng.uniform(0, 279);
        b.x2 = rng.uniform(static_cast<int>(b.x1), 279);
        b.y2 = rng.uniform(static_cast<int>(b.y1), 279);
        return b;
    };

    for (int i = 0; i < 500; ++i) {
        input.sample_id = "c" + std::to_string(i);
        input.candidates.assign(static_cast<std::size_t>(rng.uniform(1, 5)),
                                random_box());
        ConsensusConfig config;
        config.iou_threshold = rng.real(0.05, 1.0);
        if (!consensus_filter(input, config).retained) return false;
    }

    for (int i = 0; i < 500; ++i) {
        input.sample_id = "m" + std::to_string(i);
        input.candidates.clear();
        for (int k = rng.uniform(2, 5); k > 0; --k)
            input.candidates.push_back(random_box());
        bool previous = true;
        for (double threshold = 0.1; threshold < 0.95; threshold += 0.1) {
            ConsensusConfig config;
            config.iou_threshold = threshold;
            const bool retained = consensus_filter(input, config).retained;
            if (retained && !previous) return false;
            previous = retained;
        }
    }
    return true;
}

// The same 200-record fixture scored by the CLI and by POST /v1/score/batch
// must serialize byte-identically, in input order.
bool check_cli_service_parity() {
    const char* cli = cli_path();
    if (!cli) return false;

    Rng rng(909);
    const PatchGrid grid = make_grid(280, 280);
    const char* const answers[] = {"87", "(C) 4", "15", "red kettle"};
    json batch = json::array();
    std::string traces, gt;
    for (int i = 0; i < 200; ++i) {
        char id[8];
        std::snprintf(id, sizeof id, "r%03d", i);
        std::vector<PatchBBox> gt_cues, pred_cues;
        for (int k = rng.uniform(0, 3); k > 0; --k)
            gt_cues.push_back(random_patch_bbox(rng, grid));
        for (int k = rng.uniform(0, 3); k > 0; --k)
            pred_cues.push_back(random_patch_bbox(rng, grid));
        const std::string expected = answers[rng.uniform(0, 3)];
        const std::string predicted =
            rng.chance(0.6) ? expected : answers[rng.uniform(0, 3)];
        std::string text = make_trace_text(pred_cues, predicted, &rng);
        if (rng.chance(0.25)) text = corrupt_one_tag(text, rng);

        json cues = json::array();
        for (const auto& c : gt_cues)
            cues.push_back(json::array({c.r1, c.c1, c.r2, c.c2}));
        const json grid_json = {{"height", 280}, {"width", 280}};
        traces += json{{"id", id}, {"prediction", text}}.dump() + "\n";
        gt += json{{"id", id},
                   {"answer", expected},
                   {"cues", cues},
                   {"grid", grid_json}}
                  .dump() +
              "\n";
        batch.push_back(json{{"id", id},
                             {"prediction", text},
                             {"ground_truth",
                              {{"answer", expected}, {"cues", cues}}},
                             {"grid", grid_json}});
    }

    testsupport::TempDir dir;
    testsupport::write_file(dir.file("traces.jsonl"), traces);
    testsupport::write_file(dir.file("gt.jsonl"), gt);
    const auto run = testsupport::run_command(
        std::string("\"") + cli + "\" score --input " + dir.file("traces.jsonl") +
        " --gt " + dir.file("gt.jsonl") + " --out " + dir.file("out.jsonl"));
    if (run.exit_code != 0) return false;

    ServiceConfig config;
    config.bind_port = 0;
    RewardService service(config);
    const int port = service.start_async();
    if (port <= 0) return false;
    httplib::Client client("127.0.0.1", port);
    auto res = client.Post("/v1/score/batch", batch.dump(), "application/json");
    service.stop();
    if (!res || res->status != 200) return false;
    const json scored = json::parse(res->body);
    if (scored.size() != 200) return false;

    std::istringstream lines(testsupport::read_file(dir.file("out.jsonl")));
    std::string line;
    for (int i = 0; i < 200; ++i) {
        if (!std::getline(lines, line)) return false;
        if (line != scored[static_cast<std::size_t>(i)].dump()) return false;
    }
    return true;
}

// Rendered prompts carry the pinned fragments, and the template bytes match
// their frozen checksums (both the embedded copies and the asset files).
bool check_prompt_templates() {
    constexpr std::uint64_t kExtractionSum = 5326505217022429233ull;
    constexpr std::uint64_t kGroundingSum = 8891109023309710348ull;
    constexpr std::uint64_t kReasoningSum = 13258831420874488338ull;

    const std::string extraction =
        build_extraction_prompt("How many flowers are there?", "87")
            .rendered_text;
    if (extraction.find("at most 5 cues") == std::string::npos) return false;

    const std::string grounding =
        build_grounding_prompt({"red flower"}).rendered_text;
    if (grounding.find("<bbox>[0.235, 0.345, 0.521, 0.876]</bbox>") ==
        std::string::npos)
        return false;

    const std::string reasoning =
        build_reasoning_prompt("How many flowers are there?", "87",
                               {{"red flower", {0.1, 0.2, 0.5, 0.9, true}}})
            .rendered_text;
    if (reasoning.find("The final answer is (A) 87") == std::string::npos)
        return false;

    if (fnv1a64(prompt_template(TemplateId::extraction)) != kExtractionSum)
        return false;
    if (fnv1a64(prompt_template(TemplateId::grounding)) != kGroundingSum)
        return false;
    if (fnv1a64(prompt_template(TemplateId::reasoning)) != kReasoningSum)
        return false;

    if (const char* dir = prompt_dir()) {
        const std::string base = dir;
        if (fnv1a64(testsupport::read_file(base + "/cue_extraction.txt")) !=
            kExtractionSum)
            return false;
        if (fnv1a64(testsupport::read_file(base + "/cue_grounding.txt")) !=
            kGroundingSum)
            return false;
        if (fnv1a64(testsupport::read_file(
                base + "/reasoning_construction.txt")) != kReasoningSum)
            return false;
    }
    return true;
}

// A synthetic corpus shaped like the curated dataset, pushed through the
// stats subcommand end to end: at least 80% of samples carry 2..5 cues and
// at least 80% of cue area mass sits below 0.40.
bool check_corpus_statistics() {
    const char* cli = cli_path();
    if (!cli) return false;

    Rng rng(1111);
    std::string corpus;
    long long cue_serial = 0;
    for (int i = 0; i < 600; ++i) {
        // Deterministic proportions: 85% of samples get 2..5 cues, one cue
        // in eight is a large box (0.49 area fraction on the 10x10 grid).
        const int count = i % 20 < 17 ? rng.uniform(2, 5)
                                      : (i % 2 == 0 ? 1 : rng.uniform(6, 7));
        json cues = json::array();
        for (int k = 0; k < count; ++k) {
            PatchBBox b;
            if (cue_serial++ % 8 == 0) {
                b.r1 = rng.uniform(0, 3);
                b.c1 = rng.uniform(0, 3);
                b.r2 = b.r1 + 6;
                b.c2 = b.c1 + 6;
            } else {
                b.r1 = rng.uniform(0, 8);
                b.c1 = rng.uniform(0, 8);
                b.r2 = b.r1 + rng.uniform(0, 1);
                b.c2 = b.c1 + rng.uniform(0, 1);
            }
            cues.push_back(json::array({b.r1, b.c1, b.r2, b.c2}));
        }
        corpus += json{{"sample_id", "s" + std::to_string(i)},
                       {"image", {{"height", 280}, {"width", 280}}},
                       {"cues", cues}}
                      .dump() +
                  "\n";
    }

    testsupport::TempDir dir;
    testsupport::write_file(dir.file("corpus.jsonl"), corpus);
    const auto run = testsupport::run_command(
        std::string("\"") + cli + "\" stats --input " + dir.file("corpus.jsonl") +
        " --out " + dir.file("stats.json"));
    if (run.exit_code != 0) return false;

    const json stats =
        json::parse(testsupport::read_file(dir.file("stats.json")));
    if (stats.at("samples") != 600 || stats.at("skipped") != 0) return false;

    long long in_band = 0;
    for (const auto& [count, n] :
         stats.at("cue_count_histogram").items()) {
        const int c = std::stoi(count);
        if (c >= 2 && c <= 5) in_band += n.get<long long>();
    }
    if (in_band < 480) return false;  // 80% of 600

    const long long total_cues = stats.at("cues").get<long long>();
    long long below = 0;
    for (int bin = 0; bin < 8; ++bin)  // bins 0..7 cover fractions < 0.40
        below += stats.at("area_histogram")[static_cast<std::size_t>(bin)]
                     .get<long long>();
    return total_cues > 0 && below * 5 >= total_cues * 4;
}

}  // namespace

int main() {
    criterion(1, "pixel-to-patch conversions match the binning oracle",
              check_pixel_conversions);
    criterion(2, "converted boxes cover every contained pixel",
              check_box_coverage);
    criterion(3, "assignment cost equals the exhaustive minimum",
              check_assignment_optimality);
    criterion(4, "cue reward cases and threshold monotonicity",
              check_cue_reward_semantics);
    criterion(5, "total reward decomposes bit-exactly within [0, 3]",
              check_total_reward_decomposition);
    criterion(6, "format reward separates traces from tag mutants",
              check_format_discrimination);
    criterion(7, "advantage, KL and surrogate invariants",
              check_grpo_invariants);
    criterion(8, "consensus threshold monotonicity and identity acceptance",
              check_consensus_monotonicity);
    criterion(9, "CLI and service score byte-identically",
              check_cli_service_parity);
    criterion(10, "prompt templates carry pinned fragments and checksums",
              check_prompt_templates);
    criterion(11, "curated corpus statistics hold end to end",
              check_corpus_statistics);

    if (g_failures > 0) {
        std::printf("%d of 11 criteria failed\n", g_failures);
        return 1;
    }
    std::printf("all 11 criteria passed\n");
    return 0;
}
