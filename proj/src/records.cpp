#include "patchcue/records.hpp"

#include <cmath>

namespace patchcue {
namespace {

using nlohmann::json;

const json& require(const json& j, const char* key) {
    if (!j.is_object())
        throw ParseError(std::string("expected an object around '") + key +
                         "'");
    auto it = j.find(key);
    if (it == j.end())
        throw ParseError(std::string("missing field '") + key + "'");
    return *it;
}

std::string require_string(const json& j, const char* key) {
    const json& v = require(j, key);
    if (!v.is_string())
        throw ParseError(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

int require_int(const json& j, const char* key) {
    const json& v = require(j, key);
    if (!v.is_number_integer())
        throw ParseError(std::string("field '") + key +
                         "' must be an integer");
    return v.get<int>();
}

double require_number(const json& j, const char* key) {
    const json& v = require(j, key);
    if (!v.is_number())
        throw ParseError(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

PatchBBox patch_bbox_from_json(const json& v, const char* what) {
    if (!v.is_array() || v.size() != 4)
        throw ParseError(std::string(what) +
                         " must be an array of four integers");
    for (const auto& e : v)
        if (!e.is_number_integer())
            throw ParseError(std::string(what) +
                             " must be an array of four integers");
    PatchBBox b;
    b.r1 = v[0].get<int>();
    b.c1 = v[1].get<int>();
    b.r2 = v[2].get<int>();
    b.c2 = v[3].get<int>();
    return b;
}

json patch_bbox_to_json(const PatchBBox& b) {
    return json::array({b.r1, b.c1, b.r2, b.c2});
}

void pixel_coords_from_json(const json& v, const char* what, double out[4]) {
    if (!v.is_array() || v.size() != 4)
        throw ParseError(std::string(what) +
                         " must be an array of four numbers");
    for (std::size_t i = 0; i < 4; ++i) {
        if (!v[i].is_number())
            throw ParseError(std::string(what) +
                             " must be an array of four numbers");
        out[i] = v[i].get<double>();
    }
}

GridSpec grid_spec_from_json(const json& v) {
    GridSpec spec;
    spec.height = require_int(v, "height");
    spec.width = require_int(v, "width");
    if (v.contains("patch_h")) spec.patch_h = require_int(v, "patch_h");
    if (v.contains("patch_w")) spec.patch_w = require_int(v, "patch_w");
    return spec;
}

// "image" {height,width} plus optional "patch" {height,width} resolved
// against defaults; shared by convert and stats records.
PatchGrid grid_from_record(const json& j, const ScoringDefaults& defaults) {
    const json& image = require(j, "image");
    const int h = require_int(image, "height");
    const int w = require_int(image, "width");
    int ph = defaults.patch_height;
    int pw = defaults.patch_width;
    if (j.contains("patch")) {
        const json& patch = j.at("patch");
        ph = require_int(patch, "height");
        pw = require_int(patch, "width");
    }
    return make_grid(h, w, ph, pw);
}

json echo_geometry(const json& line, const PatchGrid& grid) {
    json out;
    out["image"] = {{"height", require_int(require(line, "image"), "height")},
                    {"width", require_int(require(line, "image"), "width")}};
    out["patch"] = {{"height", grid.patch_height}, {"width", grid.patch_width}};
    return out;
}

}  // namespace

double round6(double v) { return std::round(v * 1e6) / 1e6; }

PatchGrid resolve_grid(const std::optional<GridSpec>& spec,
                       const ScoringDefaults& defaults) {
    if (!spec)
        return make_grid(defaults.image_height, defaults.image_width,
                         defaults.patch_height, defaults.patch_width);
    return make_grid(spec->height, spec->width,
                     spec->patch_h.value_or(defaults.patch_height),
                     spec->patch_w.value_or(defaults.patch_width));
}

ScoreRequest score_request_from_json(const json& j) {
    ScoreRequest r;
    r.id = require_string(j, "id");
    r.prediction = require_string(j, "prediction");
    const json& gt = require(j, "ground_truth");
    r.ground_truth.answer = require_string(gt, "answer");
    const json& cues = require(gt, "cues");
    if (!cues.is_array()) throw ParseError("field 'cues' must be an array");
    for (const auto& c : cues)
        r.ground_truth.cues.push_back(patch_bbox_from_json(c, "cue"));
    if (j.contains("grid") && !j.at("grid").is_null())
        r.grid = grid_spec_from_json(j.at("grid"));
    return r;
}

ScoreResponse score_one(const ScoreRequest& request,
                        const ScoringDefaults& defaults) {
    ScoreResponse response;
    response.id = request.id;
    const PatchGrid grid = resolve_grid(request.grid, defaults);
    response.breakdown =
        total_reward(request.prediction, request.ground_truth.answer,
                     request.ground_truth.cues, grid, defaults.tau);
    return response;
}

json score_response_to_json(const ScoreResponse& response) {
    const RewardBreakdown& b = response.breakdown;
    json matches = json::array();
    for (const auto& d : b.details)
        matches.push_back({{"pred_index", d.pred_index},
                           {"gt_index", d.gt_index},
                           {"f1", round6(d.f1)},
                           {"successful", d.successful}});
    json j;
    j["id"] = response.id;
    j["r_acc"] = b.r_acc;
    j["r_format"] = b.r_format;
    j["r_cue"] = round6(b.r_cue);
    j["r_total"] = round6(b.r_total);
    j["matches"] = std::move(matches);
    j["diagnostics"] = b.diagnostics;
    return j;
}

TraceRecord trace_record_from_json(const json& j) {
    TraceRecord r;
    r.id = require_string(j, "id");
    r.prediction = require_string(j, "prediction");
    return r;
}

GtRecord gt_record_from_json(const json& j) {
    GtRecord r;
    r.id = require_string(j, "id");
    r.ground_truth.answer = require_string(j, "answer");
    const json& cues = require(j, "cues");
    if (!cues.is_array()) throw ParseError("field 'cues' must be an array");
    for (const auto& c : cues)
        r.ground_truth.cues.push_back(patch_bbox_from_json(c, "cue"));
    if (j.contains("grid") && !j.at("grid").is_null())
        r.grid = grid_spec_from_json(j.at("grid"));
    return r;
}

json convert_pixel_to_patch(const json& line, const ScoringDefaults& defaults) {
    const std::string id = require_string(line, "id");
    const PatchGrid grid = grid_from_record(line, defaults);
    double v[4];
    pixel_coords_from_json(require(line, "bbox"), "bbox", v);
    PixelBBox b;
    b.x1 = v[0];
    b.y1 = v[1];
    b.x2 = v[2];
    b.y2 = v[3];
    b.normalized = line.value("normalized", false);

    json out = echo_geometry(line, grid);
    out["id"] = id;
    out["patch_bbox"] = patch_bbox_to_json(pixel_bbox_to_patch_bbox(b, grid));
    return out;
}

json convert_patch_to_pixel(const json& line, const ScoringDefaults& defaults) {
    const std::string id = require_string(line, "id");
    const PatchGrid grid = grid_from_record(line, defaults);
    const PatchBBox pb =
        patch_bbox_from_json(require(line, "patch_bbox"), "patch_bbox");
    const PixelBBox b = patch_bbox_to_pixel_bbox(pb, grid);

    json out = echo_geometry(line, grid);
    out["id"] = id;
    out["bbox"] = json::array({b.x1, b.y1, b.x2, b.y2});
    out["normalized"] = false;
    return out;
}

AttemptRecord attempt_record_from_json(const json& j) {
    AttemptRecord r;
    r.sample_id = require_string(j, "sample_id");
    const json& attempts = require(j, "attempts");
    if (!attempts.is_array())
        throw ParseError("field 'attempts' must be an array of booleans");
    for (const auto& a : attempts) {
        if (!a.is_boolean())
            throw ParseError("field 'attempts' must be an array of booleans");
        r.attempts.push_back(a.get<bool>() ? 1 : 0);
    }
    return r;
}

json attempt_record_to_json(const AttemptRecord& record) {
    json attempts = json::array();
    for (int a : record.attempts) attempts.push_back(a == 1);
    return json{{"sample_id", record.sample_id}, {"attempts", attempts}};
}

ConsensusSample consensus_sample_from_json(const json& j) {
    ConsensusSample s;
    s.sample_id = require_string(j, "sample_id");
    const json& image = require(j, "image");
    s.image_height = require_int(image, "height");
    s.image_width = require_int(image, "width");
    const json& cues = require(j, "cues");
    if (!cues.is_array()) throw ParseError("field 'cues' must be an array");
    for (const auto& cue : cues) {
        CueCandidates cc;
        cc.label = require_string(cue, "label");
        const json& candidates = require(cue, "candidates");
        if (!candidates.is_array())
            throw ParseError("field 'candidates' must be an array");
        for (const auto& cand : candidates) {
            double v[4];
            pixel_coords_from_json(require(cand, "bbox"), "bbox", v);
            PixelBBox b;
            b.x1 = v[0];
            b.y1 = v[1];
            b.x2 = v[2];
            b.y2 = v[3];
            b.normalized = cand.value("normalized", false);
            cc.candidates.push_back(b);
        }
        s.cues.push_back(std::move(cc));
    }
    return s;
}

ConsensusSampleResult consensus_sample_filter(const ConsensusSample& sample,
                                              const ConsensusConfig& config) {
    ConsensusSampleResult result;
    result.sample_id = sample.sample_id;
    for (const auto& cue : sample.cues) {
        ConsensusInput input;
        input.sample_id = sample.sample_id;
        input.image_height = sample.image_height;
        input.image_width = sample.image_width;
        input.candidates = cue.candidates;
        ConsensusResult verdict = consensus_filter(input, config);
        for (const auto& d : verdict.diagnostics)
            result.diagnostics.push_back(cue.label + ": " + d);
        if (verdict.retained)
            result.kept_cues.emplace_back(cue.label, verdict.fused_patch);
        else
            result.rejected_reasons.push_back(cue.label + ": " +
                                              verdict.reason);
    }
    result.retained = result.rejected_reasons.empty();
    return result;
}

json consensus_result_to_json(const ConsensusSampleResult& result) {
    json cues = json::array();
    for (const auto& [label, box] : result.kept_cues)
        cues.push_back({{"label", label}, {"patch_bbox", patch_bbox_to_json(box)}});
    json j;
    j["sample_id"] = result.sample_id;
    j["cues"] = std::move(cues);
    j["rejected"] = result.rejected_reasons;
    return j;
}

StatsRecord stats_record_from_json(const json& j,
                                   const ScoringDefaults& defaults) {
    StatsRecord r;
    r.sample_id = require_string(j, "sample_id");
    if (j.contains("image") && !j.at("image").is_null())
        r.grid = grid_from_record(j, defaults);
    const json& cues = require(j, "cues");
    if (!cues.is_array()) throw ParseError("field 'cues' must be an array");
    for (const auto& c : cues)
        r.cues.push_back(patch_bbox_from_json(c, "cue"));
    return r;
}

json dataset_stats_to_json(const DatasetStats& stats) {
    json counts = json::object();
    for (const auto& [count, n] : stats.cue_count_histogram)
        counts[std::to_string(count)] = n;
    json j;
    j["samples"] = stats.samples;
    j["cues"] = stats.cues;
    j["skipped"] = stats.skipped;
    j["cue_count_histogram"] = std::move(counts);
    j["area_histogram"] = stats.area_histogram;
    j["diagnostics"] = stats.diagnostics;
    return j;
}

GroupRecord group_record_from_json(const json& j) {
    GroupRecord r;
    r.group_id = require_string(j, "group_id");
    const json& rewards = require(j, "rewards");
    if (!rewards.is_array())
        throw ParseError("field 'rewards' must be an array");
    for (const auto& v : rewards) {
        if (!v.is_number())
            throw ParseError("field 'rewards' must hold numbers");
        r.group.rewards.push_back(v.get<double>());
    }
    const json& completions = require(j, "completions");
    if (!completions.is_array())
        throw ParseError("field 'completions' must be an array");
    for (const auto& completion : completions) {
        const json& tokens = require(completion, "tokens");
        if (!tokens.is_array())
            throw ParseError("field 'tokens' must be an array");
        std::vector<TokenLogProbs> parsed;
        for (const auto& t : tokens) {
            TokenLogProbs lp;
            lp.logp_new = require_number(t, "logp_new");
            lp.logp_old = require_number(t, "logp_old");
            lp.logp_ref = require_number(t, "logp_ref");
            parsed.push_back(lp);
        }
        r.group.completions.push_back(std::move(parsed));
    }
    return r;
}

json group_result_to_json(const std::string& group_id,
                          const std::vector<double>& advantages,
                          double objective) {
    json adv = json::array();
    for (double a : advantages) adv.push_back(round6(a));
    json j;
    j["group_id"] = group_id;
    j["advantages"] = std::move(adv);
    j["objective"] = round6(objective);
    return j;
}

}  // namespace patchcue
