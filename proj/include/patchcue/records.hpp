#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "patchcue/geometry.hpp"
#include "patchcue/grpo.hpp"
#include "patchcue/pipeline.hpp"
#include "patchcue/reward.hpp"

// JSON codecs shared by the CLI and the HTTP service. Both sides serialize
// through the functions here, so a record scored offline and the same
// record scored over HTTP produce byte-identical reward fields.

namespace patchcue {

/// Malformed or missing fields in an input record. Distinct from
/// std::invalid_argument, which marks well-shaped input that violates a
/// domain invariant (the service maps them to 400 and 422 respectively).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fixed six-decimal rounding applied to every floating-point field we
/// emit, so no client ever sees representation noise.
double round6(double v);

/// Fallbacks when a request or record does not pin its own geometry. The
/// default image square is 36x36 cells at the default patch size.
struct ScoringDefaults {
    double tau = kDefaultTau;
    int patch_height = kDefaultPatchSize;
    int patch_width = kDefaultPatchSize;
    int image_height = 36 * kDefaultPatchSize;
    int image_width = 36 * kDefaultPatchSize;
};

/// Raw grid fields as they appear on the wire; height/width are image
/// pixels before rounding, patch sizes optional.
struct GridSpec {
    int height = 0;
    int width = 0;
    std::optional<int> patch_h;
    std::optional<int> patch_w;
};

/// make_grid over the spec, or over the defaults when absent. Propagates
/// std::invalid_argument for non-positive dimensions.
PatchGrid resolve_grid(const std::optional<GridSpec>& spec,
                       const ScoringDefaults& defaults);

struct GroundTruth {
    std::string answer;
    std::vector<PatchBBox> cues;
};

struct ScoreRequest {
    std::string id;
    std::string prediction;
    GroundTruth ground_truth;
    std::optional<GridSpec> grid;
};

struct ScoreResponse {
    std::string id;
    RewardBreakdown breakdown;
};

/// Shape-validates and extracts a request; throws ParseError. Domain
/// validation (grid resolution, cue bounds) happens later in score_one.
ScoreRequest score_request_from_json(const nlohmann::json& j);

/// Resolves the grid and scores. Throws std::invalid_argument for invalid
/// grids or reference cues.
ScoreResponse score_one(const ScoreRequest& request,
                        const ScoringDefaults& defaults);

nlohmann::json score_response_to_json(const ScoreResponse& response);

/// One line of traces.jsonl: {"id", "prediction"}.
struct TraceRecord {
    std::string id;
    std::string prediction;
};
TraceRecord trace_record_from_json(const nlohmann::json& j);

/// One line of gt.jsonl: {"id", "answer", "cues", "grid"?}.
struct GtRecord {
    std::string id;
    GroundTruth ground_truth;
    std::optional<GridSpec> grid;
};
GtRecord gt_record_from_json(const nlohmann::json& j);

/// convert subcommand lines. pixel2patch input carries "bbox" plus
/// "image"; patch2pixel carries "patch_bbox" plus "image". Both echo the
/// geometry fields so conversions compose into round trips.
nlohmann::json convert_pixel_to_patch(const nlohmann::json& line,
                                      const ScoringDefaults& defaults);
nlohmann::json convert_patch_to_pixel(const nlohmann::json& line,
                                      const ScoringDefaults& defaults);

/// {"sample_id", "attempts": [bool...]}.
AttemptRecord attempt_record_from_json(const nlohmann::json& j);
nlohmann::json attempt_record_to_json(const AttemptRecord& record);

/// Consensus input: one sample, several cues, several candidate boxes per
/// cue from independent sources.
struct CueCandidates {
    std::string label;
    std::vector<PixelBBox> candidates;
};
struct ConsensusSample {
    std::string sample_id;
    int image_height = 0;
    int image_width = 0;
    std::vector<CueCandidates> cues;
};
ConsensusSample consensus_sample_from_json(const nlohmann::json& j);

/// Per-sample verdict: a sample survives only when every cue reached
/// consensus; any failing cue puts the whole sample in the rejected file.
struct ConsensusSampleResult {
    std::string sample_id;
    bool retained = false;
    std::vector<std::pair<std::string, PatchBBox>> kept_cues;
    std::vector<std::string> rejected_reasons;
    std::vector<std::string> diagnostics;
};
ConsensusSampleResult consensus_sample_filter(const ConsensusSample& sample,
                                              const ConsensusConfig& config);
nlohmann::json consensus_result_to_json(const ConsensusSampleResult& result);

/// {"sample_id", "image"?, "patch"?, "cues": [[r1,c1,r2,c2]...]}; a record
/// without "image" has no grid and will be counted as skipped.
StatsRecord stats_record_from_json(const nlohmann::json& j,
                                   const ScoringDefaults& defaults);
nlohmann::json dataset_stats_to_json(const DatasetStats& stats);

/// {"group_id", "rewards", "completions":[{"tokens":[{"logp_new",
/// "logp_old", "logp_ref"}]}]}.
struct GroupRecord {
    std::string group_id;
    GrpoGroup group;
};
GroupRecord group_record_from_json(const nlohmann::json& j);
nlohmann::json group_result_to_json(const std::string& group_id,
                                    const std::vector<double>& advantages,
                                    double objective);

}  // namespace patchcue
