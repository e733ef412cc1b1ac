#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "patchcue/geometry.hpp"
#include "patchcue/hungarian.hpp"

// Reward components for a predicted reasoning trace: answer accuracy,
// format validity, and patch-level cue alignment. The three are computed
// independently and summed; a malformed trace still gets its answer and
// cues scored from whatever could be extracted.

namespace patchcue {

inline constexpr double kDefaultTau = 0.5;

/// Cell-set overlap between a predicted and a reference patch set.
struct MatchScore {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool both_empty = false;  // f1 stays 0; callers decide what empty means
};

MatchScore patch_f1(const PatchSet& pred, const PatchSet& gt);

/// cost[i][j] = 1 - F1(pred[i], gt[j]) where each box is interpreted as its
/// cell set. Computed in closed form from the rectangle overlap, so huge
/// boxes cost O(1) instead of O(cells).
std::vector<std::vector<double>> cost_matrix(const std::vector<PatchBBox>& pred,
                                             const std::vector<PatchBBox>& gt);

/// One matched (prediction, reference) pair and whether its F1 reached tau.
struct MatchDetail {
    int pred_index = -1;
    int gt_index = -1;
    double f1 = 0.0;
    bool successful = false;
};

struct CueRewardResult {
    double reward = 0.0;
    Assignment assignment;
    int successful_matches = 0;
    std::vector<MatchDetail> details;
};

/// Cue reward:
///   - no references and no predictions: 1.0
///   - more predictions than references: 0.0
///   - no predictions but some references: 0.0
///   - otherwise: (#matches with F1 >= tau) / #references, pairs chosen by
///     minimum-cost assignment over cost_matrix.
/// Throws std::invalid_argument when tau is outside (0, 1] or a reference
/// box does not fit the grid. Predicted boxes are the model's output and
/// are never rejected here.
CueRewardResult cue_reward(const std::vector<PatchBBox>& pred,
                           const std::vector<PatchBBox>& gt,
                           const PatchGrid& grid, double tau = kDefaultTau);

/// Exact-match accuracy after canonicalization: trim, strip trailing
/// punctuation, lowercase (ASCII), drop a leading multiple-choice marker
/// "(X)" when both sides carry the same one. Numeric answers compare with
/// relative tolerance 1e-6.
int accuracy_reward(std::string_view predicted, std::string_view expected);

struct RewardBreakdown {
    int r_acc = 0;
    int r_format = 0;
    double r_cue = 0.0;
    double r_total = 0.0;
    int matches = 0;  // assigned pairs, successful or not
    int successful_matches = 0;
    std::vector<MatchDetail> details;
    std::vector<std::string> diagnostics;
};

/// Parses the trace and composes the three rewards. Predicted cues that
/// fall outside the grid are dropped with a diagnostic rather than
/// propagating the reference-side validation error.
RewardBreakdown total_reward(std::string_view trace_text,
                             std::string_view expected_answer,
                             const std::vector<PatchBBox>& gt_cues,
                             const PatchGrid& grid, double tau = kDefaultTau);

}  // namespace patchcue
