#pragma once

#include <vector>

// Group-relative policy optimization primitives: per-group reward
// normalization, the clipped importance-sampling surrogate, and the
// non-negative KL estimator, combined into the scalar training objective.

namespace patchcue {

inline constexpr double kDefaultStdFloor = 1e-8;

/// Standardizes rewards within one group: (r - mean) / max(std, std_floor)
/// with population std. A group of identical rewards yields exact zeros.
/// Throws std::invalid_argument on an empty group, non-finite rewards, or a
/// non-positive floor.
std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     double std_floor = kDefaultStdFloor);

/// min(ratio * A, clip(ratio, 1-eps, 1+eps) * A). Throws
/// std::invalid_argument when ratio is not strictly positive and finite,
/// the advantage is non-finite, or eps is non-positive.
double clipped_surrogate(double ratio, double advantage, double epsilon);

/// Unbiased non-negative estimator r - log r - 1 with
/// r = exp(logp_ref - logp_new). Total for finite inputs.
double kl_estimate(double logp_new, double logp_ref) noexcept;

/// Per-token log probabilities under the current policy, the policy that
/// sampled the completion, and the frozen reference.
struct TokenLogProbs {
    double logp_new = 0.0;
    double logp_old = 0.0;
    double logp_ref = 0.0;
};

/// One prompt's sampled group: reward i belongs to completion i.
struct GrpoGroup {
    std::vector<double> rewards;
    std::vector<std::vector<TokenLogProbs>> completions;
};

struct GrpoConfig {
    double epsilon = 0.1;
    double beta = 0.0;
    double std_floor = kDefaultStdFloor;
};

/// (1/G) sum_i (1/|o_i|) sum_t [surrogate_t - beta * kl_t], advantages from
/// group_advantages. Throws std::invalid_argument when the group is empty,
/// sizes disagree, a completion has no tokens, a log probability is
/// positive or non-finite, or the config is out of range.
double grpo_objective(const GrpoGroup& group, const GrpoConfig& config = {});

}  // namespace patchcue
