#include "patchcue/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace patchcue {

std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     double std_floor) {
    if (rewards.empty())
        throw std::invalid_argument("group_advantages: empty group");
    if (!(std_floor > 0.0) || !std::isfinite(std_floor))
        throw std::invalid_argument("group_advantages: std_floor must be > 0");
    for (double r : rewards)
        if (!std::isfinite(r))
            throw std::invalid_argument("group_advantages: non-finite reward");

    // Equal rewards must normalize to exact zeros; the arithmetic below
    // could leave rounding residue scaled up by 1/std_floor.
    if (std::all_of(rewards.begin(), rewards.end(),
                    [&](double r) { return r == rewards.front(); }))
        return std::vector<double>(rewards.size(), 0.0);

    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;

    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= n;  // population variance

    const double denom = std::max(std::sqrt(var), std_floor);
    std::vector<double> advantages;
    advantages.reserve(rewards.size());
    for (double r : rewards) advantages.push_back((r - mean) / denom);
    return advantages;
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
    if (!(ratio > 0.0) || !std::isfinite(ratio))
        throw std::invalid_argument(
            "clipped_surrogate: ratio must be finite and > 0");
    if (!std::isfinite(advantage))
        throw std::invalid_argument("clipped_surrogate: non-finite advantage");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw std::invalid_argument("clipped_surrogate: epsilon must be > 0");

    const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    return std::min(ratio * advantage, clipped * advantage);
}

double kl_estimate(double logp_new, double logp_ref) noexcept {
    const double diff = logp_ref - logp_new;
    return std::exp(diff) - diff - 1.0;
}

double grpo_objective(const GrpoGroup& group, const GrpoConfig& config) {
    if (group.rewards.empty())
        throw std::invalid_argument("grpo_objective: empty group");
    if (group.rewards.size() != group.completions.size())
        throw std::invalid_argument(
            "grpo_objective: rewards and completions disagree in size");
    if (!(config.epsilon > 0.0) || !std::isfinite(config.epsilon))
        throw std::invalid_argument("grpo_objective: epsilon must be > 0");
    if (config.beta < 0.0 || !std::isfinite(config.beta))
        throw std::invalid_argument("grpo_objective: beta must be >= 0");

    for (const auto& completion : group.completions) {
        if (completion.empty())
            throw std::invalid_argument("grpo_objective: empty completion");
        for (const auto& t : completion) {
            for (double lp : {t.logp_new, t.logp_old, t.logp_ref}) {
                if (!std::isfinite(lp) || lp > 0.0)
                    throw std::invalid_argument(
                        "grpo_objective: log probabilities must be finite "
                        "and <= 0");
            }
        }
    }

    const std::vector<double> advantages =
        group_advantages(group.rewards, config.std_floor);

    double objective = 0.0;
    for (std::size_t i = 0; i < group.completions.size(); ++i) {
        const auto& completion = group.completions[i];
        double per_token = 0.0;
        for (const auto& t : completion) {
            const double ratio = std::exp(t.logp_new - t.logp_old);
            per_token += clipped_surrogate(ratio, advantages[i], config.epsilon);
            if (config.beta != 0.0)
                per_token -= config.beta * kl_estimate(t.logp_new, t.logp_ref);
        }
        objective += per_token / static_cast<double>(completion.size());
    }
    return objective / static_cast<double>(group.completions.size());
}

}  // namespace patchcue
