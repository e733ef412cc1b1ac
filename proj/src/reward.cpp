#include "patchcue/reward.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "patchcue/trace.hpp"

namespace patchcue {
namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

// F1 between two patch rectangles without expanding them: the overlap is
// itself a rectangle, so the counts are closed-form.
double rect_f1(const PatchBBox& a, const PatchBBox& b) {
    const long long orows =
        std::max(0, std::min(a.r2, b.r2) - std::max(a.r1, b.r1) + 1);
    const long long ocols =
        std::max(0, std::min(a.c2, b.c2) - std::max(a.c1, b.c1) + 1);
    const long long tp = orows * ocols;
    return safe_div(2.0 * tp, static_cast<double>(a.cell_count() + b.cell_count()));
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
}

bool is_trailing_punct(char c) {
    return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?';
}

std::string canonicalize(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && (is_space(s[e - 1]) || is_trailing_punct(s[e - 1]))) --e;
    std::string out;
    out.reserve(e - b);
    for (std::size_t i = b; i < e; ++i)
        out.push_back(static_cast<char>(
            std::tolower(static_cast<unsigned char>(s[i]))));
    return out;
}

struct McSplit {
    bool has = false;
    char letter = 0;
    std::string rest;
};

// "(a) 87" -> letter 'a', rest "87". Input is already canonical.
McSplit split_mc(const std::string& s) {
    McSplit m;
    if (s.size() >= 3 && s[0] == '(' &&
        std::isalpha(static_cast<unsigned char>(s[1])) && s[2] == ')') {
        std::size_t i = 3;
        while (i < s.size() && is_space(s[i])) ++i;
        m.has = true;
        m.letter = s[1];
        m.rest = s.substr(i);
    }
    return m;
}

bool parse_number(const std::string& s, double* out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, *out);
    return ec == std::errc() && ptr == last;
}

bool nearly_equal(double a, double b) {
    if (a == b) return true;
    return std::abs(a - b) <= 1e-6 * std::max(std::abs(a), std::abs(b));
}

}  // namespace

MatchScore patch_f1(const PatchSet& pred, const PatchSet& gt) {
    MatchScore s;
    if (pred.empty() && gt.empty()) {
        s.both_empty = true;
        return s;
    }
    std::vector<PatchCoord> common;
    std::set_intersection(pred.cells().begin(), pred.cells().end(),
                          gt.cells().begin(), gt.cells().end(),
                          std::back_inserter(common));
    s.tp = static_cast<long long>(common.size());
    s.fp = static_cast<long long>(pred.size()) - s.tp;
    s.fn = static_cast<long long>(gt.size()) - s.tp;
    s.precision = safe_div(static_cast<double>(s.tp),
                           static_cast<double>(s.tp + s.fp));
    s.recall =
        safe_div(static_cast<double>(s.tp), static_cast<double>(s.tp + s.fn));
    s.f1 = safe_div(2.0 * static_cast<double>(s.tp),
                    static_cast<double>(2 * s.tp + s.fp + s.fn));
    return s;
}

std::vector<std::vector<double>> cost_matrix(const std::vector<PatchBBox>& pred,
                                             const std::vector<PatchBBox>& gt) {
    std::vector<std::vector<double>> cost(pred.size(),
                                          std::vector<double>(gt.size()));
    for (std::size_t i = 0; i < pred.size(); ++i)
        for (std::size_t j = 0; j < gt.size(); ++j)
            cost[i][j] = 1.0 - rect_f1(pred[i], gt[j]);
    return cost;
}

CueRewardResult cue_reward(const std::vector<PatchBBox>& pred,
                           const std::vector<PatchBBox>& gt,
                           const PatchGrid& grid, double tau) {
    if (!(tau > 0.0) || tau > 1.0)
        throw std::invalid_argument("cue_reward: tau must lie in (0, 1]");
    for (const auto& box : gt)
        if (!in_grid(box, grid))
            throw std::invalid_argument("cue_reward: reference cue outside grid");

    CueRewardResult result;
    if (pred.empty() && gt.empty()) {
        result.reward = 1.0;
        return result;
    }
    if (pred.empty() || gt.empty()) {
        result.reward = 0.0;
        return result;
    }

    result.assignment = assign(cost_matrix(pred, gt));
    for (const auto& [i, j] : result.assignment.pairs) {
        MatchDetail d;
        d.pred_index = i;
        d.gt_index = j;
        d.f1 = rect_f1(pred[i], gt[j]);
        d.successful = d.f1 >= tau;
        if (d.successful) ++result.successful_matches;
        result.details.push_back(d);
    }

    // Over-prediction is penalized to zero outright; the assignment is
    // still reported for inspection.
    if (pred.size() > gt.size()) {
        result.reward = 0.0;
    } else {
        result.reward = static_cast<double>(result.successful_matches) /
                        static_cast<double>(gt.size());
    }
    return result;
}

int accuracy_reward(std::string_view predicted, std::string_view expected) {
    std::string p = canonicalize(predicted);
    std::string e = canonicalize(expected);

    McSplit mp = split_mc(p);
    McSplit me = split_mc(e);
    if (mp.has && me.has) {
        if (mp.letter != me.letter) return 0;
        p = std::move(mp.rest);
        e = std::move(me.rest);
    }

    double a = 0.0, b = 0.0;
    if (parse_number(p, &a) && parse_number(e, &b))
        return nearly_equal(a, b) ? 1 : 0;
    return p == e ? 1 : 0;
}

RewardBreakdown total_reward(std::string_view trace_text,
                             std::string_view expected_answer,
                             const std::vector<PatchBBox>& gt_cues,
                             const PatchGrid& grid, double tau) {
    RewardBreakdown out;
    ReasoningTrace trace = parse_trace(trace_text);
    out.diagnostics = trace.diagnostics;
    out.r_format = trace.well_formed ? 1 : 0;
    out.r_acc = accuracy_reward(trace.answer_text, expected_answer);

    std::vector<PatchBBox> pred;
    pred.reserve(trace.cues.size());
    for (std::size_t i = 0; i < trace.cues.size(); ++i) {
        const PatchBBox& box = trace.cues[i].patch_bbox;
        if (in_grid(box, grid)) {
            pred.push_back(box);
        } else {
            out.diagnostics.push_back("predicted cue outside grid at index " +
                                      std::to_string(i));
        }
    }

    CueRewardResult cue = cue_reward(pred, gt_cues, grid, tau);
    out.r_cue = cue.reward;
    out.matches = static_cast<int>(cue.assignment.pairs.size());
    out.successful_matches = cue.successful_matches;
    out.details = std::move(cue.details);
    out.r_total = out.r_acc + out.r_format + out.r_cue;
    return out;
}

}  // namespace patchcue
