#include "patchcue/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

namespace patchcue {
namespace {

void validate_attempts(const AttemptRecord& record) {
    if (record.attempts.empty())
        throw std::invalid_argument("difficulty filter: no attempts for '" +
                                    record.sample_id + "'");
    for (int a : record.attempts)
        if (a != 0 && a != 1)
            throw std::invalid_argument(
                "difficulty filter: attempts must be 0 or 1");
}

// Median per coordinate; even counts average the middle two.
double median(std::vector<double> values) {
    const std::size_t n = values.size();
    auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(values.begin(), mid, values.end());
    if (n % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(values.begin(), mid);
    return (lo + hi) / 2.0;
}

}  // namespace

bool sft_difficulty_filter(const AttemptRecord& record) {
    validate_attempts(record);
    return !std::all_of(record.attempts.begin(), record.attempts.end(),
                        [](int a) { return a == 1; });
}

bool rl_difficulty_filter(const AttemptRecord& record) {
    validate_attempts(record);
    const bool any_correct = std::any_of(record.attempts.begin(),
                                         record.attempts.end(),
                                         [](int a) { return a == 1; });
    const bool any_wrong = std::any_of(record.attempts.begin(),
                                       record.attempts.end(),
                                       [](int a) { return a == 0; });
    return any_correct && any_wrong;
}

ConsensusResult consensus_filter(const ConsensusInput& input,
                                 const ConsensusConfig& config) {
    if (input.candidates.empty())
        throw std::invalid_argument("consensus_filter: no candidates for '" +
                                    input.sample_id + "'");
    if (!(config.iou_threshold >= 0.0) || config.iou_threshold > 1.0)
        throw std::invalid_argument(
            "consensus_filter: iou_threshold must lie in [0, 1]");

    const bool normalized = input.candidates.front().normalized;
    for (const auto& b : input.candidates) {
        if (b.normalized != normalized)
            throw std::invalid_argument(
                "consensus_filter: mixed coordinate conventions");
        if (b.x1 > b.x2 || b.y1 > b.y2)
            throw std::invalid_argument("consensus_filter: inverted box");
        if (normalized &&
            (b.x1 < 0 || b.y1 < 0 || b.x2 > 1.0 || b.y2 > 1.0))
            throw std::invalid_argument(
                "consensus_filter: normalized coordinates outside [0, 1]");
    }

    ConsensusResult result;
    result.sample_id = input.sample_id;
    const PatchGrid grid = make_grid(input.image_height, input.image_width,
                                     config.patch_height, config.patch_width);

    if (input.candidates.size() == 1) {
        result.diagnostics.push_back("single candidate, consensus is trivial");
    } else {
        for (std::size_t i = 0; i < input.candidates.size(); ++i) {
            for (std::size_t j = i + 1; j < input.candidates.size(); ++j) {
                if (iou(input.candidates[i], input.candidates[j]) <
                    config.iou_threshold) {
                    result.retained = false;
                    result.reason = "iou_below_threshold";
                    return result;
                }
            }
        }
    }

    std::vector<double> x1, y1, x2, y2;
    for (const auto& b : input.candidates) {
        x1.push_back(b.x1);
        y1.push_back(b.y1);
        x2.push_back(b.x2);
        y2.push_back(b.y2);
    }
    PixelBBox fused;
    fused.x1 = median(std::move(x1));
    fused.y1 = median(std::move(y1));
    fused.x2 = median(std::move(x2));
    fused.y2 = median(std::move(y2));
    fused.normalized = normalized;

    if (!normalized) {
        // Annotators may overshoot the image; the fused box is pulled back
        // inside before patch conversion.
        const double max_x = grid.image_width - 1;
        const double max_y = grid.image_height - 1;
        PixelBBox clamped = fused;
        clamped.x1 = std::clamp(clamped.x1, 0.0, max_x);
        clamped.y1 = std::clamp(clamped.y1, 0.0, max_y);
        clamped.x2 = std::clamp(clamped.x2, 0.0, max_x);
        clamped.y2 = std::clamp(clamped.y2, 0.0, max_y);
        if (!(clamped == fused))
            result.diagnostics.push_back("fused box clamped to image bounds");
        fused = clamped;
    }

    result.retained = true;
    result.fused = fused;
    result.fused_patch = pixel_bbox_to_patch_bbox(fused, grid);
    return result;
}

void DatasetStats::add(const StatsRecord& record) {
    if (!record.grid) {
        ++skipped;
        diagnostics.push_back("sample '" + record.sample_id +
                              "' skipped: missing grid");
        return;
    }
    for (const auto& cue : record.cues) {
        if (!in_grid(cue, *record.grid)) {
            ++skipped;
            diagnostics.push_back("sample '" + record.sample_id +
                                  "' skipped: cue outside grid");
            return;
        }
    }
    ++samples;
    ++cue_count_histogram[static_cast<int>(record.cues.size())];
    const long long total = record.grid->cell_count();
    for (const auto& cue : record.cues) {
        ++cues;
        // Exact integer binning of cells/total into [0, 0.05, ..., 1.0];
        // a full-grid cue lands in the last bin, not a phantom 21st.
        long long bin = cue.cell_count() * 20 / total;
        if (bin > 19) bin = 19;
        ++area_histogram[static_cast<std::size_t>(bin)];
    }
}

void DatasetStats::merge(const DatasetStats& other) {
    samples += other.samples;
    cues += other.cues;
    skipped += other.skipped;
    for (const auto& [count, n] : other.cue_count_histogram)
        cue_count_histogram[count] += n;
    for (std::size_t i = 0; i < area_histogram.size(); ++i)
        area_histogram[i] += other.area_histogram[i];
    diagnostics.insert(diagnostics.end(), other.diagnostics.begin(),
                       other.diagnostics.end());
}

}  // namespace patchcue
