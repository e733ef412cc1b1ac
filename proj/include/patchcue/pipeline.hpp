#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "patchcue/geometry.hpp"

// Dataset curation stages: difficulty filters over repeated solve attempts,
// multi-annotator consensus with box fusion, and corpus statistics.

namespace patchcue {

/// One sample's repeated solve attempts; entries are 1 (correct) or 0.
struct AttemptRecord {
    std::string sample_id;
    std::vector<int> attempts;
};

/// Keep for supervised fine-tuning unless every attempt succeeded (the
/// sample teaches nothing). Throws std::invalid_argument when there are no
/// attempts or an attempt is not 0/1.
bool sft_difficulty_filter(const AttemptRecord& record);

/// Keep for reinforcement learning only when attempts are mixed: all-correct
/// gives no gradient signal, all-incorrect gives no reward signal. Same
/// validation as sft_difficulty_filter.
bool rl_difficulty_filter(const AttemptRecord& record);

struct ConsensusConfig {
    double iou_threshold = 0.5;
    int patch_height = kDefaultPatchSize;
    int patch_width = kDefaultPatchSize;
};

/// Candidate boxes for one cue from independent annotators, all in the same
/// coordinate convention.
struct ConsensusInput {
    std::string sample_id;
    int image_width = 0;
    int image_height = 0;
    std::vector<PixelBBox> candidates;
};

struct ConsensusResult {
    std::string sample_id;
    bool retained = false;
    std::string reason;  // e.g. "iou_below_threshold" when rejected
    PixelBBox fused;     // meaningful only when retained
    PatchBBox fused_patch;
    std::vector<std::string> diagnostics;
};

/// Rejects the cue when any candidate pair overlaps below the threshold;
/// otherwise fuses by coordinate-wise median and converts to patch space.
/// A single candidate passes trivially, with a diagnostic. Throws
/// std::invalid_argument on empty input, mixed conventions, or malformed
/// boxes.
ConsensusResult consensus_filter(const ConsensusInput& input,
                                 const ConsensusConfig& config = {});

/// One sample's cues for statistics. A missing grid marks samples whose
/// image dimensions were unavailable.
struct StatsRecord {
    std::string sample_id;
    std::optional<PatchGrid> grid;
    std::vector<PatchBBox> cues;
};

/// Aggregate corpus statistics: cue-count histogram and a 20-bin histogram
/// of cue area fractions (bin width 0.05, last bin closed at 1.0).
struct DatasetStats {
    long long samples = 0;
    long long cues = 0;
    long long skipped = 0;
    std::map<int, long long> cue_count_histogram;
    std::array<long long, 20> area_histogram{};
    std::vector<std::string> diagnostics;

    /// Folds one record in. Records without a grid or with a cue outside
    /// their grid are skipped whole, with a diagnostic.
    void add(const StatsRecord& record);

    /// Pointwise sum; diagnostics concatenate.
    void merge(const DatasetStats& other);
};

}  // namespace patchcue
