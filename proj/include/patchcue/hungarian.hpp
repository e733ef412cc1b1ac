#pragma once

#include <utility>
#include <vector>

namespace patchcue {

/// Minimum-cost matching over a rectangular cost matrix. The smaller side
/// is matched completely; pairs are (row, col) sorted by row.
struct Assignment {
    std::vector<std::pair<int, int>> pairs;
    double total_cost = 0.0;
};

/// Solves the assignment problem exactly. Ties between minimum-cost
/// matchings are broken deterministically: the pair list, read in row order
/// with each element compared as (row, col), is lexicographically smallest
/// among all optimal matchings. Throws std::invalid_argument for ragged
/// matrices or non-finite costs. An empty matrix yields an empty assignment.
Assignment assign(const std::vector<std::vector<double>>& cost);

}  // namespace patchcue
