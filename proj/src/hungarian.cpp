#include "patchcue/hungarian.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace patchcue {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieTol = 1e-9;

using Matrix = std::vector<std::vector<double>>;

// Kuhn-Munkres with potentials, O(rows^2 * cols), requires rows <= cols.
// Returns the optimal total; match[i] is the column taken by row i.
double solve_rows(const Matrix& a, std::vector<int>* match) {
    const int n = static_cast<int>(a.size());
    const int m = n == 0 ? 0 : static_cast<int>(a[0].size());
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, kInf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    if (match) match->assign(n, -1);
    double total = 0.0;
    for (int j = 1; j <= m; ++j) {
        if (p[j] == 0) continue;
        if (match) (*match)[p[j] - 1] = j - 1;
        total += a[p[j] - 1][j - 1];
    }
    return total;
}

Matrix transpose(const Matrix& a) {
    const std::size_t n = a.size();
    const std::size_t m = n == 0 ? 0 : a[0].size();
    Matrix t(m, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) t[j][i] = a[i][j];
    return t;
}

// Optimal total for the submatrix induced by the kept rows and columns.
double sub_cost(const Matrix& a, const std::vector<int>& rows,
                const std::vector<int>& cols) {
    if (rows.empty() || cols.empty()) return 0.0;
    Matrix sub(rows.size(), std::vector<double>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            sub[i][j] = a[rows[i]][cols[j]];
    if (rows.size() <= cols.size()) return solve_rows(sub, nullptr);
    return solve_rows(transpose(sub), nullptr);
}

}  // namespace

Assignment assign(const Matrix& cost) {
    const int n = static_cast<int>(cost.size());
    const int m = n == 0 ? 0 : static_cast<int>(cost[0].size());
    for (const auto& row : cost) {
        if (static_cast<int>(row.size()) != m)
            throw std::invalid_argument("assign: ragged cost matrix");
        for (double c : row)
            if (!std::isfinite(c))
                throw std::invalid_argument("assign: non-finite cost");
    }

    Assignment result;
    if (n == 0 || m == 0) return result;

    const double base =
        n <= m ? solve_rows(cost, nullptr) : solve_rows(transpose(cost), nullptr);

    // Lock in pairs row by row, column by column: a candidate pair stays
    // only if the already-fixed cost plus the optimum of the untouched
    // submatrix still meets the global optimum. This pins the unique
    // lexicographically smallest optimal matching.
    std::vector<int> free_rows, free_cols;
    for (int i = 0; i < n; ++i) free_rows.push_back(i);
    for (int j = 0; j < m; ++j) free_cols.push_back(j);
    double fixed = 0.0;

    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(result.pairs.size()) == std::min(n, m)) break;
        std::vector<int> rest_rows(free_rows.begin() + 1, free_rows.end());
        bool matched = false;
        for (std::size_t jj = 0; jj < free_cols.size(); ++jj) {
            const int j = free_cols[jj];
            std::vector<int> rest_cols;
            rest_cols.reserve(free_cols.size() - 1);
            for (std::size_t k = 0; k < free_cols.size(); ++k)
                if (k != jj) rest_cols.push_back(free_cols[k]);
            const double candidate =
                fixed + cost[i][j] + sub_cost(cost, rest_rows, rest_cols);
            if (candidate <= base + kTieTol) {
                result.pairs.emplace_back(i, j);
                fixed += cost[i][j];
                free_cols.erase(free_cols.begin() + jj);
                matched = true;
                break;
            }
        }
        free_rows.erase(free_rows.begin());
        if (!matched && n <= m)
            throw std::logic_error("assign: refinement failed");
    }

    result.total_cost = fixed;
    return result;
}

}  // namespace patchcue
