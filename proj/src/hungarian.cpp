#include <limits>

#include "uwdl/clustering.hpp"

namespace uwdl {

// Shortest augmenting path with row/column potentials, O(n^2 m).
std::vector<int> solve_assignment(const Matrix& cost) {
  const int n = int(cost.rows()), m = int(cost.cols());
  if (n == 0) return {};
  if (n > m) throw Error("assignment: more rows than columns");
  if (!cost.allFinite()) throw Error("assignment: non-finite cost");
  const double inf = std::numeric_limits<double>::infinity();

  // 1-based; column 0 is a virtual start column.
  std::vector<double> u(std::size_t(n) + 1, 0.0), v(std::size_t(m) + 1, 0.0);
  std::vector<int> p(std::size_t(m) + 1, 0), way(std::size_t(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(std::size_t(m) + 1, inf);
    std::vector<char> used(std::size_t(m) + 1, 0);
    do {
      used[std::size_t(j0)] = 1;
      const int i0 = p[std::size_t(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[std::size_t(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[std::size_t(i0)] - v[std::size_t(j)];
        if (cur < minv[std::size_t(j)]) minv[std::size_t(j)] = cur, way[std::size_t(j)] = j0;
        if (minv[std::size_t(j)] < delta) delta = minv[std::size_t(j)], j1 = j;
      }
      for (int j = 0; j <= m; ++j) {
        if (used[std::size_t(j)]) {
          u[std::size_t(p[std::size_t(j)])] += delta;
          v[std::size_t(j)] -= delta;
        } else {
          minv[std::size_t(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[std::size_t(j0)] != 0);
    do {
      const int j1 = way[std::size_t(j0)];
      p[std::size_t(j0)] = p[std::size_t(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(std::size_t(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[std::size_t(j)] != 0) row_to_col[std::size_t(p[std::size_t(j)] - 1)] = j - 1;
  return row_to_col;
}

}  // namespace uwdl
