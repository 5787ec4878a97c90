// Apache License, Version 2.0, refer to LICENSE.txt

#include "urbanpat/alignment.hpp"

#include <algorithm>
#include <limits>

#include "urbanpat/errors.hpp"

namespace urbanpat {

std::vector<int> hungarian(std::span<const double> cost, std::size_t rows, std::size_t cols) {
  if (cost.size() != rows * cols) throw InvariantError("cost matrix has the wrong size");
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  auto a = [&](std::size_t i, std::size_t j) {
    return (i < rows && j < cols) ? cost[i * cols + j] : 0.0;
  };
  // Potentials formulation with 1-based sentinel row/column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
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
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> result(rows, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t i = p[j];
    if (i >= 1 && i <= rows && j <= cols) result[i - 1] = static_cast<int>(j - 1);
  }
  return result;
}

Alignment align_labels(std::span<const int> truth, std::span<const int> predicted,
                       std::size_t k_truth, std::size_t k_pred) {
  if (truth.size() != predicted.size()) throw InvariantError("label lists differ in length");
  std::vector<double> cost(k_pred * k_truth, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || static_cast<std::size_t>(truth[i]) >= k_truth || predicted[i] < 0 ||
        static_cast<std::size_t>(predicted[i]) >= k_pred) {
      throw InvariantError("label outside its range");
    }
    cost[static_cast<std::size_t>(predicted[i]) * k_truth + static_cast<std::size_t>(truth[i])] -=
        1.0;
  }
  Alignment out;
  out.mapping = hungarian(cost, k_pred, k_truth);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (out.mapping[static_cast<std::size_t>(predicted[i])] == truth[i]) ++out.matched;
  }
  out.accuracy = truth.empty() ? 0.0
                               : static_cast<double>(out.matched) /
                                     static_cast<double>(truth.size());
  return out;
}

}  // namespace urbanpat
