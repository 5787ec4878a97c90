// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace urbanpat {

// Minimum-cost assignment of rows to columns for a rows x cols cost matrix
// (row-major). Returns, for each row, its column or -1 when rows > cols.
std::vector<int> hungarian(std::span<const double> cost, std::size_t rows, std::size_t cols);

struct Alignment {
  std::vector<int> mapping;  // predicted label -> truth label, -1 if unmatched
  std::size_t matched = 0;   // items whose mapped label equals the truth
  double accuracy = 0.0;
};

// Relabels predicted clusters to maximize agreement with the truth labels.
// Labels must lie in [0, k_truth) and [0, k_pred).
Alignment align_labels(std::span<const int> truth, std::span<const int> predicted,
                       std::size_t k_truth, std::size_t k_pred);

}  // namespace urbanpat
