// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "urbanpat/dsi.hpp"
#include "urbanpat/poptics.hpp"
#include "urbanpat/tlda.hpp"

namespace urbanpat {

struct TravelRecord {
  std::size_t user = 0;
  std::size_t pattern = 0;
  ProjectedPoint centre;
  double mean_travel = 0.0;  // meters
  std::size_t checkins = 0;
};

struct TravelResult {
  std::vector<TravelRecord> records;
  std::size_t omitted = 0;  // users without a check-in at a venue of their pattern
};

// Per user: mean distance from the user's centre to each cultural check-in
// whose venue belongs to the user's pattern (venue pattern = argmax of its
// category's phi column). Repeat visits count once each.
TravelResult travel_distances(const Corpus& corpus, std::span<const UserActivityProfile> profiles,
                              const PatternDistributions& dists);

// Pearson coefficient; empty with fewer than 3 pairs or zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

enum class CorrelationLevel { kCell, kUser };

struct CorrelationResult {
  std::size_t pattern = 0;
  std::optional<double> r;
  std::size_t pairs = 0;
  std::string note;  // why r is undefined
};

// Cell level: users are mapped to the cell holding their centre, travel is
// averaged per cell and paired with that cell's DSR. User level: one pair per
// user with the DSR of the user's cell. Cells outside the grid or with
// undefined DSR are skipped.
CorrelationResult dsr_travel_correlation(std::span<const TravelRecord> records,
                                         const DsrGrid& grid, std::size_t pattern,
                                         CorrelationLevel level = CorrelationLevel::kCell);

void write_travel_csv(std::ostream& out, std::span<const TravelRecord> records,
                      const Corpus& corpus);
void write_correlation_csv(std::ostream& out, std::span<const CorrelationResult> results);

}  // namespace urbanpat
