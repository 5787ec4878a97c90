// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "urbanpat/data_model.hpp"
#include "urbanpat/poptics.hpp"
#include "urbanpat/tlda.hpp"

namespace urbanpat {

// Axis-aligned grid in projected meters; x runs east, y north. Cells are
// indexed row-major from the south-west corner.
struct GridSpec {
  ProjectedPoint origin;
  double cell_size = 400.0;
  std::size_t cols = 0;
  std::size_t rows = 0;

  std::size_t cells() const { return cols * rows; }
  std::size_t index(std::size_t row, std::size_t col) const { return row * cols + col; }
  ProjectedPoint centroid(std::size_t row, std::size_t col) const;
  ProjectedPoint centroid(std::size_t cell) const { return centroid(cell / cols, cell % cols); }
  // Cell holding p (half-open cells), or empty outside the grid.
  std::optional<std::size_t> cell_of(ProjectedPoint p) const;

  void validate() const;

  // Smallest grid of the given cell size whose extent covers every point with
  // at least `margin` meters to spare on each side.
  static GridSpec covering(std::span<const ProjectedPoint> points, double cell_size,
                           double margin = 0.0);
};

// One value per cell; NaN marks an undefined cell.
using Layer = std::vector<double>;

// 1 / sqrt(2 pi s^2) * exp(-d^2 / (2 s^2)).
double gaussian_kernel(double d, double s);

// D(x) = sum over profiles of gaussian_kernel(|x - mu|, r_uz), counting only
// profiles with |x - mu| <= r_uz. `weights` (optional) scales each profile.
Layer demand_layer(std::span<const UserActivityProfile> profiles, const GridSpec& grid,
                   std::span<const double> weights = {});

struct VenueSupplyProfile {
  std::size_t venue = 0;
  ProjectedPoint location;
  std::size_t pattern = 0;
  double sigma = 0.0;
  std::size_t visitors = 0;
  bool floored = false;  // sigma came from the floor (no visitors or tiny mean)
};

// S(x) = sum over venues of gaussian_kernel(|x - v|, sigma_v), untruncated.
Layer supply_layer(std::span<const VenueSupplyProfile> venues, const GridSpec& grid);

// D / S where S > epsilon, NaN elsewhere.
Layer dsr_layer(const Layer& demand, const Layer& supply, double epsilon = 1e-12);

struct SigmaResult {
  double sigma = 0.0;
  bool floored = false;
};

// Mean distance from the venue to its visitors' centres, floored at `floor`.
SigmaResult venue_sigma(ProjectedPoint venue, std::span<const ProjectedPoint> visitor_centres,
                        double floor = 100.0);

// Supply profiles for every venue with a cultural category. Visitors are the
// distinct users with at least one cultural check-in at the venue; pattern is
// the argmax of the category's phi column.
std::vector<VenueSupplyProfile> venue_profiles(const Corpus& corpus,
                                               std::span<const UserActivityProfile> profiles,
                                               const PatternDistributions& dists,
                                               double sigma_floor = 100.0);

struct DsiConfig {
  double cell_size = 400.0;
  double margin = 0.0;
  double sigma_floor = 100.0;
  double supply_epsilon = 1e-12;

  void validate() const;
};

struct DsrGrid {
  GridSpec grid;
  std::vector<Layer> demand;  // per pattern
  std::vector<Layer> supply;
  std::vector<Layer> dsr;
  std::vector<std::string> warnings;

  std::size_t patterns() const { return dsr.size(); }
};

// Layers for every pattern on a grid covering every user centre and venue.
DsrGrid build_dsr_grid(std::span<const UserActivityProfile> profiles,
                       std::span<const VenueSupplyProfile> venues, std::size_t patterns,
                       const DsiConfig& config);

// pattern,row,col,demand,supply,dsr,dsr_norm; undefined DSR cells are omitted.
void write_layers_csv(std::ostream& out, const DsrGrid& grid);
// FeatureCollection of cell polygons (lon/lat) with pattern, demand, supply, dsr.
void write_layers_geojson(std::ostream& out, const DsrGrid& grid,
                          const LocalProjection& projection);
// pattern,rank,row,col,dsr sorted by DSR descending per pattern.
void write_priority_csv(std::ostream& out, const DsrGrid& grid);
void write_venue_profiles_csv(std::ostream& out, std::span<const VenueSupplyProfile> venues,
                              const Corpus& corpus);

// Reads back the grid geometry and layers from write_layers_csv plus a
// grid header line; used by downstream stages.
void write_grid_bundle(std::ostream& out, const DsrGrid& grid);
DsrGrid read_grid_bundle(std::istream& in);

}  // namespace urbanpat
