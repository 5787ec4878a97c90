// Apache License, Version 2.0, refer to LICENSE.txt

#include "urbanpat/dsi.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "urbanpat/errors.hpp"
#include "urbanpat/text_io.hpp"

namespace urbanpat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

ProjectedPoint GridSpec::centroid(std::size_t row, std::size_t col) const {
  return {origin.x + (static_cast<double>(col) + 0.5) * cell_size,
          origin.y + (static_cast<double>(row) + 0.5) * cell_size};
}

std::optional<std::size_t> GridSpec::cell_of(ProjectedPoint p) const {
  const double fx = std::floor((p.x - origin.x) / cell_size);
  const double fy = std::floor((p.y - origin.y) / cell_size);
  if (!(fx >= 0.0) || !(fy >= 0.0)) return std::nullopt;
  if (fx >= static_cast<double>(cols) || fy >= static_cast<double>(rows)) return std::nullopt;
  return index(static_cast<std::size_t>(fy), static_cast<std::size_t>(fx));
}

void GridSpec::validate() const {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw ConfigError("grid cell size must be positive");
  }
  if (cols == 0 || rows == 0) throw ConfigError("grid must have at least one cell");
}

GridSpec GridSpec::covering(std::span<const ProjectedPoint> points, double cell_size,
                            double margin) {
  if (!(cell_size > 0.0)) throw ConfigError("grid cell size must be positive");
  if (points.empty()) throw DataError("cannot build a grid over no points");
  double min_x = points[0].x, max_x = points[0].x;
  double min_y = points[0].y, max_y = points[0].y;
  for (const auto& p : points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  GridSpec g;
  g.cell_size = cell_size;
  g.origin = {min_x - margin, min_y - margin};
  // +1 keeps the maximum inside the half-open last cell.
  g.cols = static_cast<std::size_t>(std::floor((max_x + margin - g.origin.x) / cell_size)) + 1;
  g.rows = static_cast<std::size_t>(std::floor((max_y + margin - g.origin.y) / cell_size)) + 1;
  return g;
}

double gaussian_kernel(double d, double s) {
  return std::exp(-(d * d) / (2.0 * s * s)) / std::sqrt(2.0 * std::numbers::pi * s * s);
}

Layer demand_layer(std::span<const UserActivityProfile> profiles, const GridSpec& grid,
                   std::span<const double> weights) {
  grid.validate();
  if (!weights.empty() && weights.size() != profiles.size()) {
    throw InvariantError("demand weights must match the profile count");
  }
  Layer layer(grid.cells(), 0.0);
  for (std::size_t c = 0; c < grid.cells(); ++c) {
    const ProjectedPoint x = grid.centroid(c);
    double sum = 0.0;
    for (std::size_t u = 0; u < profiles.size(); ++u) {
      const double r = profiles[u].radius_pattern;
      const double d = distance(x, profiles[u].centre);
      if (d > r) continue;
      const double w = weights.empty() ? 1.0 : weights[u];
      sum += w * gaussian_kernel(d, r);
    }
    layer[c] = sum;
  }
  return layer;
}

Layer supply_layer(std::span<const VenueSupplyProfile> venues, const GridSpec& grid) {
  grid.validate();
  Layer layer(grid.cells(), 0.0);
  for (std::size_t c = 0; c < grid.cells(); ++c) {
    const ProjectedPoint x = grid.centroid(c);
    double sum = 0.0;
    for (const auto& v : venues) sum += gaussian_kernel(distance(x, v.location), v.sigma);
    layer[c] = sum;
  }
  return layer;
}

Layer dsr_layer(const Layer& demand, const Layer& supply, double epsilon) {
  if (demand.size() != supply.size()) throw InvariantError("demand and supply grids differ");
  Layer out(demand.size(), kNaN);
  for (std::size_t c = 0; c < demand.size(); ++c) {
    if (supply[c] > epsilon) out[c] = demand[c] / supply[c];
  }
  return out;
}

SigmaResult venue_sigma(ProjectedPoint venue, std::span<const ProjectedPoint> visitor_centres,
                        double floor) {
  if (visitor_centres.empty()) return {floor, true};
  double sum = 0.0;
  for (const auto& c : visitor_centres) sum += distance(venue, c);
  const double mean = sum / static_cast<double>(visitor_centres.size());
  if (mean < floor) return {floor, true};
  return {mean, false};
}

std::vector<VenueSupplyProfile> venue_profiles(const Corpus& corpus,
                                               std::span<const UserActivityProfile> profiles,
                                               const PatternDistributions& dists,
                                               double sigma_floor) {
  if (profiles.size() != corpus.user_count()) {
    throw DataError("profiles do not match the corpus; rerun the profiles stage");
  }
  const std::size_t nv = corpus.venues.size();
  // Distinct visitors per venue in user order.
  std::vector<std::vector<std::uint32_t>> visitors(nv);
  for (const auto& e : corpus.events) {
    auto& list = visitors[e.venue];
    if (list.empty() || list.back() != e.user) list.push_back(e.user);
  }
  const LocalProjection projection(corpus.reference);
  std::vector<VenueSupplyProfile> out;
  for (std::size_t v = 0; v < nv; ++v) {
    const auto category = corpus.venue_category[v];
    if (category == Corpus::kNoCategory) continue;
    std::vector<ProjectedPoint> centres;
    centres.reserve(visitors[v].size());
    for (auto u : visitors[v]) centres.push_back(profiles[u].centre);
    VenueSupplyProfile p;
    p.venue = v;
    p.location = projection.project(corpus.venue_locations[v]);
    p.pattern = category_pattern(dists, category);
    const auto s = venue_sigma(p.location, centres, sigma_floor);
    p.sigma = s.sigma;
    p.floored = s.floored;
    p.visitors = centres.size();
    out.push_back(p);
  }
  return out;
}

void DsiConfig::validate() const {
  if (!(cell_size > 0.0)) throw ConfigError("cell_size must be positive");
  if (!(margin >= 0.0)) throw ConfigError("grid margin must be non-negative");
  if (!(sigma_floor > 0.0)) throw ConfigError("sigma_floor must be positive");
  if (!(supply_epsilon >= 0.0)) throw ConfigError("supply_epsilon must be non-negative");
}

DsrGrid build_dsr_grid(std::span<const UserActivityProfile> profiles,
                       std::span<const VenueSupplyProfile> venues, std::size_t patterns,
                       const DsiConfig& config) {
  config.validate();
  std::vector<ProjectedPoint> extent;
  for (const auto& p : profiles) extent.push_back(p.centre);
  for (const auto& v : venues) extent.push_back(v.location);
  DsrGrid out;
  out.grid = GridSpec::covering(extent, config.cell_size, config.margin);
  for (std::size_t z = 0; z < patterns; ++z) {
    std::vector<UserActivityProfile> users;
    for (const auto& p : profiles) {
      if (p.pattern == z) users.push_back(p);
    }
    std::vector<VenueSupplyProfile> supply;
    for (const auto& v : venues) {
      if (v.pattern == z) supply.push_back(v);
    }
    out.demand.push_back(demand_layer(users, out.grid));
    out.supply.push_back(supply_layer(supply, out.grid));
    out.dsr.push_back(dsr_layer(out.demand.back(), out.supply.back(), config.supply_epsilon));
    const bool any = std::any_of(out.dsr.back().begin(), out.dsr.back().end(),
                                 [](double d) { return !std::isnan(d); });
    if (!any) {
      out.warnings.push_back("pattern " + std::to_string(z) +
                             ": DSR undefined in every cell (no supply)");
    }
  }
  return out;
}

namespace {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

Range defined_range(const Layer& layer) {
  Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (double v : layer) {
    if (std::isnan(v)) continue;
    r.lo = std::min(r.lo, v);
    r.hi = std::max(r.hi, v);
  }
  return r;
}

double normalized(double v, Range r) {
  if (!(r.hi > r.lo)) return 0.0;
  return (v - r.lo) / (r.hi - r.lo);
}

}  // namespace

void write_layers_csv(std::ostream& out, const DsrGrid& g) {
  out << "pattern,row,col,demand,supply,dsr,dsr_norm\n";
  for (std::size_t z = 0; z < g.patterns(); ++z) {
    const Range range = defined_range(g.dsr[z]);
    for (std::size_t c = 0; c < g.grid.cells(); ++c) {
      const double dsr = g.dsr[z][c];
      if (std::isnan(dsr)) continue;
      out << z << ',' << c / g.grid.cols << ',' << c % g.grid.cols << ','
          << format_double(g.demand[z][c]) << ',' << format_double(g.supply[z][c]) << ','
          << format_double(dsr) << ',' << format_double(normalized(dsr, range)) << '\n';
    }
  }
}

void write_layers_geojson(std::ostream& out, const DsrGrid& g,
                          const LocalProjection& projection) {
  out << "{\"type\":\"FeatureCollection\",\"features\":[";
  bool first = true;
  const double s = g.grid.cell_size;
  for (std::size_t z = 0; z < g.patterns(); ++z) {
    for (std::size_t c = 0; c < g.grid.cells(); ++c) {
      const double dsr = g.dsr[z][c];
      if (std::isnan(dsr)) continue;
      const std::size_t row = c / g.grid.cols, col = c % g.grid.cols;
      const double x0 = g.grid.origin.x + static_cast<double>(col) * s;
      const double y0 = g.grid.origin.y + static_cast<double>(row) * s;
      const ProjectedPoint corners[5] = {{x0, y0}, {x0 + s, y0}, {x0 + s, y0 + s},
                                         {x0, y0 + s}, {x0, y0}};
      out << (first ? "" : ",") << "\n{\"type\":\"Feature\",\"geometry\":{\"type\":"
          << "\"Polygon\",\"coordinates\":[[";
      first = false;
      for (int i = 0; i < 5; ++i) {
        const GeoPoint p = projection.unproject(corners[i]);
        out << (i ? "," : "") << '[' << format_double(p.lon) << ',' << format_double(p.lat)
            << ']';
      }
      out << "]]},\"properties\":{\"pattern\":" << z << ",\"row\":" << row
          << ",\"col\":" << col << ",\"demand\":" << format_double(g.demand[z][c])
          << ",\"supply\":" << format_double(g.supply[z][c])
          << ",\"dsr\":" << format_double(dsr) << "}}";
    }
  }
  out << "\n]}\n";
}

void write_priority_csv(std::ostream& out, const DsrGrid& g) {
  out << "pattern,rank,row,col,dsr\n";
  for (std::size_t z = 0; z < g.patterns(); ++z) {
    std::vector<std::size_t> cells;
    for (std::size_t c = 0; c < g.grid.cells(); ++c) {
      if (!std::isnan(g.dsr[z][c])) cells.push_back(c);
    }
    std::stable_sort(cells.begin(), cells.end(), [&](std::size_t a, std::size_t b) {
      return g.dsr[z][a] > g.dsr[z][b];
    });
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto c = cells[i];
      out << z << ',' << i + 1 << ',' << c / g.grid.cols << ',' << c % g.grid.cols << ','
          << format_double(g.dsr[z][c]) << '\n';
    }
  }
}

void write_venue_profiles_csv(std::ostream& out, std::span<const VenueSupplyProfile> venues,
                              const Corpus& corpus) {
  out << "venue,pattern,x,y,sigma,visitors,floored\n";
  for (const auto& v : venues) {
    out << csv_escape(corpus.venues.at(static_cast<std::uint32_t>(v.venue))) << ','
        << v.pattern << ',' << format_double(v.location.x) << ','
        << format_double(v.location.y) << ',' << format_double(v.sigma) << ',' << v.visitors
        << ',' << (v.floored ? 1 : 0) << '\n';
  }
}

void write_grid_bundle(std::ostream& out, const DsrGrid& g) {
  out << "urbanpat-dsr-grid 1\n";
  out << "grid " << format_double(g.grid.origin.x) << ' ' << format_double(g.grid.origin.y)
      << ' ' << format_double(g.grid.cell_size) << ' ' << g.grid.cols << ' ' << g.grid.rows
      << ' ' << g.patterns() << '\n';
  for (std::size_t z = 0; z < g.patterns(); ++z) {
    for (std::size_t c = 0; c < g.grid.cells(); ++c) {
      out << format_double(g.demand[z][c]) << ' ' << format_double(g.supply[z][c]) << ' '
          << format_double(g.dsr[z][c]) << '\n';
    }
  }
}

DsrGrid read_grid_bundle(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "urbanpat-dsr-grid 1") {
    throw DataError("not a DSR grid bundle (bad header)");
  }
  auto number = [](const std::string& token) {
    const auto v = parse_double(token);
    if (!v) throw DataError("DSR grid bundle: bad number '" + token + "'");
    return *v;
  };
  std::string tag, ox, oy, cs;
  std::size_t patterns = 0;
  DsrGrid g;
  if (!std::getline(in, line)) throw DataError("DSR grid bundle: missing grid line");
  std::istringstream head(line);
  if (!(head >> tag >> ox >> oy >> cs >> g.grid.cols >> g.grid.rows >> patterns) ||
      tag != "grid") {
    throw DataError("DSR grid bundle: malformed grid line");
  }
  g.grid.origin = {number(ox), number(oy)};
  g.grid.cell_size = number(cs);
  g.grid.validate();
  for (std::size_t z = 0; z < patterns; ++z) {
    Layer d(g.grid.cells()), s(g.grid.cells()), r(g.grid.cells());
    for (std::size_t c = 0; c < g.grid.cells(); ++c) {
      std::string a, b, e;
      if (!std::getline(in, line)) throw DataError("DSR grid bundle: truncated");
      std::istringstream row(line);
      if (!(row >> a >> b >> e)) throw DataError("DSR grid bundle: malformed cell line");
      d[c] = number(a);
      s[c] = number(b);
      r[c] = number(e);
    }
    g.demand.push_back(std::move(d));
    g.supply.push_back(std::move(s));
    g.dsr.push_back(std::move(r));
  }
  return g;
}

}  // namespace urbanpat
