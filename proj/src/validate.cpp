// Apache License, Version 2.0, refer to LICENSE.txt

#include "urbanpat/validate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "urbanpat/errors.hpp"
#include "urbanpat/text_io.hpp"

namespace urbanpat {

TravelResult travel_distances(const Corpus& corpus, std::span<const UserActivityProfile> profiles,
                              const PatternDistributions& dists) {
  if (profiles.size() != corpus.user_count()) {
    throw DataError("profiles do not match the corpus; rerun the profiles stage");
  }
  const LocalProjection projection(corpus.reference);
  std::vector<std::size_t> category_z(corpus.category_count());
  for (std::size_t v = 0; v < category_z.size(); ++v) category_z[v] = category_pattern(dists, v);

  TravelResult result;
  for (std::size_t u = 0; u < corpus.user_count(); ++u) {
    const auto& profile = profiles[u];
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& e : corpus.user_events(u)) {
      if (category_z[e.category] != profile.pattern) continue;
      const auto loc = projection.project(corpus.venue_locations[e.venue]);
      sum += distance(profile.centre, loc);
      ++n;
    }
    if (n == 0) {
      ++result.omitted;
      continue;
    }
    result.records.push_back(
        {u, profile.pattern, profile.centre, sum / static_cast<double>(n), n});
  }
  return result;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvariantError("pearson inputs differ in length");
  const std::size_t n = x.size();
  if (n < 3) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationResult dsr_travel_correlation(std::span<const TravelRecord> records,
                                         const DsrGrid& grid, std::size_t pattern,
                                         CorrelationLevel level) {
  if (pattern >= grid.patterns()) throw InvariantError("pattern outside the DSR grid");
  const Layer& dsr = grid.dsr[pattern];
  CorrelationResult out;
  out.pattern = pattern;
  std::vector<double> xs, ys;
  if (level == CorrelationLevel::kUser) {
    for (const auto& r : records) {
      if (r.pattern != pattern) continue;
      const auto cell = grid.grid.cell_of(r.centre);
      if (!cell || std::isnan(dsr[*cell])) continue;
      xs.push_back(dsr[*cell]);
      ys.push_back(r.mean_travel);
    }
  } else {
    std::map<std::size_t, std::pair<double, std::size_t>> cells;
    for (const auto& r : records) {
      if (r.pattern != pattern) continue;
      const auto cell = grid.grid.cell_of(r.centre);
      if (!cell || std::isnan(dsr[*cell])) continue;
      auto& acc = cells[*cell];
      acc.first += r.mean_travel;
      ++acc.second;
    }
    for (const auto& [cell, acc] : cells) {
      xs.push_back(dsr[cell]);
      ys.push_back(acc.first / static_cast<double>(acc.second));
    }
  }
  out.pairs = xs.size();
  out.r = pearson(xs, ys);
  if (!out.r) out.note = out.pairs < 3 ? "fewer than 3 pairs" : "zero variance";
  return out;
}

void write_travel_csv(std::ostream& out, std::span<const TravelRecord> records,
                      const Corpus& corpus) {
  out << "user,pattern,mean_travel,checkins\n";
  for (const auto& r : records) {
    out << csv_escape(corpus.users.at(static_cast<std::uint32_t>(r.user))) << ',' << r.pattern
        << ',' << format_double(r.mean_travel) << ',' << r.checkins << '\n';
  }
}

void write_correlation_csv(std::ostream& out, std::span<const CorrelationResult> results) {
  out << "pattern,r,pairs,note\n";
  for (const auto& c : results) {
    out << c.pattern << ',' << (c.r ? format_double(*c.r) : std::string()) << ',' << c.pairs
        << ',' << csv_escape(c.note) << '\n';
  }
}

}  // namespace urbanpat
