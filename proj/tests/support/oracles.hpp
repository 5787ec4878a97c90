// Apache License, Version 2.0, refer to LICENSE.txt

// Brute-force reference computations. Each one recomputes a library result by
// the most direct route available so the two can be compared.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "urbanpat/data_model.hpp"
#include "urbanpat/dsi.hpp"
#include "urbanpat/poptics.hpp"
#include "urbanpat/tlda.hpp"

namespace oracle {

using urbanpat::ProjectedPoint;

inline double dist(ProjectedPoint a, ProjectedPoint b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Great-circle distance in meters.
inline double haversine(double lat1, double lon1, double lat2, double lon2) {
  const double r = urbanpat::kEarthRadiusMeters;
  const double rad = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * rad, dlon = (lon2 - lon1) * rad;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * rad) * std::cos(lat2 * rad) * std::sin(dlon / 2) *
                       std::sin(dlon / 2);
  return 2 * r * std::asin(std::sqrt(a));
}

// Exact collapsed joint over every assignment vector, indexed by
// sum_i z_i K^i, normalized.
inline std::vector<double> exact_joint(const urbanpat::ObservationSet& obs,
                                       const urbanpat::TldaHyperparams& hp) {
  const std::size_t K = static_cast<std::size_t>(hp.topics);
  const std::size_t N = obs.items.size();
  std::size_t states = 1;
  for (std::size_t i = 0; i < N; ++i) states *= K;
  std::vector<double> logp(states);
  const double V = static_cast<double>(obs.categories);
  for (std::size_t s = 0; s < states; ++s) {
    std::vector<std::size_t> z(N);
    std::size_t rest = s;
    for (std::size_t i = 0; i < N; ++i) {
      z[i] = rest % K;
      rest /= K;
    }
    std::map<std::pair<std::size_t, std::size_t>, double> nu, nt, nv;
    std::map<std::size_t, double> Nu, Nt, nk;
    for (std::size_t i = 0; i < N; ++i) {
      const auto& o = obs.items[i];
      nu[{o.user, z[i]}] += 1;
      nt[{o.time, z[i]}] += 1;
      nv[{z[i], o.category}] += 1;
      Nu[o.user] += 1;
      Nt[o.time] += 1;
      nk[z[i]] += 1;
    }
    double lp = 0.0;
    auto dirmult = [&](double total, double prior, std::size_t dim, auto&& count) {
      double v = std::lgamma(dim * prior) - std::lgamma(total + dim * prior);
      for (std::size_t j = 0; j < dim; ++j) v += std::lgamma(count(j) + prior) - std::lgamma(prior);
      return v;
    };
    for (std::size_t u = 0; u < obs.users; ++u) {
      lp += dirmult(Nu[u], hp.alpha, K, [&](std::size_t k) { return nu[{u, k}]; });
    }
    if (hp.temporal) {
      for (std::size_t t = 0; t < obs.times; ++t) {
        lp += dirmult(Nt[t], hp.gamma, K, [&](std::size_t k) { return nt[{t, k}]; });
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      lp += dirmult(nk[k], hp.beta, static_cast<std::size_t>(V),
                    [&](std::size_t v) { return nv[{k, v}]; });
    }
    logp[s] = lp;
  }
  const double mx = *std::max_element(logp.begin(), logp.end());
  double total = 0.0;
  for (auto& v : logp) {
    v = std::exp(v - mx);
    total += v;
  }
  for (auto& v : logp) v /= total;
  return logp;
}

inline std::size_t rank_for(std::size_t n, double eta) {
  if (n < 2) return 0;
  std::size_t k = 1;
  while (static_cast<double>(k) < static_cast<double>(n) * eta) ++k;
  return std::min(k, n - 1);
}

inline std::vector<double> core_distances(const std::vector<ProjectedPoint>& pts, double eta) {
  const std::size_t n = pts.size();
  const std::size_t k = rank_for(n, eta);
  std::vector<double> out(n, 0.0);
  if (k == 0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d.push_back(dist(pts[i], pts[j]));
    }
    std::sort(d.begin(), d.end());
    out[i] = d[k - 1];
  }
  return out;
}

struct Ordering {
  std::vector<std::size_t> order;
  std::vector<double> reach;
};

// Recomputes every tentative reachability from scratch at each step as the
// minimum over visited points of max(core(o), dist(o, p)).
inline Ordering optics(const std::vector<ProjectedPoint>& pts, const std::vector<double>& core) {
  const std::size_t n = pts.size();
  Ordering out;
  if (n == 0) return out;
  std::vector<bool> visited(n, false);
  out.order.push_back(0);
  out.reach.push_back(0.0);
  visited[0] = true;
  while (out.order.size() < n) {
    std::size_t best = n;
    double best_rd = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < n; ++p) {
      if (visited[p]) continue;
      double rd = std::numeric_limits<double>::infinity();
      for (auto o : out.order) rd = std::min(rd, std::max(core[o], dist(pts[o], pts[p])));
      if (best == n || rd < best_rd) {
        best = p;
        best_rd = rd;
      }
    }
    visited[best] = true;
    out.order.push_back(best);
    out.reach.push_back(best_rd);
  }
  return out;
}

inline double population_std(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  long double mean = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  long double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return static_cast<double>(std::sqrt(ss / v.size()));
}

struct Threshold {
  double threshold = 0.0;
  double score = 0.0;
  bool fallback = false;
};

inline Threshold threshold(const std::vector<double>& reach) {
  std::set<double> candidates(reach.begin(), reach.end());
  candidates.insert(std::numeric_limits<double>::infinity());
  Threshold best{0.0, std::numeric_limits<double>::infinity(), true};
  for (double th : candidates) {
    std::vector<double> kept;
    for (double r : reach) {
      if (r < th) kept.push_back(r);
    }
    if (kept.size() < 2) continue;
    const double score = population_std(kept) * reach.size() / kept.size();
    if (score < best.score) best = {th, score, false};
  }
  if (best.fallback) best = {*std::max_element(reach.begin(), reach.end()), 0.0, true};
  return best;
}

// Cuts the ordering before every position whose reach is >= threshold.
inline std::vector<std::vector<std::size_t>> clusters(const Ordering& o, double th) {
  std::vector<std::size_t> cuts;
  for (std::size_t i = 0; i < o.order.size(); ++i) {
    if (i == 0 || o.reach[i] >= th) cuts.push_back(i);
  }
  cuts.push_back(o.order.size());
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    std::vector<std::size_t> group(o.order.begin() + cuts[c], o.order.begin() + cuts[c + 1]);
    if (!group.empty()) out.push_back(group);
  }
  return out;
}

inline double normal_kernel(double d, double s) {
  return 1.0 / std::sqrt(2.0 * std::numbers::pi * s * s) * std::exp(-d * d / (2.0 * s * s));
}

struct ToyUser {
  ProjectedPoint centre;
  double radius = 0.0;
};

struct ToyVenue {
  ProjectedPoint location;
  double sigma = 0.0;
};

inline std::vector<double> demand(const std::vector<ToyUser>& users, ProjectedPoint origin,
                                  double cell, std::size_t cols, std::size_t rows) {
  std::vector<double> out;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const ProjectedPoint x{origin.x + (c + 0.5) * cell, origin.y + (r + 0.5) * cell};
      double sum = 0.0;
      for (const auto& u : users) {
        const double d = dist(x, u.centre);
        if (d <= u.radius) sum += normal_kernel(d, u.radius);
      }
      out.push_back(sum);
    }
  }
  return out;
}

inline std::vector<double> supply(const std::vector<ToyVenue>& venues, ProjectedPoint origin,
                                  double cell, std::size_t cols, std::size_t rows) {
  std::vector<double> out;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const ProjectedPoint x{origin.x + (c + 0.5) * cell, origin.y + (r + 0.5) * cell};
      double sum = 0.0;
      for (const auto& v : venues) sum += normal_kernel(dist(x, v.location), v.sigma);
      out.push_back(sum);
    }
  }
  return out;
}

inline bool rel_close(double a, double b, double tol) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::fabs(a - b) <= tol * std::max({1e-300, std::fabs(a), std::fabs(b)});
}

}  // namespace oracle
