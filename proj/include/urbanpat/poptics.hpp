// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "urbanpat/data_model.hpp"
#include "urbanpat/tlda.hpp"

namespace urbanpat {

struct PopticsConfig {
  // Fraction of a user's locations used as the core-distance neighbour rank.
  double eta = 0.1;
  // Initial reachability of every point; must exceed any pairwise distance.
  double max_dist = std::numeric_limits<double>::infinity();
  // Floor for the overall and per-pattern activity radius, meters.
  double min_radius = 100.0;

  void validate() const;
};

// ceil(n * eta) clamped to [1, n - 1]; 0 when n < 2.
std::size_t neighbor_rank(std::size_t n, double eta);

// Distance from each point to its neighbor_rank(n, eta)-th nearest other point.
// Duplicated locations count separately (distance 0). A single point gets 0.
std::vector<double> core_distances(std::span<const ProjectedPoint> points, double eta);

struct ReachabilityResult {
  std::vector<std::size_t> order;  // point indices in visiting order
  std::vector<double> reach;       // reachability per ordered position; reach[0] = 0
  std::vector<double> core;        // core distance per point index
  double threshold = std::numeric_limits<double>::quiet_NaN();
  bool threshold_fallback = false;
  std::vector<std::vector<std::size_t>> clusters;  // point indices
};

// Global-seed OPTICS walk: starts at point 0 and repeatedly visits the
// remaining point of smallest tentative reachability (lowest index on ties),
// lowering every remaining point to max(core(current), dist(current, p)).
ReachabilityResult optics_order(std::span<const ProjectedPoint> points,
                                std::span<const double> core,
                                double max_dist = std::numeric_limits<double>::infinity());

// std(RD*) * N / |RD*| with RD* = { r in reach : r < threshold } and the
// population standard deviation. Empty when |RD*| < 2.
std::optional<double> threshold_score(std::span<const double> reach, double threshold);

struct ThresholdChoice {
  double threshold = 0.0;
  double score = 0.0;
  bool fallback = false;
};

// Candidates are the distinct finite reachability values, each used as an
// exclusive bound, plus +infinity (every point). Lowest score wins, smaller
// threshold on ties. Without a valid candidate the largest finite reach is
// returned with fallback set.
ThresholdChoice select_threshold(std::span<const double> reach);

// Walks the ordering: reach < threshold extends the current cluster, otherwise
// the current cluster is closed and the point starts the next one. Empty
// clusters are dropped.
std::vector<std::vector<std::size_t>> extract_clusters(const ReachabilityResult& result,
                                                       double threshold);

// Core distances, ordering, threshold selection and extraction in one call.
ReachabilityResult run_poptics(std::span<const ProjectedPoint> points,
                               const PopticsConfig& config);

struct UserActivityProfile {
  std::size_t user = 0;
  std::size_t pattern = 0;
  ProjectedPoint centre;
  double radius_overall = 0.0;
  double radius_pattern = 0.0;
  bool fallback = false;  // no cluster found; centre is the global centroid
};

// Centre = centroid of the largest cluster (ties: smaller mean reach, then
// earlier cluster). Radius = farthest member from the centre. Pattern radius
// = farthest pattern check-in lying within the overall radius. Both radii
// are floored at config.min_radius.
UserActivityProfile activity_profile(std::size_t user, std::size_t pattern,
                                     std::span<const ProjectedPoint> all_checkins,
                                     std::span<const ProjectedPoint> pattern_checkins,
                                     const PopticsConfig& config,
                                     ReachabilityResult* detail = nullptr);

// Profiles for every corpus user. Clustering uses all of a user's check-ins
// (cultural and side table); the pattern subset is the user's cultural
// check-ins sampled into the user's assigned pattern.
std::vector<UserActivityProfile> build_profiles(const Corpus& corpus, const TldaModel& model,
                                                const PatternDistributions& dists,
                                                const PopticsConfig& config);

void write_profiles_csv(std::ostream& out, std::span<const UserActivityProfile> profiles,
                        const Corpus& corpus);
std::vector<UserActivityProfile> read_profiles_csv(std::istream& in, const Corpus& corpus);

void write_reachability_csv(std::ostream& out, const ReachabilityResult& result);

}  // namespace urbanpat
