// Apache License, Version 2.0, refer to LICENSE.txt

#include "urbanpat/poptics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "urbanpat/errors.hpp"
#include "urbanpat/text_io.hpp"

namespace urbanpat {

void PopticsConfig::validate() const {
  if (!(eta > 0.0) || eta > 1.0) throw ConfigError("eta must be in (0, 1]");
  if (!(max_dist > 0.0)) throw ConfigError("max_dist must be positive");
  if (!(min_radius > 0.0)) throw ConfigError("min_radius must be positive");
}

std::size_t neighbor_rank(std::size_t n, double eta) {
  if (n < 2) return 0;
  const auto k = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * eta));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

std::vector<double> core_distances(std::span<const ProjectedPoint> points, double eta) {
  const std::size_t n = points.size();
  std::vector<double> core(n, 0.0);
  const std::size_t rank = neighbor_rank(n, eta);
  if (rank == 0) return core;
  std::vector<double> d;
  d.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    d.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d.push_back(distance(points[i], points[j]));
    }
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(rank - 1), d.end());
    core[i] = d[rank - 1];
  }
  return core;
}

ReachabilityResult optics_order(std::span<const ProjectedPoint> points,
                                std::span<const double> core, double max_dist) {
  const std::size_t n = points.size();
  if (core.size() != n) throw InvariantError("core distance count differs from point count");
  ReachabilityResult result;
  result.core.assign(core.begin(), core.end());
  if (n == 0) return result;

  std::vector<double> rd(n, max_dist);
  std::vector<char> done(n, 0);
  rd[0] = 0.0;
  std::size_t current = 0;
  for (std::size_t step = 0; step < n; ++step) {
    done[current] = 1;
    result.order.push_back(current);
    result.reach.push_back(rd[current]);
    std::size_t next = n;
    for (std::size_t p = 0; p < n; ++p) {
      if (done[p]) continue;
      const double candidate = std::max(core[current], distance(points[current], points[p]));
      rd[p] = std::min(rd[p], candidate);
      if (next == n || rd[p] < rd[next]) next = p;
    }
    current = next;
  }
  return result;
}

std::optional<double> threshold_score(std::span<const double> reach, double threshold) {
  std::size_t count = 0;
  double sum = 0.0;
  for (double r : reach) {
    if (r < threshold) {
      ++count;
      sum += r;
    }
  }
  if (count < 2) return std::nullopt;
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (double r : reach) {
    if (r < threshold) ss += (r - mean) * (r - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(count));
  return sd * static_cast<double>(reach.size()) / static_cast<double>(count);
}

ThresholdChoice select_threshold(std::span<const double> reach) {
  std::vector<double> candidates;
  for (double r : reach) {
    if (std::isfinite(r)) candidates.push_back(r);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  const double max_finite = candidates.empty() ? 0.0 : candidates.back();
  candidates.push_back(std::numeric_limits<double>::infinity());

  std::optional<ThresholdChoice> best;
  for (double th : candidates) {
    const auto score = threshold_score(reach, th);
    if (!score) continue;
    if (!best || *score < best->score) best = ThresholdChoice{th, *score, false};
  }
  if (!best) return {max_finite, 0.0, true};
  return *best;
}

std::vector<std::vector<std::size_t>> extract_clusters(const ReachabilityResult& result,
                                                       double threshold) {
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::size_t> current;
  for (std::size_t pos = 0; pos < result.order.size(); ++pos) {
    if (result.reach[pos] >= threshold) {
      if (!current.empty()) clusters.push_back(std::move(current));
      current.clear();
    }
    current.push_back(result.order[pos]);
  }
  if (!current.empty()) clusters.push_back(std::move(current));
  return clusters;
}

ReachabilityResult run_poptics(std::span<const ProjectedPoint> points,
                               const PopticsConfig& config) {
  config.validate();
  const auto core = core_distances(points, config.eta);
  ReachabilityResult result = optics_order(points, core, config.max_dist);
  if (points.empty()) return result;
  const ThresholdChoice choice = select_threshold(result.reach);
  result.threshold = choice.threshold;
  result.threshold_fallback = choice.fallback;
  result.clusters = extract_clusters(result, choice.threshold);
  return result;
}

namespace {

ProjectedPoint centroid(std::span<const ProjectedPoint> points,
                        std::span<const std::size_t> members) {
  double x = 0.0, y = 0.0;
  for (auto i : members) {
    x += points[i].x;
    y += points[i].y;
  }
  const auto n = static_cast<double>(members.size());
  return {x / n, y / n};
}

}  // namespace

UserActivityProfile activity_profile(std::size_t user, std::size_t pattern,
                                     std::span<const ProjectedPoint> all_checkins,
                                     std::span<const ProjectedPoint> pattern_checkins,
                                     const PopticsConfig& config,
                                     ReachabilityResult* detail) {
  if (all_checkins.empty()) throw DataError("user has no check-in locations");
  ReachabilityResult result = run_poptics(all_checkins, config);

  UserActivityProfile profile;
  profile.user = user;
  profile.pattern = pattern;

  std::vector<std::size_t> members;
  if (result.clusters.empty()) {
    profile.fallback = true;
    members.resize(all_checkins.size());
    for (std::size_t i = 0; i < members.size(); ++i) members[i] = i;
  } else {
    std::vector<double> reach_of(all_checkins.size(), 0.0);
    for (std::size_t pos = 0; pos < result.order.size(); ++pos) {
      reach_of[result.order[pos]] = result.reach[pos];
    }
    auto mean_reach = [&](const std::vector<std::size_t>& c) {
      double s = 0.0;
      for (auto i : c) s += reach_of[i];
      return s / static_cast<double>(c.size());
    };
    std::size_t best = 0;
    for (std::size_t c = 1; c < result.clusters.size(); ++c) {
      const auto& cand = result.clusters[c];
      const auto& cur = result.clusters[best];
      if (cand.size() > cur.size() ||
          (cand.size() == cur.size() && mean_reach(cand) < mean_reach(cur))) {
        best = c;
      }
    }
    members = result.clusters[best];
  }

  profile.centre = centroid(all_checkins, members);
  double radius = 0.0;
  for (auto i : members) radius = std::max(radius, distance(profile.centre, all_checkins[i]));
  profile.radius_overall = std::max(radius, config.min_radius);

  double pattern_radius = 0.0;
  for (const auto& p : pattern_checkins) {
    const double d = distance(profile.centre, p);
    if (d <= profile.radius_overall) pattern_radius = std::max(pattern_radius, d);
  }
  profile.radius_pattern = std::max(pattern_radius, config.min_radius);

  if (detail) *detail = std::move(result);
  return profile;
}

std::vector<UserActivityProfile> build_profiles(const Corpus& corpus, const TldaModel& model,
                                                const PatternDistributions& dists,
                                                const PopticsConfig& config) {
  config.validate();
  if (model.z_assign.size() != corpus.event_count() || dists.users != corpus.user_count()) {
    throw DataError("model does not match the corpus; rerun the fit stage");
  }
  const LocalProjection projection(corpus.reference);
  std::vector<UserActivityProfile> profiles(corpus.user_count());
  for (std::size_t u = 0; u < corpus.user_count(); ++u) {
    const std::size_t pattern = assign_user_pattern(dists, u);
    std::vector<ProjectedPoint> all, subset;
    const std::size_t first = corpus.user_offsets[u];
    const auto events = corpus.user_events(u);
    for (std::size_t i = 0; i < events.size(); ++i) {
      const auto p = projection.project({events[i].lat, events[i].lon});
      all.push_back(p);
      if (model.z_assign[first + i] == pattern) subset.push_back(p);
    }
    for (const auto& s : corpus.user_side_events(u)) {
      all.push_back(projection.project({s.lat, s.lon}));
    }
    profiles[u] = activity_profile(u, pattern, all, subset, config);
  }
  return profiles;
}

void write_profiles_csv(std::ostream& out, std::span<const UserActivityProfile> profiles,
                        const Corpus& corpus) {
  out << "user,pattern,mu_x,mu_y,r,r_uz,fallback\n";
  for (const auto& p : profiles) {
    out << csv_escape(corpus.users.at(static_cast<std::uint32_t>(p.user))) << ',' << p.pattern
        << ',' << format_double(p.centre.x) << ',' << format_double(p.centre.y) << ','
        << format_double(p.radius_overall) << ',' << format_double(p.radius_pattern) << ','
        << (p.fallback ? 1 : 0) << '\n';
  }
}

std::vector<UserActivityProfile> read_profiles_csv(std::istream& in, const Corpus& corpus) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("user,pattern,", 0) != 0) {
    throw DataError("profiles file lacks its header");
  }
  std::vector<UserActivityProfile> profiles;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw DataError("profiles file: malformed row '" + line + "'");
    const auto user = corpus.users.find(f[0]);
    const auto pattern = parse_int(f[1]);
    const auto x = parse_double(f[2]), y = parse_double(f[3]);
    const auto r = parse_double(f[4]), ruz = parse_double(f[5]);
    if (!user || !pattern || !x || !y || !r || !ruz || *pattern < 0) {
      throw DataError("profiles file: bad values in '" + line + "'");
    }
    UserActivityProfile p;
    p.user = *user;
    p.pattern = static_cast<std::size_t>(*pattern);
    p.centre = {*x, *y};
    p.radius_overall = *r;
    p.radius_pattern = *ruz;
    p.fallback = f[6] == "1";
    profiles.push_back(p);
  }
  return profiles;
}

void write_reachability_csv(std::ostream& out, const ReachabilityResult& result) {
  out << "position,point,reach,core\n";
  for (std::size_t pos = 0; pos < result.order.size(); ++pos) {
    const auto p = result.order[pos];
    out << pos << ',' << p << ',' << format_double(result.reach[pos]) << ','
        << format_double(result.core[p]) << '\n';
  }
}

}  // namespace urbanpat
