// Apache License, Version 2.0, refer to LICENSE.txt

#include "urbanpat/synthgen.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "urbanpat/errors.hpp"
#include "urbanpat/ingest.hpp"
#include "urbanpat/rng.hpp"
#include "urbanpat/text_io.hpp"

namespace urbanpat {

namespace {

constexpr std::array<int, 8> kPeakHourStarts = {19, 9, 14, 6, 11, 16, 22, 2};

std::string padded(std::size_t value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width) s.insert(0, width - s.size(), '0');
  return s;
}

SynthTimeProfile make_time_profile(int z, const SynthSpec& spec) {
  SynthTimeProfile p;
  const int start = kPeakHourStarts[static_cast<std::size_t>(z) % kPeakHourStarts.size()] +
                    static_cast<int>(static_cast<std::size_t>(z) / kPeakHourStarts.size());
  for (std::size_t i = 0; i < spec.peak_hours; ++i) {
    p.hours.push_back((start + static_cast<int>(i)) % 24);
  }
  for (std::size_t i = 0; i < spec.peak_days; ++i) {
    p.days.push_back(static_cast<int>((2 * static_cast<std::size_t>(z) + i) % 7) + 1);
  }
  for (std::size_t i = 0; i < spec.peak_months; ++i) {
    p.months.push_back(static_cast<int>((3 * static_cast<std::size_t>(z) + i) % 12) + 1);
  }
  return p;
}

int draw_component(Rng& rng, const std::vector<int>& peak, double concentration, int lo,
                   int count) {
  if (!peak.empty() && rng.uniform() < concentration) return peak[rng.below(peak.size())];
  return lo + static_cast<int>(rng.below(static_cast<std::size_t>(count)));
}

// Epoch seconds (UTC) of a random moment in the given local month, ISO
// weekday and hour of spec.year.
std::int64_t draw_timestamp(Rng& rng, const SynthSpec& spec, int month, int weekday, int hour) {
  using namespace std::chrono;
  const year y{spec.year};
  const auto m = std::chrono::month{static_cast<unsigned>(month)};
  const unsigned days_in_month = static_cast<unsigned>((y / m / std::chrono::last).day());
  std::vector<sys_days> candidates;
  for (unsigned d = 1; d <= days_in_month; ++d) {
    const sys_days sd{y / m / day{d}};
    if (static_cast<int>(std::chrono::weekday{sd}.iso_encoding()) == weekday) {
      candidates.push_back(sd);
    }
  }
  const sys_days chosen = candidates[rng.below(candidates.size())];
  const std::int64_t local = chosen.time_since_epoch().count() * 86400LL + hour * 3600LL +
                             static_cast<std::int64_t>(rng.below(3600));
  return local - spec.tz_offset;
}

std::int64_t uniform_timestamp(Rng& rng, const SynthSpec& spec) {
  const int month = 1 + static_cast<int>(rng.below(12));
  const int weekday = 1 + static_cast<int>(rng.below(7));
  const int hour = static_cast<int>(rng.below(24));
  return draw_timestamp(rng, spec, month, weekday, hour);
}

ProjectedPoint uniform_point(Rng& rng, double extent) {
  return {(rng.uniform() - 0.5) * extent, (rng.uniform() - 0.5) * extent};
}

ProjectedPoint gaussian_point(Rng& rng, ProjectedPoint centre, double spread) {
  const double x = rng.normal();
  const double y = rng.normal();
  return {centre.x + spread * x, centre.y + spread * y};
}

}  // namespace

void SynthSpec::validate() const {
  if (patterns < 1) throw ConfigError("synth patterns must be at least 1");
  if (users == 0) throw ConfigError("synth users must be positive");
  if (checkins_min > checkins_max) throw ConfigError("checkins_min exceeds checkins_max");
  if (categories_per_pattern == 0) {
    throw ConfigError("every pattern needs at least one category");
  }
  if (venues_per_category == 0) throw ConfigError("a used category has zero venues");
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must be in [0, 1]");
  };
  unit(category_concentration, "category_concentration");
  unit(time_concentration, "time_concentration");
  unit(user_mix, "user_mix");
  unit(noise, "noise");
  unit(venue_centre_bias, "venue_centre_bias");
  if (peak_hours == 0 || peak_hours > 24) throw ConfigError("peak_hours must be in 1..24");
  if (peak_days == 0 || peak_days > 7) throw ConfigError("peak_days must be in 1..7");
  if (peak_months == 0 || peak_months > 12) throw ConfigError("peak_months must be in 1..12");
  if (!(extent > 0.0)) throw ConfigError("city extent must be positive");
  if (!(centre_spread > 0.0)) throw ConfigError("centre_spread must be positive");
  if (!(distance_decay > 0.0)) throw ConfigError("distance_decay must be positive");
  if (!(home_spread >= 0.0) || !(work_spread >= 0.0)) {
    throw ConfigError("blob spreads must be non-negative");
  }
  if (year < 1901 || year > 2199) throw ConfigError("synth year out of range");
  if (!valid_coordinate(reference.lat, reference.lon)) {
    throw ConfigError("synth reference is not a valid coordinate");
  }
}

double peak_share(double concentration, std::size_t peak, std::size_t range) {
  return concentration + (1.0 - concentration) * static_cast<double>(peak) /
                             static_cast<double>(range);
}

std::vector<CheckIn> SynthCorpus::rows() const {
  std::vector<CheckIn> out;
  out.reserve(checkins.size());
  for (const auto& c : checkins) out.push_back(c.row);
  return out;
}

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  SynthCorpus out;
  out.spec = spec;
  const auto K = static_cast<std::size_t>(spec.patterns);
  const std::size_t C = K * spec.categories_per_pattern;
  const LocalProjection projection(spec.reference);

  for (std::size_t c = 0; c < C; ++c) out.categories.push_back("cat" + padded(c, 3));

  for (std::size_t z = 0; z < K; ++z) {
    std::vector<double> block(spec.categories_per_pattern);
    double total = 0.0;
    for (std::size_t j = 0; j < block.size(); ++j) {
      block[j] = std::pow(0.9, static_cast<double>(j));
      total += block[j];
    }
    std::vector<double> dist(C, (1.0 - spec.category_concentration) / static_cast<double>(C));
    for (std::size_t j = 0; j < block.size(); ++j) {
      dist[z * spec.categories_per_pattern + j] += spec.category_concentration * block[j] / total;
    }
    out.category_dist.push_back(std::move(dist));
    out.time_profiles.push_back(make_time_profile(static_cast<int>(z), spec));
  }

  Rng layout(mix_seed(spec.seed, 0));
  std::vector<std::vector<std::size_t>> venues_of(C);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < spec.venues_per_category; ++i) {
      SynthVenue v;
      v.id = "v" + padded(c, 3) + "_" + padded(i, 2);
      v.category = out.categories[c];
      v.pattern = static_cast<int>(c / spec.categories_per_pattern);
      if (layout.uniform() < spec.venue_centre_bias) {
        v.location = gaussian_point(layout, {0.0, 0.0}, spec.centre_spread);
        const double half = spec.extent / 2.0;
        v.location.x = std::clamp(v.location.x, -half, half);
        v.location.y = std::clamp(v.location.y, -half, half);
      } else {
        v.location = uniform_point(layout, spec.extent);
      }
      v.geo = projection.unproject(v.location);
      venues_of[c].push_back(out.venues.size());
      out.venues.push_back(std::move(v));
    }
  }

  std::vector<double> weights;
  for (std::size_t u = 0; u < spec.users; ++u) {
    Rng rng(mix_seed(spec.seed, 1 + u));
    SynthUser user;
    user.id = "u" + padded(u, 5);
    user.pattern = static_cast<int>(rng.below(K));
    user.mixture.assign(K, spec.user_mix / static_cast<double>(K));
    user.mixture[static_cast<std::size_t>(user.pattern)] += 1.0 - spec.user_mix;
    user.home = uniform_point(rng, spec.extent);
    user.work = uniform_point(rng, spec.extent);

    const std::size_t n =
        spec.checkins_min + rng.below(spec.checkins_max - spec.checkins_min + 1);
    for (std::size_t i = 0; i < n; ++i) {
      SynthCheckin ck;
      ck.cultural = true;
      std::size_t category = 0;
      std::int64_t ts = 0;
      if (rng.uniform() < spec.noise) {
        category = rng.below(C);
        ts = uniform_timestamp(rng, spec);
      } else {
        const std::size_t z = rng.categorical(user.mixture);
        ck.pattern = static_cast<int>(z);
        category = rng.categorical(out.category_dist[z]);
        const auto& tp = out.time_profiles[z];
        const int hour = draw_component(rng, tp.hours, spec.time_concentration, 0, 24);
        const int day = draw_component(rng, tp.days, spec.time_concentration, 1, 7);
        const int month = draw_component(rng, tp.months, spec.time_concentration, 1, 12);
        ts = draw_timestamp(rng, spec, month, day, hour);
      }
      const auto& candidates = venues_of[category];
      weights.assign(candidates.size(), 0.0);
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        const double d = distance(user.home, out.venues[candidates[j]].location);
        weights[j] = std::exp(-d / spec.distance_decay);
      }
      const auto& venue = out.venues[candidates[rng.categorical(weights)]];
      ck.row = {user.id, venue.id, venue.category, venue.geo.lat, venue.geo.lon, ts};
      out.checkins.push_back(std::move(ck));
    }

    auto side = [&](std::size_t count, ProjectedPoint centre, double spread, const char* kind) {
      for (std::size_t i = 0; i < count; ++i) {
        const GeoPoint g = projection.unproject(gaussian_point(rng, centre, spread));
        SynthCheckin ck;
        ck.row = {user.id, std::string(kind) + "_" + user.id, kind, g.lat, g.lon,
                  uniform_timestamp(rng, spec)};
        out.checkins.push_back(std::move(ck));
      }
    };
    side(spec.home_checkins, user.home, spec.home_spread, "Residence");
    side(spec.work_checkins, user.work, spec.work_spread, "Office");
    out.users.push_back(std::move(user));
  }
  return out;
}

void write_synth(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw DataError("cannot write " + (dir / name).string());
    return f;
  };
  const auto& spec = corpus.spec;
  const LocalProjection projection(spec.reference);
  {
    auto f = open("checkins.csv");
    f << "user_id,venue_id,category,lat,lon,timestamp\n";
    for (const auto& c : corpus.checkins) {
      f << csv_escape(c.row.user_id) << ',' << csv_escape(c.row.venue_id) << ','
        << csv_escape(c.row.category_id) << ',' << format_double(c.row.lat) << ','
        << format_double(c.row.lon) << ',' << format_rfc3339(c.row.timestamp, spec.tz_offset)
        << '\n';
    }
  }
  {
    auto f = open("cultural_categories.txt");
    for (const auto& c : corpus.categories) f << c << '\n';
  }
  {
    auto f = open("truth_users.csv");
    f << "user_id,pattern,home_lat,home_lon,work_lat,work_lon,home_x,home_y\n";
    for (const auto& u : corpus.users) {
      const auto h = projection.unproject(u.home);
      const auto w = projection.unproject(u.work);
      f << u.id << ',' << u.pattern << ',' << format_double(h.lat) << ','
        << format_double(h.lon) << ',' << format_double(w.lat) << ',' << format_double(w.lon)
        << ',' << format_double(u.home.x) << ',' << format_double(u.home.y) << '\n';
    }
  }
  {
    auto f = open("truth_venues.csv");
    f << "venue_id,category,pattern,lat,lon\n";
    for (const auto& v : corpus.venues) {
      f << v.id << ',' << v.category << ',' << v.pattern << ',' << format_double(v.geo.lat)
        << ',' << format_double(v.geo.lon) << '\n';
    }
  }
  {
    auto f = open("truth_categories.csv");
    f << "pattern,category,probability\n";
    for (std::size_t z = 0; z < corpus.category_dist.size(); ++z) {
      for (std::size_t c = 0; c < corpus.categories.size(); ++c) {
        f << z << ',' << corpus.categories[c] << ',' << format_double(corpus.category_dist[z][c])
          << '\n';
      }
    }
  }
  {
    auto f = open("truth_times.csv");
    f << "pattern,component,value,probability\n";
    auto emit = [&](std::size_t z, const char* name, const std::vector<int>& peak, int lo,
                    int count) {
      for (int v = lo; v < lo + count; ++v) {
        const bool in = std::find(peak.begin(), peak.end(), v) != peak.end();
        const double p = (in ? spec.time_concentration / static_cast<double>(peak.size()) : 0.0) +
                         (1.0 - spec.time_concentration) / static_cast<double>(count);
        f << z << ',' << name << ',' << v << ',' << format_double(p) << '\n';
      }
    };
    for (std::size_t z = 0; z < corpus.time_profiles.size(); ++z) {
      emit(z, "hour", corpus.time_profiles[z].hours, 0, 24);
      emit(z, "weekday", corpus.time_profiles[z].days, 1, 7);
      emit(z, "month", corpus.time_profiles[z].months, 1, 12);
    }
  }
  {
    auto f = open("run.conf");
    f << "# ingest settings matching this synthetic corpus\n";
    f << "input = checkins.csv\n";
    f << "categories_file = cultural_categories.txt\n";
    f << "tz_offset = " << spec.tz_offset << '\n';
    f << "ref_lat = " << format_double(spec.reference.lat) << '\n';
    f << "ref_lon = " << format_double(spec.reference.lon) << '\n';
  }
}

}  // namespace urbanpat
