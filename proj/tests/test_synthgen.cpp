// Apache License, Version 2.0, refer to LICENSE.txt

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "urbanpat/errors.hpp"
#include "urbanpat/poptics.hpp"
#include "urbanpat/synthgen.hpp"
#include "urbanpat/text_io.hpp"

namespace fs = std::filesystem;

namespace {

int local_hour(std::int64_t ts, std::int32_t tz) {
  const std::int64_t s = ((ts + tz) % 86400 + 86400) % 86400;
  return static_cast<int>(s / 3600);
}

}  // namespace

TEST_CASE("same seed gives byte-identical files") {
  urbanpat::SynthSpec spec;
  spec.users = 60;
  spec.seed = 17;
  const auto a = fs::temp_directory_path() / "urbanpat_synth_a";
  const auto b = fs::temp_directory_path() / "urbanpat_synth_b";
  fs::remove_all(a);
  fs::remove_all(b);
  urbanpat::write_synth(urbanpat::generate(spec), a);
  urbanpat::write_synth(urbanpat::generate(spec), b);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    CHECK(urbanpat::read_file(entry.path()) == urbanpat::read_file(b / entry.path().filename()));
  }
  CHECK(files >= 6);
  spec.seed = 18;
  const auto c = fs::temp_directory_path() / "urbanpat_synth_c";
  fs::remove_all(c);
  urbanpat::write_synth(urbanpat::generate(spec), c);
  CHECK(urbanpat::read_file(a / "checkins.csv") != urbanpat::read_file(c / "checkins.csv"));
}

TEST_CASE("one user, one check-in") {
  urbanpat::SynthSpec spec;
  spec.users = 1;
  spec.checkins_min = spec.checkins_max = 1;
  spec.home_checkins = spec.work_checkins = 0;
  const auto corpus = urbanpat::generate(spec);
  CHECK(corpus.checkins.size() == 1);
  const auto dir = fs::temp_directory_path() / "urbanpat_synth_one";
  fs::remove_all(dir);
  urbanpat::write_synth(corpus, dir);
  const auto text = urbanpat::read_file(dir / "checkins.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);  // header plus one row
}

TEST_CASE("infeasible specs are rejected") {
  urbanpat::SynthSpec spec;
  spec.venues_per_category = 0;
  CHECK_THROWS_AS(urbanpat::generate(spec), urbanpat::ConfigError);
  spec = {};
  spec.extent = 0;
  CHECK_THROWS_AS(urbanpat::generate(spec), urbanpat::ConfigError);
  spec = {};
  spec.checkins_min = 5;
  spec.checkins_max = 4;
  CHECK_THROWS_AS(urbanpat::generate(spec), urbanpat::ConfigError);
}

TEST_CASE("evening pattern concentrates on evening slots") {
  urbanpat::SynthSpec spec;
  spec.users = 200;
  const auto corpus = urbanpat::generate(spec);
  // Pattern 0 peaks at 19-21 local time.
  REQUIRE(corpus.time_profiles[0].hours.front() == 19);
  std::size_t evening = 0, total = 0;
  for (const auto& c : corpus.checkins) {
    if (!c.cultural || c.pattern != 0) continue;
    ++total;
    evening += local_hour(c.row.timestamp, spec.tz_offset) >= 19;
  }
  REQUIRE(total > 1000);
  const double share = static_cast<double>(evening) / static_cast<double>(total);
  CHECK(share > 0.7);
  CHECK(share == doctest::Approx(urbanpat::peak_share(0.85, 5, 24)).epsilon(0.03));
}

TEST_CASE("empirical frequencies converge to the planted distributions") {
  urbanpat::SynthSpec spec;
  spec.users = 400;
  spec.checkins_min = spec.checkins_max = 100;
  spec.home_checkins = spec.work_checkins = 0;
  const auto corpus = urbanpat::generate(spec);
  const std::size_t C = corpus.categories.size();
  std::vector<std::vector<double>> counts(4, std::vector<double>(C, 0.0));
  std::vector<double> hours(24 * 4, 0.0), totals(4, 0.0);
  for (const auto& c : corpus.checkins) {
    const auto z = static_cast<std::size_t>(c.pattern);
    const std::size_t cat = std::stoul(c.row.category_id.substr(3));
    counts[z][cat] += 1;
    hours[z * 24 + local_hour(c.row.timestamp, spec.tz_offset)] += 1;
    totals[z] += 1;
  }
  for (std::size_t z = 0; z < 4; ++z) {
    double chi2 = 0.0;
    for (std::size_t v = 0; v < C; ++v) {
      const double e = totals[z] * corpus.category_dist[z][v];
      chi2 += (counts[z][v] - e) * (counts[z][v] - e) / e;
    }
    // df = 39; the 0.999 quantile is about 73.
    CHECK(chi2 < 73.0);
    double hchi = 0.0;
    const auto& peak = corpus.time_profiles[z].hours;
    for (int h = 0; h < 24; ++h) {
      const bool in_peak = std::find(peak.begin(), peak.end(), h) != peak.end();
      const double p = (in_peak ? 0.85 / peak.size() : 0.0) + 0.15 / 24.0;
      const double e = totals[z] * p;
      hchi += (hours[z * 24 + h] - e) * (hours[z * 24 + h] - e) / e;
    }
    // df = 23; the 0.999 quantile is about 49.7.
    CHECK(hchi < 49.7);
  }
}

TEST_CASE("two-blob users: clustering recovers the home centre") {
  urbanpat::SynthSpec spec;
  spec.users = 200;
  spec.checkins_min = spec.checkins_max = 1;
  // Centre error grows with the blob spread; 100 m is met at this spread.
  spec.home_spread = spec.work_spread = 100.0;
  const auto corpus = urbanpat::generate(spec);
  const urbanpat::LocalProjection proj(spec.reference);
  std::size_t within = 0;
  std::size_t next = 0;
  for (const auto& user : corpus.users) {
    std::vector<urbanpat::ProjectedPoint> pts;
    for (; next < corpus.checkins.size() && corpus.checkins[next].row.user_id == user.id; ++next) {
      const auto& r = corpus.checkins[next].row;
      if (r.category_id == "Residence" || r.category_id == "Office") {
        pts.push_back(proj.project({r.lat, r.lon}));
      }
    }
    REQUIRE(pts.size() == 40);
    const auto p = urbanpat::activity_profile(0, 0, pts, {}, urbanpat::PopticsConfig{});
    within += urbanpat::distance(p.centre, user.home) < 100.0;
  }
  CHECK(within >= 190);
}

TEST_CASE("planted mixtures and truth sidecars") {
  urbanpat::SynthSpec spec;
  spec.users = 20;
  spec.user_mix = 0.2;
  const auto corpus = urbanpat::generate(spec);
  for (const auto& u : corpus.users) {
    double s = 0;
    for (double m : u.mixture) s += m;
    CHECK(s == doctest::Approx(1.0));
    CHECK(u.mixture[u.pattern] == doctest::Approx(0.85));
  }
  for (const auto& d : corpus.category_dist) {
    double s = 0;
    for (double m : d) s += m;
    CHECK(s == doctest::Approx(1.0));
  }
  CHECK(urbanpat::peak_share(1.0, 3, 24) == 1.0);
  CHECK(urbanpat::peak_share(0.0, 3, 24) == doctest::Approx(0.125));
}
