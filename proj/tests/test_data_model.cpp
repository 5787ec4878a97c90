// Apache License, Version 2.0, refer to LICENSE.txt

#include <cmath>
#include <string>

#include "doctest.h"
#include "support/oracles.hpp"
#include "urbanpat/data_model.hpp"
#include "urbanpat/errors.hpp"
#include "urbanpat/ingest.hpp"
#include "urbanpat/rng.hpp"
#include "urbanpat/text_io.hpp"

using urbanpat::GeoPoint;
using urbanpat::HourGrouping;

TEST_CASE("temporal tokens") {
  const auto friday = urbanpat::parse_rfc3339("2017-07-21T20:15:00+08:00");
  REQUIRE(friday.has_value());
  const auto hourly = HourGrouping::hourly();
  const auto t = urbanpat::make_temporal_token(*friday, 8 * 3600, hourly);
  CHECK(t.month == 7);
  CHECK(t.day_of_week == 5);
  CHECK(t.hour_slot == 20);
  CHECK(urbanpat::token_label(t, hourly) == "JulFri20");

  const auto midnight = urbanpat::parse_rfc3339("2018-01-01T00:00:00Z");
  const auto m = urbanpat::make_temporal_token(*midnight, 0, hourly);
  CHECK(m.month == 1);
  CHECK(m.day_of_week == 1);
  CHECK(m.hour_slot == 0);

  const auto five = HourGrouping::five_slot();
  const auto e = urbanpat::make_temporal_token(*friday, 8 * 3600, five);
  CHECK(five.slot_name(e.hour_slot) == "evening");
  CHECK(urbanpat::token_label(e, five) == "JulFri-evening");

  CHECK_THROWS_AS(urbanpat::make_temporal_token(urbanpat::kMaxTimestamp + 1, 0, hourly),
                  urbanpat::DataError);
}

TEST_CASE("token ids round trip") {
  for (int slots : {24, 5}) {
    for (int month = 1; month <= 12; ++month) {
      for (int dow = 1; dow <= 7; ++dow) {
        for (int s = 0; s < slots; ++s) {
          const urbanpat::TemporalToken t{month, dow, s};
          CHECK(urbanpat::TemporalToken::from_id(t.id(slots), slots) == t);
        }
      }
    }
  }
}

TEST_CASE("hour groupings") {
  const auto five = HourGrouping::five_slot();
  CHECK(five.slots() == 5);
  CHECK(five.slot_of(0) == 0);
  CHECK(five.slot_of(5) == 0);
  CHECK(five.slot_of(6) == 1);
  CHECK(five.slot_of(13) == 2);
  CHECK(five.slot_of(19) == 4);
  CHECK(five.slot_of(23) == 4);
  CHECK(HourGrouping::parse(five.describe()) == five);
  CHECK(HourGrouping::parse("24") == HourGrouping::hourly());
  const auto custom = HourGrouping::parse("0,12");
  CHECK(custom.slots() == 2);
  CHECK(custom.slot_of(11) == 0);
  CHECK(custom.slot_of(12) == 1);
  CHECK_THROWS_AS(HourGrouping::from_starts({1, 5}), urbanpat::ConfigError);
  CHECK_THROWS_AS(HourGrouping::from_starts({0, 5, 5}), urbanpat::ConfigError);
}

TEST_CASE("projection") {
  const GeoPoint ref{39.9042, 116.4074};
  const urbanpat::LocalProjection proj(ref);
  const auto origin = proj.project(ref);
  CHECK(origin.x == 0.0);
  CHECK(origin.y == 0.0);

  const auto north = proj.project({ref.lat + 0.01, ref.lon});
  CHECK(north.x == 0.0);
  CHECK(north.y == doctest::Approx(1111.95).epsilon(1e-4));
  CHECK(north.y == doctest::Approx(oracle::haversine(ref.lat, ref.lon, ref.lat + 0.01, ref.lon))
                       .epsilon(0.005));

  const GeoPoint at40{40.0, 116.0};
  const auto east = urbanpat::project(40.0, 116.01, at40);
  CHECK(east.y == 0.0);
  CHECK(east.x == doctest::Approx(oracle::haversine(40.0, 116.0, 40.0, 116.01)).epsilon(0.005));

  urbanpat::Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    // Within roughly 200 km of the reference.
    const GeoPoint p{ref.lat + (rng.uniform() - 0.5) * 3.0, ref.lon + (rng.uniform() - 0.5) * 3.0};
    const auto back = proj.unproject(proj.project(p));
    CHECK(std::fabs(back.lat - p.lat) < 1e-6);
    CHECK(std::fabs(back.lon - p.lon) < 1e-6);
    const auto q = proj.project(p);
    CHECK(urbanpat::distance(q, origin) ==
          doctest::Approx(oracle::haversine(ref.lat, ref.lon, p.lat, p.lon)).epsilon(0.005));
  }
}

TEST_CASE("coordinate validity") {
  CHECK(urbanpat::valid_coordinate(0, 0));
  CHECK(urbanpat::valid_coordinate(-90, 180));
  CHECK_FALSE(urbanpat::valid_coordinate(95, 0));
  CHECK_FALSE(urbanpat::valid_coordinate(0, -181));
  CHECK_FALSE(urbanpat::valid_coordinate(std::nan(""), 0));
}

TEST_CASE("interner keeps first-seen order") {
  urbanpat::Interner<std::string> in;
  CHECK(in.intern("b") == 0);
  CHECK(in.intern("a") == 1);
  CHECK(in.intern("b") == 0);
  CHECK(in.size() == 2);
  CHECK(in.at(1) == "a");
  CHECK(in.find("a") == std::optional<std::uint32_t>{1});
  CHECK_FALSE(in.find("c").has_value());
}

TEST_CASE("text helpers") {
  CHECK(urbanpat::split_csv_line("a,\"b,c\",\"d\"\"e\",") ==
        std::vector<std::string>{"a", "b,c", "d\"e", ""});
  CHECK(urbanpat::csv_escape("x,y") == "\"x,y\"");
  CHECK(urbanpat::csv_escape("plain") == "plain");
  urbanpat::Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(rng.uniform() - 0.5, static_cast<int>(rng.below(200)) - 100);
    CHECK(urbanpat::parse_double(urbanpat::format_double(v)) == v);
  }
  CHECK(std::isnan(*urbanpat::parse_double(urbanpat::format_double(std::nan("")))));
  CHECK(std::isinf(*urbanpat::parse_double(urbanpat::format_double(INFINITY))));
  CHECK_FALSE(urbanpat::parse_double("1.5x").has_value());
  CHECK(urbanpat::parse_int("-42") == std::optional<std::int64_t>{-42});
  CHECK(urbanpat::trim("  a b \t") == "a b");
  CHECK(urbanpat::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(urbanpat::hex64(255) == "00000000000000ff");
}
