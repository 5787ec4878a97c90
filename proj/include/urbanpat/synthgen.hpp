// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "urbanpat/data_model.hpp"

namespace urbanpat {

struct SynthSpec {
  int patterns = 4;
  std::size_t users = 500;
  // Cultural check-ins per user, uniform in [min, max].
  std::size_t checkins_min = 40;
  std::size_t checkins_max = 40;
  std::size_t categories_per_pattern = 10;
  std::size_t venues_per_category = 5;

  // Probability that a pattern check-in uses the pattern's own category
  // block; the rest is spread over every category.
  double category_concentration = 0.9;
  // Probability that each time component (hour, weekday, month) falls in the
  // pattern's peak set; otherwise uniform.
  double time_concentration = 0.85;
  std::size_t peak_hours = 3;
  std::size_t peak_days = 2;
  std::size_t peak_months = 2;
  // Weight of the uniform part of each user's pattern mixture. 0 gives
  // one-hot users.
  double user_mix = 0.05;
  // Fraction of cultural check-ins with uniform category and time.
  double noise = 0.0;

  // Square city centred on the reference point, side in meters.
  double extent = 20000.0;
  GeoPoint reference{39.9042, 116.4074};
  // Fraction of cultural venues drawn from a central Gaussian of std
  // centre_spread; the rest are uniform over the city.
  double venue_centre_bias = 0.7;
  double centre_spread = 2500.0;
  // Venue choice weight exp(-d / distance_decay) from the user's home.
  double distance_decay = 3000.0;

  // Non-cultural check-ins around each user's home and work location.
  std::size_t home_checkins = 30;
  std::size_t work_checkins = 10;
  double home_spread = 200.0;
  double work_spread = 200.0;

  int year = 2017;
  std::int32_t tz_offset = 8 * 3600;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthCheckin {
  CheckIn row;
  int pattern = -1;  // planted pattern; -1 for noise and non-cultural rows
  bool cultural = false;
};

struct SynthUser {
  std::string id;
  int pattern = 0;  // dominant planted pattern
  std::vector<double> mixture;
  ProjectedPoint home;
  ProjectedPoint work;
};

struct SynthVenue {
  std::string id;
  std::string category;
  int pattern = 0;
  ProjectedPoint location;
  GeoPoint geo;
};

struct SynthTimeProfile {
  std::vector<int> hours;   // peak hours 0..23
  std::vector<int> days;    // peak ISO weekdays 1..7
  std::vector<int> months;  // peak months 1..12
};

struct SynthCorpus {
  SynthSpec spec;
  std::vector<std::string> categories;             // cultural, pattern-major
  std::vector<std::vector<double>> category_dist;  // per pattern over categories
  std::vector<SynthTimeProfile> time_profiles;
  std::vector<SynthUser> users;
  std::vector<SynthVenue> venues;
  std::vector<SynthCheckin> checkins;

  std::vector<CheckIn> rows() const;
};

// Deterministic for a given spec (seed included).
SynthCorpus generate(const SynthSpec& spec);

// Writes checkins.csv (ingest schema), cultural_categories.txt, and the
// ground-truth sidecars truth_users.csv, truth_venues.csv,
// truth_categories.csv and truth_times.csv into dir.
void write_synth(const SynthCorpus& corpus, const std::filesystem::path& dir);

// Probability that one time component falls in a peak set of size `peak`
// out of `range` values.
double peak_share(double concentration, std::size_t peak, std::size_t range);

}  // namespace urbanpat
