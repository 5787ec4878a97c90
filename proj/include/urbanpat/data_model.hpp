// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace urbanpat {

inline constexpr double kEarthRadiusMeters = 6371008.8;

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

// Meters east (x) and north (y) of a projection reference.
struct ProjectedPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const ProjectedPoint&, const ProjectedPoint&) = default;
};

double distance(ProjectedPoint a, ProjectedPoint b);
double squared_distance(ProjectedPoint a, ProjectedPoint b);

bool valid_coordinate(double lat, double lon);

// Local equirectangular projection about a fixed reference point.
class LocalProjection {
 public:
  explicit LocalProjection(GeoPoint reference);

  ProjectedPoint project(GeoPoint p) const;
  GeoPoint unproject(ProjectedPoint p) const;
  GeoPoint reference() const { return reference_; }

 private:
  GeoPoint reference_;
  double cos_ref_;
};

ProjectedPoint project(double lat, double lon, GeoPoint reference);

// Maps the 24 hours of the day onto H contiguous slots.
class HourGrouping {
 public:
  // One slot per hour, labelled "0".."23".
  static HourGrouping hourly();
  // night 0-6, morning 6-11, noon 11-14, afternoon 14-19, evening 19-24.
  static HourGrouping five_slot();
  // Slot i covers [starts[i], starts[i+1]); starts[0] must be 0 and the list
  // strictly increasing below 24. Names default to the start hour.
  static HourGrouping from_starts(std::vector<int> starts,
                                  std::vector<std::string> names = {});

  int slots() const { return static_cast<int>(names_.size()); }
  int slot_of(int hour) const;
  const std::string& slot_name(int slot) const;
  std::span<const int> starts() const { return starts_; }
  std::span<const std::string> names() const { return names_; }

  // Compact description used in config files and artifact headers:
  // "24", "5", or "0,6,11,14,19".
  std::string describe() const;
  static HourGrouping parse(std::string_view text);

  friend bool operator==(const HourGrouping& a, const HourGrouping& b) {
    return a.starts_ == b.starts_ && a.names_ == b.names_;
  }

 private:
  std::vector<int> starts_;
  std::vector<std::string> names_;
  std::array<int, 24> slot_of_hour_{};
};

// (month, day-of-week, hour-slot) label of a check-in in local time.
struct TemporalToken {
  int month = 1;        // 1..12
  int day_of_week = 1;  // 1..7, Monday = 1
  int hour_slot = 0;    // 0..H-1

  std::uint32_t id(int slots) const;
  static TemporalToken from_id(std::uint32_t id, int slots);

  friend auto operator<=>(const TemporalToken&, const TemporalToken&) = default;
};

// Throws DataError for timestamps outside the supported calendar range.
TemporalToken make_temporal_token(std::int64_t timestamp,
                                  std::int32_t tz_offset_seconds,
                                  const HourGrouping& hours);

// "JulFri20" for hourly slots, "JulFri-evening" for named slots.
std::string token_label(const TemporalToken& token, const HourGrouping& hours);

// Smallest and largest epoch seconds accepted (years 1900..2200).
inline constexpr std::int64_t kMinTimestamp = -2208988800LL;
inline constexpr std::int64_t kMaxTimestamp = 7258118400LL;

// Dense index assignment in first-seen order.
template <class Key>
class Interner {
 public:
  std::uint32_t intern(const Key& key) {
    auto [it, inserted] =
        index_.try_emplace(key, static_cast<std::uint32_t>(keys_.size()));
    if (inserted) keys_.push_back(key);
    return it->second;
  }

  std::optional<std::uint32_t> find(const Key& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const Key& at(std::uint32_t index) const { return keys_.at(index); }
  std::size_t size() const { return keys_.size(); }
  std::span<const Key> keys() const { return keys_; }

 private:
  std::vector<Key> keys_;
  std::unordered_map<Key, std::uint32_t> index_;
};

// One validated visit. timestamp is epoch seconds UTC.
struct CheckIn {
  std::string user_id;
  std::string venue_id;
  std::string category_id;
  double lat = 0.0;
  double lon = 0.0;
  std::int64_t timestamp = 0;
};

// A cultural check-in inside a corpus, with every field interned.
struct Event {
  std::uint32_t user = 0;
  std::uint32_t time = 0;      // index into Corpus::time_tokens
  std::uint32_t category = 0;  // index into Corpus::categories
  std::uint32_t venue = 0;     // index into Corpus::venues
  double lat = 0.0;
  double lon = 0.0;
  std::int64_t timestamp = 0;
};

// Non-cultural check-in of a retained user. Only its location matters
// downstream (activity-range clustering uses every check-in of a user).
struct SideEvent {
  std::uint32_t user = 0;
  std::uint32_t venue = 0;
  double lat = 0.0;
  double lon = 0.0;
  std::int64_t timestamp = 0;
};

// Filtered, interned check-in data. Events are grouped by user in user-index
// order and chronological within each user; the same holds for side events.
struct Corpus {
  Interner<std::string> users;
  Interner<std::string> categories;
  Interner<std::string> venues;
  Interner<std::uint32_t> time_tokens;  // TemporalToken ids, observed only

  HourGrouping hours = HourGrouping::hourly();
  std::int32_t tz_offset = 0;
  GeoPoint reference;

  std::vector<Event> events;
  std::vector<std::size_t> user_offsets;  // size users+1, into events
  std::vector<SideEvent> side_events;
  std::vector<std::size_t> side_offsets;  // size users+1, into side_events

  std::vector<GeoPoint> venue_locations;  // first observed location per venue
  std::vector<std::uint32_t> venue_category;  // category of each venue's
                                              // cultural check-ins, or
                                              // kNoCategory
  static constexpr std::uint32_t kNoCategory = UINT32_MAX;

  std::size_t user_count() const { return users.size(); }
  std::size_t category_count() const { return categories.size(); }
  std::size_t time_count() const { return time_tokens.size(); }
  std::size_t event_count() const { return events.size(); }

  std::span<const Event> user_events(std::size_t user) const;
  std::span<const SideEvent> user_side_events(std::size_t user) const;

  TemporalToken token(std::size_t time_index) const;
  std::string time_label(std::size_t time_index) const;

  // Throws InvariantError on index bounds, ordering, or offset violations.
  void validate(std::size_t min_checkins = 1) const;
};

}  // namespace urbanpat
