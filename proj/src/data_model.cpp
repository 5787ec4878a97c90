// Apache License, Version 2.0, refer to LICENSE.txt

#include "urbanpat/data_model.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "urbanpat/errors.hpp"

namespace urbanpat {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

constexpr std::array<const char*, 12> kMonthNames = {
    "Jan", "Feb", "Mar", "Apr", "May", "Jun",
    "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
constexpr std::array<const char*, 7> kDayNames = {"Mon", "Tue", "Wed", "Thu",
                                                  "Fri", "Sat", "Sun"};

}  // namespace

double squared_distance(ProjectedPoint a, ProjectedPoint b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

double distance(ProjectedPoint a, ProjectedPoint b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

bool valid_coordinate(double lat, double lon) {
  return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 &&
         lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
}

LocalProjection::LocalProjection(GeoPoint reference)
    : reference_(reference), cos_ref_(std::cos(reference.lat * kDegToRad)) {
  if (!valid_coordinate(reference.lat, reference.lon) ||
      std::abs(reference.lat) >= 89.0) {
    throw ConfigError("projection reference out of range");
  }
}

ProjectedPoint LocalProjection::project(GeoPoint p) const {
  if (!valid_coordinate(p.lat, p.lon)) {
    throw DataError("coordinate out of range");
  }
  double dlon = p.lon - reference_.lon;
  if (dlon > 180.0) dlon -= 360.0;
  if (dlon < -180.0) dlon += 360.0;
  return {kEarthRadiusMeters * cos_ref_ * dlon * kDegToRad,
          kEarthRadiusMeters * (p.lat - reference_.lat) * kDegToRad};
}

GeoPoint LocalProjection::unproject(ProjectedPoint p) const {
  double lon = reference_.lon + p.x / (kEarthRadiusMeters * cos_ref_) / kDegToRad;
  if (lon > 180.0) lon -= 360.0;
  if (lon < -180.0) lon += 360.0;
  return {reference_.lat + p.y / kEarthRadiusMeters / kDegToRad, lon};
}

ProjectedPoint project(double lat, double lon, GeoPoint reference) {
  return LocalProjection(reference).project({lat, lon});
}

HourGrouping HourGrouping::hourly() {
  std::vector<int> starts(24);
  for (int h = 0; h < 24; ++h) starts[h] = h;
  return from_starts(std::move(starts));
}

HourGrouping HourGrouping::five_slot() {
  return from_starts({0, 6, 11, 14, 19},
                     {"night", "morning", "noon", "afternoon", "evening"});
}

HourGrouping HourGrouping::from_starts(std::vector<int> starts,
                                       std::vector<std::string> names) {
  if (starts.empty() || starts.front() != 0) {
    throw ConfigError("hour slots must start at hour 0");
  }
  for (std::size_t i = 1; i < starts.size(); ++i) {
    if (starts[i] <= starts[i - 1] || starts[i] >= 24) {
      throw ConfigError("hour slot starts must be increasing and below 24");
    }
  }
  if (names.empty()) {
    for (int s : starts) names.push_back(std::to_string(s));
  }
  if (names.size() != starts.size()) {
    throw ConfigError("hour slot names do not match slot count");
  }
  HourGrouping g;
  g.starts_ = std::move(starts);
  g.names_ = std::move(names);
  int slot = 0;
  for (int h = 0; h < 24; ++h) {
    if (slot + 1 < g.slots() && h >= g.starts_[slot + 1]) ++slot;
    g.slot_of_hour_[h] = slot;
  }
  return g;
}

int HourGrouping::slot_of(int hour) const {
  if (hour < 0 || hour > 23) throw DataError("hour out of range");
  return slot_of_hour_[hour];
}

const std::string& HourGrouping::slot_name(int slot) const {
  return names_.at(static_cast<std::size_t>(slot));
}

std::string HourGrouping::describe() const {
  if (*this == hourly()) return "24";
  if (*this == five_slot()) return "5";
  std::string out;
  for (std::size_t i = 0; i < starts_.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(starts_[i]);
  }
  return out;
}

HourGrouping HourGrouping::parse(std::string_view text) {
  if (text == "24") return hourly();
  if (text == "5") return five_slot();
  std::vector<int> starts;
  std::stringstream ss{std::string(text)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      starts.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad hour grouping '" + std::string(text) +
                        "': expected 24, 5, or comma-separated start hours");
    }
  }
  return from_starts(std::move(starts));
}

std::uint32_t TemporalToken::id(int slots) const {
  return static_cast<std::uint32_t>(((month - 1) * 7 + (day_of_week - 1)) *
                                        slots +
                                    hour_slot);
}

TemporalToken TemporalToken::from_id(std::uint32_t id, int slots) {
  const auto s = static_cast<std::uint32_t>(slots);
  TemporalToken t;
  t.hour_slot = static_cast<int>(id % s);
  const std::uint32_t rest = id / s;
  t.day_of_week = static_cast<int>(rest % 7) + 1;
  t.month = static_cast<int>(rest / 7) + 1;
  return t;
}

TemporalToken make_temporal_token(std::int64_t timestamp,
                                  std::int32_t tz_offset_seconds,
                                  const HourGrouping& hours) {
  if (timestamp < kMinTimestamp || timestamp > kMaxTimestamp) {
    throw DataError("invalid timestamp");
  }
  using namespace std::chrono;
  const std::int64_t local = timestamp + tz_offset_seconds;
  const auto tp = sys_seconds{seconds{local}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const weekday wd{day};
  const auto hour = static_cast<int>(duration_cast<std::chrono::hours>(tp - day).count());
  TemporalToken t;
  t.month = static_cast<int>(static_cast<unsigned>(ymd.month()));
  t.day_of_week = static_cast<int>(wd.iso_encoding());
  t.hour_slot = hours.slot_of(hour);
  return t;
}

std::string token_label(const TemporalToken& token, const HourGrouping& hours) {
  std::string label = kMonthNames.at(token.month - 1);
  label += kDayNames.at(token.day_of_week - 1);
  if (hours.slots() == 24 && hours == HourGrouping::hourly()) {
    label += std::to_string(token.hour_slot);
  } else {
    label += '-';
    label += hours.slot_name(token.hour_slot);
  }
  return label;
}

std::span<const Event> Corpus::user_events(std::size_t user) const {
  return std::span<const Event>(events).subspan(
      user_offsets[user], user_offsets[user + 1] - user_offsets[user]);
}

std::span<const SideEvent> Corpus::user_side_events(std::size_t user) const {
  return std::span<const SideEvent>(side_events)
      .subspan(side_offsets[user], side_offsets[user + 1] - side_offsets[user]);
}

TemporalToken Corpus::token(std::size_t time_index) const {
  return TemporalToken::from_id(time_tokens.at(static_cast<std::uint32_t>(time_index)),
                                hours.slots());
}

std::string Corpus::time_label(std::size_t time_index) const {
  return token_label(token(time_index), hours);
}

void Corpus::validate(std::size_t min_checkins) const {
  const std::size_t u_count = users.size();
  if (user_offsets.size() != u_count + 1 || side_offsets.size() != u_count + 1) {
    throw InvariantError("corpus offsets do not match user count");
  }
  if (user_offsets.front() != 0 || user_offsets.back() != events.size() ||
      side_offsets.front() != 0 || side_offsets.back() != side_events.size()) {
    throw InvariantError("corpus offsets do not cover the event lists");
  }
  if (venue_locations.size() != venues.size() ||
      venue_category.size() != venues.size()) {
    throw InvariantError("venue tables do not match venue count");
  }
  for (std::size_t u = 0; u < u_count; ++u) {
    if (user_offsets[u] > user_offsets[u + 1] ||
        side_offsets[u] > side_offsets[u + 1]) {
      throw InvariantError("corpus offsets are not monotone");
    }
    const auto evs = user_events(u);
    if (evs.size() < min_checkins) {
      throw InvariantError("user below the minimum check-in count");
    }
    for (std::size_t i = 0; i < evs.size(); ++i) {
      const Event& e = evs[i];
      if (e.user != u || e.time >= time_tokens.size() ||
          e.category >= categories.size() || e.venue >= venues.size()) {
        throw InvariantError("event index out of range");
      }
      if (i > 0 && evs[i - 1].timestamp > e.timestamp) {
        throw InvariantError("user events not in chronological order");
      }
    }
    const auto side = user_side_events(u);
    for (std::size_t i = 0; i < side.size(); ++i) {
      if (side[i].user != u || side[i].venue >= venues.size()) {
        throw InvariantError("side event index out of range");
      }
      if (i > 0 && side[i - 1].timestamp > side[i].timestamp) {
        throw InvariantError("side events not in chronological order");
      }
    }
  }
}

}  // namespace urbanpat
