// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "urbanpat/data_model.hpp"

namespace urbanpat {

struct IngestConfig {
  std::size_t min_checkins = 20;
  // Cultural categories. Unset means every category counts as cultural.
  std::optional<std::set<std::string>> category_whitelist;
  std::int32_t tz_offset = 0;  // seconds east of UTC
  HourGrouping hours = HourGrouping::hourly();
  GeoPoint reference{39.9042, 116.4074};

  bool is_cultural(std::string_view category) const;
  void validate() const;
};

enum class RejectReason : std::size_t {
  kFieldCount,
  kEmptyField,
  kBadNumber,
  kCoordinateOutOfRange,
  kInvalidTimestamp,
};
inline constexpr std::size_t kRejectReasonCount = 5;

std::string_view reject_reason_text(RejectReason reason);

struct RejectionReport {
  std::size_t rows_read = 0;
  std::array<std::size_t, kRejectReasonCount> counts{};

  void add(RejectReason reason) { ++counts[static_cast<std::size_t>(reason)]; }
  std::size_t count(RejectReason reason) const {
    return counts[static_cast<std::size_t>(reason)];
  }
  std::size_t rejected() const;
  // One "reason: count" line per reason, preceded by the row total.
  void write(std::ostream& out) const;
};

// Epoch seconds from "YYYY-MM-DDTHH:MM:SS[.frac](Z|+hh:mm|-hh:mm)".
// A space is accepted in place of 'T'.
std::optional<std::int64_t> parse_rfc3339(std::string_view text);
std::string format_rfc3339(std::int64_t timestamp, std::int32_t tz_offset);

// Row-at-a-time reader for the check-in CSV. The header names the columns
// user_id, venue_id, category, lat, lon, timestamp in any order.
class CheckinReader {
 public:
  explicit CheckinReader(const std::filesystem::path& path);

  // Next well-formed row; malformed rows are counted and skipped.
  bool next(CheckIn& out);
  const RejectionReport& report() const { return report_; }

 private:
  std::ifstream in_;
  std::string line_;
  std::array<std::size_t, 6> column_{};
  std::size_t width_ = 0;
  RejectionReport report_;
};

struct LoadResult {
  std::vector<CheckIn> checkins;
  RejectionReport report;
};

LoadResult load_checkins(const std::filesystem::path& path,
                         const IngestConfig& config);

// Per-stage accounting: corpus events = rows_read - rejected - non_cultural
// - dropped_cultural.
struct IngestSummary {
  RejectionReport report;
  std::size_t non_cultural = 0;      // rows outside the whitelist
  std::size_t dropped_cultural = 0;  // cultural rows of users below threshold
  std::size_t users_seen = 0;
  std::size_t users_retained = 0;
};

// Keeps users with at least min_checkins cultural check-ins. All their
// cultural check-ins become events; their other check-ins go to the side
// table. Throws DataError when no user qualifies.
Corpus filter_fans(std::span<const CheckIn> checkins, const IngestConfig& config,
                   IngestSummary* summary = nullptr);

// Two streaming passes over the file: count per user, then materialize the
// retained users only.
Corpus build_corpus(const std::filesystem::path& path, const IngestConfig& config,
                    IngestSummary* summary = nullptr);

// Check-in counts by local date (rows) and hour (columns).
struct CalendarHeatmap {
  std::chrono::sys_days first_day{};
  std::vector<std::array<std::uint64_t, 24>> rows;  // one per day, contiguous

  std::uint64_t total() const;
  std::uint64_t at(std::chrono::sys_days day, int hour) const;
};

CalendarHeatmap calendar_heatmap(const Corpus& corpus);
void write_heatmap_csv(std::ostream& out, const CalendarHeatmap& heatmap);

// Versioned text serialization of a corpus (stage artifact).
void save_corpus(const Corpus& corpus, std::ostream& out);
Corpus load_corpus(std::istream& in);

}  // namespace urbanpat
