// Apache License, Version 2.0, refer to LICENSE.txt

#include "urbanpat/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include "urbanpat/errors.hpp"
#include "urbanpat/text_io.hpp"

namespace urbanpat {

namespace {

constexpr std::array<std::string_view, 6> kColumns = {
    "user_id", "venue_id", "category", "lat", "lon", "timestamp"};

bool parse_fixed_digits(std::string_view text, std::size_t pos, std::size_t n,
                        int& out) {
  if (pos + n > text.size()) return false;
  int value = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (text[i] < '0' || text[i] > '9') return false;
    value = value * 10 + (text[i] - '0');
  }
  out = value;
  return true;
}

// Accumulates the corpus for retained users; shared by the in-memory and the
// streaming paths so both produce identical corpora for identical input.
class CorpusAssembler {
 public:
  explicit CorpusAssembler(const IngestConfig& config) : config_(config) {
    corpus_.hours = config.hours;
    corpus_.tz_offset = config.tz_offset;
    corpus_.reference = config.reference;
  }

  void add(const CheckIn& c) {
    if (!valid_coordinate(c.lat, c.lon)) {
      throw DataError("check-in of user " + c.user_id + " has coordinates out of range");
    }
    const std::uint32_t user = corpus_.users.intern(c.user_id);
    if (user == per_user_.size()) per_user_.emplace_back();
    const std::uint32_t venue = corpus_.venues.intern(c.venue_id);
    if (venue == corpus_.venue_locations.size()) {
      corpus_.venue_locations.push_back({c.lat, c.lon});
      corpus_.venue_category.push_back(Corpus::kNoCategory);
    }
    if (config_.is_cultural(c.category_id)) {
      const std::uint32_t category = corpus_.categories.intern(c.category_id);
      if (corpus_.venue_category[venue] == Corpus::kNoCategory) {
        corpus_.venue_category[venue] = category;
      }
      const TemporalToken token =
          make_temporal_token(c.timestamp, config_.tz_offset, config_.hours);
      const std::uint32_t time =
          corpus_.time_tokens.intern(token.id(config_.hours.slots()));
      per_user_[user].events.push_back(
          {user, time, category, venue, c.lat, c.lon, c.timestamp});
    } else {
      per_user_[user].side.push_back({user, venue, c.lat, c.lon, c.timestamp});
    }
  }

  Corpus finish() {
    corpus_.user_offsets.assign(1, 0);
    corpus_.side_offsets.assign(1, 0);
    for (auto& lists : per_user_) {
      std::stable_sort(lists.events.begin(), lists.events.end(),
                       [](const Event& a, const Event& b) {
                         return a.timestamp < b.timestamp;
                       });
      std::stable_sort(lists.side.begin(), lists.side.end(),
                       [](const SideEvent& a, const SideEvent& b) {
                         return a.timestamp < b.timestamp;
                       });
      corpus_.events.insert(corpus_.events.end(), lists.events.begin(),
                            lists.events.end());
      corpus_.side_events.insert(corpus_.side_events.end(), lists.side.begin(),
                                 lists.side.end());
      corpus_.user_offsets.push_back(corpus_.events.size());
      corpus_.side_offsets.push_back(corpus_.side_events.size());
    }
    per_user_.clear();
    corpus_.validate(config_.min_checkins);
    return std::move(corpus_);
  }

 private:
  struct UserLists {
    std::vector<Event> events;
    std::vector<SideEvent> side;
  };
  const IngestConfig& config_;
  Corpus corpus_;
  std::vector<UserLists> per_user_;
};

void count_cultural(std::unordered_map<std::string, std::size_t>& counts,
                    const CheckIn& c, const IngestConfig& config) {
  auto& n = counts[c.user_id];
  if (config.is_cultural(c.category_id)) ++n;
}

}  // namespace

bool IngestConfig::is_cultural(std::string_view category) const {
  if (!category_whitelist) return true;
  return category_whitelist->find(std::string(category)) !=
         category_whitelist->end();
}

void IngestConfig::validate() const {
  if (min_checkins < 1) throw ConfigError("min_checkins must be at least 1");
  if (tz_offset < -14 * 3600 || tz_offset > 14 * 3600) {
    throw ConfigError("tz_offset must be within +-14 hours");
  }
  if (!valid_coordinate(reference.lat, reference.lon)) {
    throw ConfigError("reference point out of range");
  }
  if (category_whitelist && category_whitelist->empty()) {
    throw ConfigError("category whitelist is empty");
  }
}

std::string_view reject_reason_text(RejectReason reason) {
  switch (reason) {
    case RejectReason::kFieldCount: return "wrong field count";
    case RejectReason::kEmptyField: return "empty field";
    case RejectReason::kBadNumber: return "malformed number";
    case RejectReason::kCoordinateOutOfRange: return "coordinate out of range";
    case RejectReason::kInvalidTimestamp: return "invalid timestamp";
  }
  return "unknown";
}

std::size_t RejectionReport::rejected() const {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  return total;
}

void RejectionReport::write(std::ostream& out) const {
  out << "rows read: " << rows_read << '\n';
  out << "rows rejected: " << rejected() << '\n';
  for (std::size_t i = 0; i < kRejectReasonCount; ++i) {
    out << reject_reason_text(static_cast<RejectReason>(i)) << ": " << counts[i]
        << '\n';
  }
}

std::optional<std::int64_t> parse_rfc3339(std::string_view text) {
  text = trim(text);
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (text.size() < 19 || !parse_fixed_digits(text, 0, 4, year) ||
      text[4] != '-' || !parse_fixed_digits(text, 5, 2, month) ||
      text[7] != '-' || !parse_fixed_digits(text, 8, 2, day) ||
      (text[10] != 'T' && text[10] != 't' && text[10] != ' ') ||
      !parse_fixed_digits(text, 11, 2, hour) || text[13] != ':' ||
      !parse_fixed_digits(text, 14, 2, minute) || text[16] != ':' ||
      !parse_fixed_digits(text, 17, 2, second)) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    const std::size_t digits_start = pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    if (pos == digits_start) return std::nullopt;
  }
  if (pos >= text.size()) return std::nullopt;
  int offset = 0;
  if (text[pos] == 'Z' || text[pos] == 'z') {
    ++pos;
  } else if (text[pos] == '+' || text[pos] == '-') {
    const int sign = text[pos] == '-' ? -1 : 1;
    int oh = 0, om = 0;
    if (!parse_fixed_digits(text, pos + 1, 2, oh)) return std::nullopt;
    std::size_t mpos = pos + 3;
    if (mpos < text.size() && text[mpos] == ':') ++mpos;
    if (!parse_fixed_digits(text, mpos, 2, om)) return std::nullopt;
    if (oh > 23 || om > 59) return std::nullopt;
    offset = sign * (oh * 3600 + om * 60);
    pos = mpos + 2;
  } else {
    return std::nullopt;
  }
  if (pos != text.size()) return std::nullopt;
  if (hour > 23 || minute > 59 || second > 60) return std::nullopt;

  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year},
                           std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) return std::nullopt;
  const auto days_since_epoch = sys_days{ymd}.time_since_epoch().count();
  const std::int64_t local = static_cast<std::int64_t>(days_since_epoch) * 86400 +
                             hour * 3600 + minute * 60 + second;
  const std::int64_t ts = local - offset;
  if (ts < kMinTimestamp || ts > kMaxTimestamp) return std::nullopt;
  return ts;
}

std::string format_rfc3339(std::int64_t timestamp, std::int32_t tz_offset) {
  using namespace std::chrono;
  const std::int64_t local = timestamp + tz_offset;
  const sys_seconds tp{seconds{local}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const auto secs = (tp - day).count();
  char buf[40];
  const int off = tz_offset < 0 ? -tz_offset : tz_offset;
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d%c%02d:%02d",
                static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()),
                static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60),
                static_cast<int>(secs % 60), tz_offset < 0 ? '-' : '+',
                off / 3600, off / 60 % 60);
  return buf;
}

CheckinReader::CheckinReader(const std::filesystem::path& path) : in_(path) {
  if (!in_) throw DataError("cannot open check-in file " + path.string());
  if (!std::getline(in_, line_)) {
    throw DataError("check-in file " + path.string() + " has no header");
  }
  const auto header = split_csv_line(line_);
  width_ = header.size();
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    auto it = std::find_if(header.begin(), header.end(), [&](const std::string& h) {
      return trim(h) == kColumns[c];
    });
    if (it == header.end()) {
      throw DataError("check-in header lacks column '" + std::string(kColumns[c]) +
                      "'");
    }
    column_[c] = static_cast<std::size_t>(it - header.begin());
  }
}

bool CheckinReader::next(CheckIn& out) {
  while (std::getline(in_, line_)) {
    if (trim(line_).empty()) continue;
    ++report_.rows_read;
    auto fields = split_csv_line(line_);
    if (fields.size() != width_) {
      report_.add(RejectReason::kFieldCount);
      continue;
    }
    bool empty = false;
    for (auto c : column_) empty = empty || trim(fields[c]).empty();
    if (empty) {
      report_.add(RejectReason::kEmptyField);
      continue;
    }
    const auto lat = parse_double(fields[column_[3]]);
    const auto lon = parse_double(fields[column_[4]]);
    if (!lat || !lon || !std::isfinite(*lat) || !std::isfinite(*lon)) {
      report_.add(RejectReason::kBadNumber);
      continue;
    }
    if (!valid_coordinate(*lat, *lon)) {
      report_.add(RejectReason::kCoordinateOutOfRange);
      continue;
    }
    const auto ts = parse_rfc3339(fields[column_[5]]);
    if (!ts) {
      report_.add(RejectReason::kInvalidTimestamp);
      continue;
    }
    out.user_id = std::string(trim(fields[column_[0]]));
    out.venue_id = std::string(trim(fields[column_[1]]));
    out.category_id = std::string(trim(fields[column_[2]]));
    out.lat = *lat;
    out.lon = *lon;
    out.timestamp = *ts;
    return true;
  }
  return false;
}

LoadResult load_checkins(const std::filesystem::path& path,
                         const IngestConfig& config) {
  config.validate();
  CheckinReader reader(path);
  LoadResult result;
  CheckIn c;
  while (reader.next(c)) result.checkins.push_back(c);
  result.report = reader.report();
  return result;
}

namespace {

template <class ForEachRow>
Corpus assemble(const IngestConfig& config, ForEachRow&& for_each_row,
                IngestSummary* summary) {
  config.validate();
  std::unordered_map<std::string, std::size_t> cultural_counts;
  for_each_row([&](const CheckIn& c) { count_cultural(cultural_counts, c, config); });

  IngestSummary local;
  local.users_seen = cultural_counts.size();
  for (const auto& [user, n] : cultural_counts) {
    if (n >= config.min_checkins) ++local.users_retained;
  }
  if (local.users_retained == 0) {
    throw DataError("no user has at least " + std::to_string(config.min_checkins) +
                    " cultural check-ins; the corpus would be empty");
  }

  CorpusAssembler assembler(config);
  for_each_row([&](const CheckIn& c) {
    const bool cultural = config.is_cultural(c.category_id);
    if (!cultural) ++local.non_cultural;
    if (cultural_counts.at(c.user_id) >= config.min_checkins) {
      assembler.add(c);
    } else if (cultural) {
      ++local.dropped_cultural;
    }
  });
  Corpus corpus = assembler.finish();
  if (summary) {
    local.report = summary->report;
    *summary = local;
  }
  return corpus;
}

}  // namespace

Corpus filter_fans(std::span<const CheckIn> checkins, const IngestConfig& config,
                   IngestSummary* summary) {
  if (checkins.empty()) throw DataError("no check-ins to filter");
  if (summary) summary->report.rows_read = checkins.size();
  return assemble(
      config,
      [&](auto&& visit) {
        for (const auto& c : checkins) visit(c);
      },
      summary);
}

Corpus build_corpus(const std::filesystem::path& path, const IngestConfig& config,
                    IngestSummary* summary) {
  RejectionReport report;
  Corpus corpus = assemble(
      config,
      [&](auto&& visit) {
        CheckinReader reader(path);
        CheckIn c;
        while (reader.next(c)) visit(c);
        report = reader.report();
      },
      summary);
  if (summary) summary->report = report;
  return corpus;
}

std::uint64_t CalendarHeatmap::total() const {
  std::uint64_t sum = 0;
  for (const auto& row : rows) {
    for (auto v : row) sum += v;
  }
  return sum;
}

std::uint64_t CalendarHeatmap::at(std::chrono::sys_days day, int hour) const {
  const auto offset = (day - first_day).count();
  if (offset < 0 || static_cast<std::size_t>(offset) >= rows.size()) return 0;
  return rows[static_cast<std::size_t>(offset)].at(static_cast<std::size_t>(hour));
}

CalendarHeatmap calendar_heatmap(const Corpus& corpus) {
  using namespace std::chrono;
  CalendarHeatmap heatmap;
  if (corpus.events.empty()) return heatmap;
  auto local_day = [&](std::int64_t ts) {
    return floor<days>(sys_seconds{seconds{ts + corpus.tz_offset}});
  };
  auto first = local_day(corpus.events.front().timestamp);
  auto last = first;
  for (const auto& e : corpus.events) {
    const auto d = local_day(e.timestamp);
    first = std::min(first, d);
    last = std::max(last, d);
  }
  heatmap.first_day = first;
  heatmap.rows.assign(static_cast<std::size_t>((last - first).count() + 1), {});
  for (const auto& e : corpus.events) {
    const sys_seconds tp{seconds{e.timestamp + corpus.tz_offset}};
    const auto d = floor<days>(tp);
    const auto hour = duration_cast<hours>(tp - d).count();
    ++heatmap.rows[static_cast<std::size_t>((d - first).count())]
                  [static_cast<std::size_t>(hour)];
  }
  return heatmap;
}

void write_heatmap_csv(std::ostream& out, const CalendarHeatmap& heatmap) {
  using namespace std::chrono;
  out << "date";
  for (int h = 0; h < 24; ++h) out << ",h" << h;
  out << '\n';
  for (std::size_t i = 0; i < heatmap.rows.size(); ++i) {
    const year_month_day ymd{heatmap.first_day + days{static_cast<int>(i)}};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    out << buf;
    for (auto v : heatmap.rows[i]) out << ',' << v;
    out << '\n';
  }
}

}  // namespace urbanpat
