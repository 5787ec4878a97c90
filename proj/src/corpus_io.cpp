// Apache License, Version 2.0, refer to LICENSE.txt

#include <istream>
#include <ostream>

#include "urbanpat/errors.hpp"
#include "urbanpat/ingest.hpp"
#include "urbanpat/text_io.hpp"

namespace urbanpat {

namespace {

constexpr std::string_view kMagic = "urbanpat-corpus 1";

std::size_t expect_section(std::istream& in, std::string_view name) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("corpus file truncated before " + std::string(name));
  const auto space = line.find(' ');
  if (space == std::string::npos || line.substr(0, space) != name) {
    throw DataError("corpus file: expected section '" + std::string(name) + "'");
  }
  const auto n = parse_int(std::string_view(line).substr(space + 1));
  if (!n || *n < 0) throw DataError("corpus file: bad count for " + std::string(name));
  return static_cast<std::size_t>(*n);
}

std::vector<std::string> expect_row(std::istream& in, std::size_t width) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("corpus file truncated");
  auto fields = split_csv_line(line);
  if (fields.size() != width) throw DataError("corpus file: malformed row '" + line + "'");
  return fields;
}

std::uint32_t as_index(const std::string& s) {
  const auto v = parse_int(s);
  if (!v || *v < 0 || *v > UINT32_MAX) throw DataError("corpus file: bad index '" + s + "'");
  return static_cast<std::uint32_t>(*v);
}

double as_double(const std::string& s) {
  const auto v = parse_double(s);
  if (!v) throw DataError("corpus file: bad number '" + s + "'");
  return *v;
}

std::int64_t as_int(const std::string& s) {
  const auto v = parse_int(s);
  if (!v) throw DataError("corpus file: bad integer '" + s + "'");
  return *v;
}

}  // namespace

void save_corpus(const Corpus& corpus, std::ostream& out) {
  out << kMagic << '\n';
  out << "hours " << csv_escape(corpus.hours.describe()) << '\n';
  out << "tz_offset " << corpus.tz_offset << '\n';
  out << "reference " << format_double(corpus.reference.lat) << ','
      << format_double(corpus.reference.lon) << '\n';
  out << "users " << corpus.users.size() << '\n';
  for (const auto& u : corpus.users.keys()) out << csv_escape(u) << '\n';
  out << "categories " << corpus.categories.size() << '\n';
  for (const auto& c : corpus.categories.keys()) out << csv_escape(c) << '\n';
  out << "time_tokens " << corpus.time_tokens.size() << '\n';
  for (auto t : corpus.time_tokens.keys()) out << t << '\n';
  out << "venues " << corpus.venues.size() << '\n';
  for (std::size_t v = 0; v < corpus.venues.size(); ++v) {
    const auto cat = corpus.venue_category[v];
    out << csv_escape(corpus.venues.at(static_cast<std::uint32_t>(v))) << ','
        << format_double(corpus.venue_locations[v].lat) << ','
        << format_double(corpus.venue_locations[v].lon) << ','
        << (cat == Corpus::kNoCategory ? std::string("-1") : std::to_string(cat))
        << '\n';
  }
  out << "events " << corpus.events.size() << '\n';
  for (const auto& e : corpus.events) {
    out << e.user << ',' << e.time << ',' << e.category << ',' << e.venue << ','
        << format_double(e.lat) << ',' << format_double(e.lon) << ','
        << e.timestamp << '\n';
  }
  out << "side_events " << corpus.side_events.size() << '\n';
  for (const auto& e : corpus.side_events) {
    out << e.user << ',' << e.venue << ',' << format_double(e.lat) << ','
        << format_double(e.lon) << ',' << e.timestamp << '\n';
  }
}

Corpus load_corpus(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw DataError("not a corpus file (missing '" + std::string(kMagic) + "' header)");
  }
  Corpus corpus;
  auto keyed = [&](std::string_view key) {
    if (!std::getline(in, line) || line.rfind(std::string(key) + " ", 0) != 0) {
      throw DataError("corpus file: expected '" + std::string(key) + "'");
    }
    return line.substr(key.size() + 1);
  };
  corpus.hours = HourGrouping::parse(split_csv_line(keyed("hours")).at(0));
  corpus.tz_offset = static_cast<std::int32_t>(as_int(keyed("tz_offset")));
  const auto ref = split_csv_line(keyed("reference"));
  if (ref.size() != 2) throw DataError("corpus file: bad reference");
  corpus.reference = {as_double(ref[0]), as_double(ref[1])};

  for (std::size_t n = expect_section(in, "users"), i = 0; i < n; ++i) {
    corpus.users.intern(expect_row(in, 1)[0]);
  }
  for (std::size_t n = expect_section(in, "categories"), i = 0; i < n; ++i) {
    corpus.categories.intern(expect_row(in, 1)[0]);
  }
  for (std::size_t n = expect_section(in, "time_tokens"), i = 0; i < n; ++i) {
    corpus.time_tokens.intern(as_index(expect_row(in, 1)[0]));
  }
  for (std::size_t n = expect_section(in, "venues"), i = 0; i < n; ++i) {
    const auto f = expect_row(in, 4);
    corpus.venues.intern(f[0]);
    corpus.venue_locations.push_back({as_double(f[1]), as_double(f[2])});
    corpus.venue_category.push_back(f[3] == "-1" ? Corpus::kNoCategory : as_index(f[3]));
  }
  const std::size_t users = corpus.users.size();
  std::vector<std::size_t> counts(users + 1, 0);
  for (std::size_t n = expect_section(in, "events"), i = 0; i < n; ++i) {
    const auto f = expect_row(in, 7);
    Event e{as_index(f[0]), as_index(f[1]), as_index(f[2]), as_index(f[3]),
            as_double(f[4]), as_double(f[5]), as_int(f[6])};
    if (e.user >= users) throw DataError("corpus file: event user out of range");
    ++counts[e.user + 1];
    corpus.events.push_back(e);
  }
  std::vector<std::size_t> side_counts(users + 1, 0);
  for (std::size_t n = expect_section(in, "side_events"), i = 0; i < n; ++i) {
    const auto f = expect_row(in, 5);
    SideEvent e{as_index(f[0]), as_index(f[1]), as_double(f[2]), as_double(f[3]),
                as_int(f[4])};
    if (e.user >= users) throw DataError("corpus file: side event user out of range");
    ++side_counts[e.user + 1];
    corpus.side_events.push_back(e);
  }
  for (std::size_t u = 0; u < users; ++u) {
    counts[u + 1] += counts[u];
    side_counts[u + 1] += side_counts[u];
  }
  corpus.user_offsets = std::move(counts);
  corpus.side_offsets = std::move(side_counts);
  try {
    corpus.validate();
  } catch (const InvariantError& e) {
    throw DataError(std::string("corpus file is inconsistent: ") + e.what());
  }
  return corpus;
}

}  // namespace urbanpat
