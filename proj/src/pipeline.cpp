// Apache License, Version 2.0, refer to LICENSE.txt

#include "urbanpat/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

#include "urbanpat/errors.hpp"
#include "urbanpat/text_io.hpp"

namespace urbanpat {

namespace fs = std::filesystem;

const std::vector<SettingInfo>& setting_keys() {
  static const std::vector<SettingInfo> keys = {
      {"input", "check-in CSV (user_id, venue_id, category, lat, lon, timestamp)"},
      {"run_dir", "directory holding stage artifacts"},
      {"synth_dir", "output directory of the synth stage"},
      {"categories", "comma-separated cultural categories (default: all)"},
      {"categories_file", "file listing cultural categories, one per line"},
      {"min_checkins", "minimum cultural check-ins for a retained user"},
      {"tz_offset", "local time offset in seconds east of UTC"},
      {"hours", "hour slots: 24, 5, or a comma list of slot start hours"},
      {"ref_lat", "projection reference latitude"},
      {"ref_lon", "projection reference longitude"},
      {"topics", "number of patterns K (0 uses the select-k result)"},
      {"alpha", "user-pattern prior (auto = 50/K)"},
      {"beta", "pattern-category prior"},
      {"gamma", "time-pattern prior (auto = 50/K)"},
      {"iterations", "Gibbs sweeps per fit"},
      {"burn_in", "sweeps before samples are collected"},
      {"chains", "seeded chains per K"},
      {"temporal", "true for TLDA, false for plain LDA"},
      {"k_candidates", "comma-separated K values for select-k"},
      {"epsilon", "NPMI smoothing constant"},
      {"tau", "integer NPMI exponent"},
      {"top_venues", "top categories per pattern"},
      {"venue_threshold", "select top categories by probability instead (none = off)"},
      {"top_times", "top time tokens per pattern"},
      {"window", "sliding window length"},
      {"eta", "POPTICS neighbour fraction"},
      {"max_dist", "POPTICS initial reachability"},
      {"min_radius", "activity radius floor in meters"},
      {"cell_size", "grid cell size in meters"},
      {"grid_margin", "extra grid margin in meters"},
      {"sigma_floor", "venue service range floor in meters"},
      {"supply_epsilon", "supply below which DSR is undefined"},
      {"correlation", "cell or user level DSR-travel correlation"},
      {"synth_patterns", "planted pattern count"},
      {"synth_users", "synthetic users"},
      {"synth_checkins_min", "minimum cultural check-ins per user"},
      {"synth_checkins_max", "maximum cultural check-ins per user"},
      {"synth_categories_per_pattern", "categories owned by each pattern"},
      {"synth_venues_per_category", "venues per category"},
      {"synth_category_concentration", "share of check-ins in the pattern's categories"},
      {"synth_time_concentration", "share of each time component in the peak set"},
      {"synth_user_mix", "uniform weight in each user's pattern mixture"},
      {"synth_noise", "share of check-ins with uniform category and time"},
      {"synth_extent", "city side length in meters"},
      {"synth_venue_centre_bias", "share of venues drawn around the city centre"},
      {"synth_centre_spread", "std of the central venue cluster in meters"},
      {"synth_distance_decay", "venue choice decay length in meters"},
      {"synth_home_checkins", "non-cultural check-ins around home"},
      {"synth_work_checkins", "non-cultural check-ins around work"},
      {"synth_home_spread", "home blob std in meters"},
      {"synth_work_spread", "work blob std in meters"},
      {"synth_year", "calendar year of synthetic timestamps"},
      {"seed", "global random seed"},
  };
  return keys;
}

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key));
}

double to_double(std::string_view key, std::string_view value) {
  const auto v = parse_double(trim(value));
  if (!v) bad_value(key, value);
  return *v;
}

std::int64_t to_int(std::string_view key, std::string_view value) {
  const auto v = parse_int(trim(value));
  if (!v) bad_value(key, value);
  return *v;
}

std::size_t to_size(std::string_view key, std::string_view value) {
  const auto v = to_int(key, value);
  if (v < 0) bad_value(key, value);
  return static_cast<std::size_t>(v);
}

bool to_bool(std::string_view key, std::string_view value) {
  const auto t = trim(value);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  bad_value(key, value);
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  for (const auto& field : split_csv_line(value)) {
    const auto t = trim(field);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

fs::path resolve(const fs::path& base, std::string_view value) {
  fs::path p{std::string(trim(value))};
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

std::string optional_text(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("auto");
}

std::set<std::string> read_category_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read categories file " + path.string());
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (!t.empty() && t.front() != '#') out.emplace(t);
  }
  if (out.empty()) throw ConfigError("categories file " + path.string() + " is empty");
  return out;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value, const fs::path& base) {
  const std::string k(key);
  const std::string_view v = trim(value);
  if (k == "input") input = resolve(base, v);
  else if (k == "run_dir") run_dir = resolve(base, v);
  else if (k == "synth_dir") synth_dir = resolve(base, v);
  else if (k == "categories") {
    const auto list = split_list(v);
    if (list.empty()) ingest.category_whitelist.reset();
    else ingest.category_whitelist = std::set<std::string>(list.begin(), list.end());
  } else if (k == "categories_file") {
    if (v.empty() || v == "none") categories_file.reset();
    else categories_file = resolve(base, v);
  } else if (k == "min_checkins") ingest.min_checkins = to_size(k, v);
  else if (k == "tz_offset") {
    const auto t = to_int(k, v);
    if (t < -86400 || t > 86400) bad_value(k, v);
    ingest.tz_offset = static_cast<std::int32_t>(t);
  } else if (k == "hours") {
    try {
      ingest.hours = HourGrouping::parse(v);
    } catch (const std::exception&) {
      bad_value(k, v);
    }
  } else if (k == "ref_lat") ingest.reference.lat = to_double(k, v);
  else if (k == "ref_lon") ingest.reference.lon = to_double(k, v);
  else if (k == "topics") {
    const auto t = to_int(k, v);
    if (t < 0 || t > 65535) bad_value(k, v);
    topics = static_cast<int>(t);
  } else if (k == "alpha") {
    if (v == "auto") fit.alpha.reset();
    else fit.alpha = to_double(k, v);
  } else if (k == "beta") fit.beta = to_double(k, v);
  else if (k == "gamma") {
    if (v == "auto") fit.gamma.reset();
    else fit.gamma = to_double(k, v);
  } else if (k == "iterations") fit.iterations = static_cast<int>(to_size(k, v));
  else if (k == "burn_in") fit.burn_in = static_cast<int>(to_size(k, v));
  else if (k == "chains") chains = to_size(k, v);
  else if (k == "temporal") fit.temporal = to_bool(k, v);
  else if (k == "k_candidates") {
    k_candidates.clear();
    for (const auto& item : split_list(v)) {
      const auto t = to_int(k, item);
      if (t < 1 || t > 65535) bad_value(k, v);
      k_candidates.push_back(static_cast<int>(t));
    }
  } else if (k == "epsilon") coherence.epsilon = to_double(k, v);
  else if (k == "tau") coherence.tau = static_cast<int>(to_int(k, v));
  else if (k == "top_venues") coherence.venues = TopN{to_size(k, v)};
  else if (k == "venue_threshold") {
    if (v == "none" || v.empty()) {
      if (std::holds_alternative<ProbabilityAbove>(coherence.venues)) {
        coherence.venues = TopN{};
      }
    } else {
      coherence.venues = ProbabilityAbove{to_double(k, v)};
    }
  } else if (k == "top_times") coherence.top_times = to_size(k, v);
  else if (k == "window") coherence.window_size = to_size(k, v);
  else if (k == "eta") poptics.eta = to_double(k, v);
  else if (k == "max_dist") poptics.max_dist = to_double(k, v);
  else if (k == "min_radius") poptics.min_radius = to_double(k, v);
  else if (k == "cell_size") dsi.cell_size = to_double(k, v);
  else if (k == "grid_margin") dsi.margin = to_double(k, v);
  else if (k == "sigma_floor") dsi.sigma_floor = to_double(k, v);
  else if (k == "supply_epsilon") dsi.supply_epsilon = to_double(k, v);
  else if (k == "correlation") {
    if (v == "cell") correlation = CorrelationLevel::kCell;
    else if (v == "user") correlation = CorrelationLevel::kUser;
    else bad_value(k, v);
  } else if (k == "synth_patterns") synth.patterns = static_cast<int>(to_size(k, v));
  else if (k == "synth_users") synth.users = to_size(k, v);
  else if (k == "synth_checkins_min") synth.checkins_min = to_size(k, v);
  else if (k == "synth_checkins_max") synth.checkins_max = to_size(k, v);
  else if (k == "synth_categories_per_pattern") synth.categories_per_pattern = to_size(k, v);
  else if (k == "synth_venues_per_category") synth.venues_per_category = to_size(k, v);
  else if (k == "synth_category_concentration") synth.category_concentration = to_double(k, v);
  else if (k == "synth_time_concentration") synth.time_concentration = to_double(k, v);
  else if (k == "synth_user_mix") synth.user_mix = to_double(k, v);
  else if (k == "synth_noise") synth.noise = to_double(k, v);
  else if (k == "synth_extent") synth.extent = to_double(k, v);
  else if (k == "synth_venue_centre_bias") synth.venue_centre_bias = to_double(k, v);
  else if (k == "synth_centre_spread") synth.centre_spread = to_double(k, v);
  else if (k == "synth_distance_decay") synth.distance_decay = to_double(k, v);
  else if (k == "synth_home_checkins") synth.home_checkins = to_size(k, v);
  else if (k == "synth_work_checkins") synth.work_checkins = to_size(k, v);
  else if (k == "synth_home_spread") synth.home_spread = to_double(k, v);
  else if (k == "synth_work_spread") synth.work_spread = to_double(k, v);
  else if (k == "synth_year") synth.year = static_cast<int>(to_int(k, v));
  else if (k == "seed") {
    const auto t = to_int(k, v);
    if (t < 0) bad_value(k, v);
    seed = static_cast<std::uint64_t>(t);
    fit.seed = seed;
    synth.seed = seed;
  } else {
    throw ConfigError("unknown setting '" + k + "'");
  }
}

void RunConfig::load_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  const fs::path base = path.parent_path();
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const auto body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)), base);
  }
}

void RunConfig::validate() const {
  ingest.validate();
  if (categories_file && !fs::exists(*categories_file)) {
    throw ConfigError("categories file " + categories_file->string() + " does not exist");
  }
  if (topics > 0) fit.resolve(topics).validate();
  for (int k : k_candidates) fit.resolve(k).validate();
  if (k_candidates.empty()) throw ConfigError("k_candidates must not be empty");
  if (chains < 1) throw ConfigError("chains must be at least 1");
  coherence.validate();
  poptics.validate();
  dsi.validate();
  synth.validate();
  if (run_dir.empty()) throw ConfigError("run_dir must not be empty");
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> e;
  auto add = [&](const char* k, std::string v) { e.emplace_back(k, std::move(v)); };
  auto num = [](auto v) { return std::to_string(v); };
  add("input", input.generic_string());
  add("run_dir", run_dir.generic_string());
  add("synth_dir", synth_dir.generic_string());
  std::string cats;
  if (ingest.category_whitelist) {
    for (const auto& c : *ingest.category_whitelist) cats += (cats.empty() ? "" : ",") + c;
  }
  add("categories", cats);
  add("categories_file", categories_file ? categories_file->generic_string() : "none");
  add("min_checkins", num(ingest.min_checkins));
  add("tz_offset", num(ingest.tz_offset));
  add("hours", ingest.hours.describe());
  add("ref_lat", format_double(ingest.reference.lat));
  add("ref_lon", format_double(ingest.reference.lon));
  add("topics", num(topics));
  add("alpha", optional_text(fit.alpha));
  add("beta", format_double(fit.beta));
  add("gamma", optional_text(fit.gamma));
  add("iterations", num(fit.iterations));
  add("burn_in", num(fit.burn_in));
  add("chains", num(chains));
  add("temporal", fit.temporal ? "true" : "false");
  std::string ks;
  for (int k : k_candidates) ks += (ks.empty() ? "" : ",") + std::to_string(k);
  add("k_candidates", ks);
  add("epsilon", format_double(coherence.epsilon));
  add("tau", num(coherence.tau));
  if (const auto* n = std::get_if<TopN>(&coherence.venues)) {
    add("top_venues", num(n->n));
    add("venue_threshold", "none");
  } else {
    add("top_venues", "none");
    add("venue_threshold", format_double(std::get<ProbabilityAbove>(coherence.venues).threshold));
  }
  add("top_times", num(coherence.top_times));
  add("window", num(coherence.window_size));
  add("eta", format_double(poptics.eta));
  add("max_dist", format_double(poptics.max_dist));
  add("min_radius", format_double(poptics.min_radius));
  add("cell_size", format_double(dsi.cell_size));
  add("grid_margin", format_double(dsi.margin));
  add("sigma_floor", format_double(dsi.sigma_floor));
  add("supply_epsilon", format_double(dsi.supply_epsilon));
  add("correlation", correlation == CorrelationLevel::kCell ? "cell" : "user");
  add("synth_patterns", num(synth.patterns));
  add("synth_users", num(synth.users));
  add("synth_checkins_min", num(synth.checkins_min));
  add("synth_checkins_max", num(synth.checkins_max));
  add("synth_categories_per_pattern", num(synth.categories_per_pattern));
  add("synth_venues_per_category", num(synth.venues_per_category));
  add("synth_category_concentration", format_double(synth.category_concentration));
  add("synth_time_concentration", format_double(synth.time_concentration));
  add("synth_user_mix", format_double(synth.user_mix));
  add("synth_noise", format_double(synth.noise));
  add("synth_extent", format_double(synth.extent));
  add("synth_venue_centre_bias", format_double(synth.venue_centre_bias));
  add("synth_centre_spread", format_double(synth.centre_spread));
  add("synth_distance_decay", format_double(synth.distance_decay));
  add("synth_home_checkins", num(synth.home_checkins));
  add("synth_work_checkins", num(synth.work_checkins));
  add("synth_home_spread", format_double(synth.home_spread));
  add("synth_work_spread", format_double(synth.work_spread));
  add("synth_year", num(synth.year));
  add("seed", num(seed));
  return e;
}

std::string RunConfig::hash() const {
  std::string canonical;
  for (const auto& [k, v] : entries()) canonical += k + "=" + v + "\n";
  return hex64(fnv1a64(canonical));
}

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw ConfigError("output directory " + dir.string() +
                        " is in use by another process (remove " + path_.string() +
                        " if it is stale)");
    }
    throw DataError("cannot create lock file " + path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

fs::path require(const RunConfig& config, const char* name, const char* stage) {
  const fs::path p = config.run_dir / name;
  if (!fs::exists(p)) {
    throw DataError("missing " + p.string() + "; run the '" + std::string(stage) +
                    "' stage first");
  }
  return p;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  return in;
}

// Writes through a temporary file so a failed stage never leaves a partial
// artifact behind.
void write_artifact(StageResult& result, const fs::path& dir, const std::string& name,
                    const std::function<void(std::ostream&)>& body) {
  fs::create_directories(dir);
  const fs::path tmp = dir / (name + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    body(out);
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, dir / name);
  result.artifacts.push_back(name);
}

Corpus load_corpus_artifact(const RunConfig& config) {
  auto in = open_in(require(config, artifact::kCorpus, "ingest"));
  return load_corpus(in);
}

TldaModel load_model_artifact(const RunConfig& config, const Corpus& corpus) {
  auto in = open_in(require(config, artifact::kModel, "fit"));
  TldaModel model = load_model(in);
  if (model.users != corpus.user_count() || model.categories != corpus.category_count() ||
      model.times != corpus.time_count() || model.z_assign.size() != corpus.event_count()) {
    throw DataError("model does not match the corpus; rerun the 'fit' stage");
  }
  return model;
}

std::vector<UserActivityProfile> load_profiles_artifact(const RunConfig& config,
                                                        const Corpus& corpus) {
  auto in = open_in(require(config, artifact::kProfiles, "profiles"));
  auto profiles = read_profiles_csv(in, corpus);
  if (profiles.size() != corpus.user_count()) {
    throw DataError("profiles do not match the corpus; rerun the 'profiles' stage");
  }
  for (std::size_t u = 0; u < profiles.size(); ++u) {
    if (profiles[u].user != u) {
      throw DataError("profiles are out of user order; rerun the 'profiles' stage");
    }
  }
  return profiles;
}

IngestConfig effective_ingest(const RunConfig& config) {
  IngestConfig ic = config.ingest;
  if (config.categories_file) ic.category_whitelist = read_category_file(*config.categories_file);
  return ic;
}

int resolve_topics(const RunConfig& config) {
  if (config.topics > 0) return config.topics;
  auto in = open_in(require(config, artifact::kSelectedK, "select-k"));
  std::string line;
  std::getline(in, line);
  const auto k = parse_int(trim(line));
  if (!k || *k < 1) throw DataError("malformed " + std::string(artifact::kSelectedK));
  return static_cast<int>(*k);
}

void write_patterns_csv(std::ostream& out, const PatternDistributions& d, const Corpus& corpus,
                        const CoherenceConfig& cc) {
  out << "pattern,kind,rank,label,probability\n";
  for (std::size_t k = 0; k < d.topics; ++k) {
    const auto venues = top_venues(d, k, cc.venues);
    for (std::size_t i = 0; i < venues.size(); ++i) {
      out << k << ",venue," << i + 1 << ','
          << csv_escape(corpus.categories.at(static_cast<std::uint32_t>(venues[i]))) << ','
          << format_double(d.phi_at(k, venues[i])) << '\n';
    }
    const auto times = top_times(d, k, cc.top_times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      out << k << ",time," << i + 1 << ',' << csv_escape(corpus.time_label(times[i])) << ','
          << format_double(d.psi_at(times[i], k)) << '\n';
    }
  }
}

}  // namespace

StageResult run_ingest(const RunConfig& config) {
  StageResult result{"ingest", {}, {}, 0.0};
  if (config.input.empty()) throw ConfigError("ingest needs an input file (--input)");
  if (!fs::exists(config.input)) {
    throw DataError("input file " + config.input.string() + " does not exist");
  }
  IngestSummary summary;
  const Corpus corpus = build_corpus(config.input, effective_ingest(config), &summary);
  write_artifact(result, config.run_dir, artifact::kCorpus,
                 [&](std::ostream& o) { save_corpus(corpus, o); });
  write_artifact(result, config.run_dir, "ingest_report.txt", [&](std::ostream& o) {
    summary.report.write(o);
    o << "non_cultural: " << summary.non_cultural << '\n'
      << "dropped_cultural: " << summary.dropped_cultural << '\n'
      << "users_seen: " << summary.users_seen << '\n'
      << "users_retained: " << summary.users_retained << '\n'
      << "events: " << corpus.event_count() << '\n'
      << "side_events: " << corpus.side_events.size() << '\n'
      << "categories: " << corpus.category_count() << '\n'
      << "time_tokens: " << corpus.time_count() << '\n';
  });
  write_artifact(result, config.run_dir, "heatmap.csv",
                 [&](std::ostream& o) { write_heatmap_csv(o, calendar_heatmap(corpus)); });
  result.messages.push_back("retained " + std::to_string(summary.users_retained) + " of " +
                            std::to_string(summary.users_seen) + " users, " +
                            std::to_string(corpus.event_count()) + " cultural check-ins");
  if (summary.report.rejected() > 0) {
    result.messages.push_back("rejected " + std::to_string(summary.report.rejected()) +
                              " malformed rows (see ingest_report.txt)");
  }
  return result;
}

StageResult run_fit(const RunConfig& config) {
  StageResult result{"fit", {}, {}, 0.0};
  const Corpus corpus = load_corpus_artifact(config);
  const int K = resolve_topics(config);
  TldaModel model;
  std::vector<double> chain_tcv;
  std::size_t chosen = 0;
  if (config.chains > 1) {
    ChainChoice choice = fit_best_chain(corpus, K, config.fit, config.chains, config.coherence);
    model = std::move(choice.model);
    chain_tcv = std::move(choice.chain_tcv);
    chosen = choice.chain;
  } else {
    model = fit(corpus, config.fit.resolve(K));
  }
  for (const auto& w : model.warnings) result.messages.push_back("warning: " + w);
  const auto d = distributions(model);
  const auto counts = SlidingWindowCounts::build(corpus, config.coherence.window_size);
  const auto t = tcv_of(d, counts, config.coherence);
  const auto c = cv_of(d, counts, config.coherence);

  write_artifact(result, config.run_dir, artifact::kModel,
                 [&](std::ostream& o) { save_model(model, o); });
  write_artifact(result, config.run_dir, "theta.csv",
                 [&](std::ostream& o) { write_theta_csv(o, d, corpus); });
  write_artifact(result, config.run_dir, "psi.csv",
                 [&](std::ostream& o) { write_psi_csv(o, d, corpus); });
  write_artifact(result, config.run_dir, "phi.csv",
                 [&](std::ostream& o) { write_phi_csv(o, d, corpus); });
  write_artifact(result, config.run_dir, "patterns.csv",
                 [&](std::ostream& o) { write_patterns_csv(o, d, corpus, config.coherence); });
  write_artifact(result, config.run_dir, "similarity.csv", [&](std::ostream& o) {
    write_similarity_csv(o, venue_similarity(d), corpus);
  });
  write_artifact(result, config.run_dir, "coherence.csv", [&](std::ostream& o) {
    o << "metric,value\n"
      << "K," << K << '\n'
      << "chain," << chosen << '\n'
      << "tcv," << format_double(t.mean) << '\n'
      << "cv," << format_double(c.mean) << '\n'
      << "tcv_zero_vectors," << t.zero_vectors << '\n'
      << "cv_zero_vectors," << c.zero_vectors << '\n';
    for (std::size_t i = 0; i < chain_tcv.size(); ++i) {
      o << "chain_" << i << "_tcv," << format_double(chain_tcv[i]) << '\n';
    }
  });
  result.messages.push_back("K=" + std::to_string(K) + " TCV=" + format_double(t.mean) +
                            " CV=" + format_double(c.mean));
  return result;
}

StageResult run_select_k(const RunConfig& config) {
  StageResult result{"select-k", {}, {}, 0.0};
  const Corpus corpus = load_corpus_artifact(config);
  const auto r = select_k(corpus, config.k_candidates, config.fit, config.chains,
                          config.coherence);
  write_artifact(result, config.run_dir, "tcv_table.csv",
                 [&](std::ostream& o) { write_tcv_table_csv(o, r); });
  write_artifact(result, config.run_dir, artifact::kSelectedK,
                 [&](std::ostream& o) { o << r.best_k << '\n'; });
  result.messages.push_back("selected K=" + std::to_string(r.best_k));
  return result;
}

StageResult run_profiles(const RunConfig& config) {
  StageResult result{"profiles", {}, {}, 0.0};
  const Corpus corpus = load_corpus_artifact(config);
  const TldaModel model = load_model_artifact(config, corpus);
  const auto d = distributions(model);
  const auto profiles = build_profiles(corpus, model, d, config.poptics);
  write_artifact(result, config.run_dir, artifact::kProfiles,
                 [&](std::ostream& o) { write_profiles_csv(o, profiles, corpus); });
  const auto fallbacks = std::count_if(profiles.begin(), profiles.end(),
                                       [](const UserActivityProfile& p) { return p.fallback; });
  result.messages.push_back(std::to_string(profiles.size()) + " profiles, " +
                            std::to_string(fallbacks) + " without a cluster");
  return result;
}

StageResult run_dsi(const RunConfig& config) {
  StageResult result{"dsi", {}, {}, 0.0};
  const Corpus corpus = load_corpus_artifact(config);
  const TldaModel model = load_model_artifact(config, corpus);
  const auto d = distributions(model);
  const auto profiles = load_profiles_artifact(config, corpus);
  const auto venues = venue_profiles(corpus, profiles, d, config.dsi.sigma_floor);
  const DsrGrid grid = build_dsr_grid(profiles, venues, d.topics, config.dsi);
  const LocalProjection projection(corpus.reference);
  write_artifact(result, config.run_dir, artifact::kGrid,
                 [&](std::ostream& o) { write_grid_bundle(o, grid); });
  write_artifact(result, config.run_dir, "layers.csv",
                 [&](std::ostream& o) { write_layers_csv(o, grid); });
  write_artifact(result, config.run_dir, "layers.geojson",
                 [&](std::ostream& o) { write_layers_geojson(o, grid, projection); });
  write_artifact(result, config.run_dir, "priority.csv",
                 [&](std::ostream& o) { write_priority_csv(o, grid); });
  write_artifact(result, config.run_dir, "venue_supply.csv",
                 [&](std::ostream& o) { write_venue_profiles_csv(o, venues, corpus); });
  for (const auto& w : grid.warnings) result.messages.push_back("warning: " + w);
  result.messages.push_back(std::to_string(grid.grid.cols) + "x" +
                            std::to_string(grid.grid.rows) + " grid, " +
                            std::to_string(venues.size()) + " supplying venues");
  return result;
}

StageResult run_validate(const RunConfig& config) {
  StageResult result{"validate", {}, {}, 0.0};
  const Corpus corpus = load_corpus_artifact(config);
  const TldaModel model = load_model_artifact(config, corpus);
  const auto d = distributions(model);
  const auto profiles = load_profiles_artifact(config, corpus);
  auto grid_in = open_in(require(config, artifact::kGrid, "dsi"));
  const DsrGrid grid = read_grid_bundle(grid_in);
  if (grid.patterns() != d.topics) {
    throw DataError("DSR grid does not match the model; rerun the 'dsi' stage");
  }
  const auto travel = travel_distances(corpus, profiles, d);
  std::vector<CorrelationResult> rows;
  for (std::size_t z = 0; z < grid.patterns(); ++z) {
    rows.push_back(dsr_travel_correlation(travel.records, grid, z, config.correlation));
  }
  write_artifact(result, config.run_dir, "travel.csv",
                 [&](std::ostream& o) { write_travel_csv(o, travel.records, corpus); });
  write_artifact(result, config.run_dir, "correlation.csv",
                 [&](std::ostream& o) { write_correlation_csv(o, rows); });
  if (travel.omitted > 0) {
    result.messages.push_back(std::to_string(travel.omitted) +
                              " users without a check-in at a venue of their pattern");
  }
  for (const auto& r : rows) {
    result.messages.push_back("pattern " + std::to_string(r.pattern) + ": r=" +
                              (r.r ? format_double(*r.r) : "undefined (" + r.note + ")") +
                              " over " + std::to_string(r.pairs) + " pairs");
  }
  return result;
}

StageResult run_synth(const RunConfig& config) {
  StageResult result{"synth", {}, {}, 0.0};
  const SynthCorpus corpus = generate(config.synth);
  write_synth(corpus, config.synth_dir);
  for (const char* name : {"checkins.csv", "cultural_categories.txt", "truth_users.csv",
                           "truth_venues.csv", "truth_categories.csv", "truth_times.csv",
                           "run.conf"}) {
    result.artifacts.emplace_back(name);
  }
  result.messages.push_back(std::to_string(corpus.checkins.size()) + " check-ins for " +
                            std::to_string(corpus.users.size()) + " users in " +
                            config.synth_dir.string());
  return result;
}

namespace {

const std::vector<std::string>& stage_order() {
  static const std::vector<std::string> order = {"ingest",   "select-k", "fit",
                                                 "profiles", "dsi",      "validate"};
  return order;
}

fs::path timing_path(const fs::path& dir, std::string_view stage) {
  return dir / ("timing_" + std::string(stage) + ".txt");
}

}  // namespace

StageResult run_report(const RunConfig& config) {
  StageResult result{"report", {}, {}, 0.0};
  require(config, artifact::kCorpus, "ingest");
  const fs::path out_dir = config.run_dir / "report";
  fs::create_directories(out_dir);

  nlohmann::ordered_json manifest;
  manifest["config_hash"] = config.hash();
  manifest["seed"] = config.seed;
  nlohmann::ordered_json settings = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config.entries()) settings[k] = v;
  manifest["config"] = settings;

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(config.run_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".csv" || ext == ".geojson") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  nlohmann::ordered_json exports = nlohmann::ordered_json::array();
  for (const auto& f : files) {
    fs::copy_file(f, out_dir / f.filename(), fs::copy_options::overwrite_existing);
    exports.push_back({{"file", f.filename().string()}, {"fnv1a64", hex64(fnv1a64(read_file(f)))}});
  }
  manifest["exports"] = exports;

  nlohmann::ordered_json stages = nlohmann::ordered_json::array();
  for (const auto& stage : stage_order()) {
    const fs::path t = timing_path(config.run_dir, stage);
    if (!fs::exists(t)) continue;
    std::map<std::string, std::string> fields;
    std::istringstream in(read_file(t));
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) fields[line.substr(0, eq)] = line.substr(eq + 1);
    }
    nlohmann::ordered_json s;
    s["stage"] = stage;
    s["seconds"] = parse_double(fields["seconds"]).value_or(0.0);
    s["config_hash"] = fields["config_hash"];
    stages.push_back(s);
  }
  manifest["stages"] = stages;

  write_artifact(result, out_dir, artifact::kManifest,
                 [&](std::ostream& o) { o << manifest.dump(2) << '\n'; });
  result.messages.push_back("bundled " + std::to_string(files.size()) + " exports into " +
                            out_dir.string());
  return result;
}

StageResult run_stage(std::string_view stage, const RunConfig& config) {
  static const std::map<std::string, std::function<StageResult(const RunConfig&)>, std::less<>>
      stages = {{"ingest", run_ingest},   {"fit", run_fit},
                {"select-k", run_select_k}, {"profiles", run_profiles},
                {"dsi", run_dsi},         {"validate", run_validate},
                {"synth", run_synth},     {"report", run_report}};
  const auto it = stages.find(stage);
  if (it == stages.end()) throw ConfigError("unknown stage '" + std::string(stage) + "'");
  config.validate();
  const fs::path dir = stage == "synth" ? config.synth_dir : config.run_dir;
  DirectoryLock lock(dir);
  const auto start = std::chrono::steady_clock::now();
  StageResult result = it->second(config);
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (stage != "synth" && stage != "report") {
    std::ofstream t(timing_path(dir, stage), std::ios::trunc);
    t << "seconds=" << format_double(result.seconds) << "\nconfig_hash=" << config.hash()
      << '\n';
  }
  return result;
}

}  // namespace urbanpat
