// Apache License, Version 2.0, refer to LICENSE.txt

// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails. Pass criterion numbers as arguments to run a
// subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "support/properties.hpp"
#include "urbanpat/alignment.hpp"
#include "urbanpat/coherence.hpp"
#include "urbanpat/dsi.hpp"
#include "urbanpat/ingest.hpp"
#include "urbanpat/pipeline.hpp"
#include "urbanpat/poptics.hpp"
#include "urbanpat/synthgen.hpp"
#include "urbanpat/text_io.hpp"
#include "urbanpat/tlda.hpp"
#include "urbanpat/validate.hpp"

namespace fs = std::filesystem;
using namespace urbanpat;

namespace {

// Pinned thresholds.
constexpr double kGibbsMaxTv = 0.02;
constexpr int kGibbsSamples = 50000;
constexpr int kGibbsBurnIn = 1000;
constexpr double kGibbsMaxSeconds = 60.0;
constexpr int kSeeds = 10;
constexpr double kRecoveryAccuracy = 0.80;
constexpr int kRecoverySeedsNeeded = 8;
constexpr double kRecoveryMaxSeconds = 120.0;
constexpr int kSelectSeedsNeeded = 8;
constexpr std::size_t kSelectChains = 3;
constexpr int kPlantedK = 4;
constexpr int kCoherenceSeeds = 3;
constexpr double kCoherenceUserMix = 0.9;
constexpr double kWithinSimilarity = 0.9;
constexpr double kCrossSimilarity = 0.1;
constexpr double kSimilarityPairShare = 0.90;
constexpr int kPopticsInstances = 100;
constexpr std::size_t kPopticsMaxPoints = 60;
constexpr double kDistanceTolerance = 1e-9;
constexpr int kDsiInstances = 100;
constexpr double kDsiRelativeError = 1e-9;
constexpr int kCorrelationSeeds = 5;
constexpr double kCorrelationMinR = 0.5;
constexpr double kNullMaxAbsR = 0.2;
constexpr std::size_t kCorrelationUsers = 1000;
constexpr double kCorrelationMinRadius = 300.0;
constexpr std::size_t kPropertyCases = 1000;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Planted {
  SynthCorpus synth;
  Corpus corpus;
};

Planted planted(std::uint64_t seed, double user_mix = SynthSpec{}.user_mix) {
  SynthSpec spec;
  spec.patterns = kPlantedK;
  spec.users = 500;
  spec.checkins_min = spec.checkins_max = 40;
  spec.user_mix = user_mix;
  spec.seed = seed;
  Planted p;
  p.synth = generate(spec);
  IngestConfig ic;
  ic.tz_offset = spec.tz_offset;
  ic.reference = spec.reference;
  ic.category_whitelist =
      std::set<std::string>(p.synth.categories.begin(), p.synth.categories.end());
  const auto rows = p.synth.rows();
  p.corpus = filter_fans(rows, ic);
  return p;
}

std::size_t planted_category_pattern(const Planted& p, std::size_t category) {
  const auto& label = p.corpus.categories.at(static_cast<std::uint32_t>(category));
  return std::stoul(label.substr(3)) / p.synth.spec.categories_per_pattern;
}

std::size_t state_index(const std::vector<std::uint16_t>& z, std::size_t K) {
  std::size_t s = 0, mul = 1;
  for (auto k : z) {
    s += k * mul;
    mul *= K;
  }
  return s;
}

Verdict criterion_gibbs() {
  const auto t0 = std::chrono::steady_clock::now();
  ObservationSet obs;
  obs.users = obs.times = obs.categories = 2;
  obs.items = {{0, 0, 0}, {0, 1, 1}, {1, 0, 0}, {1, 1, 1}, {0, 0, 1}};
  TldaHyperparams hp;
  hp.topics = 2;
  hp.alpha = 0.5;
  hp.beta = 0.3;
  hp.gamma = 0.7;
  hp.burn_in = kGibbsBurnIn;
  hp.iterations = kGibbsBurnIn + kGibbsSamples;
  hp.seed = 2024;
  const auto exact = oracle::exact_joint(obs, hp);
  std::vector<double> freq(exact.size(), 0.0);
  int samples = 0;
  sample_chain(obs, hp, [&](const TldaModel& m, int) {
    freq[state_index(m.z_assign, 2)] += 1.0;
    ++samples;
  });
  double tv = 0.0;
  for (std::size_t s = 0; s < exact.size(); ++s) tv += std::fabs(freq[s] / samples - exact[s]);
  tv /= 2.0;
  const double secs = seconds_since(t0);
  return {tv <= kGibbsMaxTv && samples == kGibbsSamples && secs < kGibbsMaxSeconds,
          fmt("TV %.4f over %d samples, %zu states, %.2f s", tv, samples, exact.size(), secs)};
}

struct RecoveryRun {
  double accuracy = 0.0;
  double seconds = 0.0;
  double similarity_share = 0.0;
};

std::vector<RecoveryRun> recovery_runs;

void run_recovery() {
  if (!recovery_runs.empty()) return;
  for (int s = 1; s <= kSeeds; ++s) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto p = planted(static_cast<std::uint64_t>(s));
    FitTemplate tmpl;
    tmpl.seed = static_cast<std::uint64_t>(s);
    const auto model = fit(p.corpus, tmpl.resolve(kPlantedK));
    const auto d = distributions(model);
    std::vector<int> truth, pred;
    for (std::size_t u = 0; u < p.corpus.user_count(); ++u) {
      const auto& id = p.corpus.users.at(static_cast<std::uint32_t>(u));
      truth.push_back(p.synth.users[std::stoul(id.substr(1))].pattern);
      pred.push_back(static_cast<int>(assign_user_pattern(d, u)));
    }
    const auto al = align_labels(truth, pred, kPlantedK, kPlantedK);
    RecoveryRun run;
    run.accuracy = al.accuracy;
    run.seconds = seconds_since(t0);

    const auto sim = venue_similarity(d);
    const std::size_t C = p.corpus.category_count();
    std::size_t good = 0, total = 0;
    for (std::size_t a = 0; a < C; ++a) {
      for (std::size_t b = a + 1; b < C; ++b) {
        const bool same = planted_category_pattern(p, a) == planted_category_pattern(p, b);
        const double v = sim[a * C + b];
        good += same ? v > kWithinSimilarity : v < kCrossSimilarity;
        ++total;
      }
    }
    run.similarity_share = static_cast<double>(good) / static_cast<double>(total);
    recovery_runs.push_back(run);
  }
}

Verdict criterion_recovery() {
  run_recovery();
  int ok = 0;
  double worst = 1.0, slowest = 0.0;
  for (const auto& r : recovery_runs) {
    ok += r.accuracy >= kRecoveryAccuracy && r.seconds < kRecoveryMaxSeconds;
    worst = std::min(worst, r.accuracy);
    slowest = std::max(slowest, r.seconds);
  }
  return {ok >= kRecoverySeedsNeeded,
          fmt("%d/%d seeds >= %.0f%% (worst %.3f, slowest %.2f s)", ok, kSeeds,
              100 * kRecoveryAccuracy, worst, slowest)};
}

Verdict criterion_select_k() {
  int ok = 0;
  std::string picks;
  const std::vector<int> candidates{3, 4, 5, 6, 7, 8, 9};
  for (int s = 1; s <= kSeeds; ++s) {
    const auto p = planted(static_cast<std::uint64_t>(s));
    FitTemplate tmpl;
    tmpl.seed = static_cast<std::uint64_t>(s);
    tmpl.iterations = 100;
    const auto r = select_k(p.corpus, candidates, tmpl, kSelectChains, CoherenceConfig{});
    const auto& curve = r.mean_tcv;
    // The argmax is interior and no other interior point is a local maximum.
    std::size_t arg = 0, interior_maxima = 0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
      if (curve[i].second > curve[arg].second) arg = i;
    }
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
      interior_maxima +=
          curve[i].second > curve[i - 1].second && curve[i].second > curve[i + 1].second;
    }
    const bool shape = arg > 0 && arg + 1 < curve.size() && interior_maxima == 1;
    ok += r.best_k == kPlantedK && shape;
    picks += fmt("%s%d%s", picks.empty() ? "" : ",", r.best_k, shape ? "" : "*");
  }
  return {ok >= kSelectSeedsNeeded,
          fmt("%d/%d seeds pick K=%d with one interior peak (picks %s; * = shape failed)", ok,
              kSeeds, kPlantedK, picks.c_str())};
}

Verdict criterion_tlda_vs_lda() {
  bool all = true;
  double min_gap = 1e9;
  int wins = 0, total = 0;
  for (int s = 1; s <= kCoherenceSeeds; ++s) {
    const auto p = planted(static_cast<std::uint64_t>(s), kCoherenceUserMix);
    const CoherenceConfig cc;
    const auto counts = SlidingWindowCounts::build(p.corpus, cc.window_size);
    FitTemplate tmpl;
    tmpl.seed = static_cast<std::uint64_t>(s);
    FitTemplate lda = tmpl;
    lda.temporal = false;
    for (int K = 3; K <= 9; ++K) {
      const double a = cv_of(distributions(fit(p.corpus, tmpl.resolve(K))), counts, cc).mean;
      const double b = cv_of(distributions(fit(p.corpus, lda.resolve(K))), counts, cc).mean;
      min_gap = std::min(min_gap, a - b);
      wins += a > b;
      ++total;
      all = all && a > b;
    }
  }
  return {all, fmt("TLDA CV above LDA in %d/%d (seed, K) cases; smallest gap %.4f", wins, total,
                   min_gap)};
}

Verdict criterion_similarity() {
  run_recovery();
  int ok = 0;
  double worst = 1.0;
  for (const auto& r : recovery_runs) {
    ok += r.similarity_share >= kSimilarityPairShare;
    worst = std::min(worst, r.similarity_share);
  }
  return {ok == kSeeds, fmt("%d/%d seeds with >= %.0f%% of pairs separated (worst %.3f)", ok,
                            kSeeds, 100 * kSimilarityPairShare, worst)};
}

Verdict criterion_poptics() {
  Rng rng(6006);
  int core_ok = 0, order_ok = 0, threshold_ok = 0, cluster_ok = 0;
  for (int c = 0; c < kPopticsInstances; ++c) {
    const auto pts = props::random_points(rng, kPopticsMaxPoints);
    const double eta = 0.02 + 0.5 * rng.uniform();
    const auto core = core_distances(pts, eta);
    const auto want_core = oracle::core_distances(pts, eta);
    bool same = core.size() == want_core.size();
    for (std::size_t i = 0; same && i < core.size(); ++i) {
      same = std::fabs(core[i] - want_core[i]) <= kDistanceTolerance;
    }
    core_ok += same;

    const auto got = optics_order(pts, want_core);
    const auto want = oracle::optics(pts, want_core);
    same = got.order == want.order;
    for (std::size_t i = 0; same && i < got.reach.size(); ++i) {
      same = std::fabs(got.reach[i] - want.reach[i]) <= kDistanceTolerance;
    }
    order_ok += same;

    const auto th = select_threshold(want.reach);
    const auto wth = oracle::threshold(want.reach);
    threshold_ok += th.threshold == wth.threshold && th.fallback == wth.fallback &&
                    std::fabs(th.score - wth.score) <= kDistanceTolerance;

    ReachabilityResult r;
    r.order = want.order;
    r.reach = want.reach;
    cluster_ok += extract_clusters(r, wth.threshold) == oracle::clusters(want, wth.threshold);
  }
  const bool pass = core_ok == kPopticsInstances && order_ok == kPopticsInstances &&
                    threshold_ok == kPopticsInstances && cluster_ok == kPopticsInstances;
  return {pass, fmt("core %d, order/reach %d, threshold %d, clusters %d of %d instances",
                    core_ok, order_ok, threshold_ok, cluster_ok, kPopticsInstances)};
}

Verdict criterion_dsi() {
  Rng rng(7007);
  int layers_ok = 0, boundary_ok = 0;
  double worst = 0.0;
  for (int c = 0; c < kDsiInstances; ++c) {
    GridSpec g;
    g.cell_size = 400.0;
    g.cols = g.rows = 20;
    g.origin = {-4000.0 + 100 * rng.uniform(), -4000.0 + 100 * rng.uniform()};
    std::vector<UserActivityProfile> users;
    std::vector<oracle::ToyUser> toy_users;
    for (std::size_t i = 0, n = 1 + rng.below(10); i < n; ++i) {
      UserActivityProfile p;
      p.centre = {g.origin.x + 8000 * rng.uniform(), g.origin.y + 8000 * rng.uniform()};
      p.radius_pattern = 100 + 2500 * rng.uniform();
      p.radius_overall = p.radius_pattern;
      users.push_back(p);
      toy_users.push_back({p.centre, p.radius_pattern});
    }
    std::vector<VenueSupplyProfile> venues;
    std::vector<oracle::ToyVenue> toy_venues;
    for (std::size_t i = 0, n = 1 + rng.below(5); i < n; ++i) {
      VenueSupplyProfile v;
      v.location = {g.origin.x + 8000 * rng.uniform(), g.origin.y + 8000 * rng.uniform()};
      v.sigma = 100 + 2500 * rng.uniform();
      venues.push_back(v);
      toy_venues.push_back({v.location, v.sigma});
    }
    const auto d = demand_layer(users, g);
    const auto s = supply_layer(venues, g);
    const auto r = dsr_layer(d, s);
    const auto od = oracle::demand(toy_users, g.origin, g.cell_size, g.cols, g.rows);
    const auto os = oracle::supply(toy_venues, g.origin, g.cell_size, g.cols, g.rows);
    bool ok = true;
    auto rel = [](double a, double b) {
      if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b) ? 0.0 : 1.0;
      return std::fabs(a - b) / std::max({1e-300, std::fabs(a), std::fabs(b)});
    };
    for (std::size_t i = 0; i < g.cells(); ++i) {
      const double want_r = os[i] > 1e-12 ? od[i] / os[i] : std::nan("");
      const double e = std::max({rel(d[i], od[i]), rel(s[i], os[i]), rel(r[i], want_r)});
      worst = std::max(worst, e);
      ok = ok && e <= kDsiRelativeError;
    }
    layers_ok += ok;

    // One user centred on a cell centroid with radius k cells: the cell k
    // away is inside, k-1 away is inside, k+1 away is outside.
    const std::size_t row = 5 + rng.below(10), col = 5 + rng.below(5);
    const std::size_t k = 1 + rng.below(4);
    UserActivityProfile u;
    u.centre = g.centroid(row, col);
    u.radius_pattern = u.radius_overall = static_cast<double>(k) * g.cell_size;
    const std::vector<UserActivityProfile> one{u};
    const auto bd = demand_layer(one, g);
    const double at_r = oracle::normal_kernel(u.radius_pattern, u.radius_pattern);
    const double inside = bd[g.index(row, col + k - 1)];
    boundary_ok += rel(bd[g.index(row, col + k)], at_r) <= kDsiRelativeError && inside > 0.0 &&
                   bd[g.index(row, col + k + 1)] == 0.0;
  }
  return {layers_ok == kDsiInstances && boundary_ok == kDsiInstances,
          fmt("layers %d/%d (worst rel err %.2e), boundary %d/%d", layers_ok, kDsiInstances,
              worst, boundary_ok, kDsiInstances)};
}

Verdict criterion_correlation() {
  bool pass = true;
  double min_r = 1.0, max_null = 0.0;
  for (int s = 1; s <= kCorrelationSeeds; ++s) {
    SynthSpec spec;
    spec.patterns = kPlantedK;
    spec.users = kCorrelationUsers;
    spec.extent = 20000;
    spec.seed = static_cast<std::uint64_t>(s);
    const auto synth = generate(spec);
    IngestConfig ic;
    ic.tz_offset = spec.tz_offset;
    ic.reference = spec.reference;
    ic.category_whitelist = std::set<std::string>(synth.categories.begin(), synth.categories.end());
    const auto rows = synth.rows();
    const auto corpus = filter_fans(rows, ic);
    FitTemplate tmpl;
    tmpl.seed = static_cast<std::uint64_t>(s);
    const auto model = fit(corpus, tmpl.resolve(kPlantedK));
    const auto d = distributions(model);
    PopticsConfig pc;
    pc.min_radius = kCorrelationMinRadius;
    const auto profiles = build_profiles(corpus, model, d, pc);
    const auto venues = venue_profiles(corpus, profiles, d);
    const auto grid = build_dsr_grid(profiles, venues, kPlantedK, DsiConfig{});
    auto records = travel_distances(corpus, profiles, d).records;
    for (std::size_t z = 0; z < kPlantedK; ++z) {
      const auto c = dsr_travel_correlation(records, grid, z);
      const double r = c.r.value_or(-2.0);
      min_r = std::min(min_r, r);
      pass = pass && r > kCorrelationMinR;
    }
    // Null: travel values permuted across users, breaking any link to DSR.
    Rng rng(mix_seed(static_cast<std::uint64_t>(s), 99));
    std::vector<double> travel;
    for (const auto& r : records) travel.push_back(r.mean_travel);
    rng.shuffle(std::span<double>(travel));
    for (std::size_t i = 0; i < records.size(); ++i) records[i].mean_travel = travel[i];
    for (std::size_t z = 0; z < kPlantedK; ++z) {
      const auto c = dsr_travel_correlation(records, grid, z);
      const double r = c.r.value_or(1.0);
      max_null = std::max(max_null, std::fabs(r));
      pass = pass && std::fabs(r) < kNullMaxAbsR;
    }
  }
  return {pass, fmt("%d seeds x %d patterns: min r %.3f (> %.1f), max travel-permuted null |r| %.3f (< %.1f)",
                    kCorrelationSeeds, kPlantedK, min_r, kCorrelationMinR, max_null,
                    kNullMaxAbsR)};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    // Wall-clock timings are the only intended difference between reruns.
    if (name.rfind("timing_", 0) == 0 || name == artifact::kManifest) continue;
    out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return out;
}

Verdict criterion_determinism() {
  const fs::path root = fs::path(URBANPAT_TEST_TMP) / "acceptance_determinism";
  fs::remove_all(root);
  auto config_for = [&](const std::string& tag) {
    RunConfig c;
    c.set("synth_dir", (root / ("synth_" + tag)).string());
    c.set("synth_users", "150");
    c.set("synth_checkins_min", "30");
    c.set("synth_checkins_max", "30");
    c.set("seed", "5");
    c.set("run_dir", (root / ("run_" + tag)).string());
    c.set("k_candidates", "3,4,5");
    c.set("iterations", "40");
    c.set("chains", "2");
    c.set("topics", "0");
    return c;
  };
  std::vector<std::string> stages{"synth", "ingest", "select-k", "fit", "profiles",
                                  "dsi",   "validate", "report"};
  std::vector<std::string> failed;
  std::map<std::string, std::size_t> compared;
  std::map<std::string, std::string> previous[2];
  for (const auto& stage : stages) {
    for (int run = 0; run < 2; ++run) {
      auto c = config_for(run == 0 ? "a" : "b");
      if (stage != "synth") {
        c.load_file(c.synth_dir / "run.conf");
        c.run_dir = root / (run == 0 ? "run_a" : "run_b");
      }
      run_stage(stage, c);
    }
    // Compare only files the stage produced or changed.
    const auto a = snapshot(root / "run_a");
    const auto b = snapshot(root / "run_b");
    const auto sa = snapshot(root / "synth_a");
    const auto sb = snapshot(root / "synth_b");
    const bool same = stage == "synth" ? sa == sb && !sa.empty() : a == b && !a.empty();
    if (!same) failed.push_back(stage);
    std::size_t changed = 0;
    const auto& cur = stage == "synth" ? sa : a;
    for (const auto& [name, body] : cur) {
      auto it = previous[0].find(name);
      changed += it == previous[0].end() || it->second != body;
    }
    if (stage != "synth") previous[0] = a;
    compared[stage] = stage == "synth" ? sa.size() : changed;
  }
  // Rerunning a stage in place leaves its artifacts byte-identical.
  auto c = config_for("a");
  c.load_file(c.synth_dir / "run.conf");
  c.run_dir = root / "run_a";
  const auto before = snapshot(root / "run_a");
  for (const auto& stage : stages) {
    if (stage != "synth") run_stage(stage, c);
  }
  if (snapshot(root / "run_a") != before) failed.push_back("in-place rerun");

  std::string detail;
  for (const auto& stage : stages) {
    detail += fmt("%s%s:%zu", detail.empty() ? "" : " ", stage.c_str(), compared[stage]);
  }
  std::string bad;
  for (const auto& f : failed) bad += " " + f;
  return {failed.empty(), "new/changed files per stage " + detail +
                              (failed.empty() ? ", all identical" : "; differing:" + bad)};
}

Verdict criterion_properties() {
  const auto results = props::invariant_suite(kPropertyCases);
  bool pass = true;
  std::string detail;
  for (const auto& o : results) {
    pass = pass && o.ok() && o.cases >= kPropertyCases;
    detail += fmt("%s%s %zu/%zu", detail.empty() ? "" : "; ", o.name.c_str(),
                  o.cases - o.failures, o.cases);
    if (!o.ok()) detail += " (" + o.first_failure + ")";
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"Gibbs sampler matches exact enumeration", criterion_gibbs},
      {"planted-pattern recovery", criterion_recovery},
      {"model selection picks planted K", criterion_select_k},
      {"TLDA coherence exceeds LDA", criterion_tlda_vs_lda},
      {"venue-similarity separation", criterion_similarity},
      {"POPTICS oracle equivalence", criterion_poptics},
      {"DSI layer oracle", criterion_dsi},
      {"DSR-travel correlation", criterion_correlation},
      {"determinism of every stage", criterion_determinism},
      {"invariant property suite", criterion_properties},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(n)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("criterion %2d %s: %s [%s] (%.1f s)\n", n, v.pass ? "PASS" : "FAIL",
                criteria[i].first, v.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
