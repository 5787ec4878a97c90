// Apache License, Version 2.0, refer to LICENSE.txt

#include "urbanpat/tlda.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include "urbanpat/errors.hpp"
#include "urbanpat/text_io.hpp"

namespace urbanpat {

TldaHyperparams TldaHyperparams::defaults(int topics) {
  TldaHyperparams hp;
  hp.topics = topics;
  hp.alpha = 50.0 / topics;
  hp.gamma = 50.0 / topics;
  hp.beta = 0.01;
  return hp;
}

void TldaHyperparams::validate() const {
  if (topics < 2) throw ConfigError("number of patterns K must be at least 2");
  if (topics > 65535) throw ConfigError("number of patterns K is too large");
  if (!(alpha > 0.0) || !(beta > 0.0) || !(gamma > 0.0)) {
    throw ConfigError("alpha, beta and gamma must be positive");
  }
  if (iterations < 1) throw ConfigError("iterations must be at least 1");
  if (burn_in < 0 || burn_in >= iterations) {
    throw ConfigError("burn_in must be in [0, iterations)");
  }
}

TldaHyperparams FitTemplate::resolve(int topics, std::size_t chain) const {
  TldaHyperparams hp = TldaHyperparams::defaults(topics);
  if (alpha) hp.alpha = *alpha;
  if (gamma) hp.gamma = *gamma;
  hp.beta = beta;
  hp.iterations = iterations;
  hp.burn_in = burn_in;
  hp.seed = seed + chain;
  hp.temporal = temporal;
  return hp;
}

ObservationSet ObservationSet::from_corpus(const Corpus& corpus) {
  ObservationSet obs;
  obs.users = corpus.user_count();
  obs.times = corpus.time_count();
  obs.categories = corpus.category_count();
  obs.items.reserve(corpus.events.size());
  for (const auto& e : corpus.events) obs.items.push_back({e.user, e.time, e.category});
  return obs;
}

void ObservationSet::validate() const {
  if (items.empty()) throw DataError("cannot fit a model to an empty corpus");
  for (const auto& o : items) {
    if (o.user >= users || o.time >= times || o.category >= categories) {
      throw InvariantError("observation index out of range");
    }
  }
}

void TldaModel::check_consistency(const ObservationSet& obs) const {
  const std::size_t K = topics();
  if (z_assign.size() != obs.items.size()) {
    throw InvariantError("assignment count differs from observation count");
  }
  std::vector<std::uint32_t> uz_(users * K, 0), tz_(times * K, 0),
      zv_(K * categories, 0), z_(K, 0);
  for (std::size_t i = 0; i < obs.items.size(); ++i) {
    const auto k = z_assign[i];
    if (k >= K) throw InvariantError("assignment outside [0, K)");
    const auto& o = obs.items[i];
    ++uz_[o.user * K + k];
    ++tz_[o.time * K + k];
    ++zv_[k * categories + o.category];
    ++z_[k];
  }
  if (uz_ != n_uz || zv_ != n_zv || z_ != n_z) {
    throw InvariantError("count matrices disagree with assignments");
  }
  if (tz_ != n_tz) throw InvariantError("time counts disagree with assignments");
}

GibbsSampler::GibbsSampler(const ObservationSet& obs, const TldaHyperparams& hp)
    : obs_(obs), rng_(hp.seed) {
  hp.validate();
  obs.validate();
  const auto K = static_cast<std::size_t>(hp.topics);
  if (K > obs.items.size()) {
    throw ConfigError("K = " + std::to_string(K) + " exceeds the number of check-ins (" +
                      std::to_string(obs.items.size()) + ")");
  }
  model_.hp = hp;
  model_.users = obs.users;
  model_.times = obs.times;
  model_.categories = obs.categories;
  model_.n_uz.assign(obs.users * K, 0);
  model_.n_tz.assign(obs.times * K, 0);
  model_.n_zv.assign(K * obs.categories, 0);
  model_.n_z.assign(K, 0);
  model_.z_assign.assign(obs.items.size(), 0);
  weights_.resize(K);

  std::set<std::uint32_t> used_categories;
  for (const auto& o : obs.items) used_categories.insert(o.category);
  if (used_categories.size() < 2) {
    model_.warnings.push_back(
        "corpus uses a single venue category; patterns are identified by users and time only");
  }
  for (std::size_t i = 0; i < obs.items.size(); ++i) assign(i, rng_.below(K));
}

void GibbsSampler::unassign(std::size_t i) {
  const auto& o = obs_.items[i];
  const std::size_t K = model_.topics();
  const std::size_t k = model_.z_assign[i];
  --model_.n_uz[o.user * K + k];
  --model_.n_tz[o.time * K + k];
  --model_.n_zv[k * model_.categories + o.category];
  --model_.n_z[k];
}

void GibbsSampler::assign(std::size_t i, std::size_t k) {
  const auto& o = obs_.items[i];
  const std::size_t K = model_.topics();
  model_.z_assign[i] = static_cast<std::uint16_t>(k);
  ++model_.n_uz[o.user * K + k];
  ++model_.n_tz[o.time * K + k];
  ++model_.n_zv[k * model_.categories + o.category];
  ++model_.n_z[k];
}

void GibbsSampler::fill_weights(const Observation& o, std::size_t held_out,
                                std::vector<double>& w) const {
  const std::size_t K = model_.topics();
  const auto& hp = model_.hp;
  const double v_beta = static_cast<double>(model_.categories) * hp.beta;
  const std::uint32_t* uz = &model_.n_uz[o.user * K];
  const std::uint32_t* tz = &model_.n_tz[o.time * K];
  for (std::size_t k = 0; k < K; ++k) {
    const std::uint32_t own = k == held_out ? 1 : 0;
    double p = (uz[k] - own + hp.alpha) *
               (model_.n_zv[k * model_.categories + o.category] - own + hp.beta) /
               (model_.n_z[k] - own + v_beta);
    if (hp.temporal) p *= tz[k] - own + hp.gamma;
    w[k] = p;
  }
}

void GibbsSampler::sweep() {
  const std::size_t K = model_.topics();
  for (std::size_t i = 0; i < obs_.items.size(); ++i) {
    unassign(i);
    fill_weights(obs_.items[i], kNone, weights_);
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      total += weights_[k];
      weights_[k] = total;
    }
    const double target = rng_.uniform() * total;
    std::size_t k = 0;
    while (k + 1 < K && weights_[k] <= target) ++k;
    assign(i, k);
  }
  ++sweeps_;
}

std::vector<double> GibbsSampler::conditional(std::size_t i) const {
  std::vector<double> w(model_.topics());
  fill_weights(obs_.items[i], model_.z_assign[i], w);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& p : w) p /= total;
  return w;
}

void sample_chain(const ObservationSet& obs, const TldaHyperparams& hp,
                  const std::function<void(const TldaModel&, int)>& on_sample) {
  GibbsSampler sampler(obs, hp);
  for (int it = 0; it < hp.iterations; ++it) {
    sampler.sweep();
    if (it >= hp.burn_in) on_sample(sampler.model(), it);
  }
}

TldaModel fit(const ObservationSet& obs, const TldaHyperparams& hp) {
  GibbsSampler sampler(obs, hp);
  for (int it = 0; it < hp.iterations; ++it) sampler.sweep();
  return std::move(sampler).take_model();
}

TldaModel fit(const Corpus& corpus, const TldaHyperparams& hp) {
  const ObservationSet obs = ObservationSet::from_corpus(corpus);
  return fit(obs, hp);
}

PatternDistributions distributions(const TldaModel& model) {
  PatternDistributions d;
  const std::size_t K = model.topics();
  d.users = model.users;
  d.times = model.times;
  d.categories = model.categories;
  d.topics = K;
  const auto& hp = model.hp;

  auto normalize_rows = [K](const std::vector<std::uint32_t>& counts, std::size_t rows,
                            double prior, std::vector<double>& out) {
    out.assign(rows * K, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      std::uint64_t row_total = 0;
      for (std::size_t k = 0; k < K; ++k) row_total += counts[r * K + k];
      const double denom = static_cast<double>(row_total) + static_cast<double>(K) * prior;
      for (std::size_t k = 0; k < K; ++k) out[r * K + k] = (counts[r * K + k] + prior) / denom;
    }
  };
  normalize_rows(model.n_uz, model.users, hp.alpha, d.theta);
  normalize_rows(model.n_tz, model.times, hp.gamma, d.psi);

  d.phi.assign(K * model.categories, 0.0);
  const double v_beta = static_cast<double>(model.categories) * hp.beta;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t v = 0; v < model.categories; ++v) {
      d.phi[k * model.categories + v] = (model.zv(k, v) + hp.beta) / (model.n_z[k] + v_beta);
    }
  }
  return d;
}

std::size_t assign_user_pattern(const PatternDistributions& dists, std::size_t user) {
  if (user >= dists.users) throw ConfigError("user index out of range");
  std::size_t best = 0;
  for (std::size_t k = 1; k < dists.topics; ++k) {
    if (dists.theta_at(user, k) > dists.theta_at(user, best)) best = k;
  }
  return best;
}

std::size_t category_pattern(const PatternDistributions& dists, std::size_t category) {
  if (category >= dists.categories) throw ConfigError("category index out of range");
  std::size_t best = 0;
  for (std::size_t k = 1; k < dists.topics; ++k) {
    if (dists.phi_at(k, category) > dists.phi_at(best, category)) best = k;
  }
  return best;
}

namespace {

template <class Score>
std::vector<std::size_t> ranked(std::size_t count, Score score) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return score(a) > score(b); });
  return idx;
}

}  // namespace

std::vector<std::size_t> top_venues(const PatternDistributions& dists, std::size_t k,
                                    const TopSelection& mode) {
  if (k >= dists.topics) throw ConfigError("pattern index out of range");
  auto order = ranked(dists.categories, [&](std::size_t v) { return dists.phi_at(k, v); });
  if (const auto* top = std::get_if<TopN>(&mode)) {
    order.resize(std::min(order.size(), top->n));
  } else {
    const double p = std::get<ProbabilityAbove>(mode).threshold;
    auto cut = std::find_if(order.begin(), order.end(),
                            [&](std::size_t v) { return !(dists.phi_at(k, v) > p); });
    order.erase(cut, order.end());
  }
  return order;
}

std::vector<std::size_t> top_times(const PatternDistributions& dists, std::size_t k,
                                   std::size_t n) {
  if (k >= dists.topics) throw ConfigError("pattern index out of range");
  auto order = ranked(dists.times, [&](std::size_t t) { return dists.psi_at(t, k); });
  order.resize(std::min(order.size(), n));
  return order;
}

namespace {

constexpr std::string_view kModelMagic = "urbanpat-tlda-model 1";

template <class T>
void write_counts(std::ostream& out, std::string_view name, const std::vector<T>& values,
                  std::size_t width) {
  out << name << ' ' << values.size() << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << values[i] << ((i + 1) % width == 0 || i + 1 == values.size() ? '\n' : ' ');
  }
}

template <class T>
std::vector<T> read_counts(std::istream& in, std::string_view name) {
  std::string key;
  std::size_t n = 0;
  if (!(in >> key >> n) || key != name) {
    throw DataError("model file: expected section '" + std::string(name) + "'");
  }
  std::vector<T> values(n);
  for (auto& v : values) {
    std::uint64_t x = 0;
    if (!(in >> x)) throw DataError("model file truncated in " + std::string(name));
    v = static_cast<T>(x);
  }
  return values;
}

}  // namespace

void save_model(const TldaModel& model, std::ostream& out) {
  const auto& hp = model.hp;
  out << kModelMagic << '\n';
  out << "topics " << hp.topics << '\n';
  out << "alpha " << format_double(hp.alpha) << '\n';
  out << "beta " << format_double(hp.beta) << '\n';
  out << "gamma " << format_double(hp.gamma) << '\n';
  out << "iterations " << hp.iterations << '\n';
  out << "burn_in " << hp.burn_in << '\n';
  out << "seed " << hp.seed << '\n';
  out << "temporal " << (hp.temporal ? 1 : 0) << '\n';
  out << "dims " << model.users << ' ' << model.times << ' ' << model.categories << '\n';
  write_counts(out, "z_assign", model.z_assign, 64);
  write_counts(out, "n_uz", model.n_uz, model.topics());
  write_counts(out, "n_tz", model.n_tz, model.topics());
  write_counts(out, "n_zv", model.n_zv, std::max<std::size_t>(model.categories, 1));
  write_counts(out, "n_z", model.n_z, model.topics());
}

TldaModel load_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kModelMagic) {
    throw DataError("not a model file (missing '" + std::string(kModelMagic) + "' header)");
  }
  TldaModel m;
  auto read_value = [&](std::string_view key) {
    std::string k, v;
    if (!(in >> k >> v) || k != key) throw DataError("model file: expected '" + std::string(key) + "'");
    return v;
  };
  auto as_double = [](const std::string& s) {
    auto v = parse_double(s);
    if (!v) throw DataError("model file: bad number '" + s + "'");
    return *v;
  };
  auto as_int = [](const std::string& s) {
    auto v = parse_int(s);
    if (!v) throw DataError("model file: bad integer '" + s + "'");
    return *v;
  };
  m.hp.topics = static_cast<int>(as_int(read_value("topics")));
  m.hp.alpha = as_double(read_value("alpha"));
  m.hp.beta = as_double(read_value("beta"));
  m.hp.gamma = as_double(read_value("gamma"));
  m.hp.iterations = static_cast<int>(as_int(read_value("iterations")));
  m.hp.burn_in = static_cast<int>(as_int(read_value("burn_in")));
  {
    std::string k;
    if (!(in >> k >> m.hp.seed) || k != "seed") throw DataError("model file: expected 'seed'");
  }
  m.hp.temporal = as_int(read_value("temporal")) != 0;
  {
    std::string k;
    if (!(in >> k >> m.users >> m.times >> m.categories) || k != "dims") {
      throw DataError("model file: expected 'dims'");
    }
  }
  m.hp.validate();
  m.z_assign = read_counts<std::uint16_t>(in, "z_assign");
  m.n_uz = read_counts<std::uint32_t>(in, "n_uz");
  m.n_tz = read_counts<std::uint32_t>(in, "n_tz");
  m.n_zv = read_counts<std::uint32_t>(in, "n_zv");
  m.n_z = read_counts<std::uint32_t>(in, "n_z");
  const std::size_t K = m.topics();
  if (m.n_uz.size() != m.users * K || m.n_tz.size() != m.times * K ||
      m.n_zv.size() != K * m.categories || m.n_z.size() != K) {
    throw DataError("model file: matrix sizes do not match dims");
  }
  return m;
}

namespace {

void write_header(std::ostream& out, std::string_view first, std::size_t K) {
  out << first;
  for (std::size_t k = 0; k < K; ++k) out << ",pattern" << k;
  out << '\n';
}

}  // namespace

void write_theta_csv(std::ostream& out, const PatternDistributions& d, const Corpus& corpus) {
  write_header(out, "user", d.topics);
  for (std::size_t u = 0; u < d.users; ++u) {
    out << csv_escape(corpus.users.at(static_cast<std::uint32_t>(u)));
    for (std::size_t k = 0; k < d.topics; ++k) out << ',' << format_double(d.theta_at(u, k));
    out << '\n';
  }
}

void write_psi_csv(std::ostream& out, const PatternDistributions& d, const Corpus& corpus) {
  write_header(out, "time_token", d.topics);
  for (std::size_t t = 0; t < d.times; ++t) {
    out << corpus.time_label(t);
    for (std::size_t k = 0; k < d.topics; ++k) out << ',' << format_double(d.psi_at(t, k));
    out << '\n';
  }
}

void write_phi_csv(std::ostream& out, const PatternDistributions& d, const Corpus& corpus) {
  write_header(out, "category", d.topics);
  for (std::size_t v = 0; v < d.categories; ++v) {
    out << csv_escape(corpus.categories.at(static_cast<std::uint32_t>(v)));
    for (std::size_t k = 0; k < d.topics; ++k) out << ',' << format_double(d.phi_at(k, v));
    out << '\n';
  }
}

}  // namespace urbanpat
