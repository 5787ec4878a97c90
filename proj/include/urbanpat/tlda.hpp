// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "urbanpat/data_model.hpp"
#include "urbanpat/rng.hpp"

namespace urbanpat {

struct TldaHyperparams {
  int topics = 6;
  double alpha = 50.0 / 6;
  double beta = 0.01;
  double gamma = 50.0 / 6;
  int iterations = 100;
  int burn_in = 0;
  std::uint64_t seed = 1;
  // false drops the time factor and gives plain LDA with users as documents.
  bool temporal = true;

  // alpha = gamma = 50/K, beta = 0.01.
  static TldaHyperparams defaults(int topics);
  void validate() const;
};

// Hyperparameters for a family of fits over several K. Unset priors resolve
// to the per-K defaults.
struct FitTemplate {
  std::optional<double> alpha;
  double beta = 0.01;
  std::optional<double> gamma;
  int iterations = 100;
  int burn_in = 0;
  std::uint64_t seed = 1;
  bool temporal = true;

  // Chain c uses seed + c.
  TldaHyperparams resolve(int topics, std::size_t chain = 0) const;
};

// (user, time, category) triple the sampler sees for one check-in.
struct Observation {
  std::uint32_t user = 0;
  std::uint32_t time = 0;
  std::uint32_t category = 0;
};

struct ObservationSet {
  std::size_t users = 0;
  std::size_t times = 0;
  std::size_t categories = 0;
  std::vector<Observation> items;

  static ObservationSet from_corpus(const Corpus& corpus);
  void validate() const;
};

// Sufficient statistics of one Gibbs state. Matrices are row-major.
struct TldaModel {
  TldaHyperparams hp;
  std::size_t users = 0;
  std::size_t times = 0;
  std::size_t categories = 0;
  std::vector<std::uint32_t> n_uz;  // users x K
  std::vector<std::uint32_t> n_tz;  // times x K
  std::vector<std::uint32_t> n_zv;  // K x categories
  std::vector<std::uint32_t> n_z;   // K
  std::vector<std::uint16_t> z_assign;  // one per observation
  std::vector<std::string> warnings;    // not persisted

  std::size_t topics() const { return static_cast<std::size_t>(hp.topics); }
  std::uint32_t uz(std::size_t u, std::size_t k) const { return n_uz[u * topics() + k]; }
  std::uint32_t tz(std::size_t t, std::size_t k) const { return n_tz[t * topics() + k]; }
  std::uint32_t zv(std::size_t k, std::size_t v) const { return n_zv[k * categories + v]; }

  // Recounts from z_assign and compares with every matrix and marginal.
  // Throws InvariantError on mismatch.
  void check_consistency(const ObservationSet& obs) const;
};

// Collapsed Gibbs sampler. For observation (u, t, v) with its own assignment
// removed from the counts:
//   p(z = k) ~ (n_uz[u][k] + alpha) (n_tz[t][k] + gamma)
//              (n_zv[k][v] + beta) / (n_z[k] + V beta)
// The time factor is omitted when hp.temporal is false.
class GibbsSampler {
 public:
  GibbsSampler(const ObservationSet& obs, const TldaHyperparams& hp);

  // One pass over every observation in order.
  void sweep();
  std::size_t sweeps_done() const { return sweeps_; }

  // Normalized full conditional of observation i given all other assignments.
  std::vector<double> conditional(std::size_t i) const;

  const TldaModel& model() const { return model_; }
  TldaModel take_model() && { return std::move(model_); }

 private:
  void unassign(std::size_t i);
  void assign(std::size_t i, std::size_t k);
  // Unnormalized conditional; held_out names the topic whose counts still
  // include this observation (kNone when it was already removed).
  void fill_weights(const Observation& o, std::size_t held_out,
                    std::vector<double>& w) const;
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  const ObservationSet& obs_;
  TldaModel model_;
  Rng rng_;
  std::vector<double> weights_;
  std::size_t sweeps_ = 0;
};

// Runs hp.iterations sweeps and calls on_sample(state, sweep) after each sweep
// past hp.burn_in.
void sample_chain(const ObservationSet& obs, const TldaHyperparams& hp,
                  const std::function<void(const TldaModel&, int)>& on_sample);

// Runs hp.iterations sweeps; the returned counts are the final sweep's state.
// Throws ConfigError when K exceeds the number of observations.
TldaModel fit(const ObservationSet& obs, const TldaHyperparams& hp);
TldaModel fit(const Corpus& corpus, const TldaHyperparams& hp);

// Smoothed point estimates, row-major.
struct PatternDistributions {
  std::size_t users = 0;
  std::size_t times = 0;
  std::size_t categories = 0;
  std::size_t topics = 0;
  std::vector<double> theta;  // users x K, pattern distribution of each user
  std::vector<double> psi;    // times x K, pattern distribution of each time token
  std::vector<double> phi;    // K x categories, venue distribution of each pattern

  double theta_at(std::size_t u, std::size_t k) const { return theta[u * topics + k]; }
  double psi_at(std::size_t t, std::size_t k) const { return psi[t * topics + k]; }
  double phi_at(std::size_t k, std::size_t v) const { return phi[k * categories + v]; }
};

PatternDistributions distributions(const TldaModel& model);

// argmax_k theta[u][k], lowest index on ties.
std::size_t assign_user_pattern(const PatternDistributions& dists, std::size_t user);

// argmax_k phi[k][v] for a category column, lowest index on ties.
std::size_t category_pattern(const PatternDistributions& dists, std::size_t category);

struct TopN {
  std::size_t n = 10;
};
struct ProbabilityAbove {
  double threshold = 0.1;
};
using TopSelection = std::variant<TopN, ProbabilityAbove>;

// Categories of pattern k ordered by phi[k][v] descending (lowest index first
// on ties).
std::vector<std::size_t> top_venues(const PatternDistributions& dists,
                                    std::size_t k, const TopSelection& mode);

// Time tokens ordered by psi[t][k] descending; n is clamped to T.
std::vector<std::size_t> top_times(const PatternDistributions& dists,
                                   std::size_t k, std::size_t n);

// Versioned text bundle: hyperparameters, dimensions, assignments and counts.
void save_model(const TldaModel& model, std::ostream& out);
TldaModel load_model(std::istream& in);

// Labelled CSV exports of theta (users x K), psi (time tokens x K) and phi
// (categories x K, transposed for readability).
void write_theta_csv(std::ostream& out, const PatternDistributions& d, const Corpus& corpus);
void write_psi_csv(std::ostream& out, const PatternDistributions& d, const Corpus& corpus);
void write_phi_csv(std::ostream& out, const PatternDistributions& d, const Corpus& corpus);

}  // namespace urbanpat
