// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "urbanpat/data_model.hpp"
#include "urbanpat/tlda.hpp"

namespace urbanpat {

struct CoherenceConfig {
  double epsilon = 1e-12;
  int tau = 1;  // integer exponent on NPMI
  TopSelection venues = TopN{10};
  std::size_t top_times = 10;
  std::size_t window_size = 10;

  void validate() const;
};

// Boolean occurrence statistics over sliding windows of each user's
// chronological check-in sequence. Windows never span two users; a user with
// fewer events than the window size contributes one truncated window.
class SlidingWindowCounts {
 public:
  static SlidingWindowCounts build(const Corpus& corpus, std::size_t window_size);

  std::size_t window_size() const { return window_size_; }
  std::size_t window_total() const { return window_total_; }
  std::size_t categories() const { return categories_; }
  std::size_t times() const { return times_; }

  std::uint64_t venue_occur(std::size_t v) const { return venue_occur_[v]; }
  std::uint64_t time_occur(std::size_t t) const { return time_occur_[t]; }
  std::uint64_t venue_time(std::size_t v, std::size_t t) const {
    return venue_time_[v * times_ + t];
  }
  // Windows holding both categories; equals venue_occur(v) when a == b.
  std::uint64_t venue_pair(std::size_t a, std::size_t b) const {
    return venue_venue_[a * categories_ + b];
  }

  double p_venue(std::size_t v) const;
  double p_time(std::size_t t) const;
  double p_venue_time(std::size_t v, std::size_t t) const;
  double p_venue_pair(std::size_t a, std::size_t b) const;

 private:
  std::size_t window_size_ = 0;
  std::size_t window_total_ = 0;
  std::size_t categories_ = 0;
  std::size_t times_ = 0;
  std::vector<std::uint64_t> venue_occur_;
  std::vector<std::uint64_t> time_occur_;
  std::vector<std::uint64_t> venue_time_;   // categories x times
  std::vector<std::uint64_t> venue_venue_;  // categories x categories
};

// NPMI^tau from raw probabilities, with epsilon added to the joint only.
// Returns 0 when a marginal is zero or the joint is 1 (0/0 limit). The base
// value is clamped to [-1, 1].
double npmi_from_probabilities(double joint, double p_a, double p_b,
                               const CoherenceConfig& config);

double npmi(std::size_t venue, std::size_t time, const SlidingWindowCounts& counts,
            const CoherenceConfig& config);
double npmi_venues(std::size_t a, std::size_t b, const SlidingWindowCounts& counts,
                   const CoherenceConfig& config);

// Top categories V* and top time tokens T* of one pattern.
struct PatternTop {
  std::vector<std::size_t> venues;
  std::vector<std::size_t> times;
};

std::vector<PatternTop> pattern_tops(const PatternDistributions& dists,
                                     const CoherenceConfig& config);

struct CoherenceResult {
  double mean = 0.0;              // m-bar
  std::vector<double> segments;   // m_q in (pattern, top venue) order
  std::size_t zero_vectors = 0;   // segments scored 0 because a vector vanished
};

// Temporal coherence: for every top venue v* of every pattern, cosine between
// w(j) = NPMI(v*, t_j) and W(j) = sum_i NPMI(v_i, t_j) over t_j in T*.
CoherenceResult tcv(std::span<const PatternTop> tops, const SlidingWindowCounts& counts,
                    const CoherenceConfig& config);

// Standard CV over venue co-occurrence with one-set segmentation.
CoherenceResult cv(std::span<const std::vector<std::size_t>> topics,
                   const SlidingWindowCounts& counts, const CoherenceConfig& config);

CoherenceResult tcv_of(const PatternDistributions& dists, const SlidingWindowCounts& counts,
                       const CoherenceConfig& config);
CoherenceResult cv_of(const PatternDistributions& dists, const SlidingWindowCounts& counts,
                      const CoherenceConfig& config);

struct KScore {
  int topics = 0;
  std::size_t chain = 0;
  double tcv = 0.0;
};

struct SelectKResult {
  int best_k = 0;
  std::vector<KScore> table;                      // every (K, chain) fit
  std::vector<std::pair<int, double>> mean_tcv;   // per K, candidate order
};

// Fits every candidate K with `chains` seeds, averages TCV per K and returns
// the argmax (smallest K on ties). Fits run concurrently.
SelectKResult select_k(const Corpus& corpus, std::span<const int> candidates,
                       const FitTemplate& tmpl, std::size_t chains,
                       const CoherenceConfig& config);

struct ChainChoice {
  TldaModel model;
  std::size_t chain = 0;
  std::vector<double> chain_tcv;
};

// Fits `chains` seeds of one K and keeps the chain with the highest TCV.
ChainChoice fit_best_chain(const Corpus& corpus, int topics, const FitTemplate& tmpl,
                           std::size_t chains, const CoherenceConfig& config);

// V x V cosine similarity between the K-dimensional phi columns of each
// category. Row-major.
std::vector<double> venue_similarity(const PatternDistributions& dists);

void write_tcv_table_csv(std::ostream& out, const SelectKResult& result);
void write_similarity_csv(std::ostream& out, const std::vector<double>& similarity,
                          const Corpus& corpus);

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace urbanpat
