// Apache License, Version 2.0, refer to LICENSE.txt

#include "urbanpat/coherence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "urbanpat/errors.hpp"
#include "urbanpat/text_io.hpp"

namespace urbanpat {

namespace {

double cosine(std::span<const double> a, std::span<const double> b, bool& degenerate) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    degenerate = true;
    return 0.0;
  }
  degenerate = false;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

void sort_unique(std::vector<std::uint32_t>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

// Scores one-set segmentations: row i of `scores` is the vector of the i-th
// top element, the aggregate is the column sum.
void score_segments(const std::vector<std::vector<double>>& scores, CoherenceResult& result) {
  if (scores.empty()) return;
  std::vector<double> aggregate(scores.front().size(), 0.0);
  for (const auto& row : scores) {
    for (std::size_t j = 0; j < row.size(); ++j) aggregate[j] += row[j];
  }
  for (const auto& row : scores) {
    bool degenerate = false;
    result.segments.push_back(cosine(row, aggregate, degenerate));
    if (degenerate) ++result.zero_vectors;
  }
}

void finish_mean(CoherenceResult& result) {
  if (result.segments.empty()) {
    throw DataError("coherence needs at least one pattern with top venues and times");
  }
  double sum = 0.0;
  for (double m : result.segments) sum += m;
  result.mean = sum / static_cast<double>(result.segments.size());
}

}  // namespace

void CoherenceConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("coherence epsilon must be positive");
  if (tau < 1) throw ConfigError("coherence tau must be at least 1");
  if (window_size < 2) throw ConfigError("window size must be at least 2");
  if (top_times < 1) throw ConfigError("top_times must be at least 1");
  if (const auto* n = std::get_if<TopN>(&venues); n && n->n < 1) {
    throw ConfigError("top_venues must be at least 1");
  }
}

SlidingWindowCounts SlidingWindowCounts::build(const Corpus& corpus, std::size_t window_size) {
  if (window_size < 2) throw ConfigError("window size must be at least 2");
  if (corpus.events.empty()) throw DataError("cannot build windows over an empty corpus");
  SlidingWindowCounts c;
  c.window_size_ = window_size;
  c.categories_ = corpus.category_count();
  c.times_ = corpus.time_count();
  c.venue_occur_.assign(c.categories_, 0);
  c.time_occur_.assign(c.times_, 0);
  c.venue_time_.assign(c.categories_ * c.times_, 0);
  c.venue_venue_.assign(c.categories_ * c.categories_, 0);

  std::vector<std::uint32_t> venues, times;
  for (std::size_t u = 0; u < corpus.user_count(); ++u) {
    const auto events = corpus.user_events(u);
    if (events.empty()) continue;
    const std::size_t span = std::min(window_size, events.size());
    const std::size_t windows = events.size() - span + 1;
    for (std::size_t start = 0; start < windows; ++start) {
      venues.clear();
      times.clear();
      for (std::size_t i = start; i < start + span; ++i) {
        venues.push_back(events[i].category);
        times.push_back(events[i].time);
      }
      sort_unique(venues);
      sort_unique(times);
      ++c.window_total_;
      for (auto v : venues) {
        ++c.venue_occur_[v];
        for (auto t : times) ++c.venue_time_[v * c.times_ + t];
        for (auto w : venues) ++c.venue_venue_[v * c.categories_ + w];
      }
      for (auto t : times) ++c.time_occur_[t];
    }
  }
  return c;
}

double SlidingWindowCounts::p_venue(std::size_t v) const {
  return static_cast<double>(venue_occur_.at(v)) / static_cast<double>(window_total_);
}
double SlidingWindowCounts::p_time(std::size_t t) const {
  return static_cast<double>(time_occur_.at(t)) / static_cast<double>(window_total_);
}
double SlidingWindowCounts::p_venue_time(std::size_t v, std::size_t t) const {
  return static_cast<double>(venue_time(v, t)) / static_cast<double>(window_total_);
}
double SlidingWindowCounts::p_venue_pair(std::size_t a, std::size_t b) const {
  return static_cast<double>(venue_pair(a, b)) / static_cast<double>(window_total_);
}

double npmi_from_probabilities(double joint, double p_a, double p_b,
                               const CoherenceConfig& config) {
  if (!(p_a > 0.0) || !(p_b > 0.0)) return 0.0;
  const double smoothed = joint + config.epsilon;
  const double denom = -std::log(smoothed);
  if (!(denom > 0.0)) return 0.0;
  // epsilon can push a perfectly co-occurring pair a few ulps past 1.
  const double value = std::clamp(std::log(smoothed / (p_a * p_b)) / denom, -1.0, 1.0);
  double out = 1.0;
  for (int i = 0; i < config.tau; ++i) out *= value;
  return out;
}

double npmi(std::size_t venue, std::size_t time, const SlidingWindowCounts& counts,
            const CoherenceConfig& config) {
  return npmi_from_probabilities(counts.p_venue_time(venue, time), counts.p_venue(venue),
                                 counts.p_time(time), config);
}

double npmi_venues(std::size_t a, std::size_t b, const SlidingWindowCounts& counts,
                   const CoherenceConfig& config) {
  return npmi_from_probabilities(counts.p_venue_pair(a, b), counts.p_venue(a),
                                 counts.p_venue(b), config);
}

std::vector<PatternTop> pattern_tops(const PatternDistributions& dists,
                                     const CoherenceConfig& config) {
  std::vector<PatternTop> tops(dists.topics);
  for (std::size_t k = 0; k < dists.topics; ++k) {
    tops[k].venues = top_venues(dists, k, config.venues);
    tops[k].times = top_times(dists, k, config.top_times);
  }
  return tops;
}

CoherenceResult tcv(std::span<const PatternTop> tops, const SlidingWindowCounts& counts,
                    const CoherenceConfig& config) {
  config.validate();
  CoherenceResult result;
  for (const auto& top : tops) {
    if (top.venues.empty() || top.times.empty()) {
      throw DataError("every pattern needs non-empty top venues and top times for TCV");
    }
    std::vector<std::vector<double>> scores(top.venues.size(),
                                            std::vector<double>(top.times.size()));
    for (std::size_t i = 0; i < top.venues.size(); ++i) {
      for (std::size_t j = 0; j < top.times.size(); ++j) {
        scores[i][j] = npmi(top.venues[i], top.times[j], counts, config);
      }
    }
    score_segments(scores, result);
  }
  finish_mean(result);
  return result;
}

CoherenceResult cv(std::span<const std::vector<std::size_t>> topics,
                   const SlidingWindowCounts& counts, const CoherenceConfig& config) {
  config.validate();
  CoherenceResult result;
  for (const auto& top : topics) {
    if (top.empty()) throw DataError("every pattern needs non-empty top venues for CV");
    std::vector<std::vector<double>> scores(top.size(), std::vector<double>(top.size()));
    for (std::size_t i = 0; i < top.size(); ++i) {
      for (std::size_t j = 0; j < top.size(); ++j) {
        scores[i][j] = npmi_venues(top[i], top[j], counts, config);
      }
    }
    score_segments(scores, result);
  }
  finish_mean(result);
  return result;
}

CoherenceResult tcv_of(const PatternDistributions& dists, const SlidingWindowCounts& counts,
                       const CoherenceConfig& config) {
  const auto tops = pattern_tops(dists, config);
  return tcv(tops, counts, config);
}

CoherenceResult cv_of(const PatternDistributions& dists, const SlidingWindowCounts& counts,
                      const CoherenceConfig& config) {
  std::vector<std::vector<std::size_t>> topics;
  for (std::size_t k = 0; k < dists.topics; ++k) {
    topics.push_back(top_venues(dists, k, config.venues));
  }
  return cv(topics, counts, config);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

SelectKResult select_k(const Corpus& corpus, std::span<const int> candidates,
                       const FitTemplate& tmpl, std::size_t chains,
                       const CoherenceConfig& config) {
  if (candidates.empty()) throw ConfigError("select-k needs at least one candidate K");
  if (chains < 1) throw ConfigError("chains must be at least 1");
  config.validate();
  const ObservationSet obs = ObservationSet::from_corpus(corpus);
  const auto counts = SlidingWindowCounts::build(corpus, config.window_size);

  SelectKResult result;
  result.table.resize(candidates.size() * chains);
  parallel_for(result.table.size(), [&](std::size_t job) {
    const int K = candidates[job / chains];
    const std::size_t chain = job % chains;
    const TldaModel model = fit(obs, tmpl.resolve(K, chain));
    result.table[job] = {K, chain, tcv_of(distributions(model), counts, config).mean};
  });

  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double sum = 0.0;
    for (std::size_t j = 0; j < chains; ++j) sum += result.table[c * chains + j].tcv;
    const double mean = sum / static_cast<double>(chains);
    result.mean_tcv.emplace_back(candidates[c], mean);
    if (mean > best || (mean == best && candidates[c] < result.best_k)) {
      best = mean;
      result.best_k = candidates[c];
    }
  }
  return result;
}

ChainChoice fit_best_chain(const Corpus& corpus, int topics, const FitTemplate& tmpl,
                           std::size_t chains, const CoherenceConfig& config) {
  if (chains < 1) throw ConfigError("chains must be at least 1");
  config.validate();
  const ObservationSet obs = ObservationSet::from_corpus(corpus);
  const auto counts = SlidingWindowCounts::build(corpus, config.window_size);
  std::vector<TldaModel> models(chains);
  std::vector<double> scores(chains);
  parallel_for(chains, [&](std::size_t c) {
    models[c] = fit(obs, tmpl.resolve(topics, c));
    scores[c] = tcv_of(distributions(models[c]), counts, config).mean;
  });
  std::size_t best = 0;
  for (std::size_t c = 1; c < chains; ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return {std::move(models[best]), best, scores};
}

std::vector<double> venue_similarity(const PatternDistributions& dists) {
  const std::size_t V = dists.categories;
  const std::size_t K = dists.topics;
  std::vector<double> norms(V, 0.0);
  for (std::size_t v = 0; v < V; ++v) {
    for (std::size_t k = 0; k < K; ++k) norms[v] += dists.phi_at(k, v) * dists.phi_at(k, v);
    norms[v] = std::sqrt(norms[v]);
  }
  std::vector<double> sim(V * V, 0.0);
  for (std::size_t a = 0; a < V; ++a) {
    sim[a * V + a] = norms[a] > 0.0 ? 1.0 : 0.0;
    for (std::size_t b = a + 1; b < V; ++b) {
      double dot = 0.0;
      for (std::size_t k = 0; k < K; ++k) dot += dists.phi_at(k, a) * dists.phi_at(k, b);
      const double denom = norms[a] * norms[b];
      const double s = denom > 0.0 ? std::clamp(dot / denom, -1.0, 1.0) : 0.0;
      sim[a * V + b] = s;
      sim[b * V + a] = s;
    }
  }
  return sim;
}

void write_tcv_table_csv(std::ostream& out, const SelectKResult& result) {
  out << "K,chain,score\n";
  for (const auto& row : result.table) {
    out << row.topics << ',' << row.chain << ',' << format_double(row.tcv) << '\n';
  }
  for (const auto& [k, mean] : result.mean_tcv) {
    out << k << ",mean," << format_double(mean) << '\n';
  }
}

void write_similarity_csv(std::ostream& out, const std::vector<double>& similarity,
                          const Corpus& corpus) {
  const std::size_t V = corpus.category_count();
  out << "category";
  for (std::size_t v = 0; v < V; ++v) {
    out << ',' << csv_escape(corpus.categories.at(static_cast<std::uint32_t>(v)));
  }
  out << '\n';
  for (std::size_t a = 0; a < V; ++a) {
    out << csv_escape(corpus.categories.at(static_cast<std::uint32_t>(a)));
    for (std::size_t b = 0; b < V; ++b) out << ',' << format_double(similarity[a * V + b]);
    out << '\n';
  }
}

}  // namespace urbanpat
