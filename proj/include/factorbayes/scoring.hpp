#pragma once

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <unordered_map>

#include "dataset.hpp"
#include "partition.hpp"

namespace factorbayes {

namespace detail {

// glibc's lgamma writes the signgam global; lgamma_r keeps concurrent
// scoring free of that data race. Arguments here are always positive.
inline double lgamma_pos(double x) {
#ifdef __GLIBC__
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

}  // namespace detail

// log B(1 + n) where B is the multivariate Beta (the Dirichlet
// normalizer): sum_j lgamma(n_j + 1) - lgamma(sum_j n_j + eta). Everything
// stays in log space, so counts far beyond factorial range are fine.
inline double log_beta_one_plus(std::span<const int64_t> counts) {
  if (counts.empty()) throw std::invalid_argument("log_beta_one_plus: empty count vector");
  double s = 0.0;
  int64_t total = 0;
  for (int64_t c : counts) {
    if (c < 0) throw std::invalid_argument("log_beta_one_plus: negative count");
    s += detail::lgamma_pos(static_cast<double>(c + 1));
    total += c;
  }
  return s - detail::lgamma_pos(static_cast<double>(total + static_cast<int64_t>(counts.size())));
}

namespace detail {

// One block's score from its count table: log B(alpha + n) - log B(alpha*1).
// Zero bins contribute exactly nothing, so sparse and dense tallies agree
// bit for bit as long as bins are visited in ascending order.
inline double block_score_from_bins(std::span<const std::pair<int64_t, int64_t>> nonzero_bins,
                                    int64_t eta, int64_t total, double alpha) {
  double lga = lgamma_pos(alpha);
  double s = 0.0;
  for (const auto& [bin, count] : nonzero_bins) s += lgamma_pos(alpha + count) - lga;
  double alpha_eta = alpha * static_cast<double>(eta);
  s -= lgamma_pos(alpha_eta + static_cast<double>(total)) - lgamma_pos(alpha_eta);
  return s;
}

inline double block_log_score_impl(const Dataset& d, std::span<const int> block, double alpha,
                                   int64_t dense_limit) {
  validate_block(d.var_count(), block);
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("concentration alpha must be positive and finite");
  int64_t eta = block_bin_count(d.schemas(), block);
  std::vector<std::pair<int64_t, int64_t>> bins;
  if (eta <= dense_limit) {
    std::vector<int64_t> counts(static_cast<size_t>(eta), 0);
    for (int64_t r = 0; r < d.sample_count(); ++r)
      ++counts[block_bin(d.row(r), block, d.schemas())];
    for (int64_t b = 0; b < eta; ++b)
      if (counts[b] > 0) bins.emplace_back(b, counts[b]);
  } else {
    std::map<int64_t, int64_t> sparse;
    for (int64_t r = 0; r < d.sample_count(); ++r)
      ++sparse[block_bin(d.row(r), block, d.schemas())];
    bins.assign(sparse.begin(), sparse.end());
  }
  return block_score_from_bins(bins, eta, d.sample_count(), alpha);
}

}  // namespace detail

// Comparable score contribution of one block: log B(alpha + n_g) minus the
// prior normalizer log B(alpha*1) over the block's eta bins. alpha = 1 is
// the flat prior; other values are accepted but experimental.
inline double block_log_score(const Dataset& d, std::span<const int> block, double alpha = 1.0) {
  return detail::block_log_score_impl(d, block, alpha, int64_t(1) << 20);
}

// Deterministic per-block score memo keyed by the sorted variable indices.
// Safe for concurrent use; a racing recompute stores the identical value,
// so the last write winning is harmless.
class BlockScoreCache {
 public:
  template <class Fn>
  double get_or_compute(std::span<const int> block, Fn&& compute) {
    Key key(block.begin(), block.end());
    {
      std::shared_lock lock(mutex_);
      auto it = table_.find(key);
      if (it != table_.end()) return it->second;
    }
    double value = compute(std::span<const int>(key));
    std::unique_lock lock(mutex_);
    return table_.insert_or_assign(std::move(key), value).first->second;
  }

  size_t size() const {
    std::shared_lock lock(mutex_);
    return table_.size();
  }

 private:
  using Key = std::vector<int>;
  struct KeyHash {
    size_t operator()(const Key& k) const {
      size_t h = 1469598103934665603ull;
      for (int v : k) {
        h ^= static_cast<size_t>(v) + 0x9e3779b97f4a7c15ull;
        h *= 1099511628211ull;
      }
      return h;
    }
  };

  mutable std::shared_mutex mutex_;
  std::unordered_map<Key, double, KeyHash> table_;
};

// A partition with its log marginal likelihood. The comparable score drops
// the multinomial coefficient, which depends only on the joint counts and
// therefore cancels in every comparison between partitions of one dataset.
struct ScoredPartition {
  SetPartition partition;
  double comparable_log_score = 0.0;
  std::optional<double> full_log_marginal;
};

// log( N! / prod_i n_i! ) over the joint bins of all variables. Only
// occupied bins matter, so the joint table is tallied by row hashing.
inline double log_multinomial_coefficient(const Dataset& d) {
  std::unordered_map<std::string, int64_t> joint;
  joint.reserve(static_cast<size_t>(d.sample_count()));
  for (int64_t r = 0; r < d.sample_count(); ++r) {
    auto row = d.row(r);
    std::string key(reinterpret_cast<const char*>(row.data()), row.size_bytes());
    ++joint[key];
  }
  std::vector<int64_t> occupancy;
  occupancy.reserve(joint.size());
  for (const auto& [key, count] : joint) occupancy.push_back(count);
  std::sort(occupancy.begin(), occupancy.end());  // fixed summation order
  double s = detail::lgamma_pos(static_cast<double>(d.sample_count() + 1));
  for (int64_t c : occupancy) s -= detail::lgamma_pos(static_cast<double>(c + 1));
  return s;
}

// Log marginal likelihood of the dataset under the factorization `p`:
// the product over blocks of B(1 + n_g) / B(1), all in log space, plus the
// multinomial coefficient when requested.
inline ScoredPartition log_marginal_likelihood(const Dataset& d, const SetPartition& p,
                                               bool include_coefficient = false,
                                               double alpha = 1.0) {
  if (p.size() != d.var_count())
    throw std::invalid_argument("partition covers " + std::to_string(p.size()) +
                                " variables, dataset has " + std::to_string(d.var_count()));
  double s = 0.0;
  for (const auto& block : p.blocks()) s += block_log_score(d, block, alpha);
  ScoredPartition out{p, s, std::nullopt};
  if (include_coefficient) out.full_log_marginal = s + log_multinomial_coefficient(d);
  return out;
}

// ---- two binary variables ---------------------------------------------------

// Closed forms for a pair of binary variables. Count layout:
//   n1 = #(0,0), n2 = #(0,1), n3 = #(1,0), n4 = #(1,1),
// which is the mixed-radix order of group_counts over the pair.
struct TwoBinaryScores {
  double log_independent;  // log P(D | M_I), the two variables factored apart
  double log_dependent;    // log P(D | M_D), one joint table
};

inline TwoBinaryScores two_binary_scores(int64_t n1, int64_t n2, int64_t n3, int64_t n4) {
  for (int64_t v : {n1, n2, n3, n4})
    if (v < 0) throw std::invalid_argument("two_binary_scores: negative count");
  auto lf = [](int64_t k) { return detail::lgamma_pos(static_cast<double>(k + 1)); };
  int64_t total = n1 + n2 + n3 + n4;
  double log_independent = lf(n1 + n2) + lf(n1 + n3) + lf(n2 + n4) + lf(n3 + n4) -
                           (lf(n1) + lf(n2) + lf(n3) + lf(n4)) -
                           std::log(static_cast<double>(total + 1)) - lf(total + 1);
  // one log of the cubic keeps the no-data case exactly zero
  double log_dependent = std::log(6.0) - std::log(static_cast<double>(total + 3) *
                                                  static_cast<double>(total + 2) *
                                                  static_cast<double>(total + 1));
  return {log_independent, log_dependent};
}

// Bayes factor K = P(D|M_I) / P(D|M_D). K < 1 favors the dependent
// (correlated) hypothesis, K > 1 the independent one.
inline double bayes_factor_two_binary(int64_t n1, int64_t n2, int64_t n3, int64_t n4) {
  TwoBinaryScores s = two_binary_scores(n1, n2, n3, n4);
  return std::exp(s.log_independent - s.log_dependent);
}

// Comparable score plus a log-prior over partitions. The evidence P(D)
// is never computed; only the ordering of models matters.
template <class LogPrior>
inline double log_posterior_score(const ScoredPartition& sp, LogPrior&& prior) {
  double lp = prior(sp.partition);
  if (!std::isfinite(lp)) throw std::invalid_argument("log-prior is not finite");
  return sp.comparable_log_score + lp;
}

inline double log_posterior_score(const ScoredPartition& sp) {
  return sp.comparable_log_score;  // uniform prior
}

}  // namespace factorbayes
