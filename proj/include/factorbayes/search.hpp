#pragma once

#include <cmath>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

#include "dataset.hpp"
#include "partition.hpp"
#include "scoring.hpp"

namespace factorbayes {

enum class SearchMode { Auto, Exhaustive, Greedy };

struct SearchConfig {
  SearchMode mode = SearchMode::Auto;
  int exhaustive_cap = 12;   // B(12) = 4,213,597 partitions
  double tie_epsilon = 0.0;  // scores within epsilon of the maximum count as tied
  int parallelism = 1;       // worker count hint for exhaustive scoring

  void validate() const {
    if (exhaustive_cap < 1) throw std::invalid_argument("exhaustive_cap must be >= 1");
    if (!(tie_epsilon >= 0.0) || !std::isfinite(tie_epsilon))
      throw std::invalid_argument("tie_epsilon must be finite and >= 0");
  }
};

namespace detail {

// Ties prefer more blocks (fewer parameters), then the lexicographically
// smaller growth string, so results never depend on evaluation order.
inline bool tie_break_before(const SetPartition& a, const SetPartition& b) {
  if (a.block_count() != b.block_count()) return a.block_count() > b.block_count();
  return a < b;
}

struct Candidate {
  double score = -std::numeric_limits<double>::infinity();
  SetPartition partition;
};

// Total order used for ranked lists: score descending, then tie-break.
inline bool rank_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return tie_break_before(a.partition, b.partition);
}

// Runs fn(worker, partition) over every partition of {0..n-1} on `threads`
// workers pulling batches from one shared enumerator.
template <class Fn>
void for_each_partition_parallel(int n, int threads, Fn&& fn) {
  constexpr size_t kBatch = 256;
  PartitionEnumerator en(n);
  std::mutex en_mutex;
  auto pull = [&](std::vector<SetPartition>& batch) {
    batch.clear();
    std::lock_guard<std::mutex> lock(en_mutex);
    SetPartition p;
    while (batch.size() < kBatch && en.next(p)) batch.push_back(std::move(p));
    return !batch.empty();
  };
  auto work = [&](int worker) {
    std::vector<SetPartition> batch;
    batch.reserve(kBatch);
    while (pull(batch))
      for (SetPartition& p : batch) fn(worker, std::move(p));
  };
  if (threads <= 1) {
    work(0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
  for (auto& t : pool) t.join();
}

inline void check_cap(int n_vars, const SearchConfig& cfg) {
  if (n_vars < 1) throw std::invalid_argument("search needs at least one variable");
  if (n_vars > cfg.exhaustive_cap)
    throw std::runtime_error("variable count " + std::to_string(n_vars) +
                             " exceeds the exhaustive cap " + std::to_string(cfg.exhaustive_cap) +
                             "; use greedy search");
}

}  // namespace detail

// Exhaustive maximization of an additive partition score. `score_block`
// maps a sorted variable-index block to its score contribution and is
// memoized, so each distinct block is scored once per run. Deterministic
// under any parallelism: the surviving candidate set is exactly the
// partitions within tie_epsilon of the maximum, whatever the schedule, and
// the tie-break is a pure function of the candidates.
template <class BlockScore>
ScoredPartition exhaustive_search_blocks(int n_vars, BlockScore&& score_block,
                                         const SearchConfig& cfg = {}) {
  cfg.validate();
  detail::check_cap(n_vars, cfg);

  BlockScoreCache cache;
  auto partition_score = [&](const SetPartition& p) {
    double s = 0.0;
    for (const auto& block : p.blocks()) s += cache.get_or_compute(block, score_block);
    return s;
  };

  int threads = std::max(1, cfg.parallelism);

  if (cfg.tie_epsilon == 0.0) {
    // exact ties fold under a total order, so one candidate per worker is
    // enough no matter how many partitions tie
    std::vector<detail::Candidate> best_per(static_cast<size_t>(threads));
    auto better = [](double s, const SetPartition& p, const detail::Candidate& b) {
      if (b.partition.size() == 0) return true;
      if (s != b.score) return s > b.score;
      return detail::tie_break_before(p, b.partition);
    };
    detail::for_each_partition_parallel(n_vars, threads, [&](int worker, SetPartition p) {
      double s = partition_score(p);
      auto& b = best_per[static_cast<size_t>(worker)];
      if (better(s, p, b)) b = {s, std::move(p)};
    });
    const detail::Candidate* best = nullptr;
    for (const auto& b : best_per) {
      if (b.partition.size() == 0) continue;
      if (!best || better(b.score, b.partition, *best)) best = &b;
    }
    return {best->partition, best->score, std::nullopt};
  }

  // epsilon ties: every worker keeps its window of near-maximal candidates,
  // which is a superset of the final tie window whatever the schedule
  std::vector<std::vector<detail::Candidate>> locals(static_cast<size_t>(threads));
  detail::for_each_partition_parallel(n_vars, threads, [&](int worker, SetPartition p) {
    auto& mine = locals[static_cast<size_t>(worker)];
    double s = partition_score(p);
    double local_max = mine.empty() ? -std::numeric_limits<double>::infinity() : mine.front().score;
    if (s > local_max) {
      std::erase_if(mine, [&](const detail::Candidate& c) { return c.score < s - cfg.tie_epsilon; });
      mine.insert(mine.begin(), {s, std::move(p)});
    } else if (s >= local_max - cfg.tie_epsilon) {
      mine.push_back({s, std::move(p)});
    }
  });

  double global_max = -std::numeric_limits<double>::infinity();
  for (const auto& local : locals)
    for (const auto& c : local) global_max = std::max(global_max, c.score);
  const detail::Candidate* best = nullptr;
  for (const auto& local : locals)
    for (const auto& c : local) {
      if (c.score < global_max - cfg.tie_epsilon) continue;
      if (!best || detail::tie_break_before(c.partition, best->partition)) best = &c;
    }
  return {best->partition, partition_score(best->partition), std::nullopt};
}

// Ranked list of the k best partitions under the additive score, ordered
// by score descending with the deterministic tie-break.
template <class BlockScore>
std::vector<ScoredPartition> exhaustive_top_k_blocks(int n_vars, size_t k,
                                                     BlockScore&& score_block,
                                                     const SearchConfig& cfg = {}) {
  cfg.validate();
  detail::check_cap(n_vars, cfg);
  if (k == 0) return {};

  BlockScoreCache cache;
  auto partition_score = [&](const SetPartition& p) {
    double s = 0.0;
    for (const auto& block : p.blocks()) s += cache.get_or_compute(block, score_block);
    return s;
  };

  int threads = std::max(1, cfg.parallelism);
  std::vector<std::vector<detail::Candidate>> locals(static_cast<size_t>(threads));
  detail::for_each_partition_parallel(n_vars, threads, [&](int worker, SetPartition p) {
    auto& mine = locals[static_cast<size_t>(worker)];
    mine.push_back({partition_score(p), std::move(p)});
    if (mine.size() >= 2 * k + 64) {
      std::sort(mine.begin(), mine.end(), detail::rank_before);
      mine.resize(k);
    }
  });

  std::vector<detail::Candidate> merged;
  for (auto& local : locals)
    for (auto& c : local) merged.push_back(std::move(c));
  std::sort(merged.begin(), merged.end(), detail::rank_before);
  if (merged.size() > k) merged.resize(k);
  std::vector<ScoredPartition> out;
  out.reserve(merged.size());
  for (auto& c : merged) out.push_back({std::move(c.partition), c.score, std::nullopt});
  return out;
}

struct GreedyStep {
  std::vector<int> left, right;  // blocks merged at this step
  double gain;                   // strictly positive by construction
};

struct GreedyResult {
  ScoredPartition best;
  std::vector<GreedyStep> steps;
};

// Agglomerative search: start from all singletons and repeatedly apply the
// pairwise block merge with the largest strictly positive gain. At most
// n-1 merges; the memo keeps the total block evaluations at O(n^3).
template <class BlockScore>
GreedyResult greedy_search_blocks(int n_vars, BlockScore&& score_block,
                                  const SearchConfig& cfg = {}) {
  cfg.validate();
  if (n_vars < 1) throw std::invalid_argument("search needs at least one variable");

  BlockScoreCache cache;
  auto score = [&](const std::vector<int>& block) {
    return cache.get_or_compute(block, score_block);
  };

  std::vector<std::vector<int>> blocks;
  blocks.reserve(static_cast<size_t>(n_vars));
  for (int i = 0; i < n_vars; ++i) blocks.push_back({i});

  std::vector<GreedyStep> steps;
  while (blocks.size() > 1) {
    double best_gain = 0.0;
    size_t bi = 0, bj = 0;
    std::vector<int> best_merged;
    for (size_t i = 0; i + 1 < blocks.size(); ++i) {
      for (size_t j = i + 1; j < blocks.size(); ++j) {
        std::vector<int> merged;
        merged.reserve(blocks[i].size() + blocks[j].size());
        std::merge(blocks[i].begin(), blocks[i].end(), blocks[j].begin(), blocks[j].end(),
                   std::back_inserter(merged));
        double gain = score(merged) - score(blocks[i]) - score(blocks[j]);
        // strict comparison: equal gains keep the first pair in scan order
        if (gain > best_gain) {
          best_gain = gain;
          bi = i;
          bj = j;
          best_merged = std::move(merged);
        }
      }
    }
    if (best_merged.empty()) break;  // no strictly positive merge left
    steps.push_back({blocks[bi], blocks[bj], best_gain});
    blocks[bi] = std::move(best_merged);
    blocks.erase(blocks.begin() + static_cast<ptrdiff_t>(bj));
  }

  SetPartition p = canonicalize(blocks);
  double total = 0.0;
  for (const auto& block : p.blocks()) total += score(block);
  return {{std::move(p), total, std::nullopt}, std::move(steps)};
}

// ---- dataset-facing wrappers ------------------------------------------------

inline ScoredPartition exhaustive_search(const Dataset& d, const SearchConfig& cfg = {}) {
  return exhaustive_search_blocks(
      d.var_count(), [&](std::span<const int> b) { return block_log_score(d, b); }, cfg);
}

inline GreedyResult greedy_search_trace(const Dataset& d, const SearchConfig& cfg = {}) {
  return greedy_search_blocks(
      d.var_count(), [&](std::span<const int> b) { return block_log_score(d, b); }, cfg);
}

inline ScoredPartition greedy_search(const Dataset& d, const SearchConfig& cfg = {}) {
  return greedy_search_trace(d, cfg).best;
}

// Auto mode runs exhaustively when the variable count is within the cap
// and falls back to greedy merging beyond it.
template <class BlockScore>
ScoredPartition search_best_blocks(int n_vars, BlockScore&& score_block,
                                   const SearchConfig& cfg = {}) {
  cfg.validate();
  switch (cfg.mode) {
    case SearchMode::Exhaustive:
      return exhaustive_search_blocks(n_vars, std::forward<BlockScore>(score_block), cfg);
    case SearchMode::Greedy:
      return greedy_search_blocks(n_vars, std::forward<BlockScore>(score_block), cfg).best;
    case SearchMode::Auto:
      break;
  }
  if (n_vars <= cfg.exhaustive_cap)
    return exhaustive_search_blocks(n_vars, std::forward<BlockScore>(score_block), cfg);
  return greedy_search_blocks(n_vars, std::forward<BlockScore>(score_block), cfg).best;
}

inline ScoredPartition search_best(const Dataset& d, const SearchConfig& cfg = {}) {
  return search_best_blocks(
      d.var_count(), [&](std::span<const int> b) { return block_log_score(d, b); }, cfg);
}

inline std::vector<ScoredPartition> top_k_partitions(const Dataset& d, size_t k,
                                                     const SearchConfig& cfg = {}) {
  return exhaustive_top_k_blocks(
      d.var_count(), k, [&](std::span<const int> b) { return block_log_score(d, b); }, cfg);
}

}  // namespace factorbayes
