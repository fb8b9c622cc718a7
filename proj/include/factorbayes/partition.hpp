#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace factorbayes {

// A set partition of {0..n-1} in restricted-growth-string form: a[0] = 0
// and a[i] <= 1 + max(a[0..i-1]). Block ids follow first appearance, which
// makes the encoding unique per partition.
class SetPartition {
 public:
  SetPartition() = default;  // empty placeholder, size() == 0

  explicit SetPartition(std::vector<int> rgs) : rgs_(std::move(rgs)) {
    if (rgs_.empty()) throw std::invalid_argument("partition of zero variables");
    if (rgs_[0] != 0) throw std::invalid_argument("not a restricted growth string");
    int mx = 0;
    for (size_t i = 1; i < rgs_.size(); ++i) {
      if (rgs_[i] < 0 || rgs_[i] > mx + 1)
        throw std::invalid_argument("not a restricted growth string");
      mx = std::max(mx, rgs_[i]);
    }
    block_count_ = mx + 1;
  }

  static SetPartition singletons(int n) {
    std::vector<int> a(check_size(n));
    for (int i = 0; i < n; ++i) a[i] = i;
    return SetPartition(std::move(a));
  }

  static SetPartition one_block(int n) { return SetPartition(std::vector<int>(check_size(n), 0)); }

  int size() const { return static_cast<int>(rgs_.size()); }
  int block_count() const { return block_count_; }
  int block_of(int i) const { return rgs_.at(i); }
  std::span<const int> assignment() const { return rgs_; }

  std::vector<std::vector<int>> blocks() const {
    std::vector<std::vector<int>> out(block_count_);
    for (int i = 0; i < size(); ++i) out[rgs_[i]].push_back(i);
    return out;
  }

  friend bool operator==(const SetPartition&, const SetPartition&) = default;
  friend std::strong_ordering operator<=>(const SetPartition& a, const SetPartition& b) {
    return a.rgs_ <=> b.rgs_;
  }

 private:
  static int check_size(int n) {
    if (n < 1) throw std::invalid_argument("partition of zero variables");
    return n;
  }

  std::vector<int> rgs_;
  int block_count_ = 0;
};

struct SetPartitionHash {
  size_t operator()(const SetPartition& p) const {
    size_t h = 1469598103934665603ull;
    for (int v : p.assignment()) {
      h ^= static_cast<size_t>(v) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return h;
  }
};

// Unique canonical form for a list of blocks. The blocks must be disjoint,
// non-empty, and cover 0..n-1 where n is the total element count.
inline SetPartition canonicalize(const std::vector<std::vector<int>>& blocks) {
  size_t n = 0;
  for (const auto& b : blocks) {
    if (b.empty()) throw std::invalid_argument("empty block");
    n += b.size();
  }
  if (n == 0) throw std::invalid_argument("partition of zero variables");
  std::vector<int> owner(n, -1);
  for (size_t bi = 0; bi < blocks.size(); ++bi)
    for (int v : blocks[bi]) {
      if (v < 0 || static_cast<size_t>(v) >= n)
        throw std::invalid_argument("blocks leave a gap: element " + std::to_string(v) +
                                    " out of range for " + std::to_string(n) + " elements");
      if (owner[v] != -1)
        throw std::invalid_argument("blocks overlap at element " + std::to_string(v));
      owner[v] = static_cast<int>(bi);
    }
  std::vector<int> relabel(blocks.size(), -1);
  std::vector<int> rgs(n);
  int next = 0;
  for (size_t v = 0; v < n; ++v) {
    int& lab = relabel[owner[v]];
    if (lab < 0) lab = next++;
    rgs[v] = lab;
  }
  return SetPartition(std::move(rgs));
}

// Yields every set partition of {0..n-1} exactly once, in lexicographic
// order of the restricted growth string: the single block comes first,
// all singletons last, and the total equals the n-th Bell number.
class PartitionEnumerator {
 public:
  explicit PartitionEnumerator(int n) : a_(static_cast<size_t>(check(n)), 0), cap_(a_.size(), 0) {
    for (size_t j = 1; j < a_.size(); ++j) cap_[j] = 1;  // all-zero prefix
  }

  bool next(SetPartition& out) {
    if (fresh_) {
      fresh_ = false;
      out = SetPartition(a_);
      return true;
    }
    int n = static_cast<int>(a_.size());
    int i = n - 1;
    while (i > 0 && a_[i] == cap_[i]) --i;
    if (i == 0) return false;
    ++a_[i];
    for (int j = i + 1; j < n; ++j) {
      cap_[j] = std::max(cap_[j - 1], a_[j - 1] + 1);
      a_[j] = 0;
    }
    out = SetPartition(a_);
    return true;
  }

 private:
  static int check(int n) {
    if (n < 1) throw std::invalid_argument("enumerate_partitions: n must be positive");
    return n;
  }

  std::vector<int> a_, cap_;
  bool fresh_ = true;
};

// All partitions of {0..n-1}, materialized; the count is the Bell number
// B(n), so past the cap this refuses rather than exhausting memory
// (B(13) is already 27 million). Stream with PartitionEnumerator instead,
// or switch to greedy search.
inline std::vector<SetPartition> all_partitions(int n, int cap = 12) {
  if (n > cap)
    throw std::runtime_error("n = " + std::to_string(n) + " exceeds the enumeration cap " +
                             std::to_string(cap) + "; use greedy search");
  std::vector<SetPartition> out;
  PartitionEnumerator en(n);
  SetPartition p;
  while (en.next(p)) out.push_back(p);
  return out;
}

// ---- Bell numbers ----------------------------------------------------------

// Unsigned arbitrary-precision integer, base-1e9 limbs. Addition only;
// that is all the Bell triangle needs.
class BigNat {
 public:
  BigNat(uint64_t v = 0) {  // NOLINT: implicit by design
    while (v) {
      limbs_.push_back(static_cast<uint32_t>(v % kBase));
      v /= kBase;
    }
    if (limbs_.empty()) limbs_.push_back(0);
  }

  BigNat& operator+=(const BigNat& o) {
    uint64_t carry = 0;
    size_t n = std::max(limbs_.size(), o.limbs_.size());
    limbs_.resize(n, 0);
    for (size_t i = 0; i < n; ++i) {
      uint64_t s = carry + limbs_[i] + (i < o.limbs_.size() ? o.limbs_[i] : 0);
      limbs_[i] = static_cast<uint32_t>(s % kBase);
      carry = s / kBase;
    }
    if (carry) limbs_.push_back(static_cast<uint32_t>(carry));
    return *this;
  }

  friend BigNat operator+(BigNat a, const BigNat& b) {
    a += b;
    return a;
  }

  friend bool operator==(const BigNat&, const BigNat&) = default;

  bool fits_uint64() const {
    // 3 limbs max 999999999999999999 < 2^64; 4th limb needs a range check
    if (limbs_.size() <= 2) return true;
    uint64_t hi = std::numeric_limits<uint64_t>::max();
    BigNat cap(hi);
    if (limbs_.size() > cap.limbs_.size()) return false;
    if (limbs_.size() < cap.limbs_.size()) return true;
    for (size_t i = limbs_.size(); i-- > 0;) {
      if (limbs_[i] != cap.limbs_[i]) return limbs_[i] < cap.limbs_[i];
    }
    return true;
  }

  uint64_t to_uint64() const {
    if (!fits_uint64()) throw std::overflow_error("BigNat does not fit in 64 bits");
    uint64_t v = 0;
    for (size_t i = limbs_.size(); i-- > 0;) v = v * kBase + limbs_[i];
    return v;
  }

  std::string str() const {
    std::ostringstream out;
    out << limbs_.back();
    for (size_t i = limbs_.size() - 1; i-- > 0;)
      out << std::setw(9) << std::setfill('0') << limbs_[i];
    return out.str();
  }

 private:
  static constexpr uint32_t kBase = 1'000'000'000;
  std::vector<uint32_t> limbs_;  // little-endian
};

// B(n) via the Bell triangle: each row starts with the previous row's last
// entry and every further entry adds the entry above-left. Exact.
inline BigNat bell_number(int n) {
  if (n < 0) throw std::invalid_argument("bell_number: n must be non-negative");
  std::vector<BigNat> row{BigNat(1)};
  for (int k = 1; k <= n; ++k) {
    std::vector<BigNat> next;
    next.reserve(row.size() + 1);
    next.push_back(row.back());
    for (const BigNat& above : row) next.push_back(next.back() + above);
    row = std::move(next);
  }
  return row.front();
}

// ---- textual syntax --------------------------------------------------------

// Render as "(a,b),(c),(d)" with variable names, blocks in canonical order.
inline std::string format_partition(const SetPartition& p, std::span<const std::string> names) {
  if (static_cast<int>(names.size()) != p.size())
    throw std::invalid_argument("name count does not match partition size");
  std::string out;
  for (const auto& block : p.blocks()) {
    if (!out.empty()) out += ',';
    out += '(';
    for (size_t i = 0; i < block.size(); ++i) {
      if (i) out += ',';
      out += names[block[i]];
    }
    out += ')';
  }
  return out;
}

// Parse "(a,b),(c),(d)". Every named variable must occur exactly once and
// the names must cover the full list.
inline SetPartition parse_partition(std::string_view text, std::span<const std::string> names) {
  auto index_of = [&](std::string_view name) {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("unknown variable '" + std::string(name) + "' in partition");
  };

  std::vector<std::vector<int>> blocks;
  size_t i = 0;
  auto skip_ws = [&] {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  };
  skip_ws();
  while (i < text.size()) {
    if (text[i] != '(') throw std::invalid_argument("expected '(' in partition text");
    ++i;
    std::vector<int> block;
    while (true) {
      skip_ws();
      size_t start = i;
      while (i < text.size() && text[i] != ',' && text[i] != ')') ++i;
      if (i == text.size()) throw std::invalid_argument("unterminated block in partition text");
      std::string_view token = text.substr(start, i - start);
      while (!token.empty() && (token.back() == ' ' || token.back() == '\t'))
        token.remove_suffix(1);
      if (token.empty()) throw std::invalid_argument("empty variable name in partition text");
      block.push_back(index_of(token));
      if (text[i] == ')') {
        ++i;
        break;
      }
      ++i;  // ','
    }
    std::sort(block.begin(), block.end());
    blocks.push_back(std::move(block));
    skip_ws();
    if (i < text.size()) {
      if (text[i] != ',') throw std::invalid_argument("expected ',' between blocks");
      ++i;
      skip_ws();
    }
  }
  if (blocks.empty()) throw std::invalid_argument("empty partition text");
  SetPartition p = canonicalize(blocks);
  if (p.size() != static_cast<int>(names.size()))
    throw std::invalid_argument("partition does not cover all variables");
  return p;
}

}  // namespace factorbayes
