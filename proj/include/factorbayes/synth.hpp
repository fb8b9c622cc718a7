#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>

#include "dataset.hpp"
#include "partition.hpp"

#include "json.hpp"

namespace factorbayes {

// PCG-XSH-RR 64/32 (O'Neill, pcg-random.org): 64-bit LCG state with an
// xorshift-rotate output. Pure fixed-width integer arithmetic, so streams
// are identical on every platform. The default stream constant matches the
// reference implementation's.
class Pcg32 {
 public:
  explicit Pcg32(uint64_t seed, uint64_t stream = 0xda3e39cb94b95bdbULL)
      : state_(0), inc_((stream << 1u) | 1u) {
    next_u32();
    state_ += seed;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  // 53-bit-mantissa double in [0, 1)
  double next_double() {
    uint64_t hi = next_u32();
    uint64_t lo = next_u32();
    return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
  }

 private:
  uint64_t state_, inc_;
};

// Per-class override of the block distributions (same schemas, same
// partition, different probabilities).
struct ClassConditional {
  std::vector<std::vector<double>> block_distributions;
};

struct LabelSpec {
  VariableSchema schema;
  std::vector<double> prior;  // class probabilities, sums to 1
  std::vector<ClassConditional> per_class;
};

// A factorized categorical distribution to sample from: feature schemas, a
// ground-truth partition, and one probability vector per block (length =
// the block's bin count). With a label, the block distributions come from
// per_class instead.
struct GeneratorSpec {
  std::vector<VariableSchema> schemas;
  SetPartition true_partition;
  std::vector<std::vector<double>> block_distributions;
  std::optional<LabelSpec> label;
  uint64_t seed = 0;

  void validate() const {
    if (schemas.empty()) throw std::invalid_argument("generator spec has no variables");
    if (true_partition.size() != static_cast<int>(schemas.size()))
      throw std::invalid_argument("partition does not match the variable count");
    auto check_dists = [&](const std::vector<std::vector<double>>& dists, const char* what) {
      auto blocks = true_partition.blocks();
      if (dists.size() != blocks.size())
        throw std::invalid_argument(std::string(what) + ": expected one distribution per block");
      for (size_t g = 0; g < blocks.size(); ++g) {
        int64_t eta = block_bin_count(schemas, blocks[g]);
        if (static_cast<int64_t>(dists[g].size()) != eta)
          throw std::invalid_argument(std::string(what) + ": block " + std::to_string(g) +
                                      " needs " + std::to_string(eta) + " probabilities");
        double sum = 0.0;
        for (double p : dists[g]) {
          if (!(p >= 0.0) || !std::isfinite(p))
            throw std::invalid_argument(std::string(what) + ": negative or non-finite probability");
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
          throw std::invalid_argument(std::string(what) + ": block " + std::to_string(g) +
                                      " probabilities sum to " + std::to_string(sum));
      }
    };
    if (label.has_value()) {
      if (!block_distributions.empty())
        throw std::invalid_argument("labelled spec must put distributions under per_class");
      if (label->schema.cardinality() < 2)
        throw std::invalid_argument("label needs at least two classes");
      if (static_cast<int>(label->prior.size()) != label->schema.cardinality())
        throw std::invalid_argument("label prior length does not match class count");
      double sum = 0.0;
      for (double p : label->prior) {
        if (!(p >= 0.0) || !std::isfinite(p))
          throw std::invalid_argument("label prior: negative or non-finite probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("label prior does not sum to 1");
      if (static_cast<int>(label->per_class.size()) != label->schema.cardinality())
        throw std::invalid_argument("per_class needs one entry per class");
      for (const auto& cc : label->per_class) check_dists(cc.block_distributions, "per_class");
    } else {
      check_dists(block_distributions, "block_distributions");
    }
  }
};

namespace detail {

// CDF inversion in fixed left-to-right order; falls back to the last
// nonzero bin when rounding pushes u past the accumulated total.
inline int draw_categorical(Pcg32& rng, std::span<const double> probs) {
  double u = rng.next_double();
  double acc = 0.0;
  int last_nonzero = 0;
  for (size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] > 0.0) last_nonzero = static_cast<int>(j);
    acc += probs[j];
    if (u < acc) return static_cast<int>(j);
  }
  return last_nonzero;
}

}  // namespace detail

// Draw n samples. Each row draws its blocks' bins independently (label
// first when present), decodes the mixed-radix bins back to per-variable
// values, and appends the label column last. Deterministic given the seed.
inline Dataset generate(const GeneratorSpec& spec, int64_t n) {
  spec.validate();
  if (n < 0) throw std::invalid_argument("generate: negative sample count");

  Pcg32 rng(spec.seed);
  auto blocks = spec.true_partition.blocks();

  std::vector<VariableSchema> schemas = spec.schemas;
  if (spec.label) schemas.push_back(spec.label->schema);
  size_t width = schemas.size();

  std::vector<uint32_t> cells(static_cast<size_t>(n) * width, 0);
  for (int64_t r = 0; r < n; ++r) {
    uint32_t* row = cells.data() + static_cast<size_t>(r) * width;
    int y = -1;
    const std::vector<std::vector<double>>* dists = &spec.block_distributions;
    if (spec.label) {
      y = detail::draw_categorical(rng, spec.label->prior);
      dists = &spec.label->per_class[static_cast<size_t>(y)].block_distributions;
      row[width - 1] = static_cast<uint32_t>(y);
    }
    for (size_t g = 0; g < blocks.size(); ++g) {
      int64_t bin = detail::draw_categorical(rng, (*dists)[g]);
      for (size_t k = blocks[g].size(); k-- > 0;) {
        int v = blocks[g][k];
        int card = spec.schemas[static_cast<size_t>(v)].cardinality();
        row[v] = static_cast<uint32_t>(bin % card);
        bin /= card;
      }
    }
  }
  return Dataset(std::move(schemas), std::move(cells));
}

// ---- JSON spec file ----------------------------------------------------------

inline constexpr int kGeneratorSpecFormatVersion = 1;

inline nlohmann::json to_json(const GeneratorSpec& spec) {
  spec.validate();
  nlohmann::json j;
  j["format_version"] = kGeneratorSpecFormatVersion;
  j["seed"] = spec.seed;
  auto vars = nlohmann::json::array();
  for (const auto& s : spec.schemas) vars.push_back({{"name", s.name}, {"categories", s.categories}});
  j["variables"] = std::move(vars);
  std::vector<std::string> names;
  for (const auto& s : spec.schemas) names.push_back(s.name);
  j["partition"] = format_partition(spec.true_partition, names);
  if (spec.label) {
    j["label"] = {{"name", spec.label->schema.name},
                  {"categories", spec.label->schema.categories},
                  {"prior", spec.label->prior}};
    auto per_class = nlohmann::json::array();
    for (const auto& cc : spec.label->per_class)
      per_class.push_back({{"block_distributions", cc.block_distributions}});
    j["label"]["per_class"] = std::move(per_class);
  } else {
    j["block_distributions"] = spec.block_distributions;
  }
  return j;
}

inline GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
  if (!j.contains("format_version") || j.at("format_version").get<int>() != kGeneratorSpecFormatVersion)
    throw std::runtime_error("generator spec: unsupported or missing format_version");
  GeneratorSpec spec;
  spec.seed = j.value("seed", uint64_t{0});
  for (const auto& v : j.at("variables")) {
    VariableSchema s;
    s.name = v.at("name").get<std::string>();
    s.categories = v.at("categories").get<std::vector<std::string>>();
    spec.schemas.push_back(std::move(s));
  }
  std::vector<std::string> names;
  for (const auto& s : spec.schemas) names.push_back(s.name);
  spec.true_partition = parse_partition(j.at("partition").get<std::string>(), names);
  if (j.contains("label")) {
    LabelSpec label;
    label.schema.name = j.at("label").at("name").get<std::string>();
    label.schema.categories = j.at("label").at("categories").get<std::vector<std::string>>();
    label.prior = j.at("label").at("prior").get<std::vector<double>>();
    for (const auto& cc : j.at("label").at("per_class")) {
      ClassConditional c;
      c.block_distributions =
          cc.at("block_distributions").get<std::vector<std::vector<double>>>();
      label.per_class.push_back(std::move(c));
    }
    spec.label = std::move(label);
  } else {
    spec.block_distributions =
        j.at("block_distributions").get<std::vector<std::vector<double>>>();
  }
  spec.validate();
  return spec;
}

inline GeneratorSpec load_generator_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid generator spec JSON: " + std::string(e.what()));
  }
  return generator_spec_from_json(j);
}

}  // namespace factorbayes
