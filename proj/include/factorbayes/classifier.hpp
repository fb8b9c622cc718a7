#pragma once

#include <cmath>
#include <fstream>
#include <optional>

#include "dataset.hpp"
#include "partition.hpp"
#include "scoring.hpp"
#include "search.hpp"

#include "json.hpp"

namespace factorbayes {

enum class PartitionMode { Shared, PerClass };

// How to encode a raw feature value missing from the model's schema.
enum class UnseenPolicy { Error, Missing };

struct ClassifierConfig {
  SearchConfig search;
  PartitionMode mode = PartitionMode::Shared;
  std::optional<SetPartition> forced_partition;  // skips the structure search
};

// Class prior counts plus, per class, a partition over the features and
// the per-block posterior count tables of that class's training rows.
struct FactoredClassifierModel {
  VariableSchema label_schema;
  std::vector<VariableSchema> feature_schemas;
  std::vector<int64_t> class_counts;
  PartitionMode partition_mode = PartitionMode::Shared;
  std::vector<SetPartition> partitions;                // one if shared, one per class otherwise
  std::vector<std::vector<GroupCounts>> block_tables;  // [class][block]

  int class_count() const { return static_cast<int>(class_counts.size()); }
  int feature_count() const { return static_cast<int>(feature_schemas.size()); }

  int64_t training_sample_count() const {
    int64_t n = 0;
    for (int64_t c : class_counts) n += c;
    return n;
  }

  const SetPartition& partition_for(int y) const {
    return partition_mode == PartitionMode::Shared ? partitions.at(0)
                                                   : partitions.at(static_cast<size_t>(y));
  }

  void validate() const {
    if (label_schema.cardinality() < 2)
      throw std::invalid_argument("model needs at least two classes");
    if (feature_schemas.empty()) throw std::invalid_argument("model needs at least one feature");
    if (static_cast<int>(class_counts.size()) != label_schema.cardinality())
      throw std::invalid_argument("class count does not match the label schema");
    size_t expected_partitions = partition_mode == PartitionMode::Shared
                                     ? 1
                                     : static_cast<size_t>(label_schema.cardinality());
    if (partitions.size() != expected_partitions)
      throw std::invalid_argument("unexpected partition count for the partition mode");
    for (const auto& p : partitions)
      if (p.size() != feature_count())
        throw std::invalid_argument("partition does not cover the feature variables");
    if (block_tables.size() != class_counts.size())
      throw std::invalid_argument("block table count does not match the class count");
    for (int y = 0; y < class_count(); ++y) {
      auto blocks = partition_for(y).blocks();
      if (block_tables[static_cast<size_t>(y)].size() != blocks.size())
        throw std::invalid_argument("class " + std::to_string(y) +
                                    ": block table count does not match the partition");
      for (size_t g = 0; g < blocks.size(); ++g) {
        const GroupCounts& t = block_tables[static_cast<size_t>(y)][g];
        if (t.variable_indices != blocks[g])
          throw std::invalid_argument("class " + std::to_string(y) + ": block " +
                                      std::to_string(g) + " table covers the wrong variables");
        if (t.bin_count() != block_bin_count(feature_schemas, blocks[g]))
          throw std::invalid_argument("class " + std::to_string(y) + ": block " +
                                      std::to_string(g) + " table has the wrong bin count");
        int64_t sum = 0;
        for (int64_t c : t.counts) {
          if (c < 0) throw std::invalid_argument("negative count in a block table");
          sum += c;
        }
        if (sum != class_counts[static_cast<size_t>(y)])
          throw std::invalid_argument("class " + std::to_string(y) + ": block " +
                                      std::to_string(g) + " counts do not sum to the class count");
      }
    }
  }
};

// Split the label off a dataset and learn one factorization per the config.
// Shared mode maximizes the summed per-class score of a single partition;
// per-class mode searches each class's rows independently.
inline FactoredClassifierModel train(const Dataset& d, const std::string& label_column,
                                     const ClassifierConfig& cfg = {}) {
  int label = d.var_index(label_column);
  if (label < 0) throw std::invalid_argument("label column '" + label_column + "' not found");
  if (d.schema(label).cardinality() < 2)
    throw std::invalid_argument("label column '" + label_column + "' needs at least two classes");
  std::vector<int> features;
  for (int v = 0; v < d.var_count(); ++v)
    if (v != label) features.push_back(v);
  if (features.empty()) throw std::invalid_argument("no feature columns besides the label");

  int n_classes = d.schema(label).cardinality();
  Dataset feats = d.project(features);
  std::vector<std::vector<int64_t>> rows_per_class(static_cast<size_t>(n_classes));
  for (int64_t r = 0; r < d.sample_count(); ++r)
    rows_per_class[d.at(r, label)].push_back(r);

  std::vector<Dataset> per_class;
  per_class.reserve(static_cast<size_t>(n_classes));
  for (int y = 0; y < n_classes; ++y)
    per_class.push_back(feats.take_rows(rows_per_class[static_cast<size_t>(y)]));

  FactoredClassifierModel m;
  m.label_schema = d.schema(label);
  m.feature_schemas = feats.schemas();
  m.partition_mode = cfg.mode;
  for (int y = 0; y < n_classes; ++y)
    m.class_counts.push_back(static_cast<int64_t>(rows_per_class[static_cast<size_t>(y)].size()));

  int n_feats = static_cast<int>(features.size());
  if (cfg.forced_partition) {
    if (cfg.forced_partition->size() != n_feats)
      throw std::invalid_argument("forced partition does not cover the feature variables");
    size_t copies = cfg.mode == PartitionMode::Shared ? 1 : static_cast<size_t>(n_classes);
    m.partitions.assign(copies, *cfg.forced_partition);
  } else if (cfg.mode == PartitionMode::Shared) {
    auto scorer = [&](std::span<const int> block) {
      double s = 0.0;
      for (const Dataset& dy : per_class) s += block_log_score(dy, block);
      return s;
    };
    m.partitions.push_back(search_best_blocks(n_feats, scorer, cfg.search).partition);
  } else {
    for (const Dataset& dy : per_class)
      m.partitions.push_back(search_best(dy, cfg.search).partition);
  }

  for (int y = 0; y < n_classes; ++y) {
    std::vector<GroupCounts> tables;
    for (const auto& block : m.partition_for(y).blocks())
      tables.push_back(group_counts(per_class[static_cast<size_t>(y)], block));
    m.block_tables.push_back(std::move(tables));
  }
  m.validate();
  return m;
}

// Unnormalized per-class log scores of one encoded feature row:
//   log (N_y + 1)/(N + C) + sum_g log (n_{g,bin} + 1)/(N_y + eta_g),
// the posterior-mean predictive of the flat Dirichlet per block.
inline std::vector<double> predict_log_scores(const FactoredClassifierModel& m,
                                              std::span<const uint32_t> row) {
  if (static_cast<int>(row.size()) != m.feature_count())
    throw std::invalid_argument("feature row has the wrong width");
  for (int v = 0; v < m.feature_count(); ++v)
    if (row[static_cast<size_t>(v)] >=
        static_cast<uint32_t>(m.feature_schemas[static_cast<size_t>(v)].cardinality()))
      throw std::out_of_range("feature value out of range for variable '" +
                              m.feature_schemas[static_cast<size_t>(v)].name + "'");
  int64_t n_total = m.training_sample_count();
  int n_classes = m.class_count();
  std::vector<double> scores(static_cast<size_t>(n_classes));
  for (int y = 0; y < n_classes; ++y) {
    int64_t ny = m.class_counts[static_cast<size_t>(y)];
    double s = std::log(static_cast<double>(ny + 1)) -
               std::log(static_cast<double>(n_total + n_classes));
    const auto& tables = m.block_tables[static_cast<size_t>(y)];
    for (const GroupCounts& t : tables) {
      int64_t bin = block_bin(row, t.variable_indices, m.feature_schemas);
      s += std::log(static_cast<double>(t.counts[static_cast<size_t>(bin)] + 1)) -
           std::log(static_cast<double>(ny + t.bin_count()));
    }
    scores[static_cast<size_t>(y)] = s;
  }
  return scores;
}

// Normalized posterior over classes; entries are positive and sum to 1.
inline std::vector<double> predict(const FactoredClassifierModel& m,
                                   std::span<const uint32_t> row) {
  std::vector<double> scores = predict_log_scores(m, row);
  double mx = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (double& s : scores) {
    s = std::exp(s - mx);
    total += s;
  }
  for (double& s : scores) s /= total;
  return scores;
}

// Encode raw feature labels against the model's schemas, in feature order.
inline std::vector<uint32_t> encode_features(const FactoredClassifierModel& m,
                                             std::span<const std::string> raw,
                                             UnseenPolicy policy = UnseenPolicy::Error) {
  if (static_cast<int>(raw.size()) != m.feature_count())
    throw std::invalid_argument("expected " + std::to_string(m.feature_count()) +
                                " feature values, got " + std::to_string(raw.size()));
  std::vector<uint32_t> row(raw.size());
  for (size_t v = 0; v < raw.size(); ++v) {
    const VariableSchema& schema = m.feature_schemas[v];
    int code = schema.index_of(raw[v]);
    if (code < 0 && policy == UnseenPolicy::Missing) code = schema.index_of("");
    if (code < 0)
      throw std::runtime_error("unseen category '" + raw[v] + "' for variable '" + schema.name +
                               "'");
    row[v] = static_cast<uint32_t>(code);
  }
  return row;
}

struct Evaluation {
  double accuracy = 0.0;
  double log_loss = 0.0;
  std::vector<std::vector<int64_t>> confusion;  // [true][predicted]
};

// Score a labelled dataset. Columns are matched to the model by name and
// category labels are remapped, so the dataset may have been loaded with
// its own inferred schemas.
inline Evaluation evaluate(const FactoredClassifierModel& m, const Dataset& d) {
  if (d.sample_count() == 0)
    throw std::invalid_argument("evaluate: empty dataset has no defined metrics");

  auto locate = [&](const VariableSchema& want) {
    int col = d.var_index(want.name);
    if (col < 0)
      throw std::invalid_argument("schema mismatch: dataset lacks column '" + want.name + "'");
    return col;
  };
  auto remap_for = [&](const VariableSchema& want, int col) {
    const VariableSchema& have = d.schema(col);
    std::vector<uint32_t> remap(static_cast<size_t>(have.cardinality()));
    for (int c = 0; c < have.cardinality(); ++c) {
      int code = want.index_of(have.categories[static_cast<size_t>(c)]);
      if (code < 0)
        throw std::runtime_error("unseen category '" + have.categories[static_cast<size_t>(c)] +
                                 "' for variable '" + want.name + "'");
      remap[static_cast<size_t>(c)] = static_cast<uint32_t>(code);
    }
    return remap;
  };

  int label_col = locate(m.label_schema);
  std::vector<uint32_t> label_remap = remap_for(m.label_schema, label_col);
  std::vector<int> feature_cols;
  std::vector<std::vector<uint32_t>> feature_remaps;
  for (const auto& schema : m.feature_schemas) {
    int col = locate(schema);
    feature_cols.push_back(col);
    feature_remaps.push_back(remap_for(schema, col));
  }

  int n_classes = m.class_count();
  Evaluation eval;
  eval.confusion.assign(static_cast<size_t>(n_classes),
                        std::vector<int64_t>(static_cast<size_t>(n_classes), 0));
  std::vector<uint32_t> row(static_cast<size_t>(m.feature_count()));
  int64_t hits = 0;
  double loss = 0.0;
  for (int64_t r = 0; r < d.sample_count(); ++r) {
    for (size_t v = 0; v < feature_cols.size(); ++v)
      row[v] = feature_remaps[v][d.at(r, feature_cols[v])];
    uint32_t truth = label_remap[d.at(r, label_col)];
    std::vector<double> scores = predict_log_scores(m, row);
    // stable log posterior of the true class: s_true - logsumexp(s)
    double mx = *std::max_element(scores.begin(), scores.end());
    double lse = 0.0;
    for (double s : scores) lse += std::exp(s - mx);
    lse = mx + std::log(lse);
    loss -= scores[truth] - lse;
    int arg = 0;
    for (int y = 1; y < n_classes; ++y)
      if (scores[static_cast<size_t>(y)] > scores[static_cast<size_t>(arg)]) arg = y;
    if (static_cast<uint32_t>(arg) == truth) ++hits;
    ++eval.confusion[truth][static_cast<size_t>(arg)];
  }
  eval.accuracy = static_cast<double>(hits) / static_cast<double>(d.sample_count());
  eval.log_loss = loss / static_cast<double>(d.sample_count());
  return eval;
}

// ---- model file ---------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const FactoredClassifierModel& m) {
  m.validate();
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["label"] = {{"name", m.label_schema.name}, {"categories", m.label_schema.categories}};
  auto feats = nlohmann::json::array();
  for (const auto& s : m.feature_schemas)
    feats.push_back({{"name", s.name}, {"categories", s.categories}});
  j["features"] = std::move(feats);
  j["partition_mode"] = m.partition_mode == PartitionMode::Shared ? "shared" : "per_class";
  std::vector<std::string> names;
  for (const auto& s : m.feature_schemas) names.push_back(s.name);
  auto parts = nlohmann::json::array();
  for (const auto& p : m.partitions) parts.push_back(format_partition(p, names));
  j["partitions"] = std::move(parts);
  j["class_counts"] = m.class_counts;
  auto tables = nlohmann::json::array();
  for (const auto& per_class : m.block_tables) {
    auto class_tables = nlohmann::json::array();
    for (const GroupCounts& t : per_class) class_tables.push_back(t.counts);
    tables.push_back(std::move(class_tables));
  }
  j["block_tables"] = std::move(tables);
  return j;
}

inline FactoredClassifierModel model_from_json(const nlohmann::json& j) {
  if (!j.contains("format_version") || j.at("format_version").get<int>() != kModelFormatVersion)
    throw std::runtime_error("model file: unsupported or missing format_version");
  FactoredClassifierModel m;
  m.label_schema.name = j.at("label").at("name").get<std::string>();
  m.label_schema.categories = j.at("label").at("categories").get<std::vector<std::string>>();
  for (const auto& f : j.at("features")) {
    VariableSchema s;
    s.name = f.at("name").get<std::string>();
    s.categories = f.at("categories").get<std::vector<std::string>>();
    m.feature_schemas.push_back(std::move(s));
  }
  std::string mode = j.at("partition_mode").get<std::string>();
  if (mode == "shared")
    m.partition_mode = PartitionMode::Shared;
  else if (mode == "per_class")
    m.partition_mode = PartitionMode::PerClass;
  else
    throw std::runtime_error("model file: unknown partition_mode '" + mode + "'");
  std::vector<std::string> names;
  for (const auto& s : m.feature_schemas) names.push_back(s.name);
  for (const auto& p : j.at("partitions"))
    m.partitions.push_back(parse_partition(p.get<std::string>(), names));
  m.class_counts = j.at("class_counts").get<std::vector<int64_t>>();
  for (int y = 0; y < m.class_count(); ++y) {
    const auto& per_class = j.at("block_tables").at(static_cast<size_t>(y));
    auto blocks = m.partition_for(y).blocks();
    if (per_class.size() != blocks.size())
      throw std::runtime_error("model file: block table count mismatch for class " +
                               std::to_string(y));
    std::vector<GroupCounts> tables;
    for (size_t g = 0; g < blocks.size(); ++g) {
      GroupCounts t;
      t.variable_indices = blocks[g];
      t.counts = per_class.at(g).get<std::vector<int64_t>>();
      for (int64_t c : t.counts) t.total += c;
      tables.push_back(std::move(t));
    }
    m.block_tables.push_back(std::move(tables));
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("model file: " + std::string(e.what()));
  }
  return m;
}

inline void save_model(const FactoredClassifierModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << to_json(m).dump(2) << '\n';
}

inline FactoredClassifierModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid model JSON: " + std::string(e.what()));
  }
  return model_from_json(j);
}

}  // namespace factorbayes
