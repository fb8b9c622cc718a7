// factorbayes command line: score factorizations of categorical data, train
// and apply the factored Bayes classifier, test two binary variables for
// independence, and sample synthetic datasets.

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "factorbayes/factorbayes.hpp"
#include "json.hpp"

namespace fb = factorbayes;
using nlohmann::json;

namespace {

struct CommonLoad {
  bool no_header = false;
  std::string missing = "error";

  fb::CsvOptions csv_options() const {
    fb::CsvOptions opt;
    opt.header = !no_header;
    if (missing == "error")
      opt.missing = fb::MissingPolicy::Error;
    else if (missing == "drop")
      opt.missing = fb::MissingPolicy::Drop;
    else if (missing == "category")
      opt.missing = fb::MissingPolicy::Category;
    else
      throw CLI::ValidationError("--missing must be error, drop, or category");
    return opt;
  }
};

fb::SearchMode parse_mode(const std::string& mode) {
  if (mode == "auto") return fb::SearchMode::Auto;
  if (mode == "exhaustive") return fb::SearchMode::Exhaustive;
  if (mode == "greedy") return fb::SearchMode::Greedy;
  throw CLI::ValidationError("--mode must be auto, exhaustive, or greedy");
}

std::string format_score(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void add_load_flags(CLI::App* cmd, CommonLoad& load) {
  cmd->add_flag("--no-header", load.no_header, "Treat the first record as data, not column names");
  cmd->add_option("--missing", load.missing, "Missing-cell policy: error, drop, or category")
      ->default_val("error");
}

// ---- factor -----------------------------------------------------------------

struct FactorArgs {
  std::string csv_path;
  std::string mode = "auto";
  int cap = 12;
  int top = 5;
  std::string format = "text";
  bool full = false;
  int threads = 1;
  double tie_epsilon = 0.0;
  CommonLoad load;
};

int run_factor(const FactorArgs& args) {
  fb::Dataset data = fb::load_csv_file(args.csv_path, args.load.csv_options());
  fb::SearchConfig cfg;
  cfg.mode = parse_mode(args.mode);
  cfg.exhaustive_cap = args.cap;
  cfg.parallelism = args.threads;
  cfg.tie_epsilon = args.tie_epsilon;
  cfg.validate();
  if (args.top < 1) throw std::invalid_argument("--top must be at least 1");

  bool exhaustive = cfg.mode == fb::SearchMode::Exhaustive ||
                    (cfg.mode == fb::SearchMode::Auto && data.var_count() <= cfg.exhaustive_cap);
  std::vector<fb::ScoredPartition> results;
  if (exhaustive) {
    results = fb::top_k_partitions(data, static_cast<size_t>(args.top), cfg);
  } else {
    results.push_back(fb::greedy_search(data, cfg));
  }
  if (args.full) {
    double coeff = fb::log_multinomial_coefficient(data);  // shared by every partition
    for (auto& r : results) r.full_log_marginal = r.comparable_log_score + coeff;
  }

  std::vector<std::string> names = data.variable_names();
  if (args.format == "json") {
    json out;
    out["mode"] = exhaustive ? "exhaustive" : "greedy";
    out["variables"] = names;
    out["sample_count"] = data.sample_count();
    auto list = json::array();
    for (size_t i = 0; i < results.size(); ++i) {
      json r;
      r["rank"] = i + 1;
      r["partition"] = fb::format_partition(results[i].partition, names);
      r["block_count"] = results[i].partition.block_count();
      r["comparable_log_score"] = results[i].comparable_log_score;
      if (results[i].full_log_marginal) r["full_log_marginal"] = *results[i].full_log_marginal;
      list.push_back(std::move(r));
    }
    out["results"] = std::move(list);
    std::cout << out.dump(2) << '\n';
  } else if (args.format == "text") {
    std::cout << "# mode: " << (exhaustive ? "exhaustive" : "greedy")
              << "  variables: " << data.var_count() << "  samples: " << data.sample_count()
              << '\n';
    for (const auto& r : results) {
      std::cout << format_score(r.comparable_log_score);
      if (r.full_log_marginal) std::cout << "  " << format_score(*r.full_log_marginal);
      std::cout << "  " << fb::format_partition(r.partition, names) << '\n';
    }
  } else {
    throw std::invalid_argument("--format must be text or json");
  }
  return 0;
}

// ---- bf2 --------------------------------------------------------------------

struct Bf2Args {
  std::vector<int64_t> counts;
  std::string format = "text";
};

int run_bf2(const Bf2Args& args) {
  const auto& n = args.counts;
  fb::TwoBinaryScores scores = fb::two_binary_scores(n[0], n[1], n[2], n[3]);
  double k = std::exp(scores.log_independent - scores.log_dependent);
  std::string verdict =
      k < 1.0 ? "favors dependence" : (k > 1.0 ? "favors independence" : "inconclusive (K=1)");
  if (args.format == "json") {
    json out{{"K", k},
             {"log_independent", scores.log_independent},
             {"log_dependent", scores.log_dependent},
             {"verdict", verdict}};
    std::cout << out.dump(2) << '\n';
  } else {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", k);
    std::cout << "K = " << buf << '\n' << verdict << '\n';
  }
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string csv_path;
  std::string label;
  std::string out_path;
  std::string partition_mode = "shared";
  std::string forced_partition;
  std::string mode = "auto";
  int cap = 12;
  int threads = 1;
  std::string format = "text";
  CommonLoad load;
};

int run_train(const TrainArgs& args) {
  fb::Dataset data = fb::load_csv_file(args.csv_path, args.load.csv_options());
  fb::ClassifierConfig cfg;
  cfg.search.mode = parse_mode(args.mode);
  cfg.search.exhaustive_cap = args.cap;
  cfg.search.parallelism = args.threads;
  if (args.partition_mode == "shared")
    cfg.mode = fb::PartitionMode::Shared;
  else if (args.partition_mode == "per-class" || args.partition_mode == "per_class")
    cfg.mode = fb::PartitionMode::PerClass;
  else
    throw std::invalid_argument("--partition-mode must be shared or per-class");
  if (!args.forced_partition.empty()) {
    std::vector<std::string> feature_names;
    for (const auto& s : data.schemas())
      if (s.name != args.label) feature_names.push_back(s.name);
    cfg.forced_partition = fb::parse_partition(args.forced_partition, feature_names);
  }

  fb::FactoredClassifierModel model = fb::train(data, args.label, cfg);
  fb::save_model(model, args.out_path);

  std::vector<std::string> names;
  for (const auto& s : model.feature_schemas) names.push_back(s.name);
  if (args.format == "json") {
    json out;
    out["model"] = args.out_path;
    out["classes"] = model.label_schema.categories;
    out["class_counts"] = model.class_counts;
    out["partition_mode"] = args.partition_mode;
    auto parts = json::array();
    for (const auto& p : model.partitions) parts.push_back(fb::format_partition(p, names));
    out["partitions"] = std::move(parts);
    std::cout << out.dump(2) << '\n';
  } else {
    std::cout << "model: " << args.out_path << '\n';
    std::cout << "classes: " << model.class_count() << "  samples: "
              << model.training_sample_count() << '\n';
    for (size_t i = 0; i < model.partitions.size(); ++i) {
      std::cout << "partition";
      if (model.partition_mode == fb::PartitionMode::PerClass)
        std::cout << "[" << model.label_schema.categories[i] << "]";
      std::cout << ": " << fb::format_partition(model.partitions[i], names) << '\n';
    }
  }
  return 0;
}

// ---- predict ------------------------------------------------------------------

struct PredictArgs {
  std::string model_path;
  std::string csv_path;
  std::string out_path;
  std::string unseen = "error";
  CommonLoad load;
};

int run_predict(const PredictArgs& args) {
  fb::FactoredClassifierModel model = fb::load_model(args.model_path);
  std::ifstream in(args.csv_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + args.csv_path);
  fb::CsvTable table = fb::read_csv_records(in, !args.load.no_header);

  fb::UnseenPolicy policy;
  if (args.unseen == "error")
    policy = fb::UnseenPolicy::Error;
  else if (args.unseen == "missing")
    policy = fb::UnseenPolicy::Missing;
  else
    throw std::invalid_argument("--unseen must be error or missing");

  // column for each feature: by header name, else positional
  std::vector<size_t> cols(static_cast<size_t>(model.feature_count()));
  if (!args.load.no_header) {
    for (int f = 0; f < model.feature_count(); ++f) {
      const std::string& want = model.feature_schemas[static_cast<size_t>(f)].name;
      auto it = std::find(table.header.begin(), table.header.end(), want);
      if (it == table.header.end())
        throw std::runtime_error("input lacks feature column '" + want + "'");
      cols[static_cast<size_t>(f)] = static_cast<size_t>(it - table.header.begin());
    }
  } else {
    size_t width = table.records.empty() ? 0 : table.records[0].size();
    if (width != static_cast<size_t>(model.feature_count()))
      throw std::runtime_error("headerless input must have exactly the feature columns");
    for (size_t f = 0; f < cols.size(); ++f) cols[f] = f;
  }

  std::ostringstream out;
  out << "prediction";
  for (const auto& cls : model.label_schema.categories) out << ",p(" << cls << ")";
  out << '\n';
  std::vector<std::string> raw(static_cast<size_t>(model.feature_count()));
  for (const auto& rec : table.records) {
    for (size_t f = 0; f < cols.size(); ++f) raw[f] = rec[cols[f]];
    std::vector<double> posterior = fb::predict(model, fb::encode_features(model, raw, policy));
    size_t arg = 0;
    for (size_t y = 1; y < posterior.size(); ++y)
      if (posterior[y] > posterior[arg]) arg = y;
    out << model.label_schema.categories[arg];
    for (double p : posterior) out << ',' << format_full(p);
    out << '\n';
  }

  if (args.out_path.empty()) {
    std::cout << out.str();
  } else {
    std::ofstream f(args.out_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write file: " + args.out_path);
    f << out.str();
  }
  return 0;
}

// ---- evaluate -------------------------------------------------------------------

struct EvaluateArgs {
  std::string model_path;
  std::string csv_path;
  std::string format = "text";
  CommonLoad load;
};

int run_evaluate(const EvaluateArgs& args) {
  fb::FactoredClassifierModel model = fb::load_model(args.model_path);
  fb::Dataset data = fb::load_csv_file(args.csv_path, args.load.csv_options());
  fb::Evaluation eval = fb::evaluate(model, data);
  if (args.format == "json") {
    json out{{"accuracy", eval.accuracy},
             {"log_loss", eval.log_loss},
             {"classes", model.label_schema.categories},
             {"confusion", eval.confusion}};
    std::cout << out.dump(2) << '\n';
  } else {
    std::cout << "accuracy: " << format_score(eval.accuracy) << '\n';
    std::cout << "log_loss: " << format_score(eval.log_loss) << '\n';
    std::cout << "confusion (rows = true class):" << '\n';
    for (int y = 0; y < model.class_count(); ++y) {
      std::cout << "  " << model.label_schema.categories[static_cast<size_t>(y)] << ":";
      for (int64_t c : eval.confusion[static_cast<size_t>(y)]) std::cout << ' ' << c;
      std::cout << '\n';
    }
  }
  return 0;
}

// ---- generate -------------------------------------------------------------------

struct GenerateArgs {
  std::string spec_path;
  int64_t n = 0;
  std::string out_path;
  std::optional<uint64_t> seed;
};

int run_generate(const GenerateArgs& args) {
  fb::GeneratorSpec spec = fb::load_generator_spec(args.spec_path);
  if (args.seed) spec.seed = *args.seed;
  fb::Dataset data = fb::generate(spec, args.n);
  if (args.out_path.empty()) {
    fb::write_csv(data, std::cout);
  } else {
    std::ofstream f(args.out_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write file: " + args.out_path);
    fb::write_csv(data, f);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factorization scoring and factored Bayes classification for categorical data"};
  app.require_subcommand(1);

  FactorArgs factor_args;
  auto* factor = app.add_subcommand("factor", "Rank factorizations of a CSV dataset");
  factor->add_option("csv", factor_args.csv_path, "Input CSV file")->required();
  factor->add_option("--mode", factor_args.mode, "Search mode: auto, exhaustive, or greedy")
      ->default_val("auto");
  factor->add_option("--cap", factor_args.cap, "Exhaustive-search variable cap")->default_val(12);
  factor->add_option("--top", factor_args.top, "Number of partitions to report")->default_val(5);
  factor->add_option("--format", factor_args.format, "Output format: text or json")
      ->default_val("text");
  factor->add_flag("--full", factor_args.full,
                   "Also report the full log marginal (with the multinomial coefficient)");
  factor->add_option("--threads", factor_args.threads, "Worker count hint")->default_val(1);
  factor->add_option("--tie-epsilon", factor_args.tie_epsilon, "Score-tie tolerance")
      ->default_val(0.0);
  add_load_flags(factor, factor_args.load);

  Bf2Args bf2_args;
  auto* bf2 = app.add_subcommand(
      "bf2", "Bayes factor for two binary variables from counts n1 n2 n3 n4");
  bf2->add_option("counts", bf2_args.counts, "Counts n1 n2 n3 n4 for (0,0),(0,1),(1,0),(1,1)")
      ->required()
      ->expected(4)
      ->check(CLI::NonNegativeNumber);
  bf2->add_option("--format", bf2_args.format, "Output format: text or json")->default_val("text");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a factored Bayes classifier");
  train->add_option("csv", train_args.csv_path, "Training CSV file")->required();
  train->add_option("--label", train_args.label, "Label column name")->required();
  train->add_option("--out", train_args.out_path, "Model output path")->required();
  train->add_option("--partition-mode", train_args.partition_mode,
                    "Structure sharing: shared or per-class")
      ->default_val("shared");
  train->add_option("--partition", train_args.forced_partition,
                    "Force this partition, e.g. \"(a,b),(c)\"; skips the search");
  train->add_option("--mode", train_args.mode, "Search mode: auto, exhaustive, or greedy")
      ->default_val("auto");
  train->add_option("--cap", train_args.cap, "Exhaustive-search variable cap")->default_val(12);
  train->add_option("--threads", train_args.threads, "Worker count hint")->default_val(1);
  train->add_option("--format", train_args.format, "Output format: text or json")
      ->default_val("text");
  add_load_flags(train, train_args.load);

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Write per-row class posteriors for a CSV");
  predict->add_option("model", predict_args.model_path, "Model JSON file")->required();
  predict->add_option("csv", predict_args.csv_path, "Input CSV file")->required();
  predict->add_option("--out", predict_args.out_path, "Output CSV path (default: stdout)");
  predict->add_option("--unseen", predict_args.unseen,
                      "Unseen-category policy: error or missing")
      ->default_val("error");
  predict->add_flag("--no-header", predict_args.load.no_header,
                    "Treat the first record as data, not column names");

  EvaluateArgs evaluate_args;
  auto* evaluate = app.add_subcommand("evaluate", "Report accuracy, log loss, and confusion");
  evaluate->add_option("model", evaluate_args.model_path, "Model JSON file")->required();
  evaluate->add_option("csv", evaluate_args.csv_path, "Labelled CSV file")->required();
  evaluate->add_option("--format", evaluate_args.format, "Output format: text or json")
      ->default_val("text");
  add_load_flags(evaluate, evaluate_args.load);

  GenerateArgs generate_args;
  auto* generate = app.add_subcommand("generate", "Sample a CSV dataset from a generator spec");
  generate->add_option("spec", generate_args.spec_path, "Generator spec JSON file")->required();
  generate->add_option("--n", generate_args.n, "Number of rows to draw")->required();
  generate->add_option("--out", generate_args.out_path, "Output CSV path (default: stdout)");
  uint64_t seed_value = 0;
  auto* seed_opt = generate->add_option("--seed", seed_value, "Override the spec's seed");

  int bell_n = 0;
  auto* bell = app.add_subcommand("bell", "Print the Bell number B(n)");
  bell->add_option("n", bell_n, "Number of variables")->required()->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (factor->parsed()) return run_factor(factor_args);
    if (bf2->parsed()) return run_bf2(bf2_args);
    if (train->parsed()) return run_train(train_args);
    if (predict->parsed()) return run_predict(predict_args);
    if (evaluate->parsed()) return run_evaluate(evaluate_args);
    if (generate->parsed()) {
      if (*seed_opt) generate_args.seed = seed_value;
      return run_generate(generate_args);
    }
    if (bell->parsed()) {
      std::cout << fb::bell_number(bell_n).str() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
