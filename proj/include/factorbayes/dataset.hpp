#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace factorbayes {

// One categorical variable: a name plus the ordered list of raw category
// labels. The encoded value of a label is its position in `categories`.
struct VariableSchema {
  std::string name;
  std::vector<std::string> categories;

  int cardinality() const { return static_cast<int>(categories.size()); }

  int index_of(std::string_view label) const {
    for (int i = 0; i < cardinality(); ++i)
      if (categories[i] == label) return i;
    return -1;
  }

  friend bool operator==(const VariableSchema&, const VariableSchema&) = default;
};

enum class MissingPolicy { Error, Drop, Category };

struct CsvOptions {
  bool header = true;
  std::string label_column;  // optional; validated to exist when non-empty
  MissingPolicy missing = MissingPolicy::Error;
};

// Immutable encoded sample matrix, row-major. Every cell holds the index
// of its raw label in the corresponding schema's category list.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<VariableSchema> schemas, std::vector<uint32_t> cells)
      : schemas_(std::move(schemas)), cells_(std::move(cells)) {
    if (schemas_.empty()) throw std::invalid_argument("dataset needs at least one variable");
    for (const auto& s : schemas_) {
      if (s.cardinality() < 1)
        throw std::invalid_argument("variable '" + s.name + "' has no categories");
      for (size_t i = 0; i < s.categories.size(); ++i)
        for (size_t j = i + 1; j < s.categories.size(); ++j)
          if (s.categories[i] == s.categories[j])
            throw std::invalid_argument("variable '" + s.name + "' has duplicate category '" +
                                        s.categories[i] + "'");
    }
    if (cells_.size() % schemas_.size() != 0)
      throw std::invalid_argument("cell count is not a multiple of the variable count");
    rows_ = static_cast<int64_t>(cells_.size() / schemas_.size());
    for (int64_t r = 0; r < rows_; ++r)
      for (size_t c = 0; c < schemas_.size(); ++c)
        if (cells_[r * schemas_.size() + c] >= static_cast<uint32_t>(schemas_[c].cardinality()))
          throw std::out_of_range("encoded value out of range at row " + std::to_string(r) +
                                  ", variable '" + schemas_[c].name + "'");
  }

  int var_count() const { return static_cast<int>(schemas_.size()); }
  int64_t sample_count() const { return rows_; }

  uint32_t at(int64_t row, int var) const { return cells_[row * schemas_.size() + var]; }

  std::span<const uint32_t> row(int64_t r) const {
    return {cells_.data() + r * schemas_.size(), schemas_.size()};
  }

  const VariableSchema& schema(int var) const { return schemas_[var]; }
  const std::vector<VariableSchema>& schemas() const { return schemas_; }

  // Index of a variable by name; -1 when absent.
  int var_index(std::string_view name) const {
    for (int i = 0; i < var_count(); ++i)
      if (schemas_[i].name == name) return i;
    return -1;
  }

  std::vector<std::string> variable_names() const {
    std::vector<std::string> names;
    names.reserve(schemas_.size());
    for (const auto& s : schemas_) names.push_back(s.name);
    return names;
  }

  std::vector<std::string> decode_row(int64_t r) const {
    std::vector<std::string> out;
    out.reserve(schemas_.size());
    for (int v = 0; v < var_count(); ++v) out.push_back(schemas_[v].categories[at(r, v)]);
    return out;
  }

  // New dataset restricted to the given columns, in the given order.
  Dataset project(std::span<const int> columns) const {
    std::vector<VariableSchema> schemas;
    for (int c : columns) {
      if (c < 0 || c >= var_count()) throw std::out_of_range("project: column out of range");
      schemas.push_back(schemas_[c]);
    }
    std::vector<uint32_t> cells;
    cells.reserve(static_cast<size_t>(rows_) * columns.size());
    for (int64_t r = 0; r < rows_; ++r)
      for (int c : columns) cells.push_back(at(r, c));
    return Dataset(std::move(schemas), std::move(cells));
  }

  // New dataset with the selected rows (row indices may repeat).
  Dataset take_rows(std::span<const int64_t> rows) const {
    std::vector<uint32_t> cells;
    cells.reserve(rows.size() * schemas_.size());
    for (int64_t r : rows) {
      if (r < 0 || r >= rows_) throw std::out_of_range("take_rows: row out of range");
      auto rv = row(r);
      cells.insert(cells.end(), rv.begin(), rv.end());
    }
    return Dataset(schemas_, std::move(cells));
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<VariableSchema> schemas_;
  std::vector<uint32_t> cells_;
  int64_t rows_ = 0;
};

// ---- CSV ----------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;  // empty when the file has no header record
  std::vector<std::vector<std::string>> records;
};

// RFC 4180 style reader: comma separated, optional quoting, quotes escaped
// by doubling, fields may contain embedded separators and line breaks.
// Accepts LF, CRLF, and CR line endings.
inline CsvTable read_csv_records(std::istream& in, bool has_header) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (text.empty()) throw std::runtime_error("empty CSV input");

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool field_started = false;

  auto end_field = [&] {
    fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(fields));
    fields.clear();
  };

  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (c == '"' && !field_started && field.empty()) {
      // quoted field
      ++i;
      bool closed = false;
      while (i < n) {
        if (text[i] == '"') {
          if (i + 1 < n && text[i + 1] == '"') {
            field += '"';
            i += 2;
          } else {
            ++i;
            closed = true;
            break;
          }
        } else {
          field += text[i++];
        }
      }
      if (!closed) throw std::runtime_error("malformed CSV: unterminated quoted field");
      field_started = true;
    } else if (c == ',') {
      end_field();
      ++i;
    } else if (c == '\n' || c == '\r') {
      end_record();
      if (c == '\r' && i + 1 < n && text[i + 1] == '\n') ++i;
      ++i;
    } else {
      if (field_started)
        throw std::runtime_error("malformed CSV: content after closing quote");
      field += c;
      ++i;
    }
  }
  if (!field.empty() || !fields.empty() || field_started) end_record();

  if (records.empty()) throw std::runtime_error("empty CSV input");

  CsvTable table;
  size_t start = 0;
  if (has_header) {
    table.header = std::move(records[0]);
    start = 1;
  }
  size_t width = has_header ? table.header.size() : records[0].size();
  for (size_t r = start; r < records.size(); ++r) {
    if (records[r].size() != width)
      throw std::runtime_error("malformed CSV: record " + std::to_string(r + 1) + " has " +
                               std::to_string(records[r].size()) + " fields, expected " +
                               std::to_string(width));
    table.records.push_back(std::move(records[r]));
  }
  return table;
}

// Load and encode a CSV stream. Column schemas are inferred: categories in
// first-appearance order. An empty field counts as missing and is handled
// per options.missing. A file with a header and no data rows loads as a
// zero-row dataset whose columns each carry the single category "".
inline Dataset load_csv(std::istream& in, const CsvOptions& options = {}) {
  CsvTable table = read_csv_records(in, options.header);

  size_t width = options.header ? table.header.size()
                                : (table.records.empty() ? 0 : table.records[0].size());
  if (width == 0) throw std::runtime_error("empty CSV input");

  std::vector<VariableSchema> schemas(width);
  for (size_t c = 0; c < width; ++c)
    schemas[c].name = options.header ? table.header[c] : "x" + std::to_string(c + 1);
  for (size_t c = 0; c < width; ++c)
    for (size_t c2 = c + 1; c2 < width; ++c2)
      if (schemas[c].name == schemas[c2].name)
        throw std::runtime_error("duplicate column name '" + schemas[c].name + "'");
  if (!options.label_column.empty()) {
    bool found = false;
    for (const auto& s : schemas) found = found || s.name == options.label_column;
    if (!found) throw std::runtime_error("label column '" + options.label_column + "' not found");
  }

  std::vector<std::unordered_map<std::string, uint32_t>> codes(width);
  std::vector<uint32_t> cells;
  cells.reserve(table.records.size() * width);

  for (size_t r = 0; r < table.records.size(); ++r) {
    const auto& rec = table.records[r];
    if (options.missing != MissingPolicy::Category) {
      int missing_at = -1;
      for (size_t c = 0; c < width; ++c)
        if (rec[c].empty()) {
          missing_at = static_cast<int>(c);
          break;
        }
      if (missing_at >= 0) {
        if (options.missing == MissingPolicy::Drop) continue;
        throw std::runtime_error("missing value at data row " + std::to_string(r + 1) +
                                 ", column '" + schemas[missing_at].name + "'");
      }
    }
    for (size_t c = 0; c < width; ++c) {
      auto [it, inserted] = codes[c].try_emplace(rec[c], static_cast<uint32_t>(codes[c].size()));
      if (inserted) schemas[c].categories.push_back(rec[c]);
      cells.push_back(it->second);
    }
  }

  // zero-row case: keep the columns scoreable (eta = 1 each)
  for (auto& s : schemas)
    if (s.categories.empty()) s.categories.push_back("");

  return Dataset(std::move(schemas), std::move(cells));
}

inline Dataset load_csv_file(const std::string& path, const CsvOptions& options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return load_csv(in, options);
}

// Write a dataset back out as CSV with a header record. Fields containing
// separators, quotes, or line breaks are quoted.
inline void write_csv(const Dataset& d, std::ostream& out) {
  auto emit = [&out](const std::string& field) {
    if (field.find_first_of(",\"\r\n") != std::string::npos) {
      out << '"';
      for (char c : field) {
        if (c == '"') out << '"';
        out << c;
      }
      out << '"';
    } else {
      out << field;
    }
  };
  for (int v = 0; v < d.var_count(); ++v) {
    if (v) out << ',';
    emit(d.schema(v).name);
  }
  out << '\n';
  for (int64_t r = 0; r < d.sample_count(); ++r) {
    for (int v = 0; v < d.var_count(); ++v) {
      if (v) out << ',';
      emit(d.schema(v).categories[d.at(r, v)]);
    }
    out << '\n';
  }
}

// ---- marginal count tables ------------------------------------------------

// Flattened contingency table over one variable block. Bin indices are
// mixed-radix with the first (lowest) variable index as the most
// significant digit, so for binary variables the bin index read in binary
// spells the variable values in order.
struct GroupCounts {
  std::vector<int> variable_indices;  // sorted ascending
  std::vector<int64_t> counts;        // length = product of cardinalities
  int64_t total = 0;

  int64_t bin_count() const { return static_cast<int64_t>(counts.size()); }
};

inline void validate_block(int var_count, std::span<const int> block) {
  if (block.empty()) throw std::invalid_argument("empty variable block");
  for (size_t i = 0; i < block.size(); ++i) {
    if (block[i] < 0 || block[i] >= var_count)
      throw std::out_of_range("block variable index " + std::to_string(block[i]) +
                              " out of range");
    if (i > 0 && block[i] <= block[i - 1])
      throw std::invalid_argument("block indices must be strictly increasing");
  }
}

// Number of bins spanned by a block (the product of its cardinalities).
inline int64_t block_bin_count(std::span<const VariableSchema> schemas,
                               std::span<const int> block) {
  int64_t eta = 1;
  for (int v : block) {
    int64_t card = schemas[v].cardinality();
    if (eta > std::numeric_limits<int64_t>::max() / card)
      throw std::overflow_error("block bin count overflows");
    eta *= card;
  }
  return eta;
}

// Mixed-radix bin of one row restricted to a block.
inline int64_t block_bin(std::span<const uint32_t> row, std::span<const int> block,
                         std::span<const VariableSchema> schemas) {
  int64_t bin = 0;
  for (int v : block) bin = bin * schemas[v].cardinality() + row[v];
  return bin;
}

// Dense tables above this many bins are refused; the scoring layer falls
// back to a sparse tally instead of materializing them.
inline constexpr int64_t kMaxDenseBins = int64_t(1) << 24;

// Marginal contingency table of the dataset over `block`, all other
// variables summed out.
inline GroupCounts group_counts(const Dataset& d, std::span<const int> block) {
  validate_block(d.var_count(), block);
  int64_t eta = block_bin_count(d.schemas(), block);
  if (eta > kMaxDenseBins)
    throw std::runtime_error("block spans " + std::to_string(eta) +
                             " bins; too large for a dense table");
  GroupCounts g;
  g.variable_indices.assign(block.begin(), block.end());
  g.counts.assign(static_cast<size_t>(eta), 0);
  for (int64_t r = 0; r < d.sample_count(); ++r)
    ++g.counts[block_bin(d.row(r), block, d.schemas())];
  g.total = d.sample_count();
  return g;
}

}  // namespace factorbayes
