#pragma once

// CSV ingestion, train-fitted preprocessing, and assembling bags with drawn
// label proportions from a labeled dataset.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "llp/bags.hpp"
#include "llp/common.hpp"
#include "llp/model.hpp"

namespace llp {

enum class ColumnType { numeric, categorical };

struct ColumnSpec {
  std::string name;
  ColumnType type = ColumnType::numeric;
  // For categorical columns: fixed list from the schema, or the values seen
  // while loading (first-appearance order) when the schema gives none.
  std::vector<std::string> categories;
  bool fixed_categories = false;
};

struct Schema {
  std::string label_column;
  std::string positive_value;
  std::vector<ColumnSpec> columns;  // feature columns in schema order
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

// One CSV record with double-quote escaping. Throws on an unterminated quote.
inline std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(detail::trim(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw usage_error("unterminated quote");
  fields.push_back(detail::trim(cur));
  return fields;
}

// Schema file: one `key = value` per line, `#` comments.
//   label = income
//   positive = >50K
//   age = numeric
//   workclass = categorical
//   sex = categorical: Female | Male
inline Schema parse_schema(std::istream& in) {
  Schema s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw usage_error("schema line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "label") {
      s.label_column = value;
    } else if (key == "positive") {
      s.positive_value = value;
    } else if (value == "numeric") {
      s.columns.push_back({key, ColumnType::numeric, {}, false});
    } else if (value.rfind("categorical", 0) == 0) {
      ColumnSpec c{key, ColumnType::categorical, {}, false};
      if (const auto colon = value.find(':'); colon != std::string::npos) {
        c.categories = detail::split(value.substr(colon + 1), '|');
        c.fixed_categories = true;
        if (c.categories.empty()) throw usage_error("schema line " + std::to_string(lineno) + ": empty category list");
      }
      s.columns.push_back(std::move(c));
    } else if (value == "ignore") {
      continue;
    } else {
      throw usage_error("schema line " + std::to_string(lineno) + ": unknown column type '" + value + "'");
    }
  }
  if (s.label_column.empty()) throw usage_error("schema: no label column");
  if (s.positive_value.empty()) throw usage_error("schema: no positive class value");
  if (s.columns.empty()) throw usage_error("schema: no feature columns");
  return s;
}

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot open schema file " + path);
  return parse_schema(in);
}

// Raw table: numeric values as read, categorical values as category codes.
struct Dataset {
  std::vector<ColumnSpec> columns;
  Matrix values;
  std::vector<Label> labels;
  std::size_t dropped_rows = 0;  // rows with missing values

  std::size_t rows() const { return labels.size(); }
};

inline bool is_missing(const std::string& v) { return v.empty() || v == "?" || v == "NA"; }

inline Dataset parse_csv(std::istream& in, Schema schema) {
  std::string line;
  if (!std::getline(in, line)) throw usage_error("csv: empty input");
  const auto header = parse_csv_line(line);
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < header.size(); ++i) pos[header[i]] = i;
  const auto find = [&](const std::string& name) {
    const auto it = pos.find(name);
    if (it == pos.end()) throw usage_error("csv: column '" + name + "' not in header");
    return it->second;
  };
  const std::size_t label_at = find(schema.label_column);
  std::vector<std::size_t> at;
  for (const auto& c : schema.columns) at.push_back(find(c.name));

  Dataset ds;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> f;
    try {
      f = parse_csv_line(line);
    } catch (const usage_error& e) {
      throw usage_error("csv line " + std::to_string(lineno) + ": " + e.what());
    }
    if (f.size() != header.size())
      throw usage_error("csv line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(f.size()));
    bool missing = is_missing(f[label_at]);
    for (auto i : at) missing = missing || is_missing(f[i]);
    if (missing) {
      ++ds.dropped_rows;
      continue;
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      auto& spec = schema.columns[c];
      const std::string& v = f[at[c]];
      if (spec.type == ColumnType::numeric) {
        std::size_t used = 0;
        double x = 0.0;
        try {
          x = std::stod(v, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != v.size())
          throw usage_error("csv line " + std::to_string(lineno) + ": column '" + spec.name + "' is not numeric: '" + v + "'");
        row.push_back(x);
      } else {
        auto it = std::find(spec.categories.begin(), spec.categories.end(), v);
        if (it == spec.categories.end()) {
          if (spec.fixed_categories)
            throw usage_error("csv line " + std::to_string(lineno) + ": unknown category '" + v + "' in column '" +
                              spec.name + "'");
          spec.categories.push_back(v);
          it = spec.categories.end() - 1;
        }
        row.push_back(static_cast<double>(it - spec.categories.begin()));
      }
    }
    rows.push_back(std::move(row));
    ds.labels.push_back(f[label_at] == schema.positive_value ? Label::positive : Label::negative);
  }
  ds.columns = schema.columns;
  ds.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(schema.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      ds.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return ds;
}

inline Dataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot open data file " + path);
  return parse_csv(in, schema);
}

// Row subset of a dataset.
inline Dataset select_rows(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out;
  out.columns = ds.columns;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), ds.values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = ds.values.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(ds.labels[rows[i]]);
  }
  return out;
}

// Content hash of a raw table, used to record what a preprocessor was fitted on.
inline std::uint64_t fingerprint(const Dataset& ds) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(ds.values.rows()) * 31 + static_cast<std::uint64_t>(ds.values.cols()));
  for (Eigen::Index i = 0; i < ds.values.size(); ++i) {
    std::uint64_t bits = 0;
    const double v = ds.values.data()[i];
    std::memcpy(&bits, &v, sizeof bits);
    h = mix64(h ^ bits);
  }
  return h;
}

// Standardizes numeric columns (population moments) and one-hot encodes
// categorical ones. Parameters come from the data passed to fit() only.
class Preprocessor {
 public:
  static Preprocessor fit(const Dataset& train) {
    if (train.rows() == 0) throw usage_error("preprocess: no training rows");
    Preprocessor p;
    p.columns_ = train.columns;
    p.fitted_on_ = fingerprint(train);
    for (std::size_t c = 0; c < train.columns.size(); ++c) {
      const auto col = train.values.col(static_cast<Eigen::Index>(c));
      if (train.columns[c].type == ColumnType::numeric) {
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().mean());
        if (!(sd > 0.0)) throw compute_error("preprocess: column '" + train.columns[c].name + "' has zero variance");
        p.mean_.push_back(mean);
        p.sd_.push_back(sd);
      } else {
        p.mean_.push_back(0.0);
        p.sd_.push_back(1.0);
      }
    }
    return p;
  }

  std::size_t output_dimension() const {
    std::size_t d = 0;
    for (const auto& c : columns_) d += c.type == ColumnType::numeric ? 1 : c.categories.size();
    return d;
  }

  Matrix transform(const Dataset& ds) const {
    if (ds.columns.size() != columns_.size()) throw usage_error("preprocess: column count mismatch");
    Matrix out = Matrix::Zero(ds.values.rows(), static_cast<Eigen::Index>(output_dimension()));
    Eigen::Index at = 0;
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      if (columns_[c].type == ColumnType::numeric) {
        out.col(at) = (ds.values.col(ci).array() - mean_[c]) / sd_[c];
        ++at;
      } else {
        const auto width = static_cast<Eigen::Index>(columns_[c].categories.size());
        for (Eigen::Index r = 0; r < ds.values.rows(); ++r) {
          const auto code = static_cast<Eigen::Index>(ds.values(r, ci));
          if (code < 0 || code >= width) throw usage_error("preprocess: category outside the fitted list");
          out(r, at + code) = 1.0;
        }
        at += width;
      }
    }
    return out;
  }

  std::uint64_t fitted_on() const { return fitted_on_; }
  const std::vector<double>& means() const { return mean_; }
  const std::vector<double>& scales() const { return sd_; }

 private:
  std::vector<ColumnSpec> columns_;
  std::vector<double> mean_, sd_;
  std::uint64_t fitted_on_ = 0;
};

inline Matrix preprocess(const Dataset& ds) { return Preprocessor::fit(ds).transform(ds); }

// ---------------------------------------------------------------------------
// Bag assembly

struct BagAssembly {
  std::vector<std::vector<std::size_t>> bag_rows;  // dataset rows per bag
  std::vector<double> drawn_lps;                   // gamma_i
  std::vector<std::size_t> test_rows;              // every row not placed in a bag
};

enum class AssemblyDesign {
  fixed_total,  // T fixed, T / n bags
  fixed_bags,   // bag count fixed, T = count * n
};

// Draws one proportion per bag, realizes round(n gamma) positives, and fills
// each bag without replacement from shuffled class pools.
inline BagAssembly assemble_bags(std::span<const Label> labels, std::size_t bag_size, const LPDistribution& lps,
                                 std::size_t total_or_count, std::uint64_t seed,
                                 AssemblyDesign design = AssemblyDesign::fixed_total) {
  if (bag_size == 0) throw usage_error("assemble_bags: bag size must be positive");
  std::size_t count = 0;
  if (design == AssemblyDesign::fixed_total) {
    if (total_or_count == 0 || total_or_count % bag_size != 0)
      throw usage_error("assemble_bags: T must be a positive multiple of the bag size");
    count = total_or_count / bag_size;
  } else {
    if (total_or_count == 0) throw usage_error("assemble_bags: bag count must be positive");
    count = total_or_count;
  }
  BagAssembly out;
  out.drawn_lps = sample_lps(lps, count, derive_seed(seed, "lps"));

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == Label::positive ? pos : neg).push_back(i);
  Rng rng = make_rng(derive_seed(seed, "pools"));
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);

  std::size_t next_pos = 0, next_neg = 0;
  for (double gamma : out.drawn_lps) {
    const auto npos = static_cast<std::size_t>(std::lround(static_cast<double>(bag_size) * gamma));
    const std::size_t nneg = bag_size - npos;
    if (next_pos + npos > pos.size() || next_neg + nneg > neg.size())
      throw compute_error("assemble_bags: class pool exhausted (need more " +
                          std::string(next_pos + npos > pos.size() ? "positive" : "negative") + " instances)");
    std::vector<std::size_t> rows(pos.begin() + static_cast<std::ptrdiff_t>(next_pos),
                                  pos.begin() + static_cast<std::ptrdiff_t>(next_pos + npos));
    rows.insert(rows.end(), neg.begin() + static_cast<std::ptrdiff_t>(next_neg),
                neg.begin() + static_cast<std::ptrdiff_t>(next_neg + nneg));
    std::shuffle(rows.begin(), rows.end(), rng);
    next_pos += npos;
    next_neg += nneg;
    out.bag_rows.push_back(std::move(rows));
  }
  out.test_rows.insert(out.test_rows.end(), pos.begin() + static_cast<std::ptrdiff_t>(next_pos), pos.end());
  out.test_rows.insert(out.test_rows.end(), neg.begin() + static_cast<std::ptrdiff_t>(next_neg), neg.end());
  std::sort(out.test_rows.begin(), out.test_rows.end());
  return out;
}

// Bags carrying feature rows of `features`; hidden labels are attached only
// when `with_labels` (evaluation of simulations).
inline std::vector<Bag> materialize_bags(const BagAssembly& a, const Matrix& features, std::span<const Label> labels,
                                         bool with_labels = true) {
  std::vector<Bag> bags;
  for (std::size_t b = 0; b < a.bag_rows.size(); ++b) {
    Bag bag;
    std::vector<Label> ys;
    for (auto r : a.bag_rows[b]) {
      FeatureVector x(static_cast<std::size_t>(features.cols()));
      for (Eigen::Index k = 0; k < features.cols(); ++k) x[static_cast<std::size_t>(k)] = features(static_cast<Eigen::Index>(r), k);
      bag.instances.push_back(std::move(x));
      ys.push_back(labels[r]);
    }
    bag.empirical_lp = empirical_lp(ys);
    bag.true_lp = a.drawn_lps[b];
    if (with_labels) bag.hidden_labels = std::move(ys);
    bags.push_back(std::move(bag));
  }
  return bags;
}

inline LabeledSample materialize_rows(std::span<const std::size_t> rows, const Matrix& features,
                                      std::span<const Label> labels) {
  LabeledSample s;
  for (auto r : rows) {
    FeatureVector x(static_cast<std::size_t>(features.cols()));
    for (Eigen::Index k = 0; k < features.cols(); ++k) x[static_cast<std::size_t>(k)] = features(static_cast<Eigen::Index>(r), k);
    s.instances.push_back(std::move(x));
    s.labels.push_back(labels[r]);
  }
  return s;
}

}  // namespace llp
