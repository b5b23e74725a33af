#pragma once

// On-disk formats: bag manifest directories, model files, and JSON/CSV
// reports. Field layouts are documented in README.md.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "llp/bags.hpp"
#include "llp/bounds.hpp"
#include "llp/common.hpp"
#include "llp/data.hpp"
#include "llp/eval.hpp"
#include "llp/model.hpp"
#include "llp/pairing.hpp"
#include "llp/train.hpp"

namespace llp {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Shortest representation that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  const auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc{} || r.ptr != e) throw usage_error(where + ": not a number: '" + s + "'");
  return v;
}

inline std::size_t parse_count(const std::string& s, const std::string& where) {
  std::size_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw usage_error(where + ": not a count: '" + s + "'");
  return v;
}

namespace detail {

inline std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw usage_error("cannot write " + p.string());
  return out;
}

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw usage_error("cannot open " + p.string());
  return in;
}

inline void write_header(std::ostream& out, std::size_t dim, bool with_label) {
  for (std::size_t k = 0; k < dim; ++k) out << (k ? "," : "") << 'x' << k;
  if (with_label) out << ",label";
  out << '\n';
}

inline void write_row(std::ostream& out, const FeatureVector& x) {
  for (std::size_t k = 0; k < x.size(); ++k) out << (k ? "," : "") << format_double(x[k]);
}

// Rows of a headered numeric CSV, optionally with a trailing label column.
inline std::vector<std::vector<std::string>> read_rows(const fs::path& p, std::size_t& columns) {
  auto in = open_in(p);
  std::string line;
  if (!std::getline(in, line)) throw usage_error(p.string() + ": empty file");
  columns = parse_csv_line(line).size();
  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto f = parse_csv_line(line);
    if (f.size() != columns)
      throw usage_error(p.string() + " line " + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                        " fields, got " + std::to_string(f.size()));
    rows.push_back(std::move(f));
  }
  return rows;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bag manifest directory
//
//   manifest.csv   bag_id,n,lp,file
//   bag_<id>.csv   x0,...,x{d-1}
//   truth.csv      bag_id,true_lp,labels   (labels: space-separated +1/-1)
//   test.csv       x0,...,x{d-1},label     (optional held-out set)

inline void write_bag_directory(const fs::path& dir, std::span<const Bag> bags, const LabeledSample* test = nullptr) {
  if (bags.empty()) throw usage_error("no bags to write");
  fs::create_directories(dir);
  const std::size_t dim = bags.front().instances.empty() ? 0 : bags.front().instances.front().size();
  auto manifest = detail::open_out(dir / "manifest.csv");
  manifest << "bag_id,n,lp,file\n";
  bool any_truth = false;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const std::string file = "bag_" + std::to_string(i) + ".csv";
    manifest << i << ',' << bags[i].size() << ',' << format_double(bags[i].empirical_lp) << ',' << file << '\n';
    auto out = detail::open_out(dir / file);
    detail::write_header(out, dim, false);
    for (const auto& x : bags[i].instances) {
      detail::write_row(out, x);
      out << '\n';
    }
    any_truth = any_truth || bags[i].true_lp || bags[i].hidden_labels;
  }
  if (any_truth) {
    auto truth = detail::open_out(dir / "truth.csv");
    truth << "bag_id,true_lp,labels\n";
    for (std::size_t i = 0; i < bags.size(); ++i) {
      truth << i << ',' << (bags[i].true_lp ? format_double(*bags[i].true_lp) : std::string()) << ',';
      if (bags[i].hidden_labels)
        for (std::size_t k = 0; k < bags[i].hidden_labels->size(); ++k)
          truth << (k ? " " : "") << sign_of((*bags[i].hidden_labels)[k]);
      truth << '\n';
    }
  }
  if (test) {
    auto out = detail::open_out(dir / "test.csv");
    detail::write_header(out, dim, true);
    for (std::size_t i = 0; i < test->instances.size(); ++i) {
      detail::write_row(out, test->instances[i]);
      out << ',' << sign_of(test->labels[i]) << '\n';
    }
  }
}

inline std::vector<Bag> read_bag_directory(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.csv")) throw usage_error("no manifest.csv in " + dir.string());
  std::size_t cols = 0;
  const auto rows = detail::read_rows(dir / "manifest.csv", cols);
  if (cols != 4) throw usage_error("manifest.csv: expected columns bag_id,n,lp,file");
  std::vector<Bag> bags;
  std::optional<std::size_t> dim;
  for (const auto& r : rows) {
    const std::string where = "manifest.csv bag " + r[0];
    if (parse_count(r[0], where) != bags.size()) throw usage_error(where + ": bag ids must be 0, 1, 2, ...");
    Bag bag;
    const std::size_t n = parse_count(r[1], where);
    bag.empirical_lp = parse_double(r[2], where);
    if (!(bag.empirical_lp >= 0.0 && bag.empirical_lp <= 1.0)) throw usage_error(where + ": lp outside [0, 1]");
    std::size_t bcols = 0;
    for (const auto& xr : detail::read_rows(dir / r[3], bcols)) {
      FeatureVector x;
      for (const auto& v : xr) x.push_back(parse_double(v, r[3]));
      bag.instances.push_back(std::move(x));
    }
    if (bag.size() != n) throw usage_error(where + ": manifest says " + r[1] + " instances, file has " + std::to_string(bag.size()));
    if (n == 0) throw usage_error(where + ": empty bag");
    if (dim && *dim != bcols) throw usage_error(where + ": feature dimension differs from earlier bags");
    dim = bcols;
    bags.push_back(std::move(bag));
  }
  if (fs::exists(dir / "truth.csv")) {
    std::size_t tcols = 0;
    for (const auto& r : detail::read_rows(dir / "truth.csv", tcols)) {
      const std::size_t id = parse_count(r[0], "truth.csv");
      if (id >= bags.size()) throw usage_error("truth.csv: unknown bag id " + r[0]);
      if (!r[1].empty()) bags[id].true_lp = parse_double(r[1], "truth.csv");
      if (tcols > 2 && !r[2].empty()) {
        std::vector<Label> ys;
        std::istringstream ss(r[2]);
        int v = 0;
        while (ss >> v) ys.push_back(label_from_int(v));
        if (ys.size() != bags[id].size()) throw usage_error("truth.csv: label count mismatch for bag " + r[0]);
        bags[id].hidden_labels = std::move(ys);
      }
    }
  }
  return bags;
}

// Features plus a trailing label column (+1/-1).
inline LabeledSample read_labeled_csv(const fs::path& p) {
  std::size_t cols = 0;
  LabeledSample s;
  for (const auto& r : detail::read_rows(p, cols)) {
    if (cols < 2) throw usage_error(p.string() + ": needs at least one feature and a label column");
    FeatureVector x;
    for (std::size_t k = 0; k + 1 < r.size(); ++k) x.push_back(parse_double(r[k], p.string()));
    s.instances.push_back(std::move(x));
    s.labels.push_back(label_from_int(static_cast<int>(parse_double(r.back(), p.string()))));
  }
  if (s.instances.empty()) throw usage_error(p.string() + ": no rows");
  return s;
}

// ---------------------------------------------------------------------------
// Model file

inline json model_to_json(const DecisionFunction& f) {
  std::vector<double> anchors;
  for (Eigen::Index i = 0; i < f.anchors().rows(); ++i)
    for (Eigen::Index k = 0; k < f.anchors().cols(); ++k) anchors.push_back(f.anchors()(i, k));
  return {{"kernel", "gaussian"},
          {"bandwidth", f.kernel().bandwidth},
          {"dimension", f.dimension()},
          {"n_anchors", f.anchors().rows()},
          {"anchors", anchors},
          {"alpha", std::vector<double>(f.alpha().data(), f.alpha().data() + f.alpha().size())}};
}

inline DecisionFunction model_from_json(const json& j) {
  try {
    if (j.at("kernel").get<std::string>() != "gaussian") throw usage_error("model: unsupported kernel");
    const auto dim = j.at("dimension").get<Eigen::Index>();
    const auto m = j.at("n_anchors").get<Eigen::Index>();
    const auto anchors = j.at("anchors").get<std::vector<double>>();
    const auto alpha = j.at("alpha").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(anchors.size()) != dim * m || static_cast<Eigen::Index>(alpha.size()) != m)
      throw usage_error("model: anchors/alpha sizes disagree with n_anchors and dimension");
    Matrix a(m, dim);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index k = 0; k < dim; ++k) a(i, k) = anchors[static_cast<std::size_t>(i * dim + k)];
    return DecisionFunction(KernelConfig{j.at("bandwidth").get<double>()}, std::move(a),
                            Eigen::Map<const Vector>(alpha.data(), m));
  } catch (const json::exception& e) {
    throw usage_error(std::string("model file: ") + e.what());
  }
}

inline void write_json(const fs::path& p, const json& j) {
  auto out = detail::open_out(p);
  out << j.dump(2) << '\n';
}

inline json read_json(const fs::path& p) {
  auto in = detail::open_in(p);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw usage_error(p.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Reports

inline json pairing_to_json(const Pairing& p, std::span<const double> weights) {
  json pairs = json::array();
  for (std::size_t i = 0; i < p.pairs.size(); ++i) {
    const auto& bp = p.pairs[i];
    pairs.push_back({{"plus", bp.plus},
                     {"minus", bp.minus},
                     {"plus_lp", bp.plus_lp},
                     {"minus_lp", bp.minus_lp},
                     {"kappa_plus", bp.kappa().plus},
                     {"kappa_minus", bp.kappa().minus},
                     {"nbar", bp.nbar()},
                     {"weight", weights[i]},
                     {"objective", bp.objective()}});
  }
  return {{"objective", p.objective}, {"exact", p.exact}, {"warnings", p.warnings}, {"pairs", pairs}};
}

inline json merge_to_json(std::span<const MergedPair> merged, std::span<const double> weights) {
  json pairs = json::array();
  double objective = 0.0;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const auto& m = merged[i];
    const double contrib = m.nbar() * m.gap() * m.gap();
    objective += contrib;
    pairs.push_back({{"plus", m.plus_indices},
                     {"minus", m.minus_indices},
                     {"plus_lp", m.plus_lp},
                     {"minus_lp", m.minus_lp},
                     {"kappa_plus", m.kappa().plus},
                     {"kappa_minus", m.kappa().minus},
                     {"nbar", m.nbar()},
                     {"weight", weights[i]},
                     {"objective", contrib}});
  }
  return {{"objective", objective}, {"pairs", pairs}};
}

inline json cv_to_json(const CvResult& cv) {
  json folds = json::array();
  for (const auto& fv : cv.fold_values) {
    json row = json::array();
    for (const auto& v : fv) row.push_back(v ? json(*v) : json(nullptr));
    folds.push_back(row);
  }
  return {{"performed", cv.performed},       {"folds", cv.folds},
          {"lambdas", cv.lambdas},           {"mean_criterion", cv.mean_criterion},
          {"fold_criterion", folds},         {"skipped_folds", cv.skipped_folds},
          {"chosen_lambda", cv.best_lambda}};
}

inline json train_report(const TrainResult& r) {
  json units = json::array();
  for (std::size_t i = 0; i < r.units.size(); ++i) {
    const auto& u = r.units[i];
    units.push_back({{"plus", u.plus_bags},
                     {"minus", u.minus_bags},
                     {"plus_lp", u.plus_lp},
                     {"minus_lp", u.minus_lp},
                     {"kappa_plus", u.kappa().plus},
                     {"kappa_minus", u.kappa().minus},
                     {"weight", r.weights[i]}});
  }
  return {{"lambda", r.lambda},
          {"bandwidth", r.bandwidth},
          {"cv", cv_to_json(r.cv)},
          {"iterations", r.fit.iterations},
          {"converged", r.fit.converged},
          {"final_objective", r.fit.value},
          {"gradient_norm", r.fit.gradient_norm},
          {"units", units}};
}

inline void write_roc_csv(const fs::path& p, std::span<const RocPoint> roc) {
  auto out = detail::open_out(p);
  out << "threshold,fpr,tpr\n";
  for (const auto& pt : roc)
    out << (std::isinf(pt.threshold) ? std::string("inf") : format_double(pt.threshold)) << ','
        << format_double(pt.fpr) << ',' << format_double(pt.tpr) << '\n';
}

inline json theorem1_to_json(const Theorem1Report& r) {
  return {{"theorem", 1}, {"C", r.c}, {"D", r.d}, {"terms", r.terms}, {"sum", r.sum}, {"bound", r.bound}, {"vacuous", r.vacuous}};
}

inline json theorem2_to_json(const Theorem2Report& r) {
  json j{{"theorem", 2},
         {"C", r.c},
         {"D", r.d},
         {"hm_term", r.hm_term},
         {"bound", r.bound},
         {"failure_probability", r.failure_probability},
         {"vacuous", r.vacuous}};
  if (r.max_epsilon) j["max_epsilon"] = *r.max_epsilon;
  return j;
}

inline json sweep_to_json(std::span<const SweepRow> rows, double bayes) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"n_pairs", r.n_pairs},
                   {"k", r.k},
                   {"merged_pairs", r.merged_pairs},
                   {"bags", r.bags},
                   {"lambda", r.lambda},
                   {"ber", r.ber},
                   {"auc", r.auc},
                   {"bayes_ber", bayes},
                   {"iterations", r.iterations}});
  return out;
}

}  // namespace llp
