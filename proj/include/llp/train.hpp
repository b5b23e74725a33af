#pragma once

// The plug-in learning objective: pair (or merge) bags, plug the observed
// proportions into the corrected loss, weight the pairs, and minimize the
// weighted empirical risk plus an RKHS penalty over kernel expansions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "llp/bags.hpp"
#include "llp/common.hpp"
#include "llp/eval.hpp"
#include "llp/lbfgs.hpp"
#include "llp/loss.hpp"
#include "llp/model.hpp"
#include "llp/pairing.hpp"

namespace llp {

// ---------------------------------------------------------------------------
// Weighted empirical risk

// One contamination model: its corrected loss, weight, and the rows of the
// score vector holding its plus-side and minus-side instances.
struct RiskTerm {
  CorrectedLoss loss;
  double weight = 0.0;
  std::vector<std::size_t> plus;
  std::vector<std::size_t> minus;
};

// sum_i w_i [ 1/(2 n+_i) sum lk_+(f(X+)) + 1/(2 n-_i) sum lk_-(f(X-)) ]
inline double weighted_empirical_risk(std::span<const RiskTerm> terms, const Vector& scores) {
  double total = 0.0;
  for (const auto& term : terms) {
    double plus = 0.0, minus = 0.0;
    for (auto r : term.plus) plus += term.loss.value(scores(static_cast<Eigen::Index>(r)), Label::positive);
    for (auto r : term.minus) minus += term.loss.value(scores(static_cast<Eigen::Index>(r)), Label::negative);
    total += term.weight * (plus / (2.0 * static_cast<double>(term.plus.size())) +
                            minus / (2.0 * static_cast<double>(term.minus.size())));
  }
  return total;
}

// d risk / d score, per row.
inline Vector risk_score_gradient(std::span<const RiskTerm> terms, const Vector& scores) {
  Vector g = Vector::Zero(scores.size());
  for (const auto& term : terms) {
    const double cp = term.weight / (2.0 * static_cast<double>(term.plus.size()));
    const double cm = term.weight / (2.0 * static_cast<double>(term.minus.size()));
    for (auto r : term.plus) {
      const auto i = static_cast<Eigen::Index>(r);
      const auto d = term.loss.derivative(scores(i), Label::positive);
      if (!d) throw usage_error("objective gradient: loss is not differentiable");
      g(i) += cp * *d;
    }
    for (auto r : term.minus) {
      const auto i = static_cast<Eigen::Index>(r);
      const auto d = term.loss.derivative(scores(i), Label::negative);
      if (!d) throw usage_error("objective gradient: loss is not differentiable");
      g(i) += cm * *d;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// From bags to contamination models

struct MergeConfig {
  MergeScheme scheme = MergeScheme::blockwise_max;
  std::size_t k = 1;
};

// A paired (possibly merged) unit with plug-in proportions.
struct PairUnit {
  std::vector<std::size_t> plus_bags;
  std::vector<std::size_t> minus_bags;
  double plus_lp = 0.0;
  double minus_lp = 0.0;
  std::size_t plus_size = 0;
  std::size_t minus_size = 0;

  double gap() const { return plus_lp - minus_lp; }
  Contamination kappa() const { return {1.0 - plus_lp, minus_lp}; }
  double nbar() const {
    return 2.0 / (1.0 / static_cast<double>(plus_size) + 1.0 / static_cast<double>(minus_size));
  }
};

struct PipelineConfig {
  PairingMethod pairing = PairingMethod::optimal;
  WeightMode weights = WeightMode::bag;
  std::optional<MergeConfig> merge;
  LossKind loss = LossKind::logistic;
};

inline std::vector<PairUnit> form_units(std::span<const BagSummary> bags, const PipelineConfig& cfg) {
  std::vector<PairUnit> units;
  if (cfg.merge) {
    for (auto& m : merge(bags, cfg.merge->k, cfg.merge->scheme))
      units.push_back({m.plus_indices, m.minus_indices, m.plus_lp, m.minus_lp, m.plus_size, m.minus_size});
  } else {
    for (const auto& p : pair_bags(bags, cfg.pairing).pairs)
      units.push_back({{p.plus}, {p.minus}, p.plus_lp, p.minus_lp, p.plus_size, p.minus_size});
  }
  return units;
}

inline std::vector<double> unit_weights(std::span<const PairUnit> units, WeightMode mode) {
  std::vector<double> gaps, scales;
  for (const auto& u : units) {
    gaps.push_back(u.gap());
    scales.push_back(mode == WeightMode::instance ? u.nbar() : 1.0);
  }
  return optimal_weights(gaps, scales);
}

// Instances of every included unit stacked into one matrix, with the risk
// terms indexing its rows.
struct TrainingProblem {
  Matrix instances;
  std::vector<RiskTerm> terms;
  std::vector<PairUnit> units;
  std::vector<double> weights;  // one per unit, zero for excluded units
};

inline TrainingProblem build_problem(std::span<const Bag> bags, const PipelineConfig& cfg) {
  if (bags.size() < 2) throw usage_error("training needs at least two bags");
  TrainingProblem prob;
  prob.units = form_units(summarize(bags), cfg);
  prob.weights = unit_weights(prob.units, cfg.weights);
  const Loss base(cfg.loss);
  std::vector<const FeatureVector*> rows;
  for (std::size_t u = 0; u < prob.units.size(); ++u) {
    if (prob.weights[u] <= 0.0) continue;
    const auto& unit = prob.units[u];
    RiskTerm term{CorrectedLoss(base, unit.kappa()), prob.weights[u], {}, {}};
    for (auto b : unit.plus_bags)
      for (const auto& x : bags[b].instances) {
        term.plus.push_back(rows.size());
        rows.push_back(&x);
      }
    for (auto b : unit.minus_bags)
      for (const auto& x : bags[b].instances) {
        term.minus.push_back(rows.size());
        rows.push_back(&x);
      }
    prob.terms.push_back(std::move(term));
  }
  const auto d = rows.front()->size();
  prob.instances.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i]->size() != d) throw usage_error("bags disagree on feature dimension");
    for (std::size_t k = 0; k < d; ++k)
      prob.instances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (*rows[i])[k];
  }
  return prob;
}

// ---------------------------------------------------------------------------
// Regularized objective over representer coefficients

class Objective {
 public:
  Objective(std::vector<RiskTerm> terms, Matrix gram, double lambda)
      : terms_(std::move(terms)), gram_(std::move(gram)), lambda_(lambda) {
    if (gram_.rows() != gram_.cols()) throw usage_error("objective: Gram matrix must be square");
    if (!(lambda_ >= 0.0)) throw usage_error("objective: lambda must be nonnegative");
  }

  std::span<const RiskTerm> terms() const { return terms_; }
  const Matrix& gram() const { return gram_; }
  double lambda() const { return lambda_; }
  Eigen::Index dimension() const { return gram_.rows(); }

  double value(const Vector& alpha) const {
    check(alpha);
    const Vector f = gram_ * alpha;
    return weighted_empirical_risk(terms_, f) + lambda_ * alpha.dot(f);
  }

  // K g + 2 lambda K alpha, with g the score gradient of the risk.
  Vector gradient(const Vector& alpha) const {
    Vector grad(alpha.size());
    value_and_gradient(alpha, grad);
    return grad;
  }

  double value_and_gradient(const Vector& alpha, Vector& grad) const {
    check(alpha);
    const Vector f = gram_ * alpha;
    const Vector g = risk_score_gradient(terms_, f);
    grad.noalias() = gram_ * (g + 2.0 * lambda_ * alpha);
    return weighted_empirical_risk(terms_, f) + lambda_ * alpha.dot(f);
  }

 private:
  void check(const Vector& alpha) const {
    if (alpha.size() != gram_.rows())
      throw usage_error("objective: coefficient vector has length " + std::to_string(alpha.size()) + ", expected " +
                        std::to_string(gram_.rows()));
  }

  std::vector<RiskTerm> terms_;
  Matrix gram_;
  double lambda_;
};

inline double objective_value(const Vector& alpha, const Objective& obj) { return obj.value(alpha); }
inline Vector objective_gradient(const Vector& alpha, const Objective& obj) { return obj.gradient(alpha); }

// L-BFGS from alpha = 0.
inline LbfgsResult minimize(const Objective& obj, const LbfgsOptions& opt = {}) {
  for (const auto& t : obj.terms())
    if (!t.loss.base().differentiable()) throw usage_error("minimize: loss is not differentiable");
  return minimize_lbfgs([&obj](const Vector& a, Vector& g) { return obj.value_and_gradient(a, g); },
                        Vector::Zero(obj.dimension()), opt);
}

// ---------------------------------------------------------------------------
// Training with cross-validated regularization

struct TrainConfig {
  std::vector<double> lambdas{1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
  std::size_t folds = 5;
  LbfgsOptions optimizer{};
  std::uint64_t seed = 0;
  PipelineConfig pipeline{};
  std::optional<double> bandwidth;  // default: 1 / (d Var(X)) on the training instances
  // Used when there are too few pairs to hold any out; default is the largest
  // value in the grid.
  std::optional<double> fallback_lambda;

  void validate() const {
    if (lambdas.empty()) throw usage_error("lambda grid is empty");
    for (double l : lambdas)
      if (!(l > 0.0)) throw usage_error("lambda values must be positive");
    if (folds < 2) throw usage_error("cross validation needs at least 2 folds");
    if (fallback_lambda && !(*fallback_lambda > 0.0)) throw usage_error("fallback lambda must be positive");
    if (bandwidth && !(*bandwidth > 0.0)) throw usage_error("bandwidth must be positive");
  }
};

struct CvResult {
  double best_lambda = 0.0;
  bool performed = false;  // false when the grid had one value or too few pairs
  std::size_t folds = 0;
  std::vector<double> lambdas;
  std::vector<double> mean_criterion;                          // per lambda
  std::vector<std::vector<std::optional<double>>> fold_values;  // [fold][lambda], nullopt = skipped fold
  std::vector<std::size_t> skipped_folds;
};

inline DecisionFunction fit_problem(TrainingProblem& prob, double bandwidth, double lambda, const LbfgsOptions& opt,
                                    LbfgsResult* trace = nullptr) {
  const KernelConfig kc{bandwidth};
  Objective obj(prob.terms, kernel_matrix(prob.instances, kc), lambda);
  auto res = minimize(obj, opt);
  DecisionFunction f(kc, prob.instances, res.x);
  if (trace) *trace = std::move(res);
  return f;
}

inline double bandwidth_for(std::span<const Bag> bags, const TrainConfig& cfg) {
  if (cfg.bandwidth) return *cfg.bandwidth;
  std::vector<FeatureVector> all;
  for (const auto& b : bags) all.insert(all.end(), b.instances.begin(), b.instances.end());
  return default_bandwidth(to_matrix(all));
}

namespace detail {

inline std::vector<Bag> select_bags(std::span<const Bag> bags, const std::vector<std::size_t>& idx) {
  std::vector<Bag> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(bags[i]);
  return out;
}

// Cross-validation units: whole merge blocks when merging, otherwise the pairs
// of the matching on all bags. Folds are unions of units, so every training
// and validation split can be paired or merged on its own.
inline std::vector<std::vector<std::size_t>> cv_units(std::span<const Bag> bags, const PipelineConfig& cfg) {
  std::vector<std::vector<std::size_t>> units;
  if (cfg.merge) {
    const std::size_t block = 2 * cfg.merge->k;
    if (block == 0 || bags.size() % block != 0)
      throw usage_error("bag count " + std::to_string(bags.size()) + " is not divisible by 2K");
    for (std::size_t s = 0; s < bags.size(); s += block) {
      std::vector<std::size_t> u(block);
      std::iota(u.begin(), u.end(), s);
      units.push_back(std::move(u));
    }
  } else {
    for (const auto& p : pair_bags(summarize(bags), cfg.pairing).pairs)
      units.push_back({std::min(p.plus, p.minus), std::max(p.plus, p.minus)});
  }
  return units;
}

}  // namespace detail

// Folds partition bags through the cross-validation units. The criterion for a
// lambda is the held-out weighted empirical risk (no penalty) with the
// validation bags' own plug-in kappa and weights, averaged over folds whose
// validation pairs are not all degenerate. Ties go to the smallest lambda.
inline CvResult cross_validate(std::span<const Bag> bags, const TrainConfig& cfg) {
  cfg.validate();
  CvResult cv;
  cv.lambdas = cfg.lambdas;
  if (cfg.lambdas.size() == 1) {
    cv.best_lambda = cfg.lambdas.front();
    return cv;
  }
  const auto units = detail::cv_units(bags, cfg.pipeline);
  const std::size_t folds = std::min(cfg.folds, units.size());
  if (folds < 2) {
    cv.best_lambda = cfg.fallback_lambda.value_or(*std::max_element(cfg.lambdas.begin(), cfg.lambdas.end()));
    return cv;
  }
  cv.performed = true;
  cv.folds = folds;

  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(derive_seed(cfg.seed, "cv"));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold_of(units.size());
  for (std::size_t r = 0; r < order.size(); ++r) fold_of[order[r]] = r % folds;

  const double bw = bandwidth_for(bags, cfg);
  cv.fold_values.assign(folds, std::vector<std::optional<double>>(cfg.lambdas.size()));
  for (std::size_t fold = 0; fold < folds; ++fold) {
    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t u = 0; u < units.size(); ++u) {
      auto& dst = fold_of[u] == fold ? val_idx : train_idx;
      dst.insert(dst.end(), units[u].begin(), units[u].end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    const auto val_bags = detail::select_bags(bags, val_idx);
    std::optional<TrainingProblem> val;
    try {
      val = build_problem(val_bags, cfg.pipeline);
    } catch (const compute_error&) {
      cv.skipped_folds.push_back(fold);
      continue;
    }
    const auto train_bags = detail::select_bags(bags, train_idx);
    TrainingProblem train = build_problem(train_bags, cfg.pipeline);
    const KernelConfig kc{bw};
    const Matrix gram = kernel_matrix(train.instances, kc);
    const Matrix cross = cross_kernel(val->instances, train.instances, kc);
    for (std::size_t l = 0; l < cfg.lambdas.size(); ++l) {
      Objective obj(train.terms, gram, cfg.lambdas[l]);
      const auto res = minimize(obj, cfg.optimizer);
      const Vector scores = cross * res.x;
      cv.fold_values[fold][l] = weighted_empirical_risk(val->terms, scores);
    }
  }
  if (cv.skipped_folds.size() == folds) throw compute_error("cross validation: every validation fold is degenerate");

  cv.mean_criterion.assign(cfg.lambdas.size(), 0.0);
  for (std::size_t l = 0; l < cfg.lambdas.size(); ++l) {
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& fv : cv.fold_values)
      if (fv[l]) {
        sum += *fv[l];
        ++used;
      }
    cv.mean_criterion[l] = sum / static_cast<double>(used);
  }
  std::size_t best = 0;
  for (std::size_t l = 1; l < cfg.lambdas.size(); ++l) {
    const double a = cv.mean_criterion[l], b = cv.mean_criterion[best];
    if (a < b || (a == b && cfg.lambdas[l] < cfg.lambdas[best])) best = l;
  }
  cv.best_lambda = cfg.lambdas[best];
  return cv;
}

struct TrainResult {
  DecisionFunction model;
  double lambda = 0.0;
  double bandwidth = 0.0;
  CvResult cv;
  LbfgsResult fit;  // final fit on all bags
  std::vector<PairUnit> units;
  std::vector<double> weights;
};

// Pair or merge, plug in kappa_i = (1 - g+_i, g-_i), weight, select lambda by
// cross validation, then refit on all bags.
inline TrainResult train_llp(std::span<const Bag> bags, const TrainConfig& cfg) {
  cfg.validate();
  if (bags.size() < 2) throw usage_error("training needs at least two bags");
  TrainResult out;
  out.bandwidth = bandwidth_for(bags, cfg);
  out.cv = cross_validate(bags, cfg);
  out.lambda = out.cv.best_lambda;
  TrainingProblem prob = build_problem(bags, cfg.pipeline);
  out.model = fit_problem(prob, out.bandwidth, out.lambda, cfg.optimizer, &out.fit);
  out.units = std::move(prob.units);
  out.weights = std::move(prob.weights);
  return out;
}

// ---------------------------------------------------------------------------
// Consistency sweep

struct SweepConfig {
  ClassConditionals classes = symmetric_gaussians(1, 1.0, 1.0);
  LPDistribution lps = UniformLP{0.0, 1.0};
  std::vector<std::size_t> schedule{16, 64, 256};  // N, the number of small-bag pairs
  std::size_t bag_size = 4;
  MergeScheme scheme = MergeScheme::blockwise_max;
  BagModel model = BagModel::bag;
  double rho = 0.0;
  double lambda_scale = 1.0;
  std::size_t test_per_class = 5000;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::logistic;
  LbfgsOptions optimizer{};
};

struct SweepRow {
  std::size_t n_pairs = 0;  // N after rounding down to a multiple of K
  std::size_t k = 0;
  std::size_t merged_pairs = 0;  // M = N / K
  std::size_t bags = 0;          // 2N
  double lambda = 0.0;
  double ber = 0.0;
  double auc = 0.0;
  int iterations = 0;
};

// K = ceil(sqrt(N)), so K and N / K both grow.
inline std::size_t sweep_k(std::size_t n_pairs) {
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_pairs))));
}

// lambda = scale * sqrt(log M / M): tends to zero while lambda M / log M grows.
inline double sweep_lambda(std::size_t merged_pairs, double scale) {
  if (merged_pairs < 2) throw usage_error("sweep: need at least two merged pairs for the lambda rule");
  const double m = static_cast<double>(merged_pairs);
  return scale * std::sqrt(std::log(m) / m);
}

// Bayes balanced error of N(mu 1, s^2 I) against N(-mu 1, s^2 I) in d dimensions.
inline double bayes_ber_symmetric_gaussians(std::size_t dim, double mu, double scale) {
  return 0.5 * std::erfc(std::abs(mu) * std::sqrt(static_cast<double>(dim)) / (scale * std::sqrt(2.0)));
}

inline std::vector<SweepRow> consistency_sweep(const SweepConfig& cfg) {
  if (cfg.schedule.empty()) throw usage_error("sweep: empty schedule");
  const auto test = sample_labeled(cfg.classes, cfg.test_per_class, derive_seed(cfg.seed, "sweep-test"));
  const Matrix test_x = to_matrix(test.instances);
  std::vector<SweepRow> rows;
  for (std::size_t step = 0; step < cfg.schedule.size(); ++step) {
    SweepRow row;
    row.k = sweep_k(cfg.schedule[step]);
    row.merged_pairs = cfg.schedule[step] / row.k;
    row.n_pairs = row.merged_pairs * row.k;
    row.bags = 2 * row.n_pairs;
    row.lambda = sweep_lambda(row.merged_pairs, cfg.lambda_scale);

    SimulationSpec sim{cfg.classes, cfg.lps, cfg.bag_size, row.bags, cfg.model, cfg.rho};
    const auto bags = simulate_bags(sim, derive_seed(cfg.seed, "sweep-" + std::to_string(step)));
    PipelineConfig pipe;
    pipe.merge = MergeConfig{cfg.scheme, row.k};
    pipe.loss = cfg.loss;
    TrainingProblem prob = build_problem(bags, pipe);
    TrainConfig tc;
    const double bw = bandwidth_for(bags, tc);
    LbfgsResult fit;
    const auto f = fit_problem(prob, bw, row.lambda, cfg.optimizer, &fit);
    const Vector s = f.scores(test_x);
    const std::vector<double> scores(s.data(), s.data() + s.size());
    row.ber = ber(scores, test.labels);
    row.auc = roc_auc(scores, test.labels);
    row.iterations = fit.iterations;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace llp
