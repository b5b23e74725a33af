#pragma once

// Base binary margin losses and the contamination-corrected loss.
//
// A loss is indexed by the class sign sigma: l_sigma(t) is the penalty for
// predicting score t on an instance of class sigma. The corrected loss for
// contamination proportions kappa = (kappa+, kappa-) is
//
//   lk_sigma(t) = ((1 - k) l_sigma(t) - k l_{-sigma}(t)) / (1 - kappa+ - kappa-),
//   k = kappa^{-sigma},
//
// whose balanced risk on the contaminated pair equals the clean balanced risk
// of the base loss.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "llp/common.hpp"

namespace llp {

enum class LossKind { logistic, sigmoid, ramp, squared, zero_one };

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::logistic: return "logistic";
    case LossKind::sigmoid: return "sigmoid";
    case LossKind::ramp: return "ramp";
    case LossKind::squared: return "squared";
    case LossKind::zero_one: return "zero-one";
  }
  return "?";
}

inline LossKind parse_loss_kind(std::string_view s) {
  if (s == "logistic") return LossKind::logistic;
  if (s == "sigmoid") return LossKind::sigmoid;
  if (s == "ramp") return LossKind::ramp;
  if (s == "squared") return LossKind::squared;
  if (s == "zero-one" || s == "zero_one" || s == "01") return LossKind::zero_one;
  throw usage_error("unknown loss '" + std::string(s) + "'");
}

namespace detail {

// log(1 + exp(x)) without overflow
inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// 1 / (1 + exp(-x))
inline double logistic_fn(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

class Loss {
 public:
  explicit constexpr Loss(LossKind kind = LossKind::logistic) : kind_(kind) {}

  constexpr LossKind kind() const { return kind_; }

  double value(double t, Label s) const {
    const double m = sign_of(s) * t;
    switch (kind_) {
      case LossKind::logistic: return detail::softplus(-m);
      case LossKind::sigmoid: return detail::logistic_fn(-m);
      case LossKind::ramp: return std::clamp((1.0 - m) / 2.0, 0.0, 1.0);
      case LossKind::squared: return (1.0 - m) * (1.0 - m);
      // sign(0) = +1, so a zero score is a positive prediction
      case LossKind::zero_one: return s == Label::positive ? (t < 0 ? 1.0 : 0.0) : (t >= 0 ? 1.0 : 0.0);
    }
    return 0.0;
  }

  // d/dt l_sigma(t). The ramp kinks at |t| = 1 take the inner slope; the
  // zero-one loss has no useful derivative and returns nullopt.
  std::optional<double> derivative(double t, Label s) const {
    const double sg = sign_of(s);
    const double m = sg * t;
    switch (kind_) {
      case LossKind::logistic: return -sg * detail::logistic_fn(-m);
      case LossKind::sigmoid: {
        const double p = detail::logistic_fn(-m);
        return -sg * p * (1.0 - p);
      }
      case LossKind::ramp: return (m >= -1.0 && m <= 1.0) ? -sg / 2.0 : 0.0;
      case LossKind::squared: return -2.0 * sg * (1.0 - m);
      case LossKind::zero_one: return std::nullopt;
    }
    return std::nullopt;
  }

  std::optional<double> second_derivative(double t, Label s) const {
    const double m = sign_of(s) * t;
    switch (kind_) {
      case LossKind::logistic: {
        const double p = detail::logistic_fn(m);
        return p * (1.0 - p);
      }
      case LossKind::sigmoid: {
        const double p = detail::logistic_fn(-m);
        return p * (1.0 - p) * (1.0 - 2.0 * p);
      }
      case LossKind::squared: return 2.0;
      case LossKind::ramp:
      case LossKind::zero_one: return std::nullopt;
    }
    return std::nullopt;
  }

  bool differentiable() const { return kind_ != LossKind::zero_one; }

  // Twice differentiable with l''_+ == l''_- everywhere.
  bool equal_curvature() const {
    return kind_ == LossKind::logistic || kind_ == LossKind::squared;
  }

  // |l|: Lipschitz constant in t. Infinite for the squared loss on the whole
  // real line and for the discontinuous zero-one loss.
  double lipschitz() const {
    switch (kind_) {
      case LossKind::logistic: return 1.0;
      case LossKind::sigmoid: return 0.25;
      case LossKind::ramp: return 0.5;
      case LossKind::squared:
      case LossKind::zero_one: return std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  // |l|_0 = max(|l_+(0)|, |l_-(0)|)
  double at_zero() const {
    return std::max(std::abs(value(0.0, Label::positive)), std::abs(value(0.0, Label::negative)));
  }

  // K with l_+(t) + l_-(t) = K for all t, when the loss is symmetric.
  std::optional<double> symmetric_shift() const {
    switch (kind_) {
      case LossKind::sigmoid:
      case LossKind::ramp:
      case LossKind::zero_one: return 1.0;
      default: return std::nullopt;
    }
  }

 private:
  LossKind kind_;
};

struct Contamination {
  double plus = 0.0;   // kappa+
  double minus = 0.0;  // kappa-

  // kappa^{sigma}
  double of(Label s) const { return s == Label::positive ? plus : minus; }
  double denominator() const { return 1.0 - plus - minus; }
};

// Denominators at or below this are treated as "contamination too large".
inline constexpr double kMinDenominator = 1e-6;

class CorrectedLoss {
 public:
  CorrectedLoss(Loss base, Contamination kappa) : base_(base), kappa_(kappa) {
    if (!(kappa.plus >= 0.0) || !(kappa.minus >= 0.0))
      throw usage_error("contamination proportions must be nonnegative");
    if (!(kappa.denominator() > kMinDenominator))
      throw usage_error("contamination too large: kappa+ + kappa- must be < 1 (got " +
                        std::to_string(kappa.plus + kappa.minus) + ")");
    denom_ = kappa.denominator();
  }

  const Loss& base() const { return base_; }
  const Contamination& kappa() const { return kappa_; }
  double denominator() const { return denom_; }

  // Coefficient of l_sigma in lk_sigma.
  double same_coefficient(Label s) const { return (1.0 - kappa_.of(opposite(s))) / denom_; }
  // Coefficient of l_{-sigma} in lk_sigma (entered with a minus sign).
  double cross_coefficient(Label s) const { return kappa_.of(opposite(s)) / denom_; }

  double value(double t, Label s) const {
    return same_coefficient(s) * base_.value(t, s) - cross_coefficient(s) * base_.value(t, opposite(s));
  }

  std::optional<double> derivative(double t, Label s) const {
    const auto a = base_.derivative(t, s);
    const auto b = base_.derivative(t, opposite(s));
    if (!a || !b) return std::nullopt;
    return same_coefficient(s) * *a - cross_coefficient(s) * *b;
  }

  std::optional<double> second_derivative(double t, Label s) const {
    const auto a = base_.second_derivative(t, s);
    const auto b = base_.second_derivative(t, opposite(s));
    if (!a || !b) return std::nullopt;
    return same_coefficient(s) * *a - cross_coefficient(s) * *b;
  }

  double lipschitz() const { return base_.lipschitz() / denom_; }

 private:
  Loss base_;
  Contamination kappa_;
  double denom_;
};

inline double evaluate(const Loss& loss, double t, Label s) { return loss.value(t, s); }

inline CorrectedLoss correct(const Loss& loss, Contamination kappa) { return CorrectedLoss(loss, kappa); }

enum class ConvexityPath { analytic, numeric };

struct ConvexityReport {
  bool convex = false;
  ConvexityPath path = ConvexityPath::numeric;
  // Most negative second difference seen (numeric path only).
  double min_second_difference = 0.0;
};

struct ConvexityGrid {
  double lo = -10.0;
  double hi = 10.0;
  double step = 0.01;
  double tolerance = 1e-8;
};

// Pointwise convexity of both lk_+ and lk_-. Losses with l''_+ == l''_- take the
// closed-form path (convex when kappa^sigma < 1/2 for both sigma); everything
// else, or force_numeric, checks second differences on a grid.
inline ConvexityReport check_convexity(const CorrectedLoss& c, bool force_numeric = false,
                                       const ConvexityGrid& grid = {}) {
  ConvexityReport r;
  if (!force_numeric && c.base().equal_curvature()) {
    r.path = ConvexityPath::analytic;
    r.convex = c.kappa().plus < 0.5 && c.kappa().minus < 0.5;
    return r;
  }
  r.path = ConvexityPath::numeric;
  const double h = grid.step;
  const auto steps = static_cast<long>(std::floor((grid.hi - grid.lo) / h + 0.5));
  double worst = std::numeric_limits<double>::infinity();
  for (Label s : {Label::positive, Label::negative}) {
    for (long i = 1; i < steps; ++i) {
      const double t = grid.lo + static_cast<double>(i) * h;
      const double d2 = c.value(t + h, s) - 2.0 * c.value(t, s) + c.value(t - h, s);
      worst = std::min(worst, d2);
    }
  }
  r.min_second_difference = worst;
  r.convex = worst >= -grid.tolerance;
  return r;
}

// Finite discrete distribution over score values f(x).
struct DiscreteMeasure {
  std::vector<double> values;
  std::vector<double> weights;  // nonnegative, summing to 1
};

inline DiscreteMeasure mixture(const DiscreteMeasure& a, double wa, const DiscreteMeasure& b, double wb) {
  DiscreteMeasure m;
  m.values = a.values;
  m.values.insert(m.values.end(), b.values.begin(), b.values.end());
  m.weights.reserve(m.values.size());
  for (double w : a.weights) m.weights.push_back(wa * w);
  for (double w : b.weights) m.weights.push_back(wb * w);
  return m;
}

// The contaminated pair: P+^k = (1 - k+) P+ + k+ P-, P-^k = (1 - k-) P- + k- P+.
inline std::pair<DiscreteMeasure, DiscreteMeasure> contaminate(const DiscreteMeasure& pos,
                                                               const DiscreteMeasure& neg, Contamination k) {
  return {mixture(pos, 1.0 - k.plus, neg, k.plus), mixture(neg, 1.0 - k.minus, pos, k.minus)};
}

template <class L>
double expected_loss(const L& loss, const DiscreteMeasure& m, Label s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < m.values.size(); ++i) acc += m.weights[i] * loss.value(m.values[i], s);
  return acc;
}

// Balanced risk (1/2) E_{P+} l_+(f) + (1/2) E_{P-} l_-(f).
template <class L>
double balanced_risk(const L& loss, const DiscreteMeasure& pos, const DiscreteMeasure& neg) {
  return 0.5 * expected_loss(loss, pos, Label::positive) + 0.5 * expected_loss(loss, neg, Label::negative);
}

struct ShiftIdentity {
  double lhs = 0.0;  // balanced risk of the base loss on the contaminated pair
  double rhs = 0.0;  // (1 - k+ - k-) * clean balanced risk + K (k+ + k-) / 2
};

// Both sides of the symmetric-loss identity on the empirical measures given by
// (score, class) pairs. Each class must be represented.
inline ShiftIdentity symmetric_shift_identity(const Loss& loss, Contamination kappa,
                                              std::span<const std::pair<double, Label>> scores) {
  const auto shift = loss.symmetric_shift();
  if (!shift) throw usage_error("loss '" + std::string(to_string(loss.kind())) + "' is not symmetric");
  DiscreteMeasure pos, neg;
  for (const auto& [t, s] : scores) (s == Label::positive ? pos : neg).values.push_back(t);
  if (pos.values.empty() || neg.values.empty())
    throw usage_error("symmetric shift identity needs scores from both classes");
  pos.weights.assign(pos.values.size(), 1.0 / static_cast<double>(pos.values.size()));
  neg.weights.assign(neg.values.size(), 1.0 / static_cast<double>(neg.values.size()));
  const auto [cpos, cneg] = contaminate(pos, neg, kappa);
  ShiftIdentity out;
  out.lhs = balanced_risk(loss, cpos, cneg);
  out.rhs = kappa.denominator() * balanced_risk(loss, pos, neg) + *shift * (kappa.plus + kappa.minus) / 2.0;
  return out;
}

}  // namespace llp
