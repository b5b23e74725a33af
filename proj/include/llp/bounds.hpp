#pragma once

// Closed-form generalization bounds for function classes whose Rademacher
// complexities admit constants (A, B): sup |f| <= A and the complexity term is
// at most B times the root sum of squared weights.

#include <cmath>
#include <optional>
#include <tuple>
#include <span>
#include <string>
#include <vector>

#include "llp/common.hpp"
#include "llp/pairing.hpp"

namespace llp {

struct SRConstants {
  double a = 0.0;
  double b = 0.0;
};

// RKHS ball of radius R with kernel bound K.
inline SRConstants sr_constants_rkhs(double radius, double kernel_bound) {
  if (!(radius > 0.0) || !(kernel_bound > 0.0)) throw usage_error("sr_constants_rkhs: R and K must be positive");
  return {radius * kernel_bound, radius * kernel_bound};
}

// Two-layer ReLU networks with nonnegative outer weights alpha and inner norms
// beta, inputs bounded by xnorm.
inline SRConstants sr_constants_relu(std::span<const double> alpha, std::span<const double> beta, double xnorm) {
  if (alpha.size() != beta.size()) throw usage_error("sr_constants_relu: alpha and beta differ in length");
  if (!(xnorm > 0.0)) throw usage_error("sr_constants_relu: input norm must be positive");
  double aa = 0.0, bb = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] < 0.0 || beta[i] < 0.0) throw usage_error("sr_constants_relu: entries must be nonnegative");
    aa += alpha[i] * alpha[i];
    bb += beta[i] * beta[i];
    ab += alpha[i] * beta[i];
  }
  return {std::sqrt(aa) * std::sqrt(bb) * xnorm, 2.0 * ab * xnorm};
}

enum class IndependenceModel { instance, bag };

struct Theorem1Pair {
  Contamination kappa;
  double nbar = 1.0;
  double weight = 0.0;
};

struct Theorem1Inputs {
  std::vector<Theorem1Pair> pairs;
  double lipschitz = 1.0;
  double delta = 0.05;
  IndependenceModel model = IndependenceModel::instance;
};

struct Theorem1Report {
  double c = 0.0;  // (1 + A|l|) sqrt(log(2/delta))
  double d = 0.0;  // 2B|l| + C
  std::vector<double> terms;  // w_i^2 / (nbar_i (1 - k-_i - k+_i)^2)
  double sum = 0.0;
  double bound = 0.0;
  bool vacuous = false;
};

namespace detail {

inline void check_delta(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw usage_error("delta must lie in (0, 1]");
}

inline std::pair<double, double> cd_constants(const SRConstants& sr, double lipschitz, double delta) {
  if (sr.a < 0.0 || sr.b < 0.0) throw usage_error("SR constants must be nonnegative");
  if (!(lipschitz >= 0.0) || !std::isfinite(lipschitz)) throw usage_error("Lipschitz constant must be finite");
  const double c = (1.0 + sr.a * lipschitz) * std::sqrt(std::log(2.0 / delta));
  return {c, 2.0 * sr.b * lipschitz + c};
}

}  // namespace detail

// D sqrt(sum_i w_i^2 / (nbar_i (1 - k-_i - k+_i)^2)); nbar_i -> 1 under the bag
// model.
inline Theorem1Report geb_theorem1(const Theorem1Inputs& in, const SRConstants& sr) {
  detail::check_delta(in.delta);
  if (in.pairs.empty()) throw usage_error("geb_theorem1: no pairs");
  Theorem1Report r;
  std::tie(r.c, r.d) = detail::cd_constants(sr, in.lipschitz, in.delta);
  for (const auto& p : in.pairs) {
    const double denom = p.kappa.denominator();
    if (!(denom > kMinDenominator) || p.kappa.plus < 0.0 || p.kappa.minus < 0.0)
      throw usage_error("geb_theorem1: degenerate contamination (kappa+ + kappa- must be < 1)");
    const double nbar = in.model == IndependenceModel::bag ? 1.0 : p.nbar;
    if (!(nbar > 0.0)) throw usage_error("geb_theorem1: nbar must be positive");
    if (p.weight < 0.0) throw usage_error("geb_theorem1: weights must be nonnegative");
    const double t = p.weight * p.weight / (nbar * denom * denom);
    r.terms.push_back(t);
    r.sum += t;
  }
  r.bound = r.d * std::sqrt(r.sum);
  r.vacuous = r.bound > 1.0;
  return r;
}

// The weights minimizing the bound: w_i ∝ nbar_i (1 - k-_i - k+_i)^2.
inline std::vector<double> theorem1_optimal_weights(std::span<const Theorem1Pair> pairs, IndependenceModel model) {
  std::vector<double> gaps, scales;
  for (const auto& p : pairs) {
    gaps.push_back(p.kappa.denominator());
    scales.push_back(model == IndependenceModel::bag ? 1.0 : p.nbar);
  }
  return optimal_weights(gaps, scales);
}

struct Theorem2Inputs {
  std::vector<double> gaps;  // Lambda+_i - Lambda-_i, one per merged pair
  double epsilon = 0.05;
  std::size_t k = 1;         // small bags per merged bag
  std::size_t n_pairs = 1;   // N; the number of merged pairs is N / K
  std::size_t bag_size = 1;  // n
  double lipschitz = 1.0;
  double delta = 0.05;
  IndependenceModel model = IndependenceModel::instance;
  // (LP) parameters; when set, epsilon must not exceed
  // (Delta (1 - tau) - eps0) / (1 + Delta).
  std::optional<double> lp_delta;
  std::optional<double> lp_tau;
  std::optional<double> lp_eps0;
};

struct Theorem2Report {
  double c = 0.0;
  double d = 0.0;
  double hm_term = 0.0;  // HM((gap_i - eps)^-2)
  double bound = 0.0;
  double failure_probability = 0.0;  // delta + 2 (N/K) exp(-2 K eps^2)
  std::optional<double> max_epsilon;
  bool vacuous = false;
};

// Upper end of the admissible epsilon interval.
inline double theorem2_max_epsilon(double lp_delta, double lp_tau, double eps0) {
  if (!(lp_delta > 0.0) || !(lp_tau > 0.0) || !(lp_tau < 1.0)) throw usage_error("(LP) needs Delta > 0 and tau in (0, 1)");
  if (!(eps0 > 0.0 && eps0 < lp_delta * (1.0 - lp_tau))) throw usage_error("eps0 must lie in (0, Delta (1 - tau))");
  return (lp_delta * (1.0 - lp_tau) - eps0) / (1.0 + lp_delta);
}

// D sqrt(HM((gap_i - eps)^-2) / (2 (N/K) n)); n -> 1 under the bag model.
inline Theorem2Report geb_theorem2(const Theorem2Inputs& in, const SRConstants& sr) {
  detail::check_delta(in.delta);
  if (in.k == 0 || in.n_pairs == 0 || in.n_pairs % in.k != 0)
    throw usage_error("geb_theorem2: N must be a positive multiple of K");
  const std::size_t m = in.n_pairs / in.k;
  if (in.gaps.size() != m)
    throw usage_error("geb_theorem2: expected " + std::to_string(m) + " merged gaps, got " + std::to_string(in.gaps.size()));
  if (!(in.epsilon > 0.0)) throw usage_error("geb_theorem2: epsilon must be positive");
  Theorem2Report r;
  if (in.lp_delta || in.lp_tau || in.lp_eps0) {
    if (!(in.lp_delta && in.lp_tau && in.lp_eps0)) throw usage_error("geb_theorem2: give all of Delta, tau, eps0");
    r.max_epsilon = theorem2_max_epsilon(*in.lp_delta, *in.lp_tau, *in.lp_eps0);
    if (in.epsilon > *r.max_epsilon) throw usage_error("geb_theorem2: epsilon outside its admissible interval");
  }
  std::tie(r.c, r.d) = detail::cd_constants(sr, in.lipschitz, in.delta);
  std::vector<double> inv_sq;
  for (double g : in.gaps) {
    const double adj = g - in.epsilon;
    if (!(adj > 0.0)) throw usage_error("geb_theorem2: gap minus epsilon must be positive");
    inv_sq.push_back(1.0 / (adj * adj));
  }
  r.hm_term = harmonic_mean(inv_sq);
  const double n = in.model == IndependenceModel::bag ? 1.0 : static_cast<double>(in.bag_size);
  r.bound = r.d * std::sqrt(r.hm_term / (2.0 * static_cast<double>(m) * n));
  r.failure_probability =
      in.delta + 2.0 * static_cast<double>(m) * std::exp(-2.0 * static_cast<double>(in.k) * in.epsilon * in.epsilon);
  r.vacuous = r.bound > 1.0 || r.failure_probability >= 1.0;
  return r;
}

}  // namespace llp
