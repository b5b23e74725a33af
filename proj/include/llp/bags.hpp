#pragma once

// Bags of unlabeled instances, class-conditional samplers, label-proportion
// distributions and the instance/bag generation models.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "llp/common.hpp"

namespace llp {

using FeatureVector = std::vector<double>;

struct Bag {
  std::vector<FeatureVector> instances;
  double empirical_lp = 0.0;
  std::optional<double> true_lp;
  // Simulation ground truth. Never read by training.
  std::optional<std::vector<Label>> hidden_labels;

  std::size_t size() const { return instances.size(); }
};

inline double empirical_lp(std::span<const Label> labels) {
  if (labels.empty()) throw usage_error("empirical_lp: empty label list");
  const auto pos = std::count(labels.begin(), labels.end(), Label::positive);
  return static_cast<double>(pos) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// Class-conditional samplers

struct IsotropicGaussian {
  std::vector<double> mean;
  double scale = 1.0;
};

// Uniform on [0, 1].
struct UnitUniform {};

// Density 2x on [0, 1].
struct UnitTriangular {};

using FeatureDistribution = std::variant<IsotropicGaussian, UnitUniform, UnitTriangular>;

inline std::size_t dimension(const FeatureDistribution& d) {
  if (const auto* g = std::get_if<IsotropicGaussian>(&d)) return g->mean.size();
  return 1;
}

inline FeatureVector sample(const FeatureDistribution& d, Rng& rng) {
  return std::visit(
      [&rng](const auto& dist) -> FeatureVector {
        using T = std::decay_t<decltype(dist)>;
        if constexpr (std::is_same_v<T, IsotropicGaussian>) {
          std::normal_distribution<double> z(0.0, 1.0);
          FeatureVector x(dist.mean.size());
          for (std::size_t k = 0; k < x.size(); ++k) x[k] = dist.mean[k] + dist.scale * z(rng);
          return x;
        } else if constexpr (std::is_same_v<T, UnitUniform>) {
          return {std::uniform_real_distribution<double>(0.0, 1.0)(rng)};
        } else {
          // inverse CDF of F(x) = x^2
          return {std::sqrt(std::uniform_real_distribution<double>(0.0, 1.0)(rng))};
        }
      },
      d);
}

// CDF of a one-dimensional distribution (first coordinate for Gaussians).
inline double cdf(const FeatureDistribution& d, double x) {
  if (const auto* g = std::get_if<IsotropicGaussian>(&d))
    return 0.5 * std::erfc(-(x - g->mean.at(0)) / (g->scale * std::sqrt(2.0)));
  const double c = std::clamp(x, 0.0, 1.0);
  if (std::holds_alternative<UnitUniform>(d)) return c;
  return c * c;
}

struct ClassConditionals {
  FeatureDistribution positive;
  FeatureDistribution negative;

  const FeatureDistribution& of(Label s) const { return s == Label::positive ? positive : negative; }
  std::size_t dimension() const { return llp::dimension(positive); }
};

// P+ = N(mu * 1, scale^2 I), P- = N(-mu * 1, scale^2 I) in `dim` dimensions.
inline ClassConditionals symmetric_gaussians(std::size_t dim, double mu, double scale = 1.0) {
  if (dim == 0) throw usage_error("gaussian dimension must be positive");
  if (!(scale > 0.0)) throw usage_error("gaussian scale must be positive");
  return {IsotropicGaussian{std::vector<double>(dim, mu), scale},
          IsotropicGaussian{std::vector<double>(dim, -mu), scale}};
}

// ---------------------------------------------------------------------------
// Label-proportion distributions

struct ConstantLP {
  double value = 0.5;
};

struct UniformLP {
  double lo = 0.0;
  double hi = 1.0;
};

// gamma_{j+1} = gamma_j + clamp(w_j, -gamma_j, 1 - gamma_j), w_j ~ U(-step, step).
struct WalkLP {
  double step = 0.5;
  double initial = 0.5;
};

using LPDistribution = std::variant<ConstantLP, UniformLP, WalkLP>;

inline void validate(const LPDistribution& dist) {
  std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ConstantLP>) {
          if (!(d.value >= 0.0 && d.value <= 1.0)) throw usage_error("constant LP must lie in [0, 1]");
        } else if constexpr (std::is_same_v<T, UniformLP>) {
          if (!(0.0 <= d.lo && d.lo <= d.hi && d.hi <= 1.0))
            throw usage_error("uniform LP range must satisfy 0 <= a <= b <= 1");
        } else {
          if (!(d.step > 0.0)) throw usage_error("walk LP step must be positive");
          if (!(d.initial >= 0.0 && d.initial <= 1.0)) throw usage_error("walk LP start must lie in [0, 1]");
        }
      },
      dist);
}

// One step of the correlated walk, given the raw innovation.
inline double walk_step(double gamma, double innovation) {
  return gamma + std::clamp(innovation, -gamma, 1.0 - gamma);
}

inline std::vector<double> sample_lps(const LPDistribution& dist, std::size_t count, std::uint64_t seed) {
  validate(dist);
  Rng rng = make_rng(seed);
  std::vector<double> out;
  out.reserve(count);
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ConstantLP>) {
          out.assign(count, d.value);
        } else if constexpr (std::is_same_v<T, UniformLP>) {
          std::uniform_real_distribution<double> u(d.lo, d.hi);
          for (std::size_t i = 0; i < count; ++i) out.push_back(d.lo == d.hi ? d.lo : u(rng));
        } else {
          std::uniform_real_distribution<double> w(-d.step, d.step);
          double g = d.initial;
          for (std::size_t i = 0; i < count; ++i) {
            out.push_back(g);
            g = std::clamp(walk_step(g, w(rng)), 0.0, 1.0);
          }
        }
      },
      dist);
  return out;
}

// ---------------------------------------------------------------------------
// Bag generation

namespace detail {

inline void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw usage_error("label proportion must lie in [0, 1]");
}

inline Bag fill_bag(std::vector<Label> labels, double gamma, const ClassConditionals& cc, Rng& rng) {
  Bag bag;
  bag.instances.reserve(labels.size());
  for (Label y : labels) bag.instances.push_back(sample(cc.of(y), rng));
  bag.empirical_lp = empirical_lp(labels);
  bag.true_lp = gamma;
  bag.hidden_labels = std::move(labels);
  return bag;
}

}  // namespace detail

// Labels iid Bernoulli(gamma), instances independent given labels.
inline Bag sample_bag_ciim(double gamma, std::size_t n, const ClassConditionals& cc, std::uint64_t seed) {
  detail::check_gamma(gamma);
  if (n == 0) throw usage_error("bag size must be positive");
  Rng rng = make_rng(seed);
  std::bernoulli_distribution b(gamma);
  std::vector<Label> labels(n);
  for (auto& y : labels) y = b(rng) ? Label::positive : Label::negative;
  return detail::fill_bag(std::move(labels), gamma, cc, rng);
}

// Positive count ~ BetaBinomial(n, a, b) with mean n*gamma and intra-bag label
// correlation rho: a = gamma (1 - rho) / rho, b = (1 - gamma) (1 - rho) / rho.
// rho = 0 is the Binomial count of the instance model; rho = 1 makes all labels
// equal (n with probability gamma, else 0).
inline std::size_t sample_positive_count(double gamma, std::size_t n, double rho, Rng& rng) {
  if (gamma <= 0.0) return 0;
  if (gamma >= 1.0) return n;
  double p = gamma;
  if (rho >= 1.0) {
    return std::bernoulli_distribution(gamma)(rng) ? n : 0;
  } else if (rho > 0.0) {
    const double a = gamma * (1.0 - rho) / rho;
    const double b = (1.0 - gamma) * (1.0 - rho) / rho;
    const double x = std::gamma_distribution<double>(a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(b, 1.0)(rng);
    p = (x + y) > 0.0 ? x / (x + y) : gamma;
  }
  return static_cast<std::size_t>(std::binomial_distribution<long long>(static_cast<long long>(n), p)(rng));
}

// Labels dependent within the bag (exchangeable Beta-Binomial count), instances
// drawn from P_{Y} independently given the labels.
inline Bag sample_bag_cibm(double gamma, std::size_t n, const ClassConditionals& cc, double rho,
                           std::uint64_t seed) {
  detail::check_gamma(gamma);
  if (n == 0) throw usage_error("bag size must be positive");
  if (!(rho >= 0.0 && rho <= 1.0)) throw usage_error("dependence parameter must lie in [0, 1]");
  Rng rng = make_rng(seed);
  const std::size_t count = sample_positive_count(gamma, n, rho, rng);
  std::vector<Label> labels(n, Label::negative);
  std::fill_n(labels.begin(), count, Label::positive);
  std::shuffle(labels.begin(), labels.end(), rng);
  return detail::fill_bag(std::move(labels), gamma, cc, rng);
}

enum class BagModel { instance, bag };

struct SimulationSpec {
  ClassConditionals classes;
  LPDistribution lps = UniformLP{0.0, 0.5};
  std::size_t bag_size = 8;
  std::size_t bag_count = 2;
  BagModel model = BagModel::instance;
  double rho = 0.0;  // bag model only
};

// Bag i uses seed derive_seed(seed, "bags") + i; the LPs use their own stream.
inline std::vector<Bag> simulate_bags(const SimulationSpec& spec, std::uint64_t seed) {
  const auto gammas = sample_lps(spec.lps, spec.bag_count, derive_seed(seed, "lps"));
  const std::uint64_t base = derive_seed(seed, "bags");
  std::vector<Bag> bags;
  bags.reserve(gammas.size());
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    if (spec.model == BagModel::instance)
      bags.push_back(sample_bag_ciim(gammas[i], spec.bag_size, spec.classes, base + i));
    else
      bags.push_back(sample_bag_cibm(gammas[i], spec.bag_size, spec.classes, spec.rho, base + i));
  }
  return bags;
}

struct LabeledSample {
  std::vector<FeatureVector> instances;
  std::vector<Label> labels;
};

// `per_class` draws from each class conditional, positives first.
inline LabeledSample sample_labeled(const ClassConditionals& cc, std::size_t per_class, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  LabeledSample out;
  for (Label y : {Label::positive, Label::negative}) {
    for (std::size_t i = 0; i < per_class; ++i) {
      out.instances.push_back(sample(cc.of(y), rng));
      out.labels.push_back(y);
    }
  }
  return out;
}

}  // namespace llp
