#pragma once

// Balanced error rate, ROC/AUC, empirical proportion risk, and the threshold
// example where minimizing proportion risk picks the wrong classifier.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "llp/bags.hpp"
#include "llp/common.hpp"
#include "llp/model.hpp"

namespace llp {

// sign(0) counts as a positive prediction.
inline Label predict(double score) { return score >= 0.0 ? Label::positive : Label::negative; }

namespace detail {

inline void check_scored(std::size_t scores, std::size_t labels) {
  if (scores != labels) throw usage_error("scores and labels differ in length");
}

inline std::pair<std::size_t, std::size_t> class_counts(std::span<const Label> labels) {
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::positive));
  if (pos == 0 || pos == labels.size()) throw usage_error("evaluation needs both classes present");
  return {pos, labels.size() - pos};
}

}  // namespace detail

inline double ber(std::span<const double> scores, std::span<const Label> labels) {
  detail::check_scored(scores.size(), labels.size());
  const auto [npos, nneg] = detail::class_counts(labels);
  std::size_t fn = 0, fp = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const Label yhat = predict(scores[i]);
    if (labels[i] == Label::positive && yhat == Label::negative) ++fn;
    if (labels[i] == Label::negative && yhat == Label::positive) ++fp;
  }
  return 0.5 * static_cast<double>(fn) / static_cast<double>(npos) +
         0.5 * static_cast<double>(fp) / static_cast<double>(nneg);
}

// Probability that a random positive outscores a random negative, ties
// counting one half. Computed from mid-ranks (Mann-Whitney U).
inline double roc_auc(std::span<const double> scores, std::span<const Label> labels) {
  detail::check_scored(scores.size(), labels.size());
  const auto [npos, nneg] = detail::class_counts(labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of doubled mid-ranks keeps the arithmetic in integers.
  std::uint64_t rank2_sum = 0;
  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo + 1;
    while (hi < order.size() && scores[order[hi]] == scores[order[lo]]) ++hi;
    const std::uint64_t rank2 = lo + hi + 1;  // 2 * mean of 1-based ranks lo+1..hi
    for (std::size_t k = lo; k < hi; ++k)
      if (labels[order[k]] == Label::positive) rank2_sum += rank2;
    lo = hi;
  }
  const double u = static_cast<double>(rank2_sum) / 2.0 - static_cast<double>(npos) * (npos + 1) / 2.0;
  return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

struct RocPoint {
  double threshold = 0.0;  // predict positive when score >= threshold
  double fpr = 0.0;
  double tpr = 0.0;
};

// One point per distinct score, from (0, 0) at +infinity to (1, 1).
inline std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const Label> labels) {
  detail::check_scored(scores.size(), labels.size());
  const auto [npos, nneg] = detail::class_counts(labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo;
    while (hi < order.size() && scores[order[hi]] == scores[order[lo]]) {
      (labels[order[hi]] == Label::positive ? tp : fp)++;
      ++hi;
    }
    out.push_back({scores[order[lo]], static_cast<double>(fp) / static_cast<double>(nneg),
                   static_cast<double>(tp) / static_cast<double>(npos)});
    lo = hi;
  }
  return out;
}

// (1/L) sum_i |predicted positive fraction_i - lp_i|^p
inline double epr(std::span<const double> predicted_fractions, std::span<const double> lps, double p) {
  if (!(p > 0.0)) throw usage_error("epr: exponent must be positive");
  if (predicted_fractions.size() != lps.size()) throw usage_error("epr: one predicted fraction per bag");
  if (lps.empty()) throw usage_error("epr: no bags");
  double acc = 0.0;
  for (std::size_t i = 0; i < lps.size(); ++i) acc += std::pow(std::abs(predicted_fractions[i] - lps[i]), p);
  return acc / static_cast<double>(lps.size());
}

inline double epr(const DecisionFunction& f, std::span<const Bag> bags, double p) {
  std::vector<double> fractions, lps;
  for (const auto& bag : bags) {
    const Vector s = f.scores(std::span<const FeatureVector>(bag.instances));
    const auto pos = (s.array() >= 0.0).count();
    fractions.push_back(static_cast<double>(pos) / static_cast<double>(bag.size()));
    lps.push_back(bag.empirical_lp);
  }
  return epr(fractions, lps, p);
}

struct EprCounterexample {
  double t_epr = 0.0;       // minimizer of the population proportion risk
  double t_ber = 0.0;       // minimizer of the balanced error rate
  double ber_at_epr = 0.0;
  double ber_at_ber = 0.0;
  double epr_at_epr = 0.0;
};

// Threshold classifiers sign(x - t) on [0, 1] with P- uniform and P+ of density
// 2x, one bag with proportion 1/2 in the infinite-bag limit.
inline EprCounterexample epr_counterexample(double p = 1.0) {
  if (!(p > 0.0)) throw usage_error("epr: exponent must be positive");
  const FeatureDistribution pos = UnitTriangular{};
  const FeatureDistribution neg = UnitUniform{};
  const double gamma = 0.5;
  const auto positive_rate = [&](double t) { return gamma * (1.0 - cdf(pos, t)) + (1.0 - gamma) * (1.0 - cdf(neg, t)); };
  const auto population_epr = [&](double t) { return std::pow(std::abs(positive_rate(t) - gamma), p); };
  const auto population_ber = [&](double t) { return 0.5 * cdf(pos, t) + 0.5 * (1.0 - cdf(neg, t)); };
  constexpr int bits = std::numeric_limits<double>::digits / 2;
  const auto [t_epr, epr_min] = boost::math::tools::brent_find_minima(population_epr, 0.0, 1.0, bits);
  const auto [t_ber, ber_min] = boost::math::tools::brent_find_minima(population_ber, 0.0, 1.0, bits);
  return {t_epr, t_ber, population_ber(t_epr), ber_min, epr_min};
}

}  // namespace llp
