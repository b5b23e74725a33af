#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "llp/eval.hpp"

using namespace llp;

namespace {

constexpr Label P = Label::positive;
constexpr Label N = Label::negative;

// Direct pair counting, ties one half.
double auc_by_pairs(const std::vector<double>& s, const std::vector<Label>& y) {
  double hits = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == P && y[j] == N) {
        pairs += 1;
        hits += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return hits / pairs;
}

double closed_form_ber(double t) { return 0.5 * t * t + 0.5 * (1 - t); }

}  // namespace

TEST(Ber, Examples) {
  const std::vector<Label> y{P, P, N, N};
  EXPECT_EQ(ber(std::vector<double>{1, 2, -1, -3}, y), 0.0);
  EXPECT_EQ(ber(std::vector<double>{1, 1, 1, 1}, y), 0.5);
  EXPECT_EQ(ber(std::vector<double>{1, -1, -1, -1}, y), 0.25);
  EXPECT_EQ(ber(std::vector<double>{0, 0, -1, -1}, y), 0.0);  // sign(0) = +1
  EXPECT_THROW(ber(std::vector<double>{1, 2}, std::vector<Label>{P, P}), usage_error);
  EXPECT_THROW(ber(std::vector<double>{1}, y), usage_error);
}

TEST(Ber, FlippedScorerIsComplement) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> s(30), neg(30);
    std::vector<Label> y(30);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = z(rng);
      if (s[i] == 0) s[i] = 0.1;
      neg[i] = -s[i];
      y[i] = i % 3 == 0 ? P : N;
    }
    EXPECT_NEAR(ber(s, y) + ber(neg, y), 1.0, 1e-15);
  }
}

TEST(Auc, Examples) {
  const std::vector<Label> y{P, P, N, N};
  EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.8, 0.3, 0.1}, y), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.2, 0.5, 0.1}, y), 0.75);
  EXPECT_EQ(roc_auc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, y), 0.5);
  EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<Label>{N, N}), usage_error);
}

TEST(Auc, MatchesPairCountingWithTies) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> v(0, 6);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> s(25);
    std::vector<Label> y(25);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = v(rng);
      y[i] = (rng() & 1) ? P : N;
    }
    y[0] = P;
    y[1] = N;
    EXPECT_NEAR(roc_auc(s, y), auc_by_pairs(s, y), 1e-15);
  }
}

TEST(Auc, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> s(40), t(40);
    std::vector<Label> y(40);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = z(rng);
      t[i] = std::exp(3 * s[i]) + 2;
      y[i] = i % 2 ? P : N;
    }
    EXPECT_EQ(roc_auc(s, y), roc_auc(t, y));
  }
}

TEST(Roc, CurveEndpointsAndArea) {
  const std::vector<double> s{0.9, 0.2, 0.5, 0.1, 0.5};
  const std::vector<Label> y{P, P, N, N, P};
  const auto roc = roc_curve(s, y);
  EXPECT_TRUE(std::isinf(roc.front().threshold));
  EXPECT_EQ(roc.front().fpr, 0.0);
  EXPECT_EQ(roc.front().tpr, 0.0);
  EXPECT_EQ(roc.back().fpr, 1.0);
  EXPECT_EQ(roc.back().tpr, 1.0);
  EXPECT_EQ(roc.size(), 5u);  // infinity plus four distinct scores
  double area = 0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    EXPECT_GE(roc[i].fpr, roc[i - 1].fpr);
    EXPECT_GE(roc[i].tpr, roc[i - 1].tpr);
    area += (roc[i].fpr - roc[i - 1].fpr) * 0.5 * (roc[i].tpr + roc[i - 1].tpr);
  }
  EXPECT_NEAR(area, roc_auc(s, y), 1e-15);
}

TEST(Epr, Examples) {
  EXPECT_EQ(epr(std::vector<double>{0.25, 0.5}, std::vector<double>{0.25, 0.5}, 1.0), 0.0);
  EXPECT_EQ(epr(std::vector<double>{1.0}, std::vector<double>{0.5}, 1.0), 0.5);
  EXPECT_EQ(epr(std::vector<double>{1.0}, std::vector<double>{0.5}, 2.0), 0.25);
  EXPECT_THROW(epr(std::vector<double>{1.0}, std::vector<double>{0.5}, 0.0), usage_error);
  EXPECT_THROW(epr(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5}, 1.0), usage_error);
}

TEST(Epr, FromDecisionFunction) {
  Matrix anchor(1, 1);
  anchor << 0.0;
  // f(x) = exp(-x^2) - ... take alpha = 1 so every score is positive.
  const DecisionFunction f({1.0}, anchor, Vector::Constant(1, 1.0));
  Bag half;
  half.instances = {{0.0}, {1.0}, {2.0}, {3.0}};
  half.empirical_lp = 0.5;
  Bag full = half;
  full.empirical_lp = 1.0;
  const std::vector<Bag> bags{half, full};
  EXPECT_DOUBLE_EQ(epr(f, bags, 1.0), 0.25);
  EXPECT_DOUBLE_EQ(epr(f, std::span<const Bag>(bags).last(1), 1.0), 0.0);
}

TEST(EprCounterexample, ThresholdsAndGap) {
  const auto r = epr_counterexample();
  EXPECT_NEAR(r.t_epr, (std::sqrt(5.0) - 1) / 2, 1e-3);
  EXPECT_NEAR(r.t_ber, 0.5, 1e-3);
  EXPECT_NEAR(r.ber_at_ber, 0.375, 1e-6);
  EXPECT_NEAR(r.ber_at_epr, closed_form_ber(r.t_epr), 1e-12);
  EXPECT_NEAR(r.ber_at_epr - r.ber_at_ber, 0.006966, 1e-3);
  EXPECT_GT(r.t_epr, r.t_ber);
  EXPECT_GT(r.ber_at_epr, r.ber_at_ber);
  EXPECT_NEAR(r.epr_at_epr, 0.0, 1e-6);
}

TEST(EprCounterexample, ExponentDoesNotMoveMinimizer) {
  for (double p : {0.5, 2.0, 3.0}) EXPECT_NEAR(epr_counterexample(p).t_epr, 0.618034, 1e-3);
}
