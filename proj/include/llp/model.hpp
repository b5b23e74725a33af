#pragma once

// Gaussian-kernel decision functions in representer form,
// f(x) = sum_i alpha_i exp(-bandwidth ||x - x_i||^2).

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "llp/bags.hpp"
#include "llp/common.hpp"

namespace llp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct KernelConfig {
  double bandwidth = 1.0;

  void validate() const {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
      throw usage_error("kernel bandwidth must be finite and positive");
  }
};

// Rows of the result are the feature vectors.
inline Matrix to_matrix(std::span<const FeatureVector> rows) {
  if (rows.empty()) return Matrix(0, 0);
  const auto d = rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw usage_error("feature dimension mismatch at row " + std::to_string(i));
    for (std::size_t k = 0; k < d; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

// K_ij = exp(-bandwidth ||a_i - b_j||^2)
inline Matrix cross_kernel(const Matrix& a, const Matrix& b, const KernelConfig& cfg) {
  cfg.validate();
  if (a.cols() != b.cols()) throw usage_error("kernel: feature dimension mismatch");
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = b.rowwise().squaredNorm();
  Matrix k = -2.0 * (a * b.transpose());
  k.colwise() += na;
  k.rowwise() += nb.transpose();
  return (-cfg.bandwidth * k.cwiseMax(0.0)).array().exp().matrix();
}

// Gram matrix: symmetric by construction with an exact unit diagonal.
inline Matrix kernel_matrix(const Matrix& x, const KernelConfig& cfg) {
  if (x.rows() == 0) throw usage_error("kernel_matrix: no instances");
  Matrix k = cross_kernel(x, x, cfg);
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < k.cols(); ++j) k(j, i) = k(i, j);
  }
  return k;
}

// 1 / (d * v) with v the population variance of all entries of X pooled.
inline double default_bandwidth(const Matrix& x) {
  if (x.rows() < 2) throw usage_error("default_bandwidth: need at least two rows");
  if (x.cols() < 1) throw usage_error("default_bandwidth: need at least one feature");
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  if (!(var > 0.0)) throw compute_error("default_bandwidth: data matrix has zero variance");
  return 1.0 / (static_cast<double>(x.cols()) * var);
}

class DecisionFunction {
 public:
  DecisionFunction() = default;
  DecisionFunction(KernelConfig cfg, Matrix anchors, Vector alpha)
      : cfg_(cfg), anchors_(std::move(anchors)), alpha_(std::move(alpha)) {
    cfg_.validate();
    if (anchors_.rows() != alpha_.size()) throw usage_error("decision function: one coefficient per anchor required");
  }

  const KernelConfig& kernel() const { return cfg_; }
  const Matrix& anchors() const { return anchors_; }
  const Vector& alpha() const { return alpha_; }
  Eigen::Index dimension() const { return anchors_.cols(); }

  double operator()(std::span<const double> x) const {
    if (static_cast<Eigen::Index>(x.size()) != anchors_.cols())
      throw usage_error("decision function: input dimension " + std::to_string(x.size()) + " != " +
                        std::to_string(anchors_.cols()));
    double f = 0.0;
    for (Eigen::Index i = 0; i < anchors_.rows(); ++i) {
      double d2 = 0.0;
      for (Eigen::Index k = 0; k < anchors_.cols(); ++k) {
        const double diff = x[static_cast<std::size_t>(k)] - anchors_(i, k);
        d2 += diff * diff;
      }
      f += alpha_(i) * std::exp(-cfg_.bandwidth * d2);
    }
    return f;
  }

  // Scores for every row of x.
  Vector scores(const Matrix& x) const {
    if (x.rows() == 0) return Vector(0);
    if (anchors_.rows() == 0) return Vector::Zero(x.rows());
    return cross_kernel(x, anchors_, cfg_) * alpha_;
  }

  Vector scores(std::span<const FeatureVector> x) const { return scores(to_matrix(x)); }

  // ||f||^2 = alpha' K alpha
  double rkhs_norm_squared() const {
    if (anchors_.rows() == 0) return 0.0;
    return alpha_.dot(kernel_matrix(anchors_, cfg_) * alpha_);
  }

 private:
  KernelConfig cfg_{};
  Matrix anchors_;
  Vector alpha_;
};

inline double evaluate_decision(const DecisionFunction& f, std::span<const double> x) { return f(x); }

}  // namespace llp
