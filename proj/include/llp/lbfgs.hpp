#pragma once

// Limited-memory BFGS with a backtracking (Armijo) line search.

#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace llp {

struct LbfgsOptions {
  int history = 10;
  double gradient_tolerance = 1e-6;  // on the infinity norm
  int max_iterations = 500;
  double sufficient_decrease = 1e-4;
  double backtrack = 0.5;
  int max_line_search = 40;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;  // infinity norm at x
  int iterations = 0;
  bool converged = false;
  // Objective after each accepted step, starting with the initial point.
  std::vector<double> trace;
};

// `fg(x, grad)` returns f(x) and writes the gradient into grad.
template <class Fn>
LbfgsResult minimize_lbfgs(Fn&& fg, Eigen::VectorXd x0, const LbfgsOptions& opt = {}) {
  using Vec = Eigen::VectorXd;
  const Eigen::Index n = x0.size();
  LbfgsResult res;
  Vec x = std::move(x0);
  Vec g(n);
  double f = fg(x, g);
  res.trace.push_back(f);

  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vec x_new(n), g_new(n), d(n);
  std::vector<double> alpha_buf;

  int it = 0;
  double gnorm = n > 0 ? g.cwiseAbs().maxCoeff() : 0.0;
  while (gnorm > opt.gradient_tolerance && it < opt.max_iterations) {
    // two-loop recursion
    d = -g;
    const std::size_t m = s_hist.size();
    alpha_buf.assign(m, 0.0);
    for (std::size_t k = m; k-- > 0;) {
      alpha_buf[k] = rho_hist[k] * s_hist[k].dot(d);
      d -= alpha_buf[k] * y_hist[k];
    }
    if (m > 0) d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t k = 0; k < m; ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(d);
      d += (alpha_buf[k] - beta) * s_hist[k];
    }

    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      slope = -g.squaredNorm();
    }

    // First step without curvature information is scaled to unit length.
    double step = (m == 0) ? std::min(1.0, 1.0 / std::max(d.norm(), 1e-300)) : 1.0;
    bool accepted = false;
    double f_new = f;
    for (int ls = 0; ls < opt.max_line_search; ++ls) {
      x_new = x + step * d;
      f_new = fg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + opt.sufficient_decrease * step * slope) {
        accepted = true;
        break;
      }
      step *= opt.backtrack;
    }
    if (!accepted) break;

    Vec s = x_new - x;
    Vec y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    res.trace.push_back(f);
    ++it;
    gnorm = g.cwiseAbs().maxCoeff();
  }

  res.x = std::move(x);
  res.value = f;
  res.gradient_norm = gnorm;
  res.iterations = it;
  res.converged = gnorm <= opt.gradient_tolerance;
  return res;
}

}  // namespace llp
