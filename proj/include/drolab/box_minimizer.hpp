#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "drolab/box.hpp"

namespace drolab {

struct BoxMinimizerOptions {
  /// Stop once ||x - P(x - grad)|| falls below this.
  double pg_tol = 1e-8;
  int max_iter = 5000;
  /// Relative slack in the Armijo test, absorbing rounding noise in f.
  double f_noise = 1e-14;
  double armijo = 1e-4;
  /// Give up after this many consecutive steps whose decrease is within the noise level.
  int max_stalled = 50;
};

struct BoxMinimum {
  Vec x;
  double f = std::numeric_limits<double>::infinity();
  double pg_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// Norm of the unit-step projected gradient, the first-order stationarity measure on a box.
inline double projected_gradient_norm(const Box& box, const VecRef& x, const VecRef& g) {
  return (x - box.project(x - g)).norm();
}

/// Projected gradient descent with Barzilai-Borwein steps and Armijo backtracking
/// along the projection arc.
template <class F, class G>
BoxMinimum projected_gradient_minimize(F&& f, G&& grad, const VecRef& x0, const Box& box,
                                       const BoxMinimizerOptions& options = {}) {
  BoxMinimum out;
  Vec x = box.project(x0);
  double fx = f(x);
  Vec g = grad(x);
  double alpha = 1.0 / std::max(1.0, g.cwiseAbs().maxCoeff());
  int it = 0;
  int stalled = 0;
  for (; it < options.max_iter; ++it) {
    const double pg = projected_gradient_norm(box, x, g);
    if (pg < options.pg_tol) break;
    bool accepted = false;
    Vec trial;
    double ft = 0.0;
    double step = alpha;
    for (int bt = 0; bt < 60; ++bt) {
      trial = box.project(x - step * g);
      ft = f(trial);
      const double decrease = g.dot(trial - x);
      if (std::isfinite(ft) && ft <= fx + options.armijo * decrease + options.f_noise * (1.0 + std::abs(fx))) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || (trial - x).cwiseAbs().maxCoeff() == 0.0) break;
    stalled = fx - ft > options.f_noise * (1.0 + std::abs(fx)) ? 0 : stalled + 1;
    if (stalled >= options.max_stalled) {
      x = trial;
      fx = ft;
      g = grad(x);
      break;
    }
    const Vec g_new = grad(trial);
    const Vec s = trial - x;
    const Vec yv = g_new - g;
    const double sy = s.dot(yv);
    alpha = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-14, 1e14) : std::min(1e14, 2.0 * step);
    x = trial;
    fx = ft;
    g = g_new;
  }
  out.x = x;
  out.f = fx;
  out.pg_norm = projected_gradient_norm(box, x, g);
  out.iterations = it;
  out.converged = out.pg_norm < options.pg_tol;
  return out;
}

/// Derivative-free compass search: poll +-step along each coordinate, halve on failure.
template <class F>
BoxMinimum compass_minimize(F&& f, const VecRef& x0, const Box& box, double rel_tol = 1e-10, int max_evals = 200000) {
  BoxMinimum out;
  Vec x = box.project(x0);
  double fx = f(x);
  const double width = std::max(box.width().maxCoeff(), 1e-12);
  double step = 0.25 * width;
  int evals = 1;
  while (step > rel_tol * width && evals < max_evals) {
    bool improved = false;
    for (Eigen::Index j = 0; j < x.size() && !improved; ++j) {
      for (double sign : {1.0, -1.0}) {
        Vec trial = x;
        trial[j] += sign * step;
        trial = box.project(trial);
        if (trial[j] == x[j]) continue;
        const double ft = f(trial);
        ++evals;
        if (ft < fx) {
          x = trial;
          fx = ft;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  out.x = x;
  out.f = fx;
  out.pg_norm = step;
  out.iterations = evals;
  out.converged = step <= rel_tol * width;
  return out;
}

}  // namespace drolab
