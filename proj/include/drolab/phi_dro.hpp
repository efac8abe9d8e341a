#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "drolab/box.hpp"
#include "drolab/divergences.hpp"
#include "drolab/errors.hpp"
#include "drolab/line_search.hpp"
#include "drolab/measures.hpp"

namespace drolab {

/// Worst-case expectation over a phi-divergence ball and its dual certificate.
struct PhiDroResult {
  double value = 0.0;
  double mean = 0.0;
  /// Dual multiplier of the divergence budget; empty when the ball collapses
  /// to the centre (delta = 0, constant values) or for the TV closed form.
  std::optional<double> lambda_star;
  double mu_star = 0.0;
  /// The outer search ran into the lambda floor; value is the essential supremum.
  bool lambda_at_floor = false;
  /// False when the worst case is not certified unique (boundary or ties).
  bool unique = true;
  /// dQ/dP at each support point, when a unique worst case was extracted.
  std::optional<Vec> density;
  /// value minus the primal value of the extracted density (0 if absent).
  double dual_gap_estimate = 0.0;
};

struct PhiDroOptions {
  /// Outer search range for lambda, relative to the spread max y - min y.
  double lambda_floor = 1e-7;
  double lambda_ceiling = 1e4;
  /// Bracket width in log lambda at which the golden search stops.
  double log_lambda_tol = 1e-10;
};

/// D_phi(Q || P) for Q with density `density` relative to P = `weights`.
inline ExtendedReal phi_divergence(const VecRef& weights, const VecRef& density, const PhiFunction& phi) {
  ExtendedReal total = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) total = total + scale(weights[i], phi.phi(density[i]));
  return total;
}

/// Average value at risk: inf_tau { tau + E[Y - tau]_+ / alpha }, computed exactly
/// as the mean of the upper alpha-tail of Y under the weights.
inline double avar(const VecRef& weights, const VecRef& y, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must be in (0, 1]");
  if (alpha == 1.0) return weights.dot(y);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(y.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return y[a] > y[b]; });
  double mass = 0.0;
  double acc = 0.0;
  for (Eigen::Index idx : order) {
    const double take = std::min(weights[idx], alpha - mass);
    if (take <= 0.0) break;
    acc += take * y[idx];
    mass += take;
  }
  // Guards against the last shares being lost to rounding of the weight sum.
  if (mass < alpha) acc += (alpha - mass) * y[order.back()];
  return acc / alpha;
}

inline double avar(const EmpiricalMeasure& mu, const VecRef& y, double alpha) { return avar(mu.weights(), y, alpha); }

/// Exact total-variation DRO value: (delta/2) max y + (1 - delta/2) AV@R_{1-delta/2}(y).
inline double tv_dro_value(const VecRef& weights, const VecRef& y, double delta) {
  if (!(delta > 0.0 && delta < 2.0)) throw DomainError("delta must be in (0,2) for tv");
  return 0.5 * delta * y.maxCoeff() + (1.0 - 0.5 * delta) * avar(weights, y, 1.0 - 0.5 * delta);
}

inline double tv_dro_value(const EmpiricalMeasure& mu, const VecRef& y, double delta) {
  return tv_dro_value(mu.weights(), y, delta);
}

/// Worst-case TV density: delta/2 mass moved from the lowest values onto the maximum.
/// `unique` is cleared when ties at the maximum or at the cut make the choice arbitrary.
inline Vec tv_worst_case(const VecRef& weights, const VecRef& y, double delta, bool* unique = nullptr) {
  if (!(delta > 0.0 && delta < 2.0)) throw DomainError("delta must be in (0,2) for tv");
  const Eigen::Index n = y.size();
  Eigen::Index top = 0;
  y.maxCoeff(&top);
  const double ymax = y[top];
  Vec q = weights;
  double top_mass = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (y[i] == ymax) top_mass += weights[i];
  bool is_unique = true;
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != top && y[i] == ymax && weights[i] > 0.0) is_unique = false;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return y[a] < y[b]; });
  double to_move = std::min(0.5 * delta, 1.0 - top_mass);
  const double moved = to_move;
  for (std::size_t k = 0; k < order.size() && to_move > 0.0; ++k) {
    const Eigen::Index i = order[k];
    if (y[i] == ymax) break;
    const double take = std::min(q[i], to_move);
    q[i] -= take;
    to_move -= take;
    if (to_move <= 0.0 && q[i] > 0.0 && k + 1 < order.size() && y[order[k + 1]] == y[i]) is_unique = false;
  }
  // Mass at the other maximizers moves to `top` as well once the ball admits it.
  q[top] += moved;
  if (unique) *unique = is_unique;
  Vec density(n);
  for (Eigen::Index i = 0; i < n; ++i) density[i] = weights[i] > 0.0 ? q[i] / weights[i] : 1.0;
  return density;
}

/// First-order robustness premium sqrt(delta * kappa * variance).
inline double phi_expansion(double delta, double variance, double kappa) {
  if (delta < 0.0 || variance < 0.0) throw DomainError("delta and variance must be nonnegative");
  if (!std::isfinite(kappa)) throw DomainError("kappa must be finite");
  return std::sqrt(delta * kappa * variance);
}

namespace detail {

/// Dual objective g(lambda) = min_mu lambda*delta + mu + lambda*E[phi*((Y - mu)/lambda)]
/// for the smooth generators, with the inner minimization over mu done exactly.
class PhiDual {
 public:
  PhiDual(const VecRef& weights, const VecRef& y_centered, const PhiFunction& phi)
      : phi_(phi), weights_(weights), y_(y_centered) {
    ymax_ = y_.maxCoeff();
    if (phi.kind() == PhiKind::chi_square) {
      const Eigen::Index n = y_.size();
      order_.resize(static_cast<std::size_t>(n));
      std::iota(order_.begin(), order_.end(), Eigen::Index{0});
      std::sort(order_.begin(), order_.end(), [&](Eigen::Index a, Eigen::Index b) { return y_[a] > y_[b]; });
      sorted_.resize(static_cast<std::size_t>(n));
      w_prefix_.assign(static_cast<std::size_t>(n) + 1, 0.0);
      s1_prefix_.assign(static_cast<std::size_t>(n) + 1, 0.0);
      s2_prefix_.assign(static_cast<std::size_t>(n) + 1, 0.0);
      for (std::size_t k = 0; k < order_.size(); ++k) {
        const double yk = y_[order_[k]];
        const double wk = weights_[order_[k]];
        sorted_[k] = yk;
        w_prefix_[k + 1] = w_prefix_[k] + wk;
        s1_prefix_[k + 1] = s1_prefix_[k] + wk * yk;
        s2_prefix_[k + 1] = s2_prefix_[k] + wk * yk * yk;
      }
    }
  }

  /// Optimal mu for this lambda.
  double mu(double lambda) const {
    if (phi_.kind() == PhiKind::kl) return ymax_ + lambda * log_mgf_shifted(lambda);
    return chi_square_mu(lambda);
  }

  double objective(double lambda, double delta) const {
    if (phi_.kind() == PhiKind::kl) {
      // lambda*delta + lambda*log E[exp(Y/lambda)], shifted by max y against overflow.
      return lambda * delta + ymax_ + lambda * log_mgf_shifted(lambda);
    }
    const double mu_value = chi_square_mu(lambda);
    const std::size_t k = active_count(mu_value - 2.0 * lambda);
    const double w = w_prefix_[k];
    const double s1 = s1_prefix_[k];
    const double s2 = s2_prefix_[k];
    // Active points contribute phi*(s) = s + s^2/4, the rest phi* = -1.
    const double linear = (s1 - mu_value * w) / lambda;
    const double quadratic = (s2 - 2.0 * mu_value * s1 + mu_value * mu_value * w) / (lambda * lambda);
    return lambda * delta + mu_value + lambda * (linear + 0.25 * quadratic - (1.0 - w));
  }

 private:
  double log_mgf_shifted(double lambda) const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y_.size(); ++i) acc += weights_[i] * std::exp((y_[i] - ymax_) / lambda);
    return std::log(acc);
  }

  /// Number of sorted values strictly above `threshold`.
  std::size_t active_count(double threshold) const {
    const auto it = std::partition_point(sorted_.begin(), sorted_.end(), [&](double v) { return v > threshold; });
    return static_cast<std::size_t>(it - sorted_.begin());
  }

  /// sum_i w_i (phi*)'((y_i - mu)/lambda) - 1, decreasing in mu.
  double chi_square_residual(double mu_value, double lambda) const {
    const std::size_t k = active_count(mu_value - 2.0 * lambda);
    return w_prefix_[k] + (s1_prefix_[k] - mu_value * w_prefix_[k]) / (2.0 * lambda) - 1.0;
  }

  double chi_square_mu(double lambda) const {
    // The residual is piecewise linear with kinks at sorted_[j] + 2 lambda.
    const std::size_t n = sorted_.size();
    auto breakpoint = [&](std::size_t j) { return sorted_[j] + 2.0 * lambda; };
    std::size_t lo = 1;
    std::size_t hi = n;  // n means "below every breakpoint"
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (chi_square_residual(breakpoint(mid), lambda) >= 0.0) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    if (lo >= n) {
      // Every point is active: the stationarity condition gives the mean.
      return s1_prefix_[n] / w_prefix_[n];
    }
    const double right = breakpoint(lo - 1);
    const double left = breakpoint(lo);
    const double r_left = chi_square_residual(left, lambda);
    const double r_right = chi_square_residual(right, lambda);
    if (r_left == r_right) return left;
    return left + r_left * (right - left) / (r_left - r_right);
  }

  PhiFunction phi_;
  VecRef weights_;
  VecRef y_;
  double ymax_ = 0.0;
  std::vector<Eigen::Index> order_;
  std::vector<double> sorted_;
  std::vector<double> w_prefix_;
  std::vector<double> s1_prefix_;
  std::vector<double> s2_prefix_;
};

}  // namespace detail

/// Density of the worst-case measure implied by a solved dual, z_i = (phi*)'((y_i - mu*)/lambda*).
/// Empty when the dual sits at the lambda floor, where uniqueness is not guaranteed.
inline std::optional<Vec> phi_worst_case(const VecRef& weights, const VecRef& y, const PhiFunction& phi,
                                         const PhiDroResult& solved) {
  const Eigen::Index n = y.size();
  if (solved.lambda_at_floor) return std::nullopt;
  if (!solved.lambda_star) return Vec::Ones(n);
  if (!phi.smooth()) throw DomainError("phi_worst_case expects a smooth generator");
  const double lambda = *solved.lambda_star;
  Vec z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = phi.conjugate_derivative((y[i] - solved.mu_star) / lambda);
  // Removes the rounding residue of the mu solve; the ratio is 1 to ~1e-15.
  const double mass = weights.dot(z);
  if (mass > 0.0) z /= mass;
  return z;
}

/// sup { E_Q[Y] : D_phi(Q || P) <= delta } via the dual
///   inf_{lambda > 0, mu} lambda*delta + mu + lambda*E_P[phi*((Y - mu)/lambda)].
///
/// The outer search is golden section over log lambda; the inner problem over mu
/// is solved exactly (log-sum-exp for KL, piecewise-linear root for chi-square).
/// The total-variation generator is routed to its closed form.
inline PhiDroResult phi_dro_value(const VecRef& weights, const VecRef& y, double delta, const PhiFunction& phi,
                                  const PhiDroOptions& options = {}) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw DomainError("delta must be nonnegative and finite");
  if (weights.size() != y.size() || y.size() == 0) throw DomainError("values and weights must have equal, positive length");
  if (!y.allFinite()) throw DomainError("values must be finite");

  PhiDroResult result;
  result.mean = weights.dot(y);
  result.mu_star = result.mean;
  const double ymax = y.maxCoeff();
  const double spread = ymax - y.minCoeff();
  if (delta == 0.0 || spread <= 1e-14 * (1.0 + std::abs(result.mean))) {
    result.value = result.mean;
    result.density = Vec::Ones(y.size());
    return result;
  }

  if (phi.kind() == PhiKind::total_variation) {
    result.value = tv_dro_value(weights, y, delta);
    bool unique = true;
    Vec z = tv_worst_case(weights, y, delta, &unique);
    result.unique = unique;
    if (unique) result.density = z;
    result.dual_gap_estimate = result.value - weights.dot(z.cwiseProduct(y));
    return result;
  }

  const Vec centered = y.array() - result.mean;
  const detail::PhiDual dual(weights, centered, phi);
  const auto objective = [&](double log_lambda) { return dual.objective(std::exp(log_lambda), delta); };

  double lo = std::log(options.lambda_floor * spread);
  double hi = std::log(options.lambda_ceiling * spread);
  ScalarMinimum best = golden_section_minimize(objective, lo, hi, options.log_lambda_tol);
  // The optimal lambda grows like delta^{-1/2}; widen the bracket upward if it is pinned there.
  for (int widen = 0; widen < 12 && hi - best.x < 1e-6; ++widen) {
    lo = best.x - 1.0;
    hi += std::log(1e4);
    const ScalarMinimum next = golden_section_minimize(objective, lo, hi, options.log_lambda_tol);
    if (next.f <= best.f) best = next;
  }

  const double floor_log = std::log(options.lambda_floor * spread);
  if (best.x - floor_log < 1e-6) {
    result.lambda_at_floor = true;
    result.unique = false;
    result.lambda_star = std::exp(floor_log);
    result.mu_star = ymax;
    result.value = ymax;
    return result;
  }

  const double lambda = std::exp(best.x);
  result.lambda_star = lambda;
  result.mu_star = dual.mu(lambda) + result.mean;
  // The ball contains P and sits inside the simplex, so mean <= value <= max y.
  result.value = std::clamp(best.f + result.mean, result.mean, ymax);
  result.density = phi_worst_case(weights, y, phi, result);
  if (result.density) result.dual_gap_estimate = result.value - weights.dot(result.density->cwiseProduct(y));
  return result;
}

inline PhiDroResult phi_dro_value(const EmpiricalMeasure& mu, const VecRef& y, double delta, const PhiFunction& phi,
                                  const PhiDroOptions& options = {}) {
  return phi_dro_value(mu.weights(), y, delta, phi, options);
}

namespace detail {

/// Ellipsoid method for max c^T x + c0 over a convex set given by a separation
/// oracle. `separate(x, g)` returns true if x is feasible, otherwise writes a
/// cutting direction g with g^T (z - x) <= 0 for every feasible z.
/// Returns the best feasible objective found; `upper` receives a certified bound.
template <class Separate>
double ellipsoid_maximize(const Vec& c, double c0, Vec center, double radius, Separate&& separate, double tol,
                          double* upper = nullptr, int max_iter = 200000) {
  const Eigen::Index n = c.size();
  double best = -std::numeric_limits<double>::infinity();
  double bound = std::numeric_limits<double>::infinity();
  Vec g(n);
  if (n == 1) {
    double a = center[0] - radius;
    double b = center[0] + radius;
    for (int it = 0; it < max_iter && b - a > 1e-15; ++it) {
      Vec x(1);
      x[0] = 0.5 * (a + b);
      if (separate(x, g)) {
        best = std::max(best, c[0] * x[0] + c0);
        if (c[0] >= 0.0) a = x[0]; else b = x[0];
      } else {
        if (g[0] > 0.0) b = x[0]; else a = x[0];
      }
      bound = c0 + std::max(c[0] * a, c[0] * b);
      if (bound - best < tol) break;
    }
    if (upper) *upper = bound;
    return best;
  }
  Eigen::MatrixXd shape = Eigen::MatrixXd::Identity(n, n) * radius * radius;
  const double dn = static_cast<double>(n);
  for (int it = 0; it < max_iter; ++it) {
    const bool feasible = separate(center, g);
    if (feasible) {
      best = std::max(best, c.dot(center) + c0);
      g = -c;
    }
    const double spread = std::sqrt(std::max(0.0, c.dot(shape * c)));
    bound = std::min(bound, c.dot(center) + c0 + spread);
    if (bound - best < tol) break;
    const double norm = std::sqrt(std::max(0.0, g.dot(shape * g)));
    if (!(norm > 0.0) || !std::isfinite(norm)) break;
    const Vec step = shape * g / norm;
    center -= step / (dn + 1.0);
    shape = (dn * dn / (dn * dn - 1.0)) * (shape - (2.0 / (dn + 1.0)) * step * step.transpose());
    shape = 0.5 * (shape + shape.transpose());
  }
  if (upper) *upper = bound;
  return best;
}

}  // namespace detail

/// Brute-force primal value max { sum q_i y_i : q in simplex, sum p_i phi(q_i/p_i) <= delta }
/// for small supports (<= 6 points).
///
/// Solved with the ellipsoid method on the simplex (a central-cut method with a
/// certified optimality gap), backed by an exhaustive simplex grid for supports
/// of at most 4 points. No dual quantities are used.
inline double phi_primal_oracle(const VecRef& weights, const VecRef& y, double delta, const PhiFunction& phi,
                                double tol = 1e-9) {
  const Eigen::Index k = y.size();
  if (k > 6) throw OracleMisuse("phi_primal_oracle supports at most 6 support points");
  if (k == 0 || weights.size() != k) throw DomainError("values and weights must have equal, positive length");
  if (delta < 0.0) throw DomainError("delta must be nonnegative");
  const double mean = weights.dot(y);
  if (delta == 0.0 || k == 1) return mean;
  for (Eigen::Index i = 0; i < k; ++i)
    if (!(weights[i] > 0.0)) throw OracleMisuse("phi_primal_oracle needs strictly positive weights");

  auto divergence = [&](const Vec& q) {
    ExtendedReal total = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) total = total + scale(weights[i], phi.phi(q[i] / weights[i]));
    return total;
  };
  auto full = [&](const Vec& x) {
    Vec q(k);
    q.head(k - 1) = x;
    q[k - 1] = 1.0 - x.sum();
    return q;
  };

  // Reduced coordinates x = (q_1, ..., q_{k-1}); q_k = 1 - sum x.
  const Vec c = y.head(k - 1).array() - y[k - 1];
  const double c0 = y[k - 1];
  if (c.cwiseAbs().maxCoeff() == 0.0) return mean;
  auto separate = [&](const Vec& x, Vec& g) {
    const Vec q = full(x);
    Eigen::Index worst = 0;
    if (q.minCoeff(&worst) < 0.0) {
      g.setZero();
      if (worst < k - 1) g[worst] = -1.0; else g.setOnes();
      return false;
    }
    if (divergence(q) <= ExtendedReal(delta)) return true;
    // Subgradient of the divergence in reduced coordinates.
    const double last = q[k - 1] > 0.0 ? phi.derivative(q[k - 1] / weights[k - 1]) : -1e300;
    for (Eigen::Index i = 0; i < k - 1; ++i) {
      const double di = q[i] > 0.0 ? phi.derivative(q[i] / weights[i]) : -1e300;
      g[i] = std::clamp(di - last, -1e12, 1e12);
    }
    if (g.cwiseAbs().maxCoeff() == 0.0) g = -c;
    return false;
  };
  const double scale_y = 1.0 + y.cwiseAbs().maxCoeff();
  double best = detail::ellipsoid_maximize(c, c0, weights.head(k - 1), 1.5, separate, tol * scale_y);

  if (k <= 4) {
    // Exhaustive grid of the simplex at step 1/60 as an independent lower bound.
    constexpr int steps = 60;
    Vec q(k);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    auto recurse = [&](auto&& self, Eigen::Index pos, int remaining) -> void {
      if (pos == k - 1) {
        counts[static_cast<std::size_t>(pos)] = remaining;
        for (Eigen::Index i = 0; i < k; ++i) q[i] = counts[static_cast<std::size_t>(i)] / static_cast<double>(steps);
        if (divergence(q) <= ExtendedReal(delta)) best = std::max(best, q.dot(y));
        return;
      }
      for (int m = 0; m <= remaining; ++m) {
        counts[static_cast<std::size_t>(pos)] = m;
        self(self, pos + 1, remaining - m);
      }
    };
    recurse(recurse, 0, steps);
  }
  return std::max(best, mean);
}

inline double phi_primal_oracle(const EmpiricalMeasure& mu, const VecRef& y, double delta, const PhiFunction& phi) {
  return phi_primal_oracle(mu.weights(), y, delta, phi);
}

}  // namespace drolab
