#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "drolab/box.hpp"
#include "drolab/box_minimizer.hpp"
#include "drolab/errors.hpp"
#include "drolab/field.hpp"
#include "drolab/line_search.hpp"
#include "drolab/measures.hpp"

namespace drolab {

/// l_q norm for q in (1, inf).
inline double lq_norm(const VecRef& v, double q) {
  if (q == 2.0) return v.norm();
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < v.size(); ++j) acc += std::pow(std::abs(v[j]) / scale, q);
  return scale * std::pow(acc, 1.0 / q);
}

/// Transport cost ||x - y||^p with an l_q ground norm, and the inner search domain.
class WassersteinSpec {
 public:
  WassersteinSpec(double p, double norm_exponent, std::optional<Box> search_box = std::nullopt)
      : p_(p), q_(norm_exponent), search_box_(std::move(search_box)) {
    if (!(p > 1.0) || !std::isfinite(p)) {
      throw ConfigError("wasserstein order p must be in (1, inf); p = 1 loses differentiability of the premium");
    }
    if (!(norm_exponent > 1.0) || !std::isfinite(norm_exponent)) {
      throw ConfigError("norm exponent must be in (1, inf) so the dual-norm maximizer is unique");
    }
    q_dual_ = q_ / (q_ - 1.0);
  }

  double p() const { return p_; }
  double norm_exponent() const { return q_; }
  double dual_norm_exponent() const { return q_dual_; }
  const std::optional<Box>& search_box() const { return search_box_; }
  WassersteinSpec with_search_box(Box box) const { return WassersteinSpec(p_, q_, std::move(box)); }

  double norm(const VecRef& v) const { return lq_norm(v, q_); }
  double dual_norm(const VecRef& v) const { return lq_norm(v, q_dual_); }
  double cost(const VecRef& x, const VecRef& y) const { return std::pow(norm(x - y), p_); }

  /// Unit-norm u with c^T u = ||c||_*.
  Vec dual_direction(const VecRef& c) const {
    const double cn = dual_norm(c);
    Vec u = Vec::Zero(c.size());
    if (cn == 0.0) return u;
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      const double a = std::abs(c[j]) / cn;
      u[j] = (c[j] < 0.0 ? -1.0 : 1.0) * std::pow(a, q_dual_ - 1.0);
    }
    return u;
  }

 private:
  double p_;
  double q_;
  double q_dual_;
  std::optional<Box> search_box_;
};

/// Support box grown by 1.1 (delta / min_i w_i)^{1/p}, which no single atom can exceed.
inline Box default_search_box(const EmpiricalMeasure& mu, double delta, double p) {
  double min_w = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    if (mu.weight(i) > 0.0) min_w = std::min(min_w, mu.weight(i));
  const double radius = delta > 0.0 ? 1.1 * std::pow(delta / min_w, 1.0 / p) : 0.0;
  return mu.support_box().inflated(radius);
}

enum class InnerStatus { closed_form, ascent_converged, ascent_multistart };

inline std::string to_string(InnerStatus s) {
  switch (s) {
    case InnerStatus::closed_form: return "closed-form";
    case InnerStatus::ascent_converged: return "ascent-converged";
    case InnerStatus::ascent_multistart: return "ascent-multistart";
  }
  return "unknown";
}

struct HBarResult {
  double value = 0.0;
  Vec argmax;
  InnerStatus status = InnerStatus::closed_form;
  bool converged = true;
  /// lambda = 0: the result is the plain box maximum of h.
  bool box_limited = false;
};

namespace detail {

inline Vec transport_gradient(const VecRef& v, double lambda, double p, double q) {
  Vec g = Vec::Zero(v.size());
  const double r = lq_norm(v, q);
  if (r == 0.0 || lambda == 0.0) return g;
  const double outer = lambda * p * std::pow(r, p - q);
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (v[j] != 0.0) g[j] = outer * (v[j] < 0.0 ? -1.0 : 1.0) * std::pow(std::abs(v[j]), q - 1.0);
  }
  return g;
}

inline HBarResult vertex_max(const ScalarField& h, const VecRef& x, double lambda, const WassersteinSpec& spec,
                             const Box& box) {
  const auto d = box.dim();
  if (d > 20) throw SolverError("vertex enumeration limited to 20 dimensions");
  HBarResult best;
  best.value = -std::numeric_limits<double>::infinity();
  for (unsigned long long mask = 0; mask < (1ULL << d); ++mask) {
    const Vec v = box.vertex(mask);
    const double val = h(v) - (lambda > 0.0 ? lambda * spec.cost(x, v) : 0.0);
    if (val > best.value) {
      best.value = val;
      best.argmax = v;
    }
  }
  best.status = InnerStatus::closed_form;
  return best;
}

}  // namespace detail

/// sup_{y in box} h(y) - lambda ||x - y||^p.
///
/// Affine h uses the closed-form displacement r u with r = (||c||_* / (lambda p))^{1/(p-1)};
/// quadratic h with p = 2 and the Euclidean norm is solved exactly whenever the inner
/// objective is concave (linear solve) or convex (vertex enumeration); everything else
/// runs multistart projected ascent.
inline HBarResult h_bar(const VecRef& x, double lambda, const ScalarField& h, const WassersteinSpec& spec,
                        const Box& box) {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be nonnegative");
  if (x.size() != box.dim()) throw DomainError("point and search box dimensions differ");
  const double p = spec.p();
  const double q = spec.norm_exponent();
  const auto d = x.size();

  if (h.structure() == FieldStructure::affine) {
    const Vec& c = h.linear_part();
    if (lambda == 0.0) {
      HBarResult out;
      out.argmax = box.lower();
      for (Eigen::Index j = 0; j < d; ++j)
        if (c[j] > 0.0) out.argmax[j] = box.upper()[j];
      out.value = h(out.argmax);
      out.box_limited = true;
      return out;
    }
    const double cn = spec.dual_norm(c);
    const double r = cn > 0.0 ? std::pow(cn / (lambda * p), 1.0 / (p - 1.0)) : 0.0;
    const Vec y = x + r * spec.dual_direction(c);
    if (box.contains(y)) {
      HBarResult out;
      out.argmax = y;
      out.value = h(x) + lambda * (p - 1.0) * std::pow(r, p);
      return out;
    }
  }

  const bool euclid2 = p == 2.0 && q == 2.0;
  if (h.structure() == FieldStructure::quadratic && euclid2) {
    const Eigen::MatrixXd& a = h.quadratic_part();
    const Eigen::MatrixXd m = lambda * Eigen::MatrixXd::Identity(d, d) - a;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    const double tol = 1e-12 * (1.0 + std::abs(lambda) + a.cwiseAbs().maxCoeff());
    if (lo > tol) {
      const Vec y = m.ldlt().solve(lambda * x + 0.5 * h.linear_part());
      if (box.contains(y)) {
        HBarResult out;
        out.argmax = y;
        out.value = h(y) - lambda * (y - x).squaredNorm();
        out.box_limited = lambda == 0.0;
        return out;
      }
      // Concave: one projected ascent reaches the box-constrained optimum.
      const auto obj = [&](const VecRef& yy) { return -(h(yy) - lambda * (yy - x).squaredNorm()); };
      const auto grad = [&](const VecRef& yy) -> Vec { return -(h.gradient(yy) - 2.0 * lambda * (yy - x)); };
      BoxMinimizerOptions opt;
      opt.pg_tol = 1e-12 * (1.0 + h.gradient(x).norm() + lambda);
      opt.max_iter = 2000;
      const BoxMinimum best = projected_gradient_minimize(obj, grad, box.project(y), box, opt);
      HBarResult out;
      out.argmax = best.x;
      out.value = -best.f;
      out.status = InnerStatus::ascent_converged;
      out.converged = best.converged;
      out.box_limited = lambda == 0.0;
      return out;
    }
    if (hi <= tol) {
      HBarResult out = detail::vertex_max(h, x, lambda, spec, box);
      out.box_limited = lambda == 0.0;
      return out;
    }
  }

  // General tier.
  const auto obj = [&](const VecRef& y) { return -(h(y) - (lambda > 0.0 ? lambda * std::pow(lq_norm(y - x, q), p) : 0.0)); };
  const auto grad = [&](const VecRef& y) -> Vec {
    return -(h.gradient(y) - detail::transport_gradient(y - x, lambda, p, q));
  };
  const Vec g0 = h.gradient(x);
  const double width = box.width().maxCoeff();
  double r = lambda > 0.0 ? std::pow(spec.dual_norm(g0) / (lambda * p), 1.0 / (p - 1.0)) : 0.25 * width;
  r = std::clamp(r, 1e-3 * std::max(width, 1e-12), std::max(width, 1e-12));
  std::vector<Vec> starts;
  starts.push_back(box.project(x));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (double mult : {1.0, -1.0, 2.0, -2.0}) {
      Vec s = x;
      s[j] += mult * r;
      starts.push_back(box.project(s));
    }
  }
  starts.push_back(box.center());
  BoxMinimizerOptions opt;
  opt.pg_tol = 1e-11 * (1.0 + g0.norm() + lambda * std::pow(r, p - 1.0));
  opt.max_iter = 1000;
  HBarResult out;
  out.value = -std::numeric_limits<double>::infinity();
  out.box_limited = lambda == 0.0;
  int converged = 0;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const BoxMinimum m = projected_gradient_minimize(obj, grad, starts[k], box, opt);
    if (m.converged) ++converged;
    if (-m.f > out.value) {
      out.value = -m.f;
      out.argmax = m.x;
      out.status = k == 0 ? InnerStatus::ascent_converged : InnerStatus::ascent_multistart;
      out.converged = m.converged;
    }
  }
  if (converged == 0) out.converged = false;
  return out;
}

/// Worst-case expectation over the p-Wasserstein ball and its dual certificate.
struct WDroResult {
  double value = 0.0;
  double mean = 0.0;
  double lambda_star = 0.0;
  /// y_i^* as columns, at lambda_star.
  std::optional<Eigen::MatrixXd> maximizers;
  /// Least exact inner tier used across the support at lambda_star.
  InnerStatus inner_status = InnerStatus::closed_form;
  /// More than 1% of inner problems at lambda_star did not converge.
  bool degraded = false;
  double nonconverged_fraction = 0.0;
  Box search_box;
};

struct WDroOptions {
  double lambda_floor = 1e-6;
  double lambda_ceiling = 1e6;
  double log_lambda_tol = 1e-10;
};

/// min_{lambda >= 0} lambda*delta + E_P[h_bar_lambda(X)].
inline WDroResult w_dro_value(const EmpiricalMeasure& mu, const ScalarField& h, double delta,
                              const WassersteinSpec& spec, const WDroOptions& options = {}) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw DomainError("delta must be nonnegative and finite");
  WDroResult result;
  result.search_box = spec.search_box() ? *spec.search_box() : default_search_box(mu, delta, spec.p());
  if (result.search_box.dim() != mu.dim()) throw ConfigError("search box dimension differs from the data");
  const Vec hx = mu.evaluate([&](const auto& x) { return h(x); });
  if (!hx.allFinite()) throw DomainError("h is not finite on the support");
  result.mean = mu.weights().dot(hx);
  if (delta == 0.0) {
    result.value = result.mean;
    result.lambda_star = 0.0;
    result.maximizers = mu.points();
    return result;
  }

  const Eigen::Index n = mu.size();
  const Box& box = result.search_box;
  auto inner_all = [&](double lambda, std::vector<HBarResult>* keep) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      HBarResult r = h_bar(mu.point(i), lambda, h, spec, box);
      acc += mu.weight(i) * r.value;
      if (keep) keep->push_back(std::move(r));
    }
    return acc;
  };
  const auto objective = [&](double log_lambda) {
    const double lambda = std::exp(log_lambda);
    return lambda * delta + inner_all(lambda, nullptr);
  };

  double lo = std::log(options.lambda_floor);
  double hi = std::log(options.lambda_ceiling);
  ScalarMinimum best = golden_section_minimize(objective, lo, hi, options.log_lambda_tol);
  for (int widen = 0; widen < 12 && hi - best.x < 1e-6; ++widen) {
    lo = best.x - 1.0;
    hi += std::log(1e4);
    const ScalarMinimum next = golden_section_minimize(objective, lo, hi, options.log_lambda_tol);
    if (next.f <= best.f) best = next;
  }
  double lambda = std::exp(best.x);
  double value = best.f;
  const double at_zero = inner_all(0.0, nullptr);
  if (at_zero <= value) {
    lambda = 0.0;
    value = at_zero;
  }

  std::vector<HBarResult> inner;
  inner.reserve(static_cast<std::size_t>(n));
  inner_all(lambda, &inner);
  Eigen::MatrixXd ys(mu.dim(), n);
  int failed = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const HBarResult& r = inner[static_cast<std::size_t>(i)];
    ys.col(i) = r.argmax;
    result.inner_status = std::max(result.inner_status, r.status);
    if (!r.converged) ++failed;
  }
  result.nonconverged_fraction = static_cast<double>(failed) / static_cast<double>(n);
  result.degraded = result.nonconverged_fraction > 0.01;
  result.maximizers = std::move(ys);
  result.lambda_star = lambda;
  result.value = std::max(value, result.mean);
  return result;
}

/// First-order premium delta^{1/p} (sum_i w_i ||g_i||_*^{p/(p-1)})^{(p-1)/p}; gradients are columns.
inline double w_expansion(const VecRef& weights, const Eigen::MatrixXd& gradients, double delta,
                          const WassersteinSpec& spec) {
  if (delta < 0.0) throw DomainError("delta must be nonnegative");
  if (gradients.cols() != weights.size()) throw DomainError("one gradient per support point is required");
  if (delta == 0.0) return 0.0;
  const double p = spec.p();
  const double e = p / (p - 1.0);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) acc += weights[i] * std::pow(spec.dual_norm(gradients.col(i)), e);
  return std::pow(delta, 1.0 / p) * std::pow(acc, (p - 1.0) / p);
}

inline double w_expansion(const EmpiricalMeasure& mu, const Eigen::MatrixXd& gradients, double delta,
                          const WassersteinSpec& spec) {
  return w_expansion(mu.weights(), gradients, delta, spec);
}

/// Brute-force primal value max sum_i w_i E[h(x_i + D_i)] over (possibly split)
/// atom displacements with sum_i w_i E||D_i||^p <= delta, inside the search box.
///
/// Each atom's best reachable value V_i(r) over the radius-r ball is tabulated on a
/// radial grid, its concave envelope in cost r^p accounts for split atoms, and the
/// budget is allocated greedily across envelope segments (a separable concave
/// knapsack, solved exactly on the grid).
inline double w_primal_oracle(const EmpiricalMeasure& mu, const ScalarField& h, double delta,
                              const WassersteinSpec& spec) {
  if (mu.size() > 3 || mu.dim() > 2) throw OracleMisuse("w_primal_oracle supports at most 3 atoms in d <= 2");
  if (delta < 0.0) throw DomainError("delta must be nonnegative");
  const Vec hx = mu.evaluate([&](const auto& x) { return h(x); });
  const double mean = mu.weights().dot(hx);
  if (delta == 0.0) return mean;
  const Box box = spec.search_box() ? *spec.search_box() : default_search_box(mu, delta, spec.p());
  const double p = spec.p();
  const auto d = mu.dim();
  const int radii = d == 1 ? 20000 : 1000;
  const int angles = 720;

  struct Segment {
    double slope;
    double cost;  // mass-weighted
    double gain;  // mass-weighted
  };
  std::vector<Segment> segments;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double w = mu.weight(i);
    if (!(w > 0.0)) continue;
    const Vec x = mu.point(i);
    const double r_max = std::pow(delta / w, 1.0 / p);
    std::vector<double> cost(static_cast<std::size_t>(radii) + 1);
    std::vector<double> best(static_cast<std::size_t>(radii) + 1);
    double running = h(x);
    cost[0] = 0.0;
    best[0] = running;
    for (int k = 1; k <= radii; ++k) {
      const double r = r_max * static_cast<double>(k) / radii;
      if (d == 1) {
        for (double s : {1.0, -1.0}) {
          Vec y = x;
          y[0] += s * r;
          if (box.contains(y)) running = std::max(running, h(y));
        }
      } else {
        for (int a = 0; a < angles; ++a) {
          const double t = 2.0 * std::numbers::pi * a / angles;
          Vec u(2);
          u << std::cos(t), std::sin(t);
          u /= spec.norm(u);
          const Vec y = x + r * u;
          if (box.contains(y)) running = std::max(running, h(y));
        }
      }
      cost[static_cast<std::size_t>(k)] = std::pow(r, p);
      best[static_cast<std::size_t>(k)] = running;
    }
    // Upper concave hull in (cost, value).
    std::vector<std::size_t> hull{0};
    for (std::size_t k = 1; k < cost.size(); ++k) {
      while (hull.size() >= 2) {
        const std::size_t a = hull[hull.size() - 2];
        const std::size_t b = hull.back();
        const double cross = (best[b] - best[a]) * (cost[k] - cost[a]) - (best[k] - best[a]) * (cost[b] - cost[a]);
        if (cross <= 0.0) hull.pop_back(); else break;
      }
      hull.push_back(k);
    }
    for (std::size_t s = 1; s < hull.size(); ++s) {
      const double dc = cost[hull[s]] - cost[hull[s - 1]];
      const double dv = best[hull[s]] - best[hull[s - 1]];
      if (dv <= 0.0) break;
      segments.push_back({dv / dc, w * dc, w * dv});
    }
  }
  std::stable_sort(segments.begin(), segments.end(), [](const Segment& a, const Segment& b) { return a.slope > b.slope; });
  double budget = delta;
  double value = mean;
  for (const Segment& s : segments) {
    if (budget <= 0.0) break;
    const double take = std::min(1.0, budget / s.cost);
    value += take * s.gain;
    budget -= take * s.cost;
  }
  return value;
}

}  // namespace drolab
