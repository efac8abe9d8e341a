#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "drolab/box.hpp"
#include "drolab/box_minimizer.hpp"
#include "drolab/dro_family.hpp"
#include "drolab/errors.hpp"
#include "drolab/loss_models.hpp"
#include "drolab/measures.hpp"
#include "drolab/phi_dro.hpp"
#include "drolab/random.hpp"
#include "drolab/wasserstein_dro.hpp"

namespace drolab {

struct ErmSolution {
  Vec theta;
  double value = 0.0;
  /// Projected-gradient norm at theta (step size of the final poll for derivative-free solves).
  double gradient_norm = 0.0;
  /// Some coordinate of theta sits on the parameter box.
  bool projected = false;
  bool converged = false;
  /// The Danskin gradient was unavailable somewhere and compass search was used.
  bool derivative_free = false;
  std::vector<std::string> warnings;
};

struct SolveOptions {
  /// Box centre plus (starts - 1) seeded uniform draws in the box.
  int starts = 5;
  std::uint64_t start_seed = 0x5eedULL;
  BoxMinimizerOptions minimizer{};
  /// Optional warm start tried before the others.
  std::optional<Vec> initial;
};

namespace detail {

inline std::vector<Vec> start_points(const Box& box, const SolveOptions& options) {
  std::vector<Vec> starts;
  if (options.initial) starts.push_back(box.project(*options.initial));
  starts.push_back(box.center());
  Rng rng(options.start_seed);
  for (int k = 1; k < options.starts; ++k) {
    Vec s(box.dim());
    for (Eigen::Index j = 0; j < box.dim(); ++j) s[j] = rng.uniform(box.lower()[j], box.upper()[j]);
    starts.push_back(s);
  }
  return starts;
}

inline ErmSolution finish(const Box& box, const BoxMinimum& m, bool derivative_free) {
  ErmSolution out;
  out.theta = m.x;
  out.value = m.f;
  out.gradient_norm = m.pg_norm;
  out.converged = m.converged;
  out.projected = box.on_boundary(m.x, 1e-10);
  out.derivative_free = derivative_free;
  return out;
}

}  // namespace detail

/// min_{theta in box} E_mu[l(X, theta)] by projected gradient descent from several starts.
inline ErmSolution erm_solve(const LossModel& model, const EmpiricalMeasure& mu, const SolveOptions& options = {}) {
  const Box& box = model.theta_box;
  const auto f = [&](const VecRef& th) { return model.risk(mu, th); };
  const auto g = [&](const VecRef& th) { return model.risk_gradient(mu, th); };
  BoxMinimum best;
  for (const Vec& s : detail::start_points(box, options)) {
    const BoxMinimum m = projected_gradient_minimize(f, g, s, box, options.minimizer);
    if (m.f < best.f || (m.f == best.f && m.pg_norm < best.pg_norm)) best = m;
  }
  ErmSolution out = detail::finish(box, best, false);
  if (!out.converged) out.warnings.push_back("projected-gradient norm " + std::to_string(out.gradient_norm) + " above tolerance");
  return out;
}

/// Worst-case risk theta -> sup_Q E_Q[l(X, theta)] with its Danskin gradient.
class DroObjective {
 public:
  struct Evaluation {
    double value = 0.0;
    /// E_{Q*}[grad_theta l] when the worst case is unique.
    std::optional<Vec> gradient;
  };

  DroObjective(const LossModel& model, const EmpiricalMeasure& mu, Family family, double delta)
      : model_(model), mu_(mu), family_(std::move(family)), delta_(delta) {
    if (!(delta >= 0.0)) throw DomainError("delta must be nonnegative");
  }

  Evaluation evaluate(const VecRef& theta) const {
    if (cached_theta_ && cached_theta_->size() == theta.size() && *cached_theta_ == theta) return cached_;
    Evaluation e;
    if (family_.is_phi()) {
      const Vec y = model_.values(mu_, theta);
      const PhiDroResult r = phi_dro_value(mu_.weights(), y, delta_, family_.phi_function());
      e.value = r.value;
      if (r.density && r.unique) {
        e.gradient = model_.theta_gradients(mu_, theta) * mu_.weights().cwiseProduct(*r.density);
      }
    } else {
      const WDroResult r = w_dro_value(mu_, model_.field(theta), delta_, family_.wasserstein_spec());
      e.value = r.value;
      if (r.maximizers && (r.lambda_star > 0.0 || delta_ == 0.0) && r.inner_status != InnerStatus::ascent_multistart) {
        Vec g = Vec::Zero(theta.size());
        for (Eigen::Index i = 0; i < mu_.size(); ++i) g += mu_.weight(i) * model_.grad_theta(r.maximizers->col(i), theta);
        e.gradient = g;
      }
    }
    cached_theta_ = theta;
    cached_ = e;
    return e;
  }

  double value(const VecRef& theta) const { return evaluate(theta).value; }

  const Family& family() const { return family_; }
  double delta() const { return delta_; }

 private:
  const LossModel& model_;
  const EmpiricalMeasure& mu_;
  Family family_;
  double delta_;
  mutable std::optional<Vec> cached_theta_;
  mutable Evaluation cached_;
};

/// min_{theta in box} of the worst-case risk. Descent uses the Danskin gradient and
/// falls back to compass search wherever the worst case is not unique.
inline ErmSolution dro_solve(const LossModel& model, const EmpiricalMeasure& mu, const Family& family, double delta,
                             const SolveOptions& options = {}) {
  if (!(delta >= 0.0)) throw DomainError("delta must be nonnegative");
  if (delta == 0.0) return erm_solve(model, mu, options);
  const Box& box = model.theta_box;
  const DroObjective objective(model, mu, family, delta);
  struct NoGradient {};
  const auto f = [&](const VecRef& th) { return objective.value(th); };
  const auto g = [&](const VecRef& th) -> Vec {
    auto e = objective.evaluate(th);
    if (!e.gradient) throw NoGradient{};
    return *e.gradient;
  };
  BoxMinimum best;
  bool used_compass = false;
  for (const Vec& s : detail::start_points(box, options)) {
    BoxMinimum m;
    bool fallback = false;
    try {
      m = projected_gradient_minimize(f, g, s, box, options.minimizer);
      fallback = !m.converged;
    } catch (const NoGradient&) {
      fallback = true;
      m.x = box.project(s);
      m.f = f(m.x);
    }
    if (fallback) {
      // Polishes from wherever descent stopped; compass needs no gradient.
      const BoxMinimum c = compass_minimize(f, m.x, box);
      if (c.f <= m.f) {
        m = c;
        used_compass = true;
      }
    }
    if (m.f < best.f) best = m;
  }
  ErmSolution out = detail::finish(box, best, used_compass);
  if (!out.converged) out.warnings.push_back("dro solve stopped before the stationarity tolerance");
  return out;
}

}  // namespace drolab
