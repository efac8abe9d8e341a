#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "drolab/dro_family.hpp"
#include "drolab/erm.hpp"
#include "drolab/errors.hpp"
#include "drolab/loss_models.hpp"
#include "drolab/measures.hpp"

namespace drolab {

/// sigma^2(theta) = Var_mu[l(X, theta)].
inline double loss_variance(const LossModel& model, const EmpiricalMeasure& mu, const VecRef& theta) {
  return weighted_moments(mu.weights(), model.values(mu, theta)).variance;
}

/// First-order premium coefficient of the family at theta: sqrt(kappa) sigma(theta) for
/// smooth phi, E^{(p-1)/p}[||grad_x l||_*^{p/(p-1)}] for Wasserstein, 0 for total variation.
inline double rho(const LossModel& model, const EmpiricalMeasure& mu, const VecRef& theta, const Family& family) {
  if (family.is_phi()) {
    const PhiFunction& phi = family.phi_function();
    if (!phi.smooth()) return 0.0;
    return std::sqrt(phi.kappa() * loss_variance(model, mu, theta));
  }
  const Eigen::MatrixXd g = model.x_gradients(mu, theta);
  return w_expansion(mu.weights(), g, 1.0, family.wasserstein_spec());
}

struct SensitivityMap {
  Vec base_theta;
  Eigen::MatrixXd hessian;
  double sigma2 = 0.0;
  /// Covariance of grad_theta l(X, theta*).
  Eigen::MatrixXd Sigma;
  double rho = 0.0;
  Vec rho_gradient;
  bool hessian_positive_definite = false;
  bool degenerate_variance = false;
  std::vector<std::string> warnings;
};

/// Second-order and noise structure of the population problem at theta*.
inline SensitivityMap sensitivity(const LossModel& model, const EmpiricalMeasure& oracle_mu, const VecRef& theta_star,
                                  const std::optional<Family>& family = std::nullopt) {
  const Box& box = model.theta_box;
  const Eigen::Index m = theta_star.size();
  if (m != model.param_dim()) throw ConfigError("theta* has the wrong dimension");
  if (box.on_boundary(theta_star, 1e-10) || !box.contains(theta_star)) {
    throw DomainError("sensitivity needs theta* in the interior of the parameter box");
  }
  SensitivityMap s;
  s.base_theta = theta_star;
  const double h = 1e-4 * (1.0 + theta_star.norm());
  const auto f = [&](const Vec& th) { return model.risk(oracle_mu, th); };

  s.hessian.resize(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index k = j; k < m; ++k) {
      Vec pp = theta_star, pm = theta_star, mp = theta_star, mm = theta_star;
      pp[j] += h; pp[k] += h;
      pm[j] += h; pm[k] -= h;
      mp[j] -= h; mp[k] += h;
      mm[j] -= h; mm[k] -= h;
      const double v = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
      s.hessian(j, k) = v;
      s.hessian(k, j) = v;
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.hessian);
  s.hessian_positive_definite = eig.eigenvalues().minCoeff() > 1e-8 * (1.0 + eig.eigenvalues().cwiseAbs().maxCoeff());
  if (!s.hessian_positive_definite) s.warnings.push_back("hessian is not positive definite");

  s.sigma2 = loss_variance(model, oracle_mu, theta_star);
  s.degenerate_variance = !(s.sigma2 > 1e-14);
  if (s.degenerate_variance) s.warnings.push_back("loss variance vanishes at theta*");

  const Eigen::MatrixXd grads = model.theta_gradients(oracle_mu, theta_star);
  const Vec mean_grad = grads * oracle_mu.weights();
  const Eigen::MatrixXd centered = grads.colwise() - mean_grad;
  s.Sigma = centered * oracle_mu.weights().asDiagonal() * centered.transpose();
  s.Sigma = 0.5 * (s.Sigma + s.Sigma.transpose());

  s.rho_gradient = Vec::Zero(m);
  if (family) {
    s.rho = rho(model, oracle_mu, theta_star, *family);
    for (Eigen::Index j = 0; j < m; ++j) {
      Vec up = theta_star, dn = theta_star;
      up[j] += h;
      dn[j] -= h;
      s.rho_gradient[j] = (rho(model, oracle_mu, up, *family) - rho(model, oracle_mu, dn, *family)) / (2.0 * h);
    }
  }
  return s;
}

namespace detail {
inline SolveOptions tight_warm_start(const VecRef& theta0) {
  SolveOptions o;
  o.initial = theta0;
  o.starts = 1;
  o.minimizer.pg_tol = 1e-13;
  o.minimizer.max_iter = 20000;
  return o;
}
}  // namespace detail

/// theta_*(v) = argmin_theta E[l(X, theta)] + v^T theta.
inline ErmSolution theta_star_of_v(const LossModel& model, const EmpiricalMeasure& oracle_mu, const VecRef& v,
                                   const SolveOptions& options = {}) {
  return erm_solve(model.tilted(v), oracle_mu, options);
}

struct DirectionalDerivative {
  /// Quotient at the smaller step.
  Vec derivative;
  /// Quotient at the larger step, for the consistency check.
  Vec coarse;
  double discrepancy = 0.0;
  bool consistent = true;
};

/// theta_*'(0, w) by one-sided quotients [theta_*(t w) - theta_*(0)] / t of tilted problems.
inline DirectionalDerivative dir_derivative(const LossModel& model, const EmpiricalMeasure& oracle_mu, const VecRef& w,
                                            const std::optional<Vec>& theta_star = std::nullopt) {
  if (!w.allFinite()) throw DomainError("direction must be finite");
  const Eigen::Index m = model.param_dim();
  if (w.size() != m) throw DomainError("direction has the wrong dimension");
  DirectionalDerivative out;
  const double wmax = w.cwiseAbs().maxCoeff();
  if (wmax == 0.0) {
    out.derivative = Vec::Zero(m);
    out.coarse = Vec::Zero(m);
    return out;
  }
  const Vec base = theta_star ? *theta_star : erm_solve(model, oracle_mu, [] {
    SolveOptions o;
    o.minimizer.pg_tol = 1e-13;
    o.minimizer.max_iter = 20000;
    return o;
  }()).theta;
  const Vec theta0 = erm_solve(model, oracle_mu, detail::tight_warm_start(base)).theta;
  const double scale = (1.0 + theta0.norm()) / wmax;
  auto quotient = [&](double t) -> Vec {
    const Vec tilt = t * w;
    const ErmSolution s = theta_star_of_v(model, oracle_mu, tilt, detail::tight_warm_start(theta0));
    return (s.theta - theta0) / t;
  };
  out.coarse = quotient(1e-3 * scale);
  out.derivative = quotient(1e-4 * scale);
  if (!out.derivative.allFinite() || !out.coarse.allFinite()) {
    throw SolverError("directional quotients are not finite; the solution map may be non-differentiable");
  }
  const double denom = std::max(out.derivative.norm(), 1e-300);
  out.discrepancy = (out.derivative - out.coarse).norm() / denom;
  out.consistent = out.discrepancy <= 0.01 || (out.derivative - out.coarse).norm() < 1e-10;
  return out;
}

}  // namespace drolab
