#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "drolab/dro_family.hpp"
#include "drolab/erm.hpp"
#include "drolab/errors.hpp"
#include "drolab/ks_test.hpp"
#include "drolab/loss_models.hpp"
#include "drolab/measures.hpp"
#include "drolab/random.hpp"
#include "drolab/sensitivity.hpp"

namespace drolab {

enum class Regime { sub_critical, critical, super_critical };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::sub_critical: return "sub-critical";
    case Regime::critical: return "critical";
    case Regime::super_critical: return "super-critical";
  }
  return "unknown";
}

/// What the raw error is multiplied by: n^exponent or delta_n^exponent.
enum class ScalingBase { n, delta };

inline std::string to_string(ScalingBase b) { return b == ScalingBase::n ? "n" : "delta"; }

/// delta_n = beta n^{-r} with family exponent gamma. beta = 0 is the plain ERM schedule.
struct RegimeSchedule {
  double beta = 1.0;
  double r = 1.0;
  double gamma = 0.5;

  RegimeSchedule() = default;
  RegimeSchedule(double beta_, double r_, double gamma_) : beta(beta_), r(r_), gamma(gamma_) { validate(); }

  void validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("schedule beta must be nonnegative and finite");
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("schedule rate exponent r must be positive");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("schedule gamma must be in (0, 1]");
  }

  double delta(double n) const { return beta * std::pow(n, -r); }

  Regime regime() const {
    if (beta == 0.0) return Regime::sub_critical;
    const double rg = r * gamma;
    if (std::abs(rg - 0.5) <= 1e-12) return Regime::critical;
    return rg > 0.5 ? Regime::sub_critical : Regime::super_critical;
  }
};

struct Classification {
  Regime regime = Regime::sub_critical;
  ScalingBase base = ScalingBase::n;
  double exponent = 0.5;

  /// Multiplier for a raw error at sample size n.
  double factor(double n, double delta) const {
    return base == ScalingBase::n ? std::pow(n, exponent) : std::pow(delta, exponent);
  }
};

/// Regime plus error scaling: n^{1/2} for sub-critical and critical, delta_n^{-gamma} otherwise.
inline Classification classify(const RegimeSchedule& schedule) {
  schedule.validate();
  Classification c;
  c.regime = schedule.regime();
  if (c.regime == Regime::super_critical) {
    c.base = ScalingBase::delta;
    c.exponent = -schedule.gamma;
  }
  return c;
}

/// Distribution of a scaled scalar error.
struct LimitLaw {
  enum class Kind { normal, inf_of_normals, point_mass };

  Kind kind = Kind::normal;
  double mean = 0.0;
  double variance = 0.0;
  std::vector<double> means;
  Eigen::MatrixXd covariance;
  double point = 0.0;
  ScalingBase base = ScalingBase::n;
  double scaling_exponent = 0.5;

  static std::string kind_name(Kind k) {
    switch (k) {
      case Kind::normal: return "normal";
      case Kind::inf_of_normals: return "inf-of-correlated-normals";
      case Kind::point_mass: return "point-mass";
    }
    return "unknown";
  }

  double sample(Rng& rng) const {
    switch (kind) {
      case Kind::normal: return mean + std::sqrt(variance) * rng.normal();
      case Kind::point_mass: return point;
      case Kind::inf_of_normals: {
        const Eigen::Index k = covariance.rows();
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance);
        const Vec root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        Vec z(k);
        for (Eigen::Index j = 0; j < k; ++j) z[j] = rng.normal();
        const Vec g = eig.eigenvectors() * root.asDiagonal() * z;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < k; ++j) best = std::min(best, means[static_cast<std::size_t>(j)] + g[j]);
        return best;
      }
    }
    return 0.0;
  }
};

namespace detail {
inline double regime_bias(Regime regime, const RegimeSchedule& schedule, double rho_value) {
  switch (regime) {
    case Regime::sub_critical: return 0.0;
    case Regime::critical: return std::pow(schedule.beta, schedule.gamma) * rho_value;
    case Regime::super_critical: return rho_value;
  }
  return 0.0;
}
}  // namespace detail

/// Limit of the scaled DRO value error for a finite optimal set theta_stars.
///
/// sub-critical: N(0, sigma^2); critical: N(beta^gamma rho, sigma^2); super-critical:
/// point mass at inf rho (with delta_n^{-gamma} scaling). Several optimal points give the
/// infimum of correlated normals with covariance Cov(l(X, theta_a), l(X, theta_b)).
inline LimitLaw value_limit_law(const LossModel& model, const EmpiricalMeasure& oracle_mu, const Family& family,
                                const RegimeSchedule& schedule, const std::vector<Vec>& theta_stars) {
  if (theta_stars.empty()) throw DomainError("the optimal set must be nonempty");
  const Classification cls = classify(schedule);
  const auto k = static_cast<Eigen::Index>(theta_stars.size());
  Eigen::MatrixXd losses(oracle_mu.size(), k);
  std::vector<double> rhos;
  for (Eigen::Index a = 0; a < k; ++a) {
    const Vec& th = theta_stars[static_cast<std::size_t>(a)];
    losses.col(a) = model.values(oracle_mu, th);
    const double s2 = weighted_moments(oracle_mu.weights(), losses.col(a)).variance;
    if (family.is_phi() && family.phi_function().smooth() && !(s2 > 1e-14)) {
      throw DomainError("loss variance vanishes at an optimal point; the phi limit theory needs sigma^2 > 0");
    }
    rhos.push_back(schedule.beta == 0.0 ? 0.0 : rho(model, oracle_mu, th, family));
  }
  const Vec mean = losses.transpose() * oracle_mu.weights();
  const Eigen::MatrixXd centered = losses.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * oracle_mu.weights().asDiagonal() * centered;
  cov = 0.5 * (cov + cov.transpose());

  LimitLaw law;
  law.base = cls.base;
  law.scaling_exponent = cls.exponent;
  if (cls.regime == Regime::super_critical) {
    law.kind = LimitLaw::Kind::point_mass;
    law.point = *std::min_element(rhos.begin(), rhos.end());
    law.mean = law.point;
    return law;
  }
  if (k == 1) {
    law.kind = LimitLaw::Kind::normal;
    law.mean = detail::regime_bias(cls.regime, schedule, rhos[0]);
    law.variance = cov(0, 0);
    return law;
  }
  law.kind = LimitLaw::Kind::inf_of_normals;
  for (double r : rhos) law.means.push_back(detail::regime_bias(cls.regime, schedule, r));
  law.covariance = cov;
  return law;
}

/// Law of the scaled solution error, theta_*'(0, Z + b) with Z ~ N(0, Sigma).
struct SolutionLimitLaw {
  enum class Kind { normal, point_mass };
  Kind kind = Kind::normal;
  /// Monte Carlo push-forward moments (exact image for point masses).
  Vec mean;
  Eigen::MatrixXd covariance;
  Vec bias;
  /// theta_*'(0, .) on the basis vectors, as columns.
  Eigen::MatrixXd jacobian;
  bool jacobian_linear = false;
  /// H^{-1} Sigma H^{-1}, and the mean under both sign conventions -H^{-1} b and +H^{-1} b.
  Eigen::MatrixXd analytic_covariance;
  Vec analytic_mean_minus;
  Vec analytic_mean_plus;
  ScalingBase base = ScalingBase::n;
  double scaling_exponent = 0.5;
  int draws = 0;
};

inline SolutionLimitLaw solution_limit_law(const LossModel& model, const EmpiricalMeasure& oracle_mu,
                                           const SensitivityMap& sens, const RegimeSchedule& schedule,
                                           int draws = 10000, std::uint64_t seed = 0x9e3779b9ULL) {
  if (!sens.hessian_positive_definite) throw DomainError("solution limit law needs a positive definite hessian");
  const Classification cls = classify(schedule);
  const Eigen::Index m = sens.base_theta.size();
  SolutionLimitLaw law;
  law.base = cls.base;
  law.scaling_exponent = cls.exponent;
  switch (cls.regime) {
    case Regime::sub_critical: law.bias = Vec::Zero(m); break;
    case Regime::critical: law.bias = std::pow(schedule.beta, schedule.gamma) * sens.rho_gradient; break;
    case Regime::super_critical: law.bias = sens.rho_gradient; break;
  }
  const Eigen::MatrixXd hinv = sens.hessian.inverse();
  law.analytic_covariance = hinv * sens.Sigma * hinv.transpose();
  law.analytic_mean_minus = -hinv * law.bias;
  law.analytic_mean_plus = hinv * law.bias;

  const auto deriv = [&](const Vec& w) { return dir_derivative(model, oracle_mu, w, sens.base_theta).derivative; };
  law.jacobian.resize(m, m);
  for (Eigen::Index j = 0; j < m; ++j) law.jacobian.col(j) = deriv(Vec::Unit(m, j));
  // Linearity check on the negated basis and one mixed direction.
  bool linear = true;
  const double jn = std::max(law.jacobian.norm(), 1e-300);
  for (Eigen::Index j = 0; j < m && linear; ++j) {
    linear = (deriv(-Vec::Unit(m, j)) + law.jacobian.col(j)).norm() <= 1e-3 * jn;
  }
  if (linear) {
    Vec mixed = Vec::LinSpaced(m, 1.0, 0.5);
    linear = (deriv(mixed) - law.jacobian * mixed).norm() <= 1e-3 * jn * mixed.norm();
  }
  law.jacobian_linear = linear;
  const auto push = [&](const Vec& w) -> Vec { return linear ? Vec(law.jacobian * w) : deriv(w); };

  if (cls.regime == Regime::super_critical) {
    law.kind = SolutionLimitLaw::Kind::point_mass;
    law.mean = push(law.bias);
    law.covariance = Eigen::MatrixXd::Zero(m, m);
    law.draws = 0;
    return law;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sens.Sigma);
  const Eigen::MatrixXd root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Rng rng(seed);
  Eigen::MatrixXd samples(m, draws);
  for (int k = 0; k < draws; ++k) {
    Vec z(m);
    for (Eigen::Index j = 0; j < m; ++j) z[j] = rng.normal();
    samples.col(k) = push(root * z + law.bias);
  }
  law.kind = SolutionLimitLaw::Kind::normal;
  law.draws = draws;
  law.mean = samples.rowwise().mean();
  const Eigen::MatrixXd c = samples.colwise() - law.mean;
  law.covariance = c * c.transpose() / std::max(1, draws - 1);
  return law;
}

/// Everything needed to reproduce one Monte Carlo study.
struct ExperimentConfig {
  DataGenerator generator;
  std::string model = "mean-squared";
  std::optional<Box> theta_box;
  Family family = Family::phi(PhiFunction(PhiKind::chi_square));
  double beta = 1.0;
  double r = 1.0;
  Eigen::Index n = 1000;
  int replications = 100;
  std::uint64_t master_seed = 0;
  int jobs = 1;
  int ks_draws = 10000;
  bool solution = true;
  int push_forward_draws = 10000;
  /// Optional finite optimal set; defaults to the single oracle minimizer.
  std::vector<Vec> theta_star_set;

  RegimeSchedule schedule() const { return RegimeSchedule(beta, r, family.gamma()); }
};

struct ReplicationRecord {
  int index = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  bool converged = true;
  double dro_value = 0.0;
  double erm_value = 0.0;
  /// scaling * (dro value - population value).
  double value_error = 0.0;
  /// scaling * (dro value - erm value).
  double paired_error = 0.0;
  /// n^{1/2} (erm value - population value).
  double erm_error = 0.0;
  /// scaling * (dro solution - theta*).
  Vec solution_error;
  /// delta_n^{-1/2} scaling of the same error, for Wasserstein super-critical runs.
  std::optional<Vec> solution_error_alt;
};

struct SampleSummary {
  double mean = 0.0;
  double sd = 0.0;
  double p95_abs = 0.0;
  double max_abs = 0.0;
};

inline SampleSummary summarize(const std::vector<double>& v) {
  SampleSummary s;
  if (v.empty()) return s;
  const double n = static_cast<double>(v.size());
  for (double x : v) s.mean += x;
  s.mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::vector<double> a(v.size());
  std::transform(v.begin(), v.end(), a.begin(), [](double x) { return std::abs(x); });
  std::sort(a.begin(), a.end());
  s.max_abs = a.back();
  // Linear interpolation between order statistics.
  const double pos = 0.95 * (n - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, a.size() - 1);
  s.p95_abs = a[lo] + (pos - static_cast<double>(lo)) * (a[hi] - a[lo]);
  return s;
}

struct ExperimentReport {
  ExperimentConfig config;
  Regime regime = Regime::sub_critical;
  ScalingBase scaling_base = ScalingBase::n;
  double scaling_exponent = 0.5;
  double scaling = 1.0;
  double delta_n = 0.0;

  double population_value = 0.0;
  Vec theta_star;
  double sigma2 = 0.0;
  double rho = 0.0;
  Vec rho_gradient;

  std::vector<ReplicationRecord> replications;
  int failures = 0;
  int nonconverged = 0;
  bool valid = true;

  LimitLaw value_law;
  SampleSummary value_summary;
  SampleSummary paired_summary;
  SampleSummary erm_summary;
  std::optional<KsResult> ks;
  double mean_z = 0.0;
  double variance_ratio = 0.0;
  double variance_z = 0.0;

  std::optional<SolutionLimitLaw> solution_law;
  Vec solution_mean;
  Vec solution_variance;
  Vec solution_mean_z;
  Vec solution_variance_ratio;

  std::vector<std::string> warnings;
  /// Not part of the serialized report.
  double wall_time_seconds = 0.0;

  std::vector<double> value_errors() const { return collect(&ReplicationRecord::value_error); }
  std::vector<double> paired_errors() const { return collect(&ReplicationRecord::paired_error); }
  std::vector<double> erm_errors() const { return collect(&ReplicationRecord::erm_error); }

 private:
  std::vector<double> collect(double ReplicationRecord::*field) const {
    std::vector<double> out;
    for (const auto& r : replications)
      if (!r.failed) out.push_back(r.*field);
    return out;
  }
};

/// Replicated draws, ERM and DRO solves, and comparison with the limit laws.
inline ExperimentReport run_experiment(const ExperimentConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  if (config.replications < 1) throw ConfigError("replication count R must be at least 1");
  if (config.n < 1) throw ConfigError("sample size n must be at least 1");
  if (config.jobs < 1) throw ConfigError("jobs must be at least 1");
  config.generator.validate();

  ExperimentReport rep;
  rep.config = config;
  const RegimeSchedule schedule = config.schedule();
  const Classification cls = classify(schedule);
  rep.regime = cls.regime;
  rep.scaling_base = cls.base;
  rep.scaling_exponent = cls.exponent;
  const double n = static_cast<double>(config.n);
  rep.delta_n = schedule.delta(n);
  rep.scaling = cls.factor(n, rep.delta_n);
  if (config.replications < 100) rep.warnings.push_back("fewer than 100 replications; tests have little power");

  const LossModel model = make_model(config.model, config.generator.dim, config.theta_box);
  const EmpiricalMeasure population = population_measure(config.generator);
  SolveOptions tight;
  tight.minimizer.pg_tol = 1e-13;
  tight.minimizer.max_iter = 20000;
  const ErmSolution truth = erm_solve(model, population, tight);
  rep.population_value = truth.value;
  rep.theta_star = truth.theta;
  rep.sigma2 = loss_variance(model, population, truth.theta);
  rep.rho = schedule.beta == 0.0 ? 0.0 : rho(model, population, truth.theta, config.family);
  std::vector<Vec> optimal_set = config.theta_star_set.empty() ? std::vector<Vec>{truth.theta} : config.theta_star_set;

  const bool alt_scaling = config.family.is_wasserstein() && cls.regime == Regime::super_critical &&
                           config.family.wasserstein_spec().p() != 2.0;
  const double alt_factor = alt_scaling ? std::pow(rep.delta_n, -0.5) : 1.0;

  rep.replications.resize(static_cast<std::size_t>(config.replications));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int idx = next.fetch_add(1); idx < config.replications; idx = next.fetch_add(1)) {
      ReplicationRecord& rec = rep.replications[static_cast<std::size_t>(idx)];
      rec.index = idx;
      rec.seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(idx));
      try {
        const EmpiricalMeasure sample = draw(config.generator.with_seed(rec.seed), config.n);
        const ErmSolution erm = erm_solve(model, sample);
        const ErmSolution dro = rep.delta_n == 0.0 ? erm : dro_solve(model, sample, config.family, rep.delta_n);
        rec.erm_value = erm.value;
        rec.dro_value = dro.value;
        rec.converged = erm.converged && dro.converged;
        rec.value_error = rep.scaling * (dro.value - rep.population_value);
        rec.paired_error = rep.scaling * (dro.value - erm.value);
        rec.erm_error = std::sqrt(n) * (erm.value - rep.population_value);
        rec.solution_error = rep.scaling * (dro.theta - rep.theta_star);
        if (alt_scaling) rec.solution_error_alt = alt_factor * (dro.theta - rep.theta_star);
        if (!std::isfinite(rec.value_error) || !rec.solution_error.allFinite()) {
          rec.failed = true;
          rec.error = "non-finite error";
        }
      } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
      }
    }
  };
  const int jobs = std::min(config.jobs, config.replications);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& r : rep.replications) {
    if (r.failed) ++rep.failures;
    else if (!r.converged) ++rep.nonconverged;
  }
  rep.valid = rep.failures <= 0.05 * config.replications;
  if (!rep.valid) rep.warnings.push_back("more than 5% of replications failed");

  const std::vector<double> errors = rep.value_errors();
  rep.value_summary = summarize(errors);
  rep.paired_summary = summarize(rep.paired_errors());
  rep.erm_summary = summarize(rep.erm_errors());

  try {
    rep.value_law = value_limit_law(model, population, config.family, schedule, optimal_set);
  } catch (const DomainError& e) {
    rep.warnings.push_back(std::string("no value limit law: ") + e.what());
  }
  const double count = static_cast<double>(errors.size());
  if (!errors.empty()) {
    double law_mean = rep.value_law.mean;
    double law_var = rep.value_law.variance;
    if (rep.value_law.kind == LimitLaw::Kind::inf_of_normals) {
      Rng mc(derive_seed(config.master_seed, 0x1A57ULL));
      std::vector<double> s(20000);
      for (double& v : s) v = rep.value_law.sample(mc);
      const SampleSummary m = summarize(s);
      law_mean = m.mean;
      law_var = m.sd * m.sd;
    }
    const double sd = rep.value_summary.sd;
    rep.mean_z = sd > 0.0 ? (rep.value_summary.mean - law_mean) / (sd / std::sqrt(count)) : 0.0;
    if (law_var > 0.0) {
      rep.variance_ratio = sd * sd / law_var;
      rep.variance_z = count > 1.0 ? (sd * sd - law_var) / (law_var * std::sqrt(2.0 / (count - 1.0))) : 0.0;
    }
    if (rep.value_law.kind != LimitLaw::Kind::point_mass && errors.size() >= 50 && config.ks_draws >= 50) {
      Rng ks_rng(derive_seed(config.master_seed, 0x5EEDC0DEULL));
      rep.ks = ks_test(errors, [&](Rng& g) { return rep.value_law.sample(g); }, config.ks_draws, ks_rng);
    }
  }

  if (config.solution && optimal_set.size() == 1 && !errors.empty()) {
    try {
      const SensitivityMap sens = sensitivity(model, population, rep.theta_star, config.family);
      rep.rho_gradient = sens.rho_gradient;
      if (schedule.beta == 0.0) rep.rho_gradient.setZero();
      SensitivityMap used = sens;
      used.rho_gradient = rep.rho_gradient;
      rep.solution_law = solution_limit_law(model, population, used, schedule, config.push_forward_draws,
                                            derive_seed(config.master_seed, 0x9F0DULL));
    } catch (const std::exception& e) {
      rep.warnings.push_back(std::string("no solution limit law: ") + e.what());
    }
    const Eigen::Index m = rep.theta_star.size();
    Eigen::MatrixXd sol(m, static_cast<Eigen::Index>(errors.size()));
    Eigen::Index col = 0;
    for (const auto& r : rep.replications)
      if (!r.failed) sol.col(col++) = r.solution_error;
    rep.solution_mean = sol.rowwise().mean();
    const Eigen::MatrixXd c = sol.colwise() - rep.solution_mean;
    rep.solution_variance = c.rowwise().squaredNorm() / std::max(1.0, count - 1.0);
    if (rep.solution_law) {
      rep.solution_mean_z.resize(m);
      rep.solution_variance_ratio.resize(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        const double se = std::sqrt(rep.solution_variance[j] / count);
        rep.solution_mean_z[j] = se > 0.0 ? (rep.solution_mean[j] - rep.solution_law->mean[j]) / se : 0.0;
        const double ref = rep.solution_law->analytic_covariance(j, j);
        rep.solution_variance_ratio[j] = ref > 0.0 ? rep.solution_variance[j] / ref : 0.0;
      }
    }
  }

  rep.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rep;
}

}  // namespace drolab
