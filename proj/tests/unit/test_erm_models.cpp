#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "drolab/dro_family.hpp"
#include "drolab/erm.hpp"
#include "drolab/random.hpp"
#include "drolab/sensitivity.hpp"

using namespace drolab;

namespace {

EmpiricalMeasure line(std::initializer_list<double> v) { return EmpiricalMeasure::on_line(std::vector<double>(v)); }

// Dense grid followed by ternary refinement of a 1-D function on [lo, hi].
template <class F>
std::pair<double, double> grid_min_1d(F&& f, double lo, double hi, int steps = 20000) {
  double best_t = lo;
  double best = f(lo);
  for (int k = 1; k <= steps; ++k) {
    const double t = lo + (hi - lo) * k / steps;
    const double v = f(t);
    if (v < best) {
      best = v;
      best_t = t;
    }
  }
  double a = std::max(lo, best_t - (hi - lo) / steps);
  double b = std::min(hi, best_t + (hi - lo) / steps);
  for (int k = 0; k < 200; ++k) {
    const double m1 = a + (b - a) / 3.0;
    const double m2 = b - (b - a) / 3.0;
    if (f(m1) < f(m2)) {
      b = m2;
    } else {
      a = m1;
    }
  }
  const double t = 0.5 * (a + b);
  return f(t) < best ? std::make_pair(t, f(t)) : std::make_pair(best_t, best);
}

Vec one(double x) { return Vec::Constant(1, x); }

EmpiricalMeasure asymmetric_sample(Eigen::Index n, std::uint64_t seed) {
  const auto gen = DataGenerator::discrete((Eigen::MatrixXd(1, 3) << 0.0, 1.0, 3.0).finished(),
                                           (Vec(3) << 0.5, 0.3, 0.2).finished(), 3.0, seed);
  return draw(gen, n);
}

}  // namespace

TEST(LossModels, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  const LossModel models[] = {make_model("mean-squared", 2), make_model("linear", 3), make_model("logistic", 3)};
  for (const LossModel& m : models) {
    for (int k = 0; k < 20; ++k) {
      Vec x(m.data_dim);
      for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = rng.uniform(-2, 2);
      if (m.name == "logistic") x[x.size() - 1] = rng.uniform01() < 0.5 ? -1.0 : 1.0;
      Vec th(m.param_dim());
      for (Eigen::Index j = 0; j < th.size(); ++j) th[j] = rng.uniform(-2, 2);
      const Vec g = m.grad_theta(x, th);
      for (Eigen::Index j = 0; j < th.size(); ++j) {
        const double h = 1e-6;
        Vec up = th, dn = th;
        up[j] += h;
        dn[j] -= h;
        const double fd = (m.loss(x, up) - m.loss(x, dn)) / (2 * h);
        EXPECT_NEAR(g[j], fd, 1e-5 * std::max(1.0, std::abs(fd))) << m.name;
      }
      if (!m.smooth_in_x || m.name == "logistic") continue;
      const Vec gx = m.grad_x(x, th);
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = 1e-6;
        Vec up = x, dn = x;
        up[j] += h;
        dn[j] -= h;
        const double fd = (m.loss(up, th) - m.loss(dn, th)) / (2 * h);
        EXPECT_NEAR(gx[j], fd, 1e-5 * std::max(1.0, std::abs(fd))) << m.name;
      }
    }
  }
}

TEST(LossModels, LogisticFeatureGradient) {
  const LossModel m = make_model("logistic", 3);
  const Vec x = (Vec(3) << 0.4, -1.1, 1.0).finished();
  const Vec th = (Vec(2) << 0.7, 0.2).finished();
  const Vec gx = m.grad_x(x, th);
  for (Eigen::Index j = 0; j < 2; ++j) {
    Vec up = x, dn = x;
    up[j] += 1e-6;
    dn[j] -= 1e-6;
    EXPECT_NEAR(gx[j], (m.loss(up, th) - m.loss(dn, th)) / 2e-6, 1e-6);
  }
}

TEST(LossModels, UnknownModel) {
  EXPECT_THROW(make_model("hinge", 1), ConfigError);
  EXPECT_THROW(make_model("logistic", 1), ConfigError);
}

TEST(LossModels, LipschitzSurrogateFinite) {
  Rng rng(77);
  const EmpiricalMeasure mu = draw(DataGenerator::uniform_box(1, 1.0, 3), 200);
  const double l = lipschitz_surrogate(make_model("mean-squared", 1), mu, 2000, rng);
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_GT(l, 0.0);
  EXPECT_LE(l, 22.0);
}

TEST(ErmSolve, MeanSquaredSampleMean) {
  const ErmSolution s = erm_solve(make_model("mean-squared", 1), line({1, 2, 3, 4}));
  EXPECT_NEAR(s.theta[0], 2.5, 1e-9);
  EXPECT_NEAR(s.value, 1.25, 1e-12);
  EXPECT_FALSE(s.projected);
  EXPECT_TRUE(s.converged);
  EXPECT_LT(s.gradient_norm, 1e-8);
}

TEST(ErmSolve, LinearLossHitsBoundary) {
  const ErmSolution s = erm_solve(make_model("linear", 1, Box::cube(1, -1, 1)), line({0.2, 0.9, -0.3}));
  EXPECT_DOUBLE_EQ(s.theta[0], -1.0);
  EXPECT_TRUE(s.projected);
  EXPECT_LT(s.gradient_norm, 1e-8);
}

TEST(ErmSolve, LogisticSeparableHitsBoundary) {
  Eigen::MatrixXd pts(2, 2);
  pts << 1.0, -1.0, 1.0, -1.0;
  const EmpiricalMeasure mu = EmpiricalMeasure::uniform(pts);
  const LossModel m = make_model("logistic", 2, Box::cube(1, -2, 2));
  const ErmSolution s = erm_solve(m, mu);
  const auto [t, v] = grid_min_1d([&](double th) { return m.risk(mu, one(th)); }, -2.0, 2.0);
  EXPECT_NEAR(s.theta[0], t, 1e-9);
  EXPECT_NEAR(s.theta[0], 2.0, 1e-12);
  EXPECT_TRUE(s.projected);
  EXPECT_NEAR(s.value, v, 1e-12);
}

TEST(ErmSolve, MatchesGridOracle) {
  Rng rng(8);
  Eigen::MatrixXd pts(2, 40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    pts(0, i) = rng.uniform(-2, 2);
    pts(1, i) = (rng.uniform01() < 1.0 / (1.0 + std::exp(-1.5 * pts(0, i)))) ? 1.0 : -1.0;
  }
  const EmpiricalMeasure mu = EmpiricalMeasure::uniform(pts);
  const LossModel logistic = make_model("logistic", 2, Box::cube(1, -5, 5));
  const auto [t, v] = grid_min_1d([&](double th) { return logistic.risk(mu, one(th)); }, -5.0, 5.0);
  EXPECT_NEAR(erm_solve(logistic, mu).value, v, 1e-6);

  const LossModel ms = make_model("mean-squared", 2, Box::cube(2, -3, 3));
  double grid = 1e300;
  for (int i = 0; i <= 600; ++i)
    for (int j = 0; j <= 600; ++j) {
      const Vec th = (Vec(2) << -3 + 0.01 * i, -3 + 0.01 * j).finished();
      grid = std::min(grid, ms.risk(mu, th));
    }
  const double solved = erm_solve(ms, mu).value;
  EXPECT_LE(solved, grid + 1e-12);
  EXPECT_NEAR(solved, grid, 1e-4);
  const Vec mean = pts.rowwise().mean();
  EXPECT_NEAR(solved, ms.risk(mu, mean), 1e-12);
}

TEST(ErmSolve, NonFiniteLossReportsLocation) {
  LossModel m;
  m.name = "reciprocal";
  m.data_dim = 1;
  m.theta_box = Box::cube(1, -1, 1);
  m.loss = [](const VecRef& x, const VecRef& th) { return th[0] * th[0] + 1.0 / x[0]; };
  m.grad_theta = [](const VecRef&, const VecRef& th) -> Vec { return 2.0 * th; };
  try {
    erm_solve(m, line({0.0, 1.0}));
    FAIL() << "expected a solver error";
  } catch (const SolverError& e) {
    EXPECT_NE(std::string(e.what()).find("x = [0]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("theta = ["), std::string::npos);
  }
}

TEST(DroSolve, ZeroRadiusEqualsErm) {
  const EmpiricalMeasure mu = asymmetric_sample(60, 1);
  const LossModel m = make_model("mean-squared", 1);
  const ErmSolution a = erm_solve(m, mu);
  const ErmSolution b = dro_solve(m, mu, Family::phi(builtin_phi("kl")), 0.0);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.value, b.value);
}

TEST(DroSolve, ChiSquareMatchesVariancePenalizedGrid) {
  const EmpiricalMeasure mu = asymmetric_sample(50, 2);
  const LossModel m = make_model("mean-squared", 1);
  const double d = 0.01;
  const auto objective = [&](double th) {
    const Moments mm = weighted_moments(mu.weights(), m.values(mu, one(th)));
    return mm.mean + std::sqrt(d * mm.variance);
  };
  const auto [t, v] = grid_min_1d(objective, -1.0, 3.0, 40000);
  const ErmSolution s = dro_solve(m, mu, Family::phi(builtin_phi("chi2")), d);
  EXPECT_NEAR(s.theta[0], t, 1e-4);
  EXPECT_NEAR(s.value, v, 1e-9);
  // Right skew: d/dtheta Var (x - theta)^2 = -4 mu_3 < 0, so the robust fit sits above the mean.
  const double mean = mu.points().mean();
  EXPECT_GT(s.theta[0], mean);
}

TEST(DroSolve, TotalVariationKinkTerminates) {
  // A sample whose worst-case risk has a kink at its minimizer; descent stalls there.
  const EmpiricalMeasure mu = draw(DataGenerator::uniform_box(1, 1.0, 0).with_seed(derive_seed(1, 19)), 5000);
  const LossModel m = make_model("mean-squared", 1);
  const double d = 1.0 / 5000.0;
  const ErmSolution s = dro_solve(m, mu, Family::phi(builtin_phi("tv")), d);
  const auto objective = [&](double th) { return tv_dro_value(mu.weights(), m.values(mu, one(th)), d); };
  const auto [t, v] = grid_min_1d(objective, -0.01, 0.01, 200);
  EXPECT_TRUE(s.converged);
  EXPECT_NEAR(s.value, v, 1e-9);
  EXPECT_NEAR(s.theta[0], t, 1e-4);
}

TEST(DroSolve, WassersteinLinearLoss) {
  const Family w = Family::wasserstein(WassersteinSpec(2.0, 2.0));
  const LossModel m = make_model("linear", 1, Box::cube(1, -1, 1));
  const double d = 0.01;
  for (double shift : {0.5, 0.05}) {
    const EmpiricalMeasure mu = line({shift - 0.2, shift, shift + 0.2});
    const auto [t, v] = grid_min_1d([&](double th) { return th * shift + std::sqrt(d) * std::abs(th); }, -1.0, 1.0);
    const ErmSolution s = dro_solve(m, mu, w, d);
    EXPECT_NEAR(s.value, v, 1e-7) << shift;
    EXPECT_NEAR(s.theta[0], t, 1e-4) << shift;
  }
}

TEST(DroSolve, ValueConsistentWithDroModules) {
  const EmpiricalMeasure mu = asymmetric_sample(40, 3);
  const LossModel m = make_model("mean-squared", 1);
  for (const char* name : {"kl", "chi2", "tv"}) {
    const Family f = Family::phi(builtin_phi(name));
    const ErmSolution s = dro_solve(m, mu, f, 0.05);
    EXPECT_NEAR(s.value, phi_dro_value(mu.weights(), m.values(mu, s.theta), 0.05, f.phi_function()).value, 1e-8) << name;
  }
  const Family w = Family::wasserstein(WassersteinSpec(2.0, 2.0));
  const ErmSolution s = dro_solve(m, mu, w, 0.05);
  EXPECT_NEAR(s.value, w_dro_value(mu, m.field(s.theta), 0.05, w.wasserstein_spec()).value, 1e-8);
}

TEST(Family, Gamma) {
  EXPECT_EQ(Family::phi(builtin_phi("kl")).gamma(), 0.5);
  EXPECT_EQ(Family::phi(builtin_phi("chi2")).gamma(), 0.5);
  EXPECT_EQ(Family::phi(builtin_phi("tv")).gamma(), 1.0);
  EXPECT_NEAR(Family::wasserstein(WassersteinSpec(3.0, 2.0)).gamma(), 1.0 / 3.0, 1e-15);
}

TEST(Sensitivity, MeanSquaredTwoPoint) {
  const SensitivityMap s = sensitivity(make_model("mean-squared", 1), line({0.0, 1.0}), one(0.5));
  EXPECT_NEAR(s.hessian(0, 0), 2.0, 1e-6);
  EXPECT_NEAR(s.Sigma(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(s.sigma2, 0.0, 1e-15);
  EXPECT_TRUE(s.degenerate_variance);
  EXPECT_TRUE(s.hessian_positive_definite);
}

TEST(Sensitivity, LinearLossFlagsHessian) {
  const SensitivityMap s = sensitivity(make_model("linear", 2), EmpiricalMeasure::uniform(Eigen::MatrixXd::Identity(2, 2)),
                                       Vec::Zero(2));
  EXPECT_NEAR(s.hessian.norm(), 0.0, 1e-6);
  EXPECT_FALSE(s.hessian_positive_definite);
}

TEST(Sensitivity, RejectsBoundary) {
  const LossModel m = make_model("mean-squared", 1, Box::cube(1, -1, 1));
  EXPECT_THROW(sensitivity(m, line({0.0, 1.0}), one(1.0)), DomainError);
}

TEST(Sensitivity, SymmetricHessianAndPsdSigma) {
  Rng rng(44);
  Eigen::MatrixXd pts(3, 30);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.uniform(-1, 1);
  pts.row(2) = pts.row(2).array().sign();
  const EmpiricalMeasure mu = EmpiricalMeasure::uniform(pts);
  const LossModel m = make_model("logistic", 3);
  const ErmSolution s = erm_solve(m, mu);
  const SensitivityMap sm = sensitivity(m, mu, s.theta, Family::phi(builtin_phi("chi2")));
  EXPECT_LT((sm.hessian - sm.hessian.transpose()).norm(), 1e-8);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sm.Sigma);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
  EXPECT_NEAR(sm.rho, std::sqrt(loss_variance(m, mu, s.theta)), 1e-14);
}

TEST(Sensitivity, RhoByFamily) {
  const EmpiricalMeasure mu = asymmetric_sample(30, 9);
  const LossModel m = make_model("mean-squared", 1);
  const Vec th = one(0.7);
  const double var = loss_variance(m, mu, th);
  EXPECT_NEAR(rho(m, mu, th, Family::phi(builtin_phi("kl"))), std::sqrt(2.0 * var), 1e-14);
  EXPECT_EQ(rho(m, mu, th, Family::phi(builtin_phi("tv"))), 0.0);
  const double second = mu.weights().dot((mu.points().row(0).transpose().array() - 0.7).square().matrix());
  EXPECT_NEAR(rho(m, mu, th, Family::wasserstein(WassersteinSpec(2.0, 2.0))), 2.0 * std::sqrt(second), 1e-12);
}

TEST(ThetaStarOfV, MeanSquared) {
  const EmpiricalMeasure mu = line({0.0, 1.0, 3.0});
  const LossModel m = make_model("mean-squared", 1, Box::cube(1, -2, 2));
  const double mbar = 4.0 / 3.0;
  EXPECT_NEAR(theta_star_of_v(m, mu, one(0.0)).theta[0], mbar, 1e-9);
  for (double v : {-0.1, 0.05, 0.3}) EXPECT_NEAR(theta_star_of_v(m, mu, one(v)).theta[0], mbar - v / 2.0, 1e-9);
  const ErmSolution clipped = theta_star_of_v(m, mu, one(-3.0));
  EXPECT_DOUBLE_EQ(clipped.theta[0], 2.0);
  EXPECT_TRUE(clipped.projected);
}

TEST(DirDerivative, MeanSquaredOneDimension) {
  const EmpiricalMeasure mu = line({0.0, 1.0, 3.0});
  const LossModel m = make_model("mean-squared", 1);
  const DirectionalDerivative d = dir_derivative(m, mu, one(1.0));
  EXPECT_NEAR(d.derivative[0], -0.5, 1e-6);
  EXPECT_TRUE(d.consistent);
  EXPECT_EQ(dir_derivative(m, mu, one(0.0)).derivative[0], 0.0);
  EXPECT_THROW(dir_derivative(m, mu, one(std::nan(""))), DomainError);
}

TEST(DirDerivative, MatchesInverseHessianAndIsHomogeneous) {
  Rng rng(13);
  Eigen::MatrixXd pts(3, 40);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.uniform(-1, 1);
  pts.row(2) = pts.row(2).array().sign();
  const EmpiricalMeasure mu = EmpiricalMeasure::uniform(pts);
  const LossModel m = make_model("logistic", 3);
  SolveOptions tight;
  tight.minimizer.pg_tol = 1e-13;
  tight.minimizer.max_iter = 20000;
  const Vec th = erm_solve(m, mu, tight).theta;
  const SensitivityMap s = sensitivity(m, mu, th);
  for (int k = 0; k < 5; ++k) {
    const Vec w = (Vec(2) << rng.uniform(-1, 1), rng.uniform(-1, 1)).finished();
    const Vec expected = -s.hessian.inverse() * w;
    const DirectionalDerivative d = dir_derivative(m, mu, w, th);
    EXPECT_LT((d.derivative - expected).norm() / expected.norm(), 1e-3);
    const Vec d3 = dir_derivative(m, mu, 3.0 * w, th).derivative;
    EXPECT_LT((d3 - 3.0 * d.derivative).norm() / (3.0 * d.derivative.norm()), 1e-2);
  }
}
