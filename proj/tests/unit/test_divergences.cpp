#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "drolab/divergences.hpp"
#include "drolab/random.hpp"

using namespace drolab;

namespace {
std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * i / (n - 1));
  return g;
}

// Independent scan of sup_t { s t - phi(t) } over t in [0, 40] with step 1e-4.
double brute_conjugate(const PhiFunction& phi, double s) {
  double best = -1e300;
  for (int k = 0; k <= 400000; ++k) {
    const double t = 1e-4 * k;
    best = std::max(best, s * t - phi.phi(t).as_double());
  }
  return best;
}
}  // namespace

TEST(ExtendedReal, Saturates) {
  const ExtendedReal inf = ExtendedReal::infinity();
  EXPECT_TRUE((inf + 3.0).is_infinite());
  EXPECT_TRUE((ExtendedReal(-1e300) + inf).is_infinite());
  EXPECT_EQ(scale(0.0, inf), ExtendedReal(0.0));
  EXPECT_TRUE(scale(2.0, inf).is_infinite());
  EXPECT_TRUE(ExtendedReal(5.0) < inf);
  EXPECT_FALSE(inf < inf);
  EXPECT_THROW(inf.value(), DomainError);
  EXPECT_THROW(scale(-1.0, ExtendedReal(1.0)), DomainError);
}

TEST(Builtin, Kappa) {
  EXPECT_EQ(builtin_phi("kl").kappa(), 2.0);
  EXPECT_EQ(builtin_phi("chi2").kappa(), 1.0);
  EXPECT_EQ(builtin_phi("chi-square").kappa(), 1.0);
  const PhiFunction tv = builtin_phi("tv");
  EXPECT_FALSE(tv.smooth());
  EXPECT_THROW(tv.kappa(), DomainError);
  EXPECT_THROW(builtin_phi("hellinger"), ConfigError);
}

TEST(Builtin, SmoothIffCurvatureFinitePositive) {
  for (const char* name : {"kl", "chi2", "tv"}) {
    const PhiFunction phi = builtin_phi(name);
    const ExtendedReal c = phi.second_derivative_at_one();
    const bool expected = c.is_finite() && c.value() > 0.0;
    EXPECT_EQ(phi.smooth(), expected) << name;
    if (expected) EXPECT_DOUBLE_EQ(phi.kappa(), 2.0 / c.value());
  }
}

TEST(Builtin, PhiBasics) {
  Rng rng(3);
  for (const char* name : {"kl", "chi2", "tv"}) {
    const PhiFunction phi = builtin_phi(name);
    EXPECT_EQ(phi.phi(1.0), ExtendedReal(0.0)) << name;
    EXPECT_TRUE(phi.phi(-0.1).is_infinite()) << name;
    for (int k = 0; k < 200; ++k) {
      const double a = rng.uniform(0.0, 5.0);
      const double b = rng.uniform(0.0, 5.0);
      const double l = rng.uniform01();
      const double mid = phi.phi(l * a + (1 - l) * b).value();
      EXPECT_LE(mid, l * phi.phi(a).value() + (1 - l) * phi.phi(b).value() + 1e-12) << name;
    }
  }
}

TEST(Builtin, ClosedForms) {
  const PhiFunction kl = builtin_phi("kl");
  EXPECT_NEAR(kl.phi(2.0).value(), 2.0 * std::log(2.0) - 1.0, 1e-15);
  EXPECT_NEAR(kl.conjugate(0.7).value(), std::exp(0.7) - 1.0, 1e-15);
  const PhiFunction chi2 = builtin_phi("chi2");
  EXPECT_DOUBLE_EQ(chi2.conjugate(2.0).value(), 3.0);
  EXPECT_DOUBLE_EQ(chi2.conjugate(-3.0).value(), -1.0);
  const PhiFunction tv = builtin_phi("tv");
  EXPECT_DOUBLE_EQ(tv.conjugate(0.5).value(), 0.5);
  EXPECT_DOUBLE_EQ(tv.conjugate(-4.0).value(), -1.0);
  EXPECT_TRUE(tv.conjugate(1.5).is_infinite());
  EXPECT_TRUE(kl.conjugate_domain_upper().is_infinite());
  EXPECT_EQ(tv.conjugate_domain_upper(), ExtendedReal(1.0));
}

TEST(CheckConjugate, Examples) {
  const std::vector<double> zero{0.0};
  EXPECT_LT(check_conjugate(builtin_phi("kl"), zero), 1e-6);
  const PhiFunction chi2 = builtin_phi("chi2");
  const std::vector<double> two{2.0};
  EXPECT_LT(check_conjugate(chi2, two), 1e-6);
  EXPECT_NEAR(brute_conjugate(chi2, 2.0), 3.0, 1e-8);
  const PhiFunction tv = builtin_phi("tv");
  const std::vector<double> half{0.5};
  EXPECT_LT(check_conjugate(tv, half), 1e-6);
  EXPECT_NEAR(brute_conjugate(tv, 0.5), 0.5, 1e-8);
}

TEST(CheckConjugate, FenchelYoungGapAcrossDomains) {
  EXPECT_LT(check_conjugate(builtin_phi("kl"), grid(-3.0, 3.0, 25)), 1e-6);
  EXPECT_LT(check_conjugate(builtin_phi("chi2"), grid(-4.0, 4.0, 33)), 1e-6);
  EXPECT_LT(check_conjugate(builtin_phi("tv"), grid(-3.0, 1.0, 17)), 1e-6);
  const std::vector<double> outside{1.5};
  EXPECT_THROW(check_conjugate(builtin_phi("tv"), outside), DomainError);
}

TEST(Conjugate, FenchelYoungInequality) {
  Rng rng(9);
  for (const char* name : {"kl", "chi2", "tv"}) {
    const PhiFunction phi = builtin_phi(name);
    for (int k = 0; k < 500; ++k) {
      const double s = rng.uniform(-4.0, name == std::string("tv") ? 1.0 : 3.0);
      const double t = rng.uniform(0.0, 6.0);
      EXPECT_GE(phi.conjugate(s).value(), s * t - phi.phi(t).value() - 1e-12) << name;
    }
  }
}

TEST(Conjugate, NondecreasingAndConvex) {
  for (const char* name : {"kl", "chi2", "tv"}) {
    const PhiFunction phi = builtin_phi(name);
    const double hi = name == std::string("tv") ? 1.0 : 3.0;
    const auto g = grid(-4.0, hi, 200);
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
      const double a = phi.conjugate(g[i - 1]).value();
      const double b = phi.conjugate(g[i]).value();
      const double c = phi.conjugate(g[i + 1]).value();
      EXPECT_LE(a, b + 1e-15) << name;
      EXPECT_LE(2.0 * b, a + c + 1e-12) << name;
    }
  }
}
