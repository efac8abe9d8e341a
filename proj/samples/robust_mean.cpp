// Robust location estimates for a small skewed sample.
#include <cstdio>

#include "drolab/drolab.hpp"

int main() {
  using namespace drolab;
  const EmpiricalMeasure mu = draw(DataGenerator::truncated_gaussian(Vec::Constant(1, 0.3), Vec::Constant(1, 1.2), 2.0, 7), 200);
  const LossModel model = make_model("mean-squared", 1);

  const ErmSolution erm = erm_solve(model, mu);
  std::printf("erm         theta %+.5f  risk %.5f\n", erm.theta[0], erm.value);

  const double delta = 0.05;
  for (const char* name : {"kl", "chi2", "tv"}) {
    const ErmSolution s = dro_solve(model, mu, Family::phi(builtin_phi(name)), delta);
    std::printf("%-11s theta %+.5f  value %.5f\n", name, s.theta[0], s.value);
  }
  const ErmSolution w = dro_solve(model, mu, Family::wasserstein(WassersteinSpec(2.0, 2.0)), delta * delta);
  std::printf("wasserstein theta %+.5f  value %.5f\n", w.theta[0], w.value);

  const Vec y = model.values(mu, erm.theta);
  const PhiDroResult kl = phi_dro_value(mu.weights(), y, delta, builtin_phi("kl"));
  const double var = weighted_moments(mu.weights(), y).variance;
  std::printf("kl value at erm %.5f, first-order %.5f\n", kl.value,
              kl.mean + phi_expansion(delta, var, builtin_phi("kl").kappa()));
  return 0;
}
