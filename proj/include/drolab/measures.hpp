#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "drolab/box.hpp"
#include "drolab/errors.hpp"
#include "drolab/random.hpp"

namespace drolab {

inline constexpr double kWeightSumTolerance = 1e-12;
inline constexpr double kRenormalizeTolerance = 1e-9;

/// Finite, weighted probability measure on R^d. Points are stored as columns.
///
/// Immutable after construction. Weights are renormalized when their sum is
/// within 1e-9 of one and rejected otherwise.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(Eigen::MatrixXd points, Vec weights)
      : points_(std::move(points)), weights_(std::move(weights)) {
    if (points_.cols() == 0 || points_.rows() == 0) {
      throw ConfigError("measure needs at least one point of positive dimension");
    }
    if (points_.cols() != weights_.size()) {
      throw ConfigError("measure has " + std::to_string(points_.cols()) + " points but " +
                        std::to_string(weights_.size()) + " weights");
    }
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
      if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
        throw ConfigError("weight " + std::to_string(i) + " is negative or not finite");
      }
    }
    if (!points_.allFinite()) throw ConfigError("measure points must be finite");
    const double total = weights_.sum();
    if (std::abs(total - 1.0) > kRenormalizeTolerance) {
      throw ConfigError("weights sum to " + std::to_string(total) + ", expected 1");
    }
    if (std::abs(total - 1.0) > 0.0) weights_ /= total;
  }

  /// Equal weights 1/n on the given columns.
  static EmpiricalMeasure uniform(Eigen::MatrixXd points) {
    const auto n = points.cols();
    if (n == 0) throw ConfigError("measure needs at least one point");
    return EmpiricalMeasure(std::move(points), Vec::Constant(n, 1.0 / static_cast<double>(n)));
  }

  /// One-dimensional measure from scalar support values.
  static EmpiricalMeasure on_line(const std::vector<double>& values, std::vector<double> weights = {}) {
    Eigen::MatrixXd pts(1, static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) pts(0, static_cast<Eigen::Index>(i)) = values[i];
    if (weights.empty()) return uniform(std::move(pts));
    return EmpiricalMeasure(std::move(pts), Eigen::Map<const Vec>(weights.data(), static_cast<Eigen::Index>(weights.size())));
  }

  Eigen::Index size() const { return points_.cols(); }
  Eigen::Index dim() const { return points_.rows(); }
  const Eigen::MatrixXd& points() const { return points_; }
  const Vec& weights() const { return weights_; }
  auto point(Eigen::Index i) const { return points_.col(i); }
  double weight(Eigen::Index i) const { return weights_[i]; }

  /// Smallest axis-aligned box containing the support.
  Box support_box() const {
    return Box(points_.rowwise().minCoeff(), points_.rowwise().maxCoeff());
  }

  /// Evaluates h at every support point.
  template <class H>
  Vec evaluate(H&& h) const {
    Vec out(size());
    for (Eigen::Index i = 0; i < size(); ++i) out[i] = h(points_.col(i));
    return out;
  }

 private:
  Eigen::MatrixXd points_;
  Vec weights_;
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Weighted mean and population variance of per-point values.
inline Moments weighted_moments(const VecRef& weights, const VecRef& values) {
  Moments m;
  m.mean = weights.dot(values);
  double var = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double d = values[i] - m.mean;
    var += weights[i] * d * d;
  }
  m.variance = var;
  return m;
}

/// Mean and variance of h(X) for X distributed as `mu`.
template <class H>
Moments moments(const EmpiricalMeasure& mu, H&& h) {
  const Vec values = mu.evaluate(std::forward<H>(h));
  if (!values.allFinite()) throw DomainError("h is not finite on the support");
  return weighted_moments(mu.weights(), values);
}

enum class GeneratorKind { uniform_box, discrete, truncated_gaussian };

inline std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::uniform_box: return "uniform-box";
    case GeneratorKind::discrete: return "discrete";
    case GeneratorKind::truncated_gaussian: return "truncated-gaussian";
  }
  return "unknown";
}

inline GeneratorKind generator_kind_from_string(const std::string& s) {
  if (s == "uniform-box" || s == "uniform") return GeneratorKind::uniform_box;
  if (s == "discrete") return GeneratorKind::discrete;
  if (s == "truncated-gaussian" || s == "truncated-normal") return GeneratorKind::truncated_gaussian;
  throw ConfigError("unknown generator kind '" + s + "'");
}

/// Seeded i.i.d. sampler with compact support [-nu, nu]^dim.
///
/// uniform-box samples [lower, upper] (defaults to the support box); discrete
/// samples `atoms` (columns) with probabilities `probs`; truncated-gaussian
/// samples independent coordinates N(mean_j, sd_j^2) conditioned on the box.
struct DataGenerator {
  GeneratorKind kind = GeneratorKind::uniform_box;
  Eigen::Index dim = 1;
  double nu = 1.0;
  Vec lower;
  Vec upper;
  Eigen::MatrixXd atoms;
  Vec probs;
  Vec mean;
  Vec sd;
  std::uint64_t seed = 0;

  static DataGenerator uniform_box(Eigen::Index dim, double nu, std::uint64_t seed) {
    DataGenerator g;
    g.kind = GeneratorKind::uniform_box;
    g.dim = dim;
    g.nu = nu;
    g.lower = Vec::Constant(dim, -nu);
    g.upper = Vec::Constant(dim, nu);
    g.seed = seed;
    g.validate();
    return g;
  }

  static DataGenerator discrete(Eigen::MatrixXd atoms, Vec probs, double nu, std::uint64_t seed) {
    DataGenerator g;
    g.kind = GeneratorKind::discrete;
    g.dim = atoms.rows();
    g.nu = nu;
    g.atoms = std::move(atoms);
    g.probs = std::move(probs);
    g.seed = seed;
    g.validate();
    return g;
  }

  static DataGenerator truncated_gaussian(Vec mean, Vec sd, double nu, std::uint64_t seed) {
    DataGenerator g;
    g.kind = GeneratorKind::truncated_gaussian;
    g.dim = mean.size();
    g.nu = nu;
    g.mean = std::move(mean);
    g.sd = std::move(sd);
    g.seed = seed;
    g.validate();
    return g;
  }

  Box support() const { return Box::symmetric(dim, nu); }

  DataGenerator with_seed(std::uint64_t s) const {
    DataGenerator g = *this;
    g.seed = s;
    return g;
  }

  void validate() const {
    if (dim < 1) throw ConfigError("generator dim must be positive");
    if (!(nu > 0.0) || !std::isfinite(nu)) throw ConfigError("generator nu must be positive and finite");
    const Box box = support();
    switch (kind) {
      case GeneratorKind::uniform_box: {
        if (lower.size() != dim || upper.size() != dim) {
          throw ConfigError("uniform-box lower/upper must have dimension " + std::to_string(dim));
        }
        for (Eigen::Index j = 0; j < dim; ++j) {
          if (!(lower[j] <= upper[j])) throw ConfigError("uniform-box lower exceeds upper");
        }
        if (!box.contains(lower) || !box.contains(upper)) {
          throw ConfigError("uniform-box bounds must lie inside [-nu, nu]^d");
        }
        break;
      }
      case GeneratorKind::discrete: {
        if (atoms.cols() == 0 || atoms.cols() != probs.size() || atoms.rows() != dim) {
          throw ConfigError("discrete generator needs one probability per atom");
        }
        if ((probs.array() < 0.0).any() || std::abs(probs.sum() - 1.0) > kRenormalizeTolerance) {
          throw ConfigError("discrete probabilities must be nonnegative and sum to 1");
        }
        for (Eigen::Index i = 0; i < atoms.cols(); ++i) {
          if (!box.contains(atoms.col(i))) throw ConfigError("discrete atom outside [-nu, nu]^d");
        }
        break;
      }
      case GeneratorKind::truncated_gaussian: {
        if (mean.size() != dim || sd.size() != dim) {
          throw ConfigError("truncated-gaussian mean/sd must have dimension " + std::to_string(dim));
        }
        for (Eigen::Index j = 0; j < dim; ++j) {
          if (!(sd[j] > 0.0) || !std::isfinite(sd[j])) {
            throw ConfigError("truncated-gaussian sd must be positive (coordinate " + std::to_string(j) + ")");
          }
          if (!std::isfinite(mean[j])) throw ConfigError("truncated-gaussian mean must be finite");
          if (acceptance_probability(j) < 1e-6) {
            throw ConfigError("truncated-gaussian box has negligible mass (coordinate " + std::to_string(j) + ")");
          }
        }
        break;
      }
    }
  }

  /// Normal mass of [-nu, nu] for coordinate j.
  double acceptance_probability(Eigen::Index j) const {
    const auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    return cdf((nu - mean[j]) / sd[j]) - cdf((-nu - mean[j]) / sd[j]);
  }
};

/// n equally weighted i.i.d. points from `gen`. Deterministic in (gen, n).
inline EmpiricalMeasure draw(const DataGenerator& gen, Eigen::Index n) {
  if (n < 1) throw ConfigError("sample size must be at least 1");
  gen.validate();
  Rng rng(gen.seed);
  Eigen::MatrixXd pts(gen.dim, n);
  switch (gen.kind) {
    case GeneratorKind::uniform_box:
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < gen.dim; ++j) pts(j, i) = rng.uniform(gen.lower[j], gen.upper[j]);
      break;
    case GeneratorKind::discrete: {
      std::vector<double> cumulative(static_cast<std::size_t>(gen.probs.size()));
      std::partial_sum(gen.probs.begin(), gen.probs.end(), cumulative.begin());
      for (Eigen::Index i = 0; i < n; ++i) {
        const double u = rng.uniform01() * cumulative.back();
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        if (it == cumulative.end()) --it;
        pts.col(i) = gen.atoms.col(it - cumulative.begin());
      }
      break;
    }
    case GeneratorKind::truncated_gaussian:
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < gen.dim; ++j) {
          double z = 0.0;
          do {
            z = gen.mean[j] + gen.sd[j] * rng.normal();
          } while (z < -gen.nu || z > gen.nu);
          pts(j, i) = z;
        }
      break;
  }
  return EmpiricalMeasure::uniform(std::move(pts));
}

namespace detail {

/// Composite Gauss-Legendre nodes and weights on [lo, hi] with `panels` panels.
inline std::pair<std::vector<double>, std::vector<double>> composite_gauss_legendre(double lo, double hi,
                                                                                    int panels) {
  using Rule = boost::math::quadrature::gauss<double, 20>;
  std::vector<double> nodes;
  std::vector<double> weights;
  const double h = (hi - lo) / panels;
  const auto& abscissa = Rule::abscissa();
  const auto& weight = Rule::weights();
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * h;
    const double half = 0.5 * h;
    for (std::size_t k = 0; k < abscissa.size(); ++k) {
      // Rule stores nonnegative abscissae; index 0 is the centre when the order is odd.
      const double a = abscissa[k];
      if (a == 0.0) {
        nodes.push_back(mid);
        weights.push_back(weight[k] * half);
      } else {
        nodes.push_back(mid - half * a);
        weights.push_back(weight[k] * half);
        nodes.push_back(mid + half * a);
        weights.push_back(weight[k] * half);
      }
    }
  }
  return {nodes, weights};
}

}  // namespace detail

/// Discretization of the generator's population law, used as ground truth.
///
/// discrete: the atoms themselves. uniform-box and truncated-gaussian: a tensor
/// composite Gauss-Legendre rule (exact for polynomials of high degree) for
/// dim <= 3, otherwise a 10^6-point sample from a derived seed.
inline EmpiricalMeasure population_measure(const DataGenerator& gen) {
  gen.validate();
  if (gen.kind == GeneratorKind::discrete) return EmpiricalMeasure(gen.atoms, gen.probs);
  if (gen.dim > 3) return draw(gen.with_seed(derive_seed(gen.seed, 0xFACADEULL)), 1'000'000);

  const int panels = gen.dim == 1 ? 32 : (gen.dim == 2 ? 4 : 1);
  std::vector<std::vector<double>> axis_nodes(static_cast<std::size_t>(gen.dim));
  std::vector<std::vector<double>> axis_weights(static_cast<std::size_t>(gen.dim));
  for (Eigen::Index j = 0; j < gen.dim; ++j) {
    const double lo = gen.kind == GeneratorKind::uniform_box ? gen.lower[j] : -gen.nu;
    const double hi = gen.kind == GeneratorKind::uniform_box ? gen.upper[j] : gen.nu;
    auto [nodes, weights] = detail::composite_gauss_legendre(lo, hi, panels);
    if (lo == hi) {
      nodes.assign(1, lo);
      weights.assign(1, 1.0);
    }
    if (gen.kind == GeneratorKind::truncated_gaussian) {
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        const double z = (nodes[k] - gen.mean[j]) / gen.sd[j];
        weights[k] *= std::exp(-0.5 * z * z);
      }
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double& w : weights) w /= total;
    axis_nodes[static_cast<std::size_t>(j)] = std::move(nodes);
    axis_weights[static_cast<std::size_t>(j)] = std::move(weights);
  }

  Eigen::Index count = 1;
  for (const auto& nodes : axis_nodes) count *= static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd pts(gen.dim, count);
  Vec w(count);
  for (Eigen::Index idx = 0; idx < count; ++idx) {
    Eigen::Index rest = idx;
    double weight = 1.0;
    for (Eigen::Index j = 0; j < gen.dim; ++j) {
      const auto& nodes = axis_nodes[static_cast<std::size_t>(j)];
      const auto k = static_cast<std::size_t>(rest % static_cast<Eigen::Index>(nodes.size()));
      rest /= static_cast<Eigen::Index>(nodes.size());
      pts(j, idx) = nodes[k];
      weight *= axis_weights[static_cast<std::size_t>(j)][k];
    }
    w[idx] = weight;
  }
  return EmpiricalMeasure(std::move(pts), w / w.sum());
}

}  // namespace drolab
