#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "drolab/box.hpp"
#include "drolab/errors.hpp"
#include "drolab/field.hpp"
#include "drolab/measures.hpp"
#include "drolab/random.hpp"

namespace drolab {

/// Loss l(x, theta) with gradients in theta and x, over a compact parameter box.
struct LossModel {
  using Loss = std::function<double(const VecRef& x, const VecRef& theta)>;
  using Grad = std::function<Vec(const VecRef& x, const VecRef& theta)>;
  /// Optional exact structure of y -> l(y, theta) for the transport inner problem.
  using FieldProvider = std::function<std::optional<ScalarField>(const VecRef& theta)>;

  std::string name;
  Eigen::Index data_dim = 1;
  Box theta_box;
  bool smooth_in_x = true;
  Loss loss;
  Grad grad_theta;
  Grad grad_x;
  FieldProvider structured_field;

  Eigen::Index param_dim() const { return theta_box.dim(); }

  /// y -> l(y, theta) as a scalar field on the data space.
  ScalarField field(const VecRef& theta) const {
    if (structured_field) {
      if (auto f = structured_field(theta)) return *f;
    }
    if (!grad_x) throw ConfigError("model '" + name + "' has no x-gradient");
    const Vec th = theta;
    return ScalarField([l = loss, th](const VecRef& y) { return l(y, th); },
                       [g = grad_x, th](const VecRef& y) { return g(y, th); });
  }

  /// The model with loss l(x, theta) + v^T theta.
  LossModel tilted(const VecRef& v) const {
    if (v.size() != param_dim()) throw DomainError("tilt dimension differs from the parameter dimension");
    LossModel out = *this;
    const Vec vv = v;
    out.name = name + "+tilt";
    out.loss = [l = loss, vv](const VecRef& x, const VecRef& th) { return l(x, th) + vv.dot(th); };
    out.grad_theta = [g = grad_theta, vv](const VecRef& x, const VecRef& th) -> Vec { return g(x, th) + vv; };
    out.structured_field = [f = structured_field, vv](const VecRef& th) -> std::optional<ScalarField> {
      if (!f) return std::nullopt;
      auto base = f(th);
      if (!base) return std::nullopt;
      return base->shifted(vv.dot(th));
    };
    return out;
  }

  /// l(x_i, theta) for every support point; throws on a non-finite loss.
  Vec values(const EmpiricalMeasure& mu, const VecRef& theta) const {
    check_dims(mu, theta);
    Vec out(mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      out[i] = loss(mu.point(i), theta);
      if (!std::isfinite(out[i])) throw_non_finite(mu.point(i), theta);
    }
    return out;
  }

  /// grad_theta l(x_i, theta) as columns.
  Eigen::MatrixXd theta_gradients(const EmpiricalMeasure& mu, const VecRef& theta) const {
    check_dims(mu, theta);
    Eigen::MatrixXd out(param_dim(), mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) out.col(i) = grad_theta(mu.point(i), theta);
    return out;
  }

  /// grad_x l(x_i, theta) as columns.
  Eigen::MatrixXd x_gradients(const EmpiricalMeasure& mu, const VecRef& theta) const {
    check_dims(mu, theta);
    if (!grad_x) throw ConfigError("model '" + name + "' has no x-gradient");
    Eigen::MatrixXd out(mu.dim(), mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) out.col(i) = grad_x(mu.point(i), theta);
    return out;
  }

  double risk(const EmpiricalMeasure& mu, const VecRef& theta) const { return mu.weights().dot(values(mu, theta)); }

  Vec risk_gradient(const EmpiricalMeasure& mu, const VecRef& theta) const {
    return theta_gradients(mu, theta) * mu.weights();
  }

 private:
  void check_dims(const EmpiricalMeasure& mu, const VecRef& theta) const {
    if (mu.dim() != data_dim) {
      throw ConfigError("model '" + name + "' expects data of dimension " + std::to_string(data_dim) + ", got " +
                        std::to_string(mu.dim()));
    }
    if (theta.size() != param_dim()) {
      throw ConfigError("model '" + name + "' expects theta of dimension " + std::to_string(param_dim()));
    }
  }

  [[noreturn]] void throw_non_finite(const VecRef& x, const VecRef& theta) const {
    std::ostringstream os;
    os << "non-finite loss in model '" << name << "' at x = [" << x.transpose() << "], theta = [" << theta.transpose()
       << "]";
    throw SolverError(os.str());
  }
};

/// l(x, theta) = ||x - theta||^2.
inline LossModel mean_squared_model(Eigen::Index dim, Box theta_box) {
  if (theta_box.dim() != dim) throw ConfigError("mean-squared model needs a parameter box of the data dimension");
  LossModel m;
  m.name = "mean-squared";
  m.data_dim = dim;
  m.theta_box = std::move(theta_box);
  m.loss = [](const VecRef& x, const VecRef& th) { return (x - th).squaredNorm(); };
  m.grad_theta = [](const VecRef& x, const VecRef& th) -> Vec { return -2.0 * (x - th); };
  m.grad_x = [](const VecRef& x, const VecRef& th) -> Vec { return 2.0 * (x - th); };
  m.structured_field = [dim](const VecRef& th) -> std::optional<ScalarField> {
    return ScalarField::quadratic(Eigen::MatrixXd::Identity(dim, dim), -2.0 * th, th.squaredNorm());
  };
  return m;
}

/// l(x, theta) = theta^T x.
inline LossModel linear_model(Eigen::Index dim, Box theta_box) {
  if (theta_box.dim() != dim) throw ConfigError("linear model needs a parameter box of the data dimension");
  LossModel m;
  m.name = "linear";
  m.data_dim = dim;
  m.theta_box = std::move(theta_box);
  m.loss = [](const VecRef& x, const VecRef& th) { return th.dot(x); };
  m.grad_theta = [](const VecRef& x, const VecRef&) -> Vec { return x; };
  m.grad_x = [](const VecRef&, const VecRef& th) -> Vec { return th; };
  m.structured_field = [](const VecRef& th) -> std::optional<ScalarField> { return ScalarField::affine(th); };
  return m;
}

namespace detail {
inline double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }
inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}
}  // namespace detail

/// Data points are (features, label) with the label last; l = log(1 + exp(-label theta^T features)).
inline LossModel logistic_model(Eigen::Index feature_dim, Box theta_box) {
  if (theta_box.dim() != feature_dim) throw ConfigError("logistic model needs a parameter box of the feature dimension");
  LossModel m;
  m.name = "logistic";
  m.data_dim = feature_dim + 1;
  m.theta_box = std::move(theta_box);
  const Eigen::Index k = feature_dim;
  m.loss = [k](const VecRef& x, const VecRef& th) { return detail::softplus(-x[k] * th.dot(x.head(k))); };
  m.grad_theta = [k](const VecRef& x, const VecRef& th) -> Vec {
    const double label = x[k];
    return -label * detail::sigmoid(-label * th.dot(x.head(k))) * x.head(k);
  };
  m.grad_x = [k](const VecRef& x, const VecRef& th) -> Vec {
    const double label = x[k];
    const double margin = th.dot(x.head(k));
    const double s = detail::sigmoid(-label * margin);
    Vec g(k + 1);
    g.head(k) = -label * s * th;
    g[k] = -margin * s;
    return g;
  };
  return m;
}

/// Builtin model by name for data of dimension `data_dim`; the parameter box defaults to [-10, 10]^m.
inline LossModel make_model(const std::string& name, Eigen::Index data_dim, std::optional<Box> theta_box = std::nullopt) {
  if (name == "mean-squared") return mean_squared_model(data_dim, theta_box ? *theta_box : Box::cube(data_dim, -10.0, 10.0));
  if (name == "linear") return linear_model(data_dim, theta_box ? *theta_box : Box::cube(data_dim, -10.0, 10.0));
  if (name == "logistic") {
    if (data_dim < 2) throw ConfigError("logistic model needs at least one feature plus a label column");
    return logistic_model(data_dim - 1, theta_box ? *theta_box : Box::cube(data_dim - 1, -10.0, 10.0));
  }
  throw ConfigError("unknown model '" + name + "' (expected mean-squared, linear or logistic)");
}

/// Largest |l(x, theta) - l(x, theta')| / ||theta - theta'|| over sampled pairs on the
/// support and parameter box; a finite-sample Lipschitz surrogate.
inline double lipschitz_surrogate(const LossModel& model, const EmpiricalMeasure& mu, int pairs, Rng& rng) {
  const Box& b = model.theta_box;
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    Vec t1(b.dim());
    Vec t2(b.dim());
    for (Eigen::Index j = 0; j < b.dim(); ++j) {
      t1[j] = rng.uniform(b.lower()[j], b.upper()[j]);
      t2[j] = rng.uniform(b.lower()[j], b.upper()[j]);
    }
    const double dist = (t1 - t2).norm();
    if (dist == 0.0) continue;
    const auto i = static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(mu.size()));
    worst = std::max(worst, std::abs(model.loss(mu.point(i), t1) - model.loss(mu.point(i), t2)) / dist);
  }
  return worst;
}

}  // namespace drolab
