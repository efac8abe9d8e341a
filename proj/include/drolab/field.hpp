#pragma once

#include <Eigen/Dense>

#include <functional>
#include <utility>

#include "drolab/box.hpp"
#include "drolab/errors.hpp"

namespace drolab {

enum class FieldStructure { general, affine, quadratic };

/// Scalar function on R^d with gradient. Affine and quadratic fields carry their
/// coefficients, h(y) = y^T A y + c^T y + c0, so inner problems can be solved exactly.
class ScalarField {
 public:
  using ValueFn = std::function<double(const VecRef&)>;
  using GradFn = std::function<Vec(const VecRef&)>;

  ScalarField(ValueFn value, GradFn gradient)
      : value_(std::move(value)), gradient_(std::move(gradient)) {
    if (!value_ || !gradient_) throw ConfigError("scalar field needs a value and a gradient");
  }

  static ScalarField affine(Vec c, double c0 = 0.0) {
    ScalarField out(Eigen::MatrixXd::Zero(c.size(), c.size()), c, c0);
    out.structure_ = FieldStructure::affine;
    return out;
  }

  /// h(y) = y^T A y + c^T y + c0 with A symmetrized.
  static ScalarField quadratic(const Eigen::MatrixXd& a, Vec c, double c0 = 0.0) {
    if (a.rows() != a.cols() || a.rows() != c.size()) throw ConfigError("quadratic field dimensions disagree");
    ScalarField out(0.5 * (a + a.transpose()), std::move(c), c0);
    out.structure_ = FieldStructure::quadratic;
    return out;
  }

  double operator()(const VecRef& y) const { return value_(y); }
  Vec gradient(const VecRef& y) const { return gradient_(y); }

  FieldStructure structure() const { return structure_; }
  const Eigen::MatrixXd& quadratic_part() const { return a_; }
  const Vec& linear_part() const { return c_; }
  double offset() const { return c0_; }

  /// h + constant, preserving structure.
  ScalarField shifted(double constant) const {
    ScalarField out = *this;
    out.c0_ += constant;
    out.value_ = [f = value_, constant](const VecRef& y) { return f(y) + constant; };
    return out;
  }

 private:
  ScalarField(Eigen::MatrixXd a, Vec c, double c0) : a_(std::move(a)), c_(std::move(c)), c0_(c0) {
    value_ = [a = a_, c = c_, c0](const VecRef& y) { return y.dot(a * y) + c.dot(y) + c0; };
    gradient_ = [a = a_, c = c_](const VecRef& y) -> Vec { return 2.0 * (a * y) + c; };
  }

  ValueFn value_;
  GradFn gradient_;
  FieldStructure structure_ = FieldStructure::general;
  Eigen::MatrixXd a_;
  Vec c_;
  double c0_ = 0.0;
};

}  // namespace drolab
