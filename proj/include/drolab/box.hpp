#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "drolab/errors.hpp"

namespace drolab {

using Vec = Eigen::VectorXd;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;

/// Axis-aligned box [lower, upper] in R^d.
class Box {
 public:
  Box() = default;
  Box(Vec lower, Vec upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size() || lower_.size() == 0) {
      throw ConfigError("box bounds must be nonempty and of equal dimension");
    }
    for (Eigen::Index j = 0; j < lower_.size(); ++j) {
      if (!std::isfinite(lower_[j]) || !std::isfinite(upper_[j]) || lower_[j] > upper_[j]) {
        throw ConfigError("box bound " + std::to_string(j) + " is not a finite interval");
      }
    }
  }

  /// The cube [-nu, nu]^dim.
  static Box symmetric(Eigen::Index dim, double nu) {
    return Box(Vec::Constant(dim, -nu), Vec::Constant(dim, nu));
  }
  static Box cube(Eigen::Index dim, double lo, double hi) {
    return Box(Vec::Constant(dim, lo), Vec::Constant(dim, hi));
  }

  Eigen::Index dim() const { return lower_.size(); }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  Vec center() const { return 0.5 * (lower_ + upper_); }
  Vec width() const { return upper_ - lower_; }

  bool contains(const VecRef& x, double slack = 0.0) const {
    if (x.size() != dim()) return false;
    for (Eigen::Index j = 0; j < dim(); ++j) {
      if (x[j] < lower_[j] - slack || x[j] > upper_[j] + slack) return false;
    }
    return true;
  }

  Vec project(const VecRef& x) const { return x.cwiseMax(lower_).cwiseMin(upper_); }

  /// True when some coordinate of x sits on a face of the box.
  bool on_boundary(const VecRef& x, double tol) const {
    for (Eigen::Index j = 0; j < dim(); ++j) {
      const double scale = tol * (1.0 + std::abs(upper_[j] - lower_[j]));
      if (x[j] <= lower_[j] + scale || x[j] >= upper_[j] - scale) return true;
    }
    return false;
  }

  /// Box grown by `radius` on every side.
  Box inflated(double radius) const {
    return Box(lower_.array() - radius, upper_.array() + radius);
  }

  /// Vertex indexed by the bit pattern of `mask` (bit j set selects upper_[j]).
  Vec vertex(unsigned long long mask) const {
    Vec v(dim());
    for (Eigen::Index j = 0; j < dim(); ++j) v[j] = ((mask >> j) & 1ULL) ? upper_[j] : lower_[j];
    return v;
  }

 private:
  Vec lower_;
  Vec upper_;
};

}  // namespace drolab
