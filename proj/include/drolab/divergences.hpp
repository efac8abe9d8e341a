#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "drolab/errors.hpp"
#include "drolab/line_search.hpp"

namespace drolab {

/// A real number or +infinity. Arithmetic saturates at +infinity and never yields NaN.
class ExtendedReal {
 public:
  constexpr ExtendedReal(double v = 0.0) : value_(v), infinite_(false) {}  // NOLINT: implicit by design of the type
  static constexpr ExtendedReal infinity() {
    ExtendedReal r;
    r.infinite_ = true;
    return r;
  }

  constexpr bool is_finite() const { return !infinite_; }
  constexpr bool is_infinite() const { return infinite_; }
  double value() const {
    if (infinite_) throw DomainError("extended real is +infinity");
    return value_;
  }
  /// Finite value, or +inf as an IEEE double.
  constexpr double as_double() const { return infinite_ ? std::numeric_limits<double>::infinity() : value_; }

  friend constexpr ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
    if (a.infinite_ || b.infinite_) return infinity();
    return ExtendedReal(a.value_ + b.value_);
  }
  /// Scaling by a nonnegative factor; 0 * inf = 0 (measure-theoretic convention).
  friend ExtendedReal scale(double factor, ExtendedReal a) {
    if (factor < 0.0) throw DomainError("extended reals only scale by nonnegative factors");
    if (a.infinite_) return factor == 0.0 ? ExtendedReal(0.0) : infinity();
    return ExtendedReal(factor * a.value_);
  }
  friend constexpr bool operator<(ExtendedReal a, ExtendedReal b) {
    if (a.infinite_) return false;
    if (b.infinite_) return true;
    return a.value_ < b.value_;
  }
  friend constexpr bool operator<=(ExtendedReal a, ExtendedReal b) { return !(b < a); }
  friend constexpr bool operator==(ExtendedReal a, ExtendedReal b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }

 private:
  double value_;
  bool infinite_;
};

enum class PhiKind { kl, chi_square, total_variation };

/// Divergence generator phi with closed-form conjugate.
///
///   kl:               phi(t) = t log t - t + 1,   phi*(s) = e^s - 1
///   chi-square:       phi(t) = (t - 1)^2,         phi*(s) = s + s^2/4 (s >= -2), -1 otherwise
///   total-variation:  phi(t) = |t - 1|,           phi*(s) = max(s, -1) (s <= 1), +inf otherwise
///
/// phi(t) = +inf for t < 0 in every case.
class PhiFunction {
 public:
  explicit constexpr PhiFunction(PhiKind kind) : kind_(kind) {}

  constexpr PhiKind kind() const { return kind_; }

  std::string name() const {
    switch (kind_) {
      case PhiKind::kl: return "kl";
      case PhiKind::chi_square: return "chi2";
      case PhiKind::total_variation: return "tv";
    }
    return "unknown";
  }

  ExtendedReal phi(double t) const {
    if (t < 0.0 || std::isnan(t)) return ExtendedReal::infinity();
    switch (kind_) {
      case PhiKind::kl: return t == 0.0 ? 1.0 : t * std::log(t) - t + 1.0;
      case PhiKind::chi_square: return (t - 1.0) * (t - 1.0);
      case PhiKind::total_variation: return std::abs(t - 1.0);
    }
    return ExtendedReal::infinity();
  }

  ExtendedReal conjugate(double s) const {
    switch (kind_) {
      case PhiKind::kl: {
        const double v = std::expm1(s);
        return std::isfinite(v) ? ExtendedReal(v) : ExtendedReal::infinity();
      }
      case PhiKind::chi_square: return s >= -2.0 ? s + 0.25 * s * s : -1.0;
      case PhiKind::total_variation: return s > 1.0 ? ExtendedReal::infinity() : ExtendedReal(std::max(s, -1.0));
    }
    return ExtendedReal::infinity();
  }

  /// (phi*)'(s): the density ratio dQ/dP produced by a dual argument s.
  /// TV uses the right derivative at its kinks.
  double conjugate_derivative(double s) const {
    switch (kind_) {
      case PhiKind::kl: return std::exp(s);
      case PhiKind::chi_square: return std::max(0.0, 1.0 + 0.5 * s);
      case PhiKind::total_variation:
        if (s > 1.0) throw DomainError("tv conjugate is infinite above 1");
        return s >= -1.0 ? 1.0 : 0.0;
    }
    return 0.0;
  }

  /// sup { s : phi*(s) < inf }.
  ExtendedReal conjugate_domain_upper() const {
    return kind_ == PhiKind::total_variation ? ExtendedReal(1.0) : ExtendedReal::infinity();
  }

  /// phi''(1); +inf for TV, whose derivative jumps at 1.
  ExtendedReal second_derivative_at_one() const {
    switch (kind_) {
      case PhiKind::kl: return 1.0;
      case PhiKind::chi_square: return 2.0;
      case PhiKind::total_variation: return ExtendedReal::infinity();
    }
    return ExtendedReal::infinity();
  }

  /// Smooth iff phi''(1) is finite and positive.
  bool smooth() const {
    const auto d2 = second_derivative_at_one();
    return d2.is_finite() && d2.value() > 0.0;
  }

  /// kappa = 2 / phi''(1). Undefined for nonsmooth generators.
  double kappa() const {
    if (!smooth()) throw DomainError("kappa is undefined for the nonsmooth generator '" + name() + "'");
    return 2.0 / second_derivative_at_one().value();
  }

  /// phi'(t) for t > 0 (subgradient 0 at the TV kink). Used by primal oracles.
  double derivative(double t) const {
    switch (kind_) {
      case PhiKind::kl: return std::log(t);
      case PhiKind::chi_square: return 2.0 * (t - 1.0);
      case PhiKind::total_variation: return t > 1.0 ? 1.0 : (t < 1.0 ? -1.0 : 0.0);
    }
    return 0.0;
  }

  friend constexpr bool operator==(const PhiFunction& a, const PhiFunction& b) { return a.kind_ == b.kind_; }

 private:
  PhiKind kind_;
};

/// Accepts the CLI names "kl" | "chi2" | "tv" and the long forms.
inline PhiFunction builtin_phi(const std::string& name) {
  if (name == "kl") return PhiFunction(PhiKind::kl);
  if (name == "chi2" || name == "chi-square") return PhiFunction(PhiKind::chi_square);
  if (name == "tv" || name == "total-variation") return PhiFunction(PhiKind::total_variation);
  throw ConfigError("unknown phi '" + name + "' (expected kl, chi2 or tv)");
}

/// Largest |phi*(s) - max_t (s t - phi(t))| over `grid`, with the inner max taken
/// on a uniform t-grid over [0, t_max] and polished by golden section. The grid
/// maximization is independent of the closed forms it checks.
inline double check_conjugate(const PhiFunction& phi, std::span<const double> grid, double t_max = 64.0,
                              double t_step = 1e-3) {
  if (grid.empty()) throw DomainError("check_conjugate needs a nonempty grid");
  double worst = 0.0;
  const auto steps = static_cast<long>(std::ceil(t_max / t_step));
  for (double s : grid) {
    const auto closed = phi.conjugate(s);
    if (closed.is_infinite()) throw DomainError("grid point outside the conjugate domain");
    const auto inner = [&](double t) { return s * t - phi.phi(t).as_double(); };
    long best_k = 0;
    double best = inner(0.0);
    for (long k = 1; k <= steps; ++k) {
      const double v = inner(static_cast<double>(k) * t_step);
      if (v > best) {
        best = v;
        best_k = k;
      }
    }
    const double lo = std::max(0.0, static_cast<double>(best_k - 1) * t_step);
    const double hi = static_cast<double>(best_k + 1) * t_step;
    const auto polished = golden_section_minimize([&](double t) { return -inner(t); }, lo, hi, 1e-13);
    best = std::max(best, -polished.f);
    worst = std::max(worst, std::abs(closed.value() - best));
  }
  return worst;
}

}  // namespace drolab
