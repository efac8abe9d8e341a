#pragma once

#include <optional>
#include <string>

#include "drolab/divergences.hpp"
#include "drolab/errors.hpp"
#include "drolab/wasserstein_dro.hpp"

namespace drolab {

/// Ambiguity-set family: a phi-divergence ball or a p-Wasserstein ball.
class Family {
 public:
  enum class Kind { phi, wasserstein };

  static Family phi(PhiFunction fn) { return Family(Kind::phi, fn, std::nullopt); }
  static Family wasserstein(WassersteinSpec spec) {
    return Family(Kind::wasserstein, PhiFunction(PhiKind::kl), std::move(spec));
  }

  Kind kind() const { return kind_; }
  bool is_phi() const { return kind_ == Kind::phi; }
  bool is_wasserstein() const { return kind_ == Kind::wasserstein; }

  const PhiFunction& phi_function() const {
    if (!is_phi()) throw ConfigError("family is not a phi-divergence family");
    return phi_;
  }
  const WassersteinSpec& wasserstein_spec() const {
    if (!is_wasserstein()) throw ConfigError("family is not a Wasserstein family");
    return *spec_;
  }

  /// Exponent gamma with premium of order delta^gamma: 1/2 for smooth phi, 1/p for
  /// Wasserstein, and 1 for total variation, whose premium is linear in delta.
  double gamma() const {
    if (is_wasserstein()) return 1.0 / spec_->p();
    return phi_.smooth() ? 0.5 : 1.0;
  }

  std::string name() const {
    if (is_wasserstein()) return "wasserstein";
    return "phi-" + phi_.name();
  }

 private:
  Family(Kind kind, PhiFunction fn, std::optional<WassersteinSpec> spec)
      : kind_(kind), phi_(fn), spec_(std::move(spec)) {}

  Kind kind_;
  PhiFunction phi_;
  std::optional<WassersteinSpec> spec_;
};

}  // namespace drolab
