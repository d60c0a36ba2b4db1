#pragma once

// Initial data: C^1 compactly supported profiles f0(r, w, ell) and their
// deterministic midpoint quadrature into a weighted particle ensemble.

#include <cstddef>

#include "shellvp/phase.hpp"

namespace shellvp {

enum class ProfileKind { SmoothBox, ShellGaussian };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double center() const { return 0.5 * (lo + hi); }
  bool contains(double x) const { return x >= lo && x <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct Profile {
  ProfileKind kind = ProfileKind::SmoothBox;
  Interval r{1.0, 2.0};
  Interval w{-0.5, 0.5};
  Interval ell{0.5, 1.5};
  double amplitude = 1.0;
  // ShellGaussian only.
  RadialPoint center{};
  RadialPoint sigma{1.0, 1.0, 1.0};

  /// Throws std::invalid_argument when the box is degenerate or ell/r/amplitude negative.
  void validate() const;

  /// Effective support box: the declared box, intersected with +-3 sigma for ShellGaussian.
  Interval support_r() const;
  Interval support_w() const;
  Interval support_ell() const;
};

struct QuadratureSpec {
  int n_r = 32;
  int n_w = 16;
  int n_ell = 32;

  std::size_t count() const {
    return static_cast<std::size_t>(n_r) * static_cast<std::size_t>(n_w) * static_cast<std::size_t>(n_ell);
  }
};

/// Quintic smoothstep 6u^5 - 15u^4 + 10u^3 on [0,1], clamped outside.
double smoothstep5(double u);

/// f0 at a phase point; zero outside the support box.
double profile_eval(const Profile& p, const RadialPoint& point);

/// Midpoint nodes on the support box with weight 4 pi^2 f0 dr dw dell.
/// Zero-weight nodes are dropped; an all-zero result throws std::invalid_argument.
Ensemble build_ensemble(const Profile& p, const QuadratureSpec& q, ModelTag model);

struct EllBound {
  bool satisfied = false;
  double ell_min = 0.0;
};

/// Positive lower bound on the angular momenta of the support.
EllBound check_ell_bound(const Ensemble& e);

}  // namespace shellvp
