#pragma once

// Self-consistent radial field of a shell ensemble.
//
// The enclosed mass m(r) of a shell ensemble is piecewise constant in r, so the
// field |E| = m/r^2, its L^p norms and the field energy integral are evaluated
// exactly segment by segment.  A particle sitting exactly on a shell radius sees
// half of that shell's mass.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "shellvp/phase.hpp"

namespace shellvp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Permutation of particle indices sorted by (r, index).  The total order makes
/// the result unique, so refreshing an existing order by insertion sort gives
/// exactly what a full sort would.
class ShellOrder {
 public:
  ShellOrder() = default;

  /// Re-sorts for new radii.  Nearly sorted input costs O(n + crossings);
  /// heavily shuffled input falls back to a full sort.
  void update(std::span<const double> r);

  std::span<const std::uint32_t> indices() const { return order_; }
  std::size_t last_moves() const { return last_moves_; }

 private:
  std::vector<std::uint32_t> order_;
  std::size_t last_moves_ = 0;
};

struct FieldTable {
  std::vector<double> radii;       // distinct, increasing
  std::vector<double> mass_below;  // weight strictly inside radii[i]
  std::vector<double> mass_at;     // weight exactly at radii[i]
  double total_mass = 0.0;
  /// Table entry of every particle (parallel to the ensemble), used as a search hint.
  std::vector<std::uint32_t> entry_of;

  std::size_t size() const { return radii.size(); }
  bool empty() const { return radii.empty(); }
  double outer_radius() const { return radii.empty() ? 0.0 : radii.back(); }

  /// m(r) with the half-weight convention at shell radii; m(r <= 0) = 0.
  double enclosed_mass(double r) const;
  /// Same value, with the search started from table entry `hint`.
  double enclosed_mass_near(double r, std::size_t hint) const;
};

FieldTable build_field_table(const Ensemble& e);
/// Builds from raw arrays using a precomputed (r, index) order.
FieldTable build_field_table(std::span<const double> r, std::span<const double> weight,
                             std::span<const std::uint32_t> order);

double enclosed_mass(const FieldTable& t, double r);

/// m(r)/r^2.  Throws std::invalid_argument for r <= 0.
double field_magnitude(const FieldTable& t, double r);

/// ||E||_p over R^3, exact for the piecewise-constant m.  p must exceed 3/2
/// (p = kInf allowed); otherwise std::invalid_argument.
double field_lp_norm(const FieldTable& t, double p);

/// integral_0^inf m(r)^2 / r^2 dr, exact for the piecewise-constant m.
double field_energy_integral(const FieldTable& t);

struct BinSpec {
  std::vector<double> edges;  // increasing, size >= 2

  static BinSpec uniform(double lo, double hi, std::size_t count);
};

/// Uniform bins over [min r, max r] of the ensemble, ceil(N^(1/3)) of them.
BinSpec default_density_bins(const Ensemble& e, std::size_t count = 0);

struct DensityProfile {
  std::vector<double> edges;
  std::vector<double> mass;     // per bin
  std::vector<double> volume;   // 4 pi (hi^3 - lo^3) / 3
  std::vector<double> density;  // mass / volume
  double total_mass = 0.0;      // sum of weights in particle order
};

/// Bins particle weights into spherical shells.  A particle outside the bin
/// range throws std::invalid_argument.
DensityProfile density_profile(const Ensemble& e, const BinSpec& bins);

/// ||rho||_q for q in [1, inf].  q = 1 returns the total mass.  Bins whose outer
/// edge is <= inner_cutoff are skipped for q > 1.
double density_lq_norm(const DensityProfile& d, double q, double inner_cutoff = 0.0);

}  // namespace shellvp
