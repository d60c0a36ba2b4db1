#pragma once

// Limiting radial momenta, trajectory asymptotics and the limiting
// spatial-average distribution F_inf.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "shellvp/diagnostics.hpp"
#include "shellvp/dynamics.hpp"
#include "shellvp/phase.hpp"
#include "shellvp/trajectory.hpp"

namespace shellvp {

// ---------------------------------------------------------------------------
// W_inf estimators

/// Tail-model extrapolation from two samples (t1 < t2) of one characteristic.
///
/// The quantity extrapolated is B = sqrt(W^2 + ell/R^2) (classical) or
/// g = sqrt(1 + W^2 + ell/R^2) (relativistic).  Both are constant under free
/// streaming and approach their limits like C/(1+t) in a decaying field:
///   X_inf = X2 + (X2 - X1) (1 + t1) / (t2 - t1).
/// W_inf = B_inf or sqrt(g_inf^2 - 1), clipped from below by W(t2).  Falls back
/// to W(t2) when the two samples cannot be extrapolated.
/// Throws std::invalid_argument unless W(t2) > 0.
double winf_late(double t1, const RadialPoint& s1, double t2, const RadialPoint& s2, ModelTag model);

/// Same from the last two samples of a trajectory.  Throws when the trajectory
/// has fewer than two samples or ends before min_t_end.
double winf_late(const Trajectory& tr, ModelTag model, double min_t_end = 0.0);

/// Quadrature of the exact integral representation along a recorded
/// trajectory (trapezoid over the samples plus the tail integrand_last * t_end).
///   classical, ell > 0:  W_inf = B(tau) + int (m/R^2) (W/B) ds
///   relativistic:        g_inf = g(tau) + int (m/R^2) (W/g) ds,  W_inf = sqrt(g_inf^2 - 1)
///   ell == 0:            W_inf = w + int m/R^2 ds
/// Throws std::runtime_error if the relativistic g_inf < 1 (corrupt data).
struct WinfIntegral {
  double value = 0.0;
  double tail = 0.0;  // the tail term's contribution
};
WinfIntegral winf_integral(const Trajectory& tr, ModelTag model);

struct WinfEstimate {
  std::size_t particle = 0;
  double w_inf_late = 0.0;
  double w_inf_integral = 0.0;
  double tail = 0.0;
  double rel_diff = 0.0;  // |late - integral| / max(|late|, |integral|)
  bool agree = false;     // rel_diff <= max(1%, 3 tail / |late|)
};

WinfEstimate estimate_winf(const Trajectory& tr, ModelTag model);

struct RateCheck {
  FitResult fit;
  bool degenerate = false;  // |W - w_inf| underflowed in the window
};

/// Slope of log|W(t) - w_inf| against log(1+t) over [t_min, t_max].
RateCheck winf_rate_check(const Trajectory& tr, double w_inf, double t_min, double t_max);

struct ResidualSeries {
  std::vector<double> times;
  std::vector<double> residual;  // R(t) - r - v_inf (t - tau)
  double log_coefficient = 0.0;  // b in residual ~ a + b ln(1 + t)
  double log_intercept = 0.0;
};

/// v_inf = w_inf (classical) or w_inf / sqrt(1 + w_inf^2) (relativistic).
ResidualSeries spatial_asymptote_residual(const Trajectory& tr, double w_inf, ModelTag model);

/// max over [a, b] of |residual(t)| / ln(1 + t).
double residual_log_ratio_max(const ResidualSeries& s, double a, double b);

// ---------------------------------------------------------------------------
// Sensitivity along characteristics

struct SensitivitySeries {
  std::size_t parent = 0;
  double tau = 0.0;
  double delta_w = 0.0;
  std::vector<double> times;
  std::vector<double> dr;  // |R+ - R-| / (2 dw)
  std::vector<double> dw;  // |W+ - W-| / (2 dw)
  /// The pair left the linear regime (|W+ - W-| > 0.1) somewhere.
  bool nonlinear = false;
};

inline constexpr double kNonlinearSeparation = 0.1;

/// Centred differences from recorded probe pairs.
std::vector<SensitivitySeries> characteristic_sensitivity(const std::vector<ProbePair>& pairs);

/// Runs the ensemble with probe pairs launched at tau from `parents` and
/// returns their sensitivity series.  delta_w is relative to max |w| at tau.
/// Throws std::invalid_argument for delta_w <= 0.
std::vector<SensitivitySeries> characteristic_sensitivity(const Ensemble& e, const StepConfig& cfg, double tau,
                                                          double delta_w, const std::vector<std::size_t>& parents);

/// Late / early growth of |dW|/dw: max over the final tenth of [tau, t_end]
/// divided by max over the first half.
double sensitivity_growth(const SensitivitySeries& s);

/// (W_inf(w + dw) - W_inf(w - dw)) / (2 dw) per pair, W_inf from winf_late.
std::vector<double> dwinf_dw(const std::vector<ProbePair>& pairs, ModelTag model);
std::vector<double> dwinf_dw(const Ensemble& e, const StepConfig& cfg, double tau, double delta_w,
                             const std::vector<std::size_t>& parents);

// ---------------------------------------------------------------------------
// Momentum-space distributions

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t count = 1;

  double width() const { return (hi - lo) / static_cast<double>(count); }
  double center(std::size_t k) const { return lo + (static_cast<double>(k) + 0.5) * width(); }
  /// Bin of x, or -1 when outside [lo, hi].  x == hi falls in the last bin.
  std::int64_t bin(double x) const;
  bool operator==(const Axis&) const = default;
};

/// Histogram over (u, ell) stored sparsely; cells are visited in (u, ell) order.
/// Cell value F = sum mu / (4 pi^2 du dell).
class MomentumGrid {
 public:
  MomentumGrid() = default;
  MomentumGrid(Axis u, Axis ell);

  const Axis& u_axis() const { return u_; }
  const Axis& ell_axis() const { return ell_; }
  bool same_axes(const MomentumGrid& o) const { return u_ == o.u_ && ell_ == o.ell_; }

  /// Adds weight mu at (u, ell); throws std::out_of_range outside the grid.
  void add(double u, double ell, double mu);

  double value(std::size_t iu, std::size_t il) const;
  double cell_mass(std::size_t iu, std::size_t il) const;
  /// Weight added so far, summed in insertion order.
  double binned_mass() const { return binned_mass_; }
  /// 4 pi^2 sum F du dell over the cells in order.
  double integrated_mass() const;
  /// sum over cells of g(u_c, ell_c) * cell mass / (4 pi^2).
  template <class G>
  double integrate(G&& g) const {
    double s = 0.0;
    for (const auto& [key, m] : cells_) s += g(u_.center(key.first), ell_.center(key.second)) * m;
    return s / kFourPiSquared;
  }

  const std::map<std::pair<std::size_t, std::size_t>, double>& cells() const { return cells_; }

  static constexpr double kFourPiSquared = 39.47841760435743;

 private:
  Axis u_, ell_;
  std::map<std::pair<std::size_t, std::size_t>, double> cells_;
  double binned_mass_ = 0.0;
};

/// F(t, w, ell) = int f dr: particles binned at (w_i, ell_i).
MomentumGrid spatial_average(const Ensemble& e, const Axis& w_axis, const Axis& ell_axis);

/// Pushforward of the ensemble under (r, w, ell) -> (W_inf, ell).
MomentumGrid build_finf(const Ensemble& e, std::span<const double> winf, const Axis& u_axis, const Axis& ell_axis);

/// W_inf of every particle from two ensemble states of the same run.
std::vector<double> winf_from_states(const Ensemble& earlier, const Ensemble& later);

struct T3Report {
  double mass_rel_err = 0.0;
  std::vector<std::string> casimir_names;
  std::vector<double> casimir_rel_err;
  double energy_rel_err = 0.0;
  double max_rel_err() const;
};

/// Compares the mass, Casimir and energy integrals of F_inf against reference
/// values of the initial data.  Energy uses cell-centre u:
///   classical 2 pi^2 int u^2 F, relativistic 4 pi^2 int sqrt(1 + u^2) F.
T3Report check_t3_identities(const MomentumGrid& finf, const DiagnosticRecord& reference,
                             const std::vector<CasimirSpec>& casimirs, ModelTag model);

struct OmegaSets {
  double w_lo = 0.0, w_hi = 0.0;
  double ell_lo = 0.0, ell_hi = 0.0;
};

OmegaSets omega_sets(std::span<const double> winf, std::span<const double> ell);

/// W_inf of every particle of `snapshot` obtained by continuing it as test
/// particles in the recorded field until the end of the history (RK4, step dt).
std::vector<double> continue_winf(const Ensemble& snapshot, const FieldHistory& history, double dt,
                                  int threads = 1);

struct OmegaInvariance {
  double t_a = 0.0, t_b = 0.0;
  OmegaSets a, b;
  double w_lo_rel = 0.0, w_hi_rel = 0.0;
  bool ell_exact = false;
};

OmegaInvariance omega_invariance(const Ensemble& snap_a, const Ensemble& snap_b, const FieldHistory& history,
                                 double dt, int threads = 1);

struct FconvReport {
  std::vector<double> times;
  std::vector<double> sup_diff;
  FitResult fit;
  bool eventually_decreasing = false;
  bool degenerate = false;  // the differences reach zero and stay there
  bool pass = false;
};

inline constexpr double kFconvMaxSlope = -0.5;

/// u bins of the convergence grid for n particles: square-root rule, about
/// sqrt(n) cells in total, at least 4 u bins.
std::size_t fconv_u_bins_for(std::size_t n, std::size_t ell_bins);

/// sup over cells of |F(t) - F_inf| for each grid, the log-log slope over
/// [t_min, t_max] and the monotonicity test (no new maximum over the second
/// half of the window).  Throws std::invalid_argument on mismatched grids.
FconvReport fconv_check(std::span<const double> times, const std::vector<MomentumGrid>& series,
                        const MomentumGrid& finf, double t_min, double t_max);

}  // namespace shellvp
