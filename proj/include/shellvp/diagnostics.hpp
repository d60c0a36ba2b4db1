#pragma once

// Conserved quantities, support functions, norm time series and power-law fits.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "shellvp/field.hpp"
#include "shellvp/phase.hpp"
#include "shellvp/simd/kernels.hpp"
#include "shellvp/trajectory.hpp"

namespace shellvp {

/// Coefficient of integral m^2/r^2 dr in the conserved energy.  With
/// |E| = m/r^2 and weights carrying physical mass this is (1/2) int |E|^2 dx / (4 pi).
inline constexpr double kFieldEnergyCoefficient = 0.5;

/// A named function of ell for the conserved integrals J_phi.
/// Names: "identity", "square", "indicator[a,b]".
class CasimirSpec {
 public:
  enum class Kind { Identity, Square, Indicator };

  static CasimirSpec parse(const std::string& name);

  double operator()(double ell) const;
  const std::string& name() const { return name_; }
  /// CSV-safe column suffix ("indicator_0.5_1" for indicator[0.5,1]).
  std::string column() const;
  Kind kind() const { return kind_; }

 private:
  Kind kind_ = Kind::Identity;
  double a_ = 0.0, b_ = 0.0;
  std::string name_ = "identity";
};

struct DiagnosticsConfig {
  std::vector<double> e_norms{2.0, 3.0, kInf};
  std::vector<double> rho_norms{1.0, 1.2, 2.0, kInf};
  std::vector<CasimirSpec> casimirs{CasimirSpec::parse("identity"), CasimirSpec::parse("square")};
  std::size_t density_bins = 0;  // 0: ceil(N^(1/3))
  double rho_inner_cutoff = 0.0;
  bool field_off = false;  // free-streaming test mode, m == 0
};

/// Column label for a norm exponent: 2 -> "2", 1.2 -> "1_2", inf -> "inf".
std::string exponent_label(double p);

struct DiagnosticRecord {
  double time = 0.0;
  double total_mass = 0.0;
  double total_energy = 0.0;
  std::vector<double> casimirs;   // parallel to DiagnosticsConfig::casimirs
  std::vector<double> e_norms;    // parallel to DiagnosticsConfig::e_norms
  std::vector<double> rho_norms;  // parallel to DiagnosticsConfig::rho_norms
  double r_sup = 0.0;
  double w_sup = 0.0;
  double speed_sup = 0.0;
  std::size_t clamp_events = 0;
  /// ||E||_inf >= M / R_sup^2, evaluated with the field table's own mass.
  bool field_lower_bound = true;
};

double total_mass(const Ensemble& e);

/// Kinetic part: (1/2) sum mu |v|^2 (classical) or sum mu sqrt(1 + |v|^2).
double kinetic_energy(const Ensemble& e);

/// kFieldEnergyCoefficient * integral m^2/r^2 dr.
double field_energy(const FieldTable& t);

/// Kinetic plus field energy; the field part is dropped when field_off.
double total_energy(const Ensemble& e, const FieldTable& t, bool field_off = false);

/// sum mu phi(ell) / (4 pi^2), i.e. the integral of phi(ell) f dell dw dr.
double casimir(const Ensemble& e, const std::function<double(double)>& phi);

/// (max r, max |w|, max sqrt(w^2 + ell/r^2)).
simd::Supremum support_functions(const Ensemble& e);

DiagnosticRecord compute_record(const Ensemble& e, const FieldTable& t, const DiagnosticsConfig& cfg,
                                std::size_t clamp_events = 0);

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;
  std::size_t samples = 0;
};

inline constexpr std::size_t kMinFitSamples = 8;

/// Least squares of log(value) against log(time) for times in [t_min, t_max].
/// Throws std::invalid_argument with fewer than 8 samples, t <= 0 or value <= 0 in the window.
FitResult fit_exponent(std::span<const double> times, std::span<const double> values, double t_min,
                       double t_max);

/// Same, regressing against log(1 + t).
FitResult fit_exponent_shifted(std::span<const double> times, std::span<const double> values, double t_min,
                               double t_max);

/// Convexity bounds along one characteristic started at t = 0.
struct ConvexityReport {
  std::size_t samples = 0;
  std::size_t radius_violations = 0;     // R^2 >= ell r^-2 t^2 (rel.: divided by gamma0^2)
  bool turning_checked = false;          // w < 0
  double turning_time = 0.0;             // first zero of W, interpolated
  double turning_bound = 0.0;            // -w r^3 / ell (rel.: times gamma0)
  bool turning_violation = false;
  double min_radius = 0.0;
  double min_radius_bound = 0.0;         // D r for w < 0, r otherwise
  bool min_radius_violation = false;
  std::size_t momentum_decreases = 0;    // W(t_k+1) < W(t_k)
  std::size_t speed_violations = 0;      // relativistic |dr/dt| >= 1

  std::size_t violations() const {
    return radius_violations + (turning_violation ? 1 : 0) + (min_radius_violation ? 1 : 0) + speed_violations;
  }
};

inline constexpr double kInequalitySlack = 1e-6;

ConvexityReport check_convexity_bounds(const Trajectory& tr, ModelTag model, double slack = kInequalitySlack);

/// max over [a, b] of the series, or -inf when no sample falls in the window.
double window_max(std::span<const double> times, std::span<const double> values, double a, double b);

}  // namespace shellvp
