#include "shellvp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "shellvp/format.hpp"

namespace shellvp {
namespace {

constexpr double kFourPiSq = 4.0 * std::numbers::pi * std::numbers::pi;

std::string replace_dots(std::string s) {
  std::replace(s.begin(), s.end(), '.', '_');
  return s;
}

FitResult least_squares(std::span<const double> times, std::span<const double> values, double t_min,
                        double t_max, double shift) {
  if (times.size() != values.size()) throw std::invalid_argument("fit: series length mismatch");
  if (!(t_min < t_max)) throw std::invalid_argument("fit: window must satisfy t_min < t_max");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t_min || times[i] > t_max) continue;
    if (!(times[i] + shift > 0.0)) throw std::invalid_argument("fit: nonpositive time in window");
    if (!(values[i] > 0.0)) throw std::invalid_argument("fit: nonpositive value in window");
    x.push_back(std::log(times[i] + shift));
    y.push_back(std::log(values[i]));
  }
  if (x.size() < kMinFitSamples) throw std::invalid_argument("fit: fewer than 8 samples in window");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit: window holds a single distinct time");
  FitResult f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double res = y[i] - (f.intercept + f.slope * x[i]);
    ssr += res * res;
  }
  f.slope_stderr = std::sqrt(ssr / (n - 2.0) / sxx);
  f.t_min = t_min;
  f.t_max = t_max;
  f.samples = x.size();
  return f;
}

}  // namespace

CasimirSpec CasimirSpec::parse(const std::string& name) {
  CasimirSpec c;
  c.name_ = name;
  if (name == "identity") {
    c.kind_ = Kind::Identity;
  } else if (name == "square") {
    c.kind_ = Kind::Square;
  } else if (name.starts_with("indicator[") && name.ends_with("]")) {
    const std::string body = name.substr(10, name.size() - 11);
    const auto comma = body.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("casimir indicator needs [a,b]: " + name);
    c.kind_ = Kind::Indicator;
    c.a_ = parse_double(body.substr(0, comma));
    c.b_ = parse_double(body.substr(comma + 1));
    if (!(c.a_ <= c.b_)) throw std::invalid_argument("casimir indicator needs a <= b: " + name);
  } else {
    throw std::invalid_argument("unknown casimir '" + name + "' (identity, square, indicator[a,b])");
  }
  return c;
}

double CasimirSpec::operator()(double ell) const {
  switch (kind_) {
    case Kind::Identity:
      return ell;
    case Kind::Square:
      return ell * ell;
    case Kind::Indicator:
      return (ell >= a_ && ell <= b_) ? 1.0 : 0.0;
  }
  return 0.0;
}

std::string CasimirSpec::column() const {
  if (kind_ != Kind::Indicator) return name_;
  return "indicator_" + shortest(a_) + "_" + shortest(b_);
}

std::string exponent_label(double p) {
  if (std::isinf(p)) return "inf";
  return replace_dots(shortest(p));
}

double total_mass(const Ensemble& e) {
  double s = 0.0;
  for (double mu : e.weight()) s += mu;
  return s;
}

double kinetic_energy(const Ensemble& e) {
  const auto& k = simd::kernels();
  const std::size_t n = e.size();
  if (e.model() == ModelTag::Classical)
    return 0.5 * k.kinetic_classical(e.r().data(), e.w().data(), e.ell().data(), e.weight().data(), n);
  return k.kinetic_relativistic(e.r().data(), e.w().data(), e.ell().data(), e.weight().data(), n);
}

double field_energy(const FieldTable& t) { return kFieldEnergyCoefficient * field_energy_integral(t); }

double total_energy(const Ensemble& e, const FieldTable& t, bool field_off) {
  return kinetic_energy(e) + (field_off ? 0.0 : field_energy(t));
}

double casimir(const Ensemble& e, const std::function<double(double)>& phi) {
  double s = 0.0;
  const auto ell = e.ell();
  const auto mu = e.weight();
  for (std::size_t i = 0; i < e.size(); ++i) s += mu[i] * phi(ell[i]);
  return s / kFourPiSq;
}

simd::Supremum support_functions(const Ensemble& e) {
  if (e.empty()) throw std::invalid_argument("support_functions: empty ensemble");
  return simd::kernels().supremum(e.r().data(), e.w().data(), e.ell().data(), e.size());
}

DiagnosticRecord compute_record(const Ensemble& e, const FieldTable& t, const DiagnosticsConfig& cfg,
                                std::size_t clamp_events) {
  DiagnosticRecord rec;
  rec.time = e.time();
  rec.total_mass = total_mass(e);
  rec.total_energy = total_energy(e, t, cfg.field_off);
  for (const auto& c : cfg.casimirs) rec.casimirs.push_back(casimir(e, c));
  for (double p : cfg.e_norms) rec.e_norms.push_back(cfg.field_off ? 0.0 : field_lp_norm(t, p));
  const DensityProfile d = density_profile(e, default_density_bins(e, cfg.density_bins));
  for (double q : cfg.rho_norms) rec.rho_norms.push_back(density_lq_norm(d, q, cfg.rho_inner_cutoff));
  const simd::Supremum s = support_functions(e);
  rec.r_sup = s.r;
  rec.w_sup = s.abs_w;
  rec.speed_sup = s.speed;
  rec.clamp_events = clamp_events;
  if (!cfg.field_off) rec.field_lower_bound = field_lp_norm(t, kInf) >= t.total_mass / (s.r * s.r);
  return rec;
}

FitResult fit_exponent(std::span<const double> times, std::span<const double> values, double t_min,
                       double t_max) {
  return least_squares(times, values, t_min, t_max, 0.0);
}

FitResult fit_exponent_shifted(std::span<const double> times, std::span<const double> values, double t_min,
                               double t_max) {
  return least_squares(times, values, t_min, t_max, 1.0);
}

ConvexityReport check_convexity_bounds(const Trajectory& tr, ModelTag model, double slack) {
  ConvexityReport rep;
  if (tr.empty()) return rep;
  const RadialPoint p0 = tr.initial();
  const double t0 = tr.times.front();
  const double r = p0.r, w = p0.w, ell = p0.ell;
  const double gamma0 = std::sqrt(1.0 + w * w + ell / (r * r));
  const bool rel = model == ModelTag::Relativistic;
  const double growth = rel ? (ell / (r * r)) / (gamma0 * gamma0) : ell / (r * r);

  rep.samples = tr.size();
  rep.min_radius = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const RadialPoint& s = tr.states[k];
    const double t = tr.times[k] - t0;
    if (s.r * s.r < growth * t * t * (1.0 - slack)) ++rep.radius_violations;
    rep.min_radius = std::min(rep.min_radius, s.r);
    if (k + 1 < tr.size() && tr.states[k + 1].w < s.w) ++rep.momentum_decreases;
    if (rel) {
      const double g = std::sqrt(1.0 + s.w * s.w + s.ell / (s.r * s.r));
      if (!(std::abs(s.w) / g < 1.0)) ++rep.speed_violations;
    }
  }

  if (w < 0.0 && ell > 0.0) {
    const double d = std::sqrt(ell / (ell + r * r * w * w));
    rep.min_radius_bound = d * r;
    rep.turning_checked = true;
    rep.turning_bound = -w * r * r * r / ell * (rel ? gamma0 : 1.0);
    rep.turning_time = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < tr.size(); ++k) {
      const double wa = tr.states[k].w, wb = tr.states[k + 1].w;
      if (wa < 0.0 && wb >= 0.0) {
        const double ta = tr.times[k] - t0, tb = tr.times[k + 1] - t0;
        rep.turning_time = ta + (tb - ta) * (-wa) / (wb - wa);
        break;
      }
    }
    // W increases along the orbit, so the bound fails only if a sample past it
    // still moves inward; the interpolated crossing is reported, not judged.
    for (std::size_t k = 0; k < tr.size(); ++k)
      if (tr.times[k] - t0 > rep.turning_bound * (1.0 + slack) && tr.states[k].w < 0.0) {
        rep.turning_violation = true;
        break;
      }
  } else {
    rep.min_radius_bound = r;
  }
  rep.min_radius_violation = rep.min_radius < rep.min_radius_bound * (1.0 - slack);
  return rep;
}

double window_max(std::span<const double> times, std::span<const double> values, double a, double b) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < times.size() && i < values.size(); ++i)
    if (times[i] >= a && times[i] <= b) m = std::max(m, values[i]);
  return m;
}

}  // namespace shellvp
