#include "shellvp/field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace shellvp {
namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

double segment_mass(const FieldTable& t, std::size_t k) { return t.mass_below[k] + t.mass_at[k]; }

double mass_at_index(const FieldTable& t, std::size_t idx, double r) {
  if (idx == t.radii.size()) return t.total_mass;
  if (t.radii[idx] == r) return t.mass_below[idx] + 0.5 * t.mass_at[idx];
  return t.mass_below[idx];
}

}  // namespace

void ShellOrder::update(std::span<const double> r) {
  const auto n = static_cast<std::uint32_t>(r.size());
  const auto before = [&r](std::uint32_t a, std::uint32_t b) {
    return r[a] < r[b] || (r[a] == r[b] && a < b);
  };
  if (order_.size() != n) {
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0u);
    std::sort(order_.begin(), order_.end(), before);
    last_moves_ = n;
    return;
  }
  const std::size_t budget = 8 * static_cast<std::size_t>(n) + 64;
  std::size_t moves = 0;
  for (std::uint32_t i = 1; i < n; ++i) {
    const std::uint32_t v = order_[i];
    std::uint32_t j = i;
    while (j > 0 && before(v, order_[j - 1])) {
      order_[j] = order_[j - 1];
      --j;
      ++moves;
    }
    order_[j] = v;
    if (moves > budget) {
      std::sort(order_.begin(), order_.end(), before);
      break;
    }
  }
  last_moves_ = moves;
}

double FieldTable::enclosed_mass(double r) const {
  if (!(r > 0.0)) return 0.0;
  const auto it = std::lower_bound(radii.begin(), radii.end(), r);
  return mass_at_index(*this, static_cast<std::size_t>(it - radii.begin()), r);
}

double FieldTable::enclosed_mass_near(double r, std::size_t hint) const {
  if (!(r > 0.0)) return 0.0;
  const std::size_t n = radii.size();
  if (n == 0) return 0.0;
  if (hint >= n) hint = n - 1;
  // Gallop to a bracket [lo, hi) containing the first radius >= r, then bisect.
  std::size_t lo, hi;
  if (radii[hint] < r) {
    std::size_t step = 1;
    lo = hint + 1;
    hi = lo;
    while (hi < n && radii[hi] < r) {
      lo = hi + 1;
      hi += step;
      step *= 2;
    }
    hi = std::min(hi, n);
  } else {
    std::size_t step = 1;
    hi = hint;
    lo = hint;
    while (lo > 0 && radii[lo - 1] >= r) {
      hi = lo - 1;
      lo = lo > step ? lo - step : 0;
      step *= 2;
    }
  }
  const auto it = std::lower_bound(radii.begin() + static_cast<std::ptrdiff_t>(lo),
                                   radii.begin() + static_cast<std::ptrdiff_t>(hi), r);
  return mass_at_index(*this, static_cast<std::size_t>(it - radii.begin()), r);
}

FieldTable build_field_table(std::span<const double> r, std::span<const double> weight,
                             std::span<const std::uint32_t> order) {
  FieldTable t;
  t.entry_of.resize(r.size());
  double cum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::uint32_t i = order[k];
    if (t.radii.empty() || r[i] != t.radii.back()) {
      t.radii.push_back(r[i]);
      t.mass_below.push_back(cum);
      t.mass_at.push_back(0.0);
    }
    t.mass_at.back() += weight[i];
    cum += weight[i];
    t.entry_of[i] = static_cast<std::uint32_t>(t.radii.size() - 1);
  }
  // Exact cumulative sums in sorted order: mass_below[last] + mass_at[last] == total.
  if (!t.radii.empty()) t.total_mass = t.mass_below.back() + t.mass_at.back();
  return t;
}

FieldTable build_field_table(const Ensemble& e) {
  if (e.empty()) throw std::invalid_argument("build_field_table: empty ensemble");
  ShellOrder order;
  order.update(e.r());
  return build_field_table(e.r(), e.weight(), order.indices());
}

double enclosed_mass(const FieldTable& t, double r) { return t.enclosed_mass(r); }

double field_magnitude(const FieldTable& t, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("field_magnitude: r must be positive");
  return t.enclosed_mass(r) / (r * r);
}

double field_lp_norm(const FieldTable& t, double p) {
  if (std::isinf(p) && p > 0) {
    double best = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (t.radii[k] <= 0.0) continue;
      best = std::max(best, segment_mass(t, k) / (t.radii[k] * t.radii[k]));
    }
    return best;
  }
  if (!(p > 1.5)) throw std::invalid_argument("field_lp_norm: p must exceed 3/2");
  const double e = 3.0 - 2.0 * p;  // < 0
  double sum = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double lo = t.radii[k];
    if (lo <= 0.0) continue;
    const double hi_term = k + 1 < t.size() ? std::pow(t.radii[k + 1], e) : 0.0;
    sum += std::pow(segment_mass(t, k), p) * (std::pow(lo, e) - hi_term);
  }
  return std::pow(kFourPi * sum / (2.0 * p - 3.0), 1.0 / p);
}

double field_energy_integral(const FieldTable& t) {
  double sum = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double lo = t.radii[k];
    if (lo <= 0.0) continue;
    const double m = segment_mass(t, k);
    const double inv_hi = k + 1 < t.size() ? 1.0 / t.radii[k + 1] : 0.0;
    sum += m * m * (1.0 / lo - inv_hi);
  }
  return sum;
}

BinSpec BinSpec::uniform(double lo, double hi, std::size_t count) {
  if (!(hi > lo) || count == 0) throw std::invalid_argument("BinSpec::uniform: need hi > lo and count > 0");
  BinSpec b;
  b.edges.resize(count + 1);
  for (std::size_t i = 0; i <= count; ++i)
    b.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count);
  b.edges.back() = hi;
  return b;
}

BinSpec default_density_bins(const Ensemble& e, std::size_t count) {
  if (e.empty()) throw std::invalid_argument("default_density_bins: empty ensemble");
  const auto [mn, mx] = std::minmax_element(e.r().begin(), e.r().end());
  double lo = *mn, hi = *mx;
  if (!(hi - lo > 1e-12 * std::max(1.0, hi))) {
    const double pad = 1e-3 * std::max(hi, 1.0);
    lo = std::max(0.0, lo - pad);
    hi += pad;
  }
  if (count == 0) count = static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(e.size())) - 1e-9));
  return BinSpec::uniform(lo, hi, std::max<std::size_t>(count, 1));
}

DensityProfile density_profile(const Ensemble& e, const BinSpec& bins) {
  const auto& edges = bins.edges;
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()) || edges.front() < 0.0)
    throw std::invalid_argument("density_profile: bin edges must be increasing, nonnegative, >= 2 entries");
  DensityProfile d;
  d.edges = edges;
  const std::size_t nb = edges.size() - 1;
  d.mass.assign(nb, 0.0);
  d.volume.resize(nb);
  d.density.resize(nb);
  const auto r = e.r();
  const auto mu = e.weight();
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (r[i] < edges.front() || r[i] > edges.back())
      throw std::invalid_argument("density_profile: particle outside the bin range");
    auto it = std::upper_bound(edges.begin(), edges.end(), r[i]);
    std::size_t b = static_cast<std::size_t>(it - edges.begin()) - 1;
    if (b >= nb) b = nb - 1;  // r == last edge
    d.mass[b] += mu[i];
    d.total_mass += mu[i];
  }
  for (std::size_t b = 0; b < nb; ++b) {
    const double lo = edges[b], hi = edges[b + 1];
    d.volume[b] = kFourPi * (hi * hi * hi - lo * lo * lo) / 3.0;
    d.density[b] = d.volume[b] > 0.0 ? d.mass[b] / d.volume[b] : 0.0;
  }
  return d;
}

double density_lq_norm(const DensityProfile& d, double q, double inner_cutoff) {
  if (!(q >= 1.0)) throw std::invalid_argument("density_lq_norm: q must be >= 1");
  if (q == 1.0) return d.total_mass;
  const bool sup = std::isinf(q);
  double acc = 0.0;
  for (std::size_t b = 0; b < d.density.size(); ++b) {
    if (d.edges[b + 1] <= inner_cutoff) continue;
    if (sup)
      acc = std::max(acc, d.density[b]);
    else if (d.density[b] > 0.0)
      acc += std::pow(d.density[b], q) * d.volume[b];
  }
  return sup ? acc : std::pow(acc, 1.0 / q);
}

}  // namespace shellvp
