#pragma once

#include <cstddef>
#include <vector>

#include "shellvp/phase.hpp"

namespace shellvp {

/// Sampled characteristic (R(t), W(t), ell) of one particle together with the
/// enclosed mass m(t, R(t)) that drove it.
struct Trajectory {
  std::size_t particle = 0;
  std::vector<double> times;
  std::vector<RadialPoint> states;
  std::vector<double> field_mass;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  void append(double t, const RadialPoint& p, double m) {
    times.push_back(t);
    states.push_back(p);
    field_mass.push_back(m);
  }
  const RadialPoint& initial() const { return states.front(); }
  const RadialPoint& last() const { return states.back(); }
};

}  // namespace shellvp
