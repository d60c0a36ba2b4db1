#pragma once

// Reduced phase space of a spherically symmetric particle distribution.
//
// A particle is a spherical shell described by its radius r, radial momentum
// w = x.v/|x| and squared angular momentum ell = |x cross v|^2.  The squared
// speed is w^2 + ell/r^2.

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace shellvp {

enum class ModelTag { Classical, Relativistic };

std::string_view to_string(ModelTag model);
ModelTag parse_model(std::string_view name);

struct RadialPoint {
  double r = 0.0;
  double w = 0.0;
  double ell = 0.0;

  friend bool operator==(const RadialPoint&, const RadialPoint&) = default;
};

struct Particle {
  RadialPoint state;
  double weight = 0.0;
};

using Vec3 = std::array<double, 3>;

/// Converts a Cartesian position/velocity pair to reduced coordinates.
/// Throws std::invalid_argument for |x| == 0, where w is undefined.
RadialPoint cartesian_to_radial(const Vec3& x, const Vec3& v);

/// w^2 + ell/r^2.  Throws std::invalid_argument for r <= 0.
double speed_squared(const RadialPoint& p);

/// The discrete distribution f(t): one shell per particle, stored as parallel
/// arrays so the push kernels can stream over them.  ell and weight are never
/// modified after construction.
class Ensemble {
 public:
  Ensemble() = default;
  explicit Ensemble(ModelTag model, double time = 0.0) : model_(model), time_(time) {}

  void reserve(std::size_t n);
  void push_back(const Particle& p);

  std::size_t size() const { return r_.size(); }
  bool empty() const { return r_.empty(); }

  Particle particle(std::size_t i) const { return {{r_[i], w_[i], ell_[i]}, weight_[i]}; }
  RadialPoint state(std::size_t i) const { return {r_[i], w_[i], ell_[i]}; }

  std::span<const double> r() const { return r_; }
  std::span<const double> w() const { return w_; }
  std::span<const double> ell() const { return ell_; }
  std::span<const double> weight() const { return weight_; }

  // Only the dynamics may move particles; everything else reads.
  std::span<double> mutable_r() { return r_; }
  std::span<double> mutable_w() { return w_; }

  ModelTag model() const { return model_; }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

 private:
  ModelTag model_ = ModelTag::Classical;
  double time_ = 0.0;
  std::vector<double> r_, w_, ell_, weight_;
};

}  // namespace shellvp
