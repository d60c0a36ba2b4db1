#include "shellvp/phase.hpp"

#include <cmath>

namespace shellvp {

std::string_view to_string(ModelTag model) {
  return model == ModelTag::Classical ? "classical" : "relativistic";
}

ModelTag parse_model(std::string_view name) {
  if (name == "classical") return ModelTag::Classical;
  if (name == "relativistic") return ModelTag::Relativistic;
  throw std::invalid_argument("unknown model '" + std::string(name) +
                              "' (expected classical or relativistic)");
}

RadialPoint cartesian_to_radial(const Vec3& x, const Vec3& v) {
  const double r = std::hypot(x[0], x[1], x[2]);
  if (!(r > 0.0)) throw std::invalid_argument("cartesian_to_radial: |x| must be positive");
  const double xv = x[0] * v[0] + x[1] * v[1] + x[2] * v[2];
  const Vec3 c{x[1] * v[2] - x[2] * v[1], x[2] * v[0] - x[0] * v[2], x[0] * v[1] - x[1] * v[0]};
  return {r, xv / r, c[0] * c[0] + c[1] * c[1] + c[2] * c[2]};
}

double speed_squared(const RadialPoint& p) {
  if (!(p.r > 0.0)) throw std::invalid_argument("speed_squared: r must be positive");
  return p.w * p.w + p.ell / (p.r * p.r);
}

void Ensemble::reserve(std::size_t n) {
  r_.reserve(n);
  w_.reserve(n);
  ell_.reserve(n);
  weight_.reserve(n);
}

void Ensemble::push_back(const Particle& p) {
  if (!(p.state.r > 0.0) || p.state.ell < 0.0 || p.weight < 0.0)
    throw std::invalid_argument("particle with non-positive r or negative ell or weight");
  r_.push_back(p.state.r);
  w_.push_back(p.state.w);
  ell_.push_back(p.state.ell);
  weight_.push_back(p.weight);
}

}  // namespace shellvp
