#include "pourbench/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pourbench/errors.hpp"
#include "pourbench/quadrature.hpp"

namespace pourbench {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr double kMm3PerMl = 1000.0;
constexpr double kQuadratureRelTol = 1e-8;
// Tight enough that volume round trips hold to 1e-4 mL where the capacity
// curve is steepest (wide containers near the base-contact angle).
constexpr double kAngleTol = 1e-10;

void check_angle(double theta) {
  if (!(theta >= 0.0 && theta <= kHalfPi)) {
    throw DomainError("tilt angle " + std::to_string(theta) +
                      " rad outside [0, pi/2]");
  }
}

}  // namespace

ContainerSpec::ContainerSpec(std::string name, double diameter_mm,
                             double height_mm)
    : name_(std::move(name)), diameter_(diameter_mm), height_(height_mm) {
  if (!(diameter_ > 0.0) || !(height_ > 0.0) || !std::isfinite(diameter_) ||
      !std::isfinite(height_)) {
    throw DomainError("container '" + name_ +
                      "' needs positive finite diameter and height");
  }
}

double capacity_upright(const ContainerSpec& c) {
  const double r = c.radius();
  return std::numbers::pi * r * r * c.height() / kMm3PerMl;
}

bool is_wall_case(const ContainerSpec& c, double theta) {
  check_angle(theta);
  if (theta == kHalfPi) return false;
  return std::tan(theta) <= c.height() / (2.0 * c.radius());
}

double tilted_capacity_wall_case(const ContainerSpec& c, double theta) {
  if (!is_wall_case(c, theta)) {
    throw DomainError("liquid surface reaches the base; wall-only form invalid");
  }
  const double r = c.radius();
  const double t = std::tan(theta);
  return std::numbers::pi * (r * r * c.height() - r * r * r * t) / kMm3PerMl;
}

double tilted_capacity(const ContainerSpec& c, double theta) {
  check_angle(theta);
  if (theta == 0.0) return capacity_upright(c);
  if (theta == kHalfPi) return 0.0;

  // x runs across the base along the tilt direction; the lowest rim point
  // sits above x = r. Liquid depth over x is h - (r - x) tan(theta), clipped
  // at zero from x0 downwards. Substituting x = r cos(phi) removes the
  // square-root endpoint singularity of the chord width 2 sqrt(r^2 - x^2).
  const double r = c.radius();
  const double h = c.height();
  const double t = std::tan(theta);
  const double x0 = std::max(-r, r - h / t);
  const double phi0 = std::acos(std::clamp(x0 / r, -1.0, 1.0));

  const auto integrand = [r, h, t](double phi) {
    const double s = std::sin(phi);
    const double depth = h - r * (1.0 - std::cos(phi)) * t;
    return std::max(0.0, depth) * 2.0 * r * r * s * s;
  };
  const double v = numerics::adaptive_simpson(integrand, 0.0, phi0,
                                              kQuadratureRelTol);
  return std::max(0.0, v) / kMm3PerMl;
}

double critical_angle(const ContainerSpec& c, double volume) {
  const double cap = capacity_upright(c);
  if (!(volume >= 0.0 && volume <= cap)) {
    throw DomainError("volume " + std::to_string(volume) +
                      " mL outside [0, capacity " + std::to_string(cap) + "]");
  }
  if (volume >= cap) return 0.0;
  if (volume <= 0.0) return kHalfPi;

  // tilted_capacity is strictly decreasing on [0, pi/2].
  double lo = 0.0;
  double hi = kHalfPi;
  while (hi - lo > kAngleTol) {
    const double mid = 0.5 * (lo + hi);
    if (tilted_capacity(c, mid) > volume) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace pourbench
