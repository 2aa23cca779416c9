#pragma once

#include <string>

namespace pourbench {

/// Source container idealized as an upright right circular cylinder.
/// Lengths in millimeters.
class ContainerSpec {
 public:
  /// Throws DomainError unless diameter > 0 and height > 0.
  ContainerSpec(std::string name, double diameter_mm, double height_mm);

  const std::string& name() const noexcept { return name_; }
  double diameter() const noexcept { return diameter_; }
  double height() const noexcept { return height_; }
  double radius() const noexcept { return 0.5 * diameter_; }

  friend bool operator==(const ContainerSpec&, const ContainerSpec&) = default;

 private:
  std::string name_;
  double diameter_;
  double height_;
};

/// Volume of the upright cylinder, in mL.
double capacity_upright(const ContainerSpec& c);

/// Volume (mL) the container holds below the horizontal plane through its
/// lowest rim point when tilted by `theta` radians from upright.
///
/// Integrates the liquid cross-sections across the base by adaptive
/// quadrature at 1e-8 relative tolerance. Throws DomainError for theta
/// outside [0, pi/2].
double tilted_capacity(const ContainerSpec& c, double theta);

/// Closed form of tilted_capacity valid while the liquid surface still meets
/// the wall on both sides (tan(theta) <= h / d). Throws DomainError otherwise.
double tilted_capacity_wall_case(const ContainerSpec& c, double theta);

/// True when tilted_capacity_wall_case applies at `theta`.
bool is_wall_case(const ContainerSpec& c, double theta);

/// Smallest tilt at which `volume` mL starts to spill over the rim.
/// Bisection to better than 1e-6 rad. Throws DomainError unless 0 <= volume <= capacity.
double critical_angle(const ContainerSpec& c, double volume);

}  // namespace pourbench
