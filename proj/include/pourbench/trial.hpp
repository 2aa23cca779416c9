#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pourbench {

/// Input features in the order the velocity generator consumes them.
enum class Feature : std::size_t {
  kVolTotal = 0,
  kVol2Pour,
  kDiameter,
  kHeight,
  kTheta,
  kVolume,
};
inline constexpr std::size_t kNumFeatures = 6;
using FeatureVector = std::array<double, kNumFeatures>;

/// One pouring demonstration or closed-loop run. theta, vol and omega are
/// sampled every dt; omega[k] is the command applied after observing
/// (theta[k], vol[k]).
struct Trial {
  double vol_total = 0.0;
  double vol_2pour = 0.0;
  double d = 0.0;
  double h = 0.0;
  double dt = 0.0;
  std::vector<double> theta;
  std::vector<double> vol;
  std::vector<double> omega;

  // Provenance; optional in files.
  std::string container;
  std::string liquid = "water";
  double viscosity = 1.0;

  std::size_t size() const noexcept { return theta.size(); }

  FeatureVector features(std::size_t step) const;

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;

  friend bool operator==(const Trial&, const Trial&) = default;
};

/// Finite-difference velocity: (theta[k+1] - theta[k]) / dt, last entry
/// repeated. Throws UsageError for fewer than two samples.
std::vector<double> derive_omega(std::span<const double> theta, double dt);

/// JSON-lines: one trial object per line. Loading fills a missing omega
/// field via derive_omega and validates every record.
void save_trials(const std::filesystem::path& path, std::span<const Trial> trials);

/// Errors carry the 1-based line number of the offending record.
std::vector<Trial> load_trials(const std::filesystem::path& path);

}  // namespace pourbench
