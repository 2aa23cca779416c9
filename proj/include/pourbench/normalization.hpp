#pragma once

#include <span>

#include "pourbench/trial.hpp"

namespace pourbench {

inline constexpr double kStdFloor = 1e-8;

/// Per-feature z-score statistics, pooled over every time step of every
/// trial. Per-trial scalars count once per step of their trial.
struct NormStats {
  FeatureVector mean{};
  FeatureVector std{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};

  FeatureVector normalize(const FeatureVector& x) const;
  FeatureVector denormalize(const FeatureVector& z) const;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Throws UsageError for an empty collection. Result does not depend on trial
/// order beyond floating-point summation.
NormStats compute_norm_stats(std::span<const Trial> trials);

}  // namespace pourbench
