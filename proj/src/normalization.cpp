#include "pourbench/normalization.hpp"

#include <algorithm>
#include <cmath>

#include "pourbench/errors.hpp"

namespace pourbench {

FeatureVector NormStats::normalize(const FeatureVector& x) const {
  FeatureVector z;
  for (std::size_t i = 0; i < kNumFeatures; ++i) z[i] = (x[i] - mean[i]) / std[i];
  return z;
}

FeatureVector NormStats::denormalize(const FeatureVector& z) const {
  FeatureVector x;
  for (std::size_t i = 0; i < kNumFeatures; ++i) x[i] = z[i] * std[i] + mean[i];
  return x;
}

NormStats compute_norm_stats(std::span<const Trial> trials) {
  if (trials.empty()) throw UsageError("normalization needs at least one trial");

  // Two passes for a stable variance.
  double count = 0.0;
  FeatureVector sum{};
  for (const Trial& t : trials) {
    for (std::size_t k = 0; k < t.size(); ++k) {
      const FeatureVector x = t.features(k);
      for (std::size_t i = 0; i < kNumFeatures; ++i) sum[i] += x[i];
    }
    count += static_cast<double>(t.size());
  }
  NormStats stats;
  for (std::size_t i = 0; i < kNumFeatures; ++i) stats.mean[i] = sum[i] / count;

  FeatureVector sq{};
  for (const Trial& t : trials) {
    for (std::size_t k = 0; k < t.size(); ++k) {
      const FeatureVector x = t.features(k);
      for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const double d = x[i] - stats.mean[i];
        sq[i] += d * d;
      }
    }
  }
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    stats.std[i] = std::max(kStdFloor, std::sqrt(sq[i] / count));
  }
  return stats;
}

}  // namespace pourbench
