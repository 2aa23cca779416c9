#include <algorithm>
#include <cmath>
#include <random>

#include "pourbench/errors.hpp"
#include "pourbench/lstm.hpp"
#include "pourbench/seeding.hpp"

namespace pourbench {

GradCheckResult gradient_check(std::uint64_t seed, int hidden, int seq_len, int input_dim,
                               double step) {
  if (seq_len < 1) throw UsageError("gradient check needs seq_len >= 1");
  if (!(step > 0.0)) throw UsageError("gradient check needs a positive step");
  std::mt19937_64 rng(derive_seed(seed, {stable_hash("grad-check")}));
  std::uniform_real_distribution<double> weight(-0.5, 0.5);
  std::normal_distribution<double> normal;

  LstmParams p(input_dim, hidden);
  for (Eigen::Index i = 0; i < p.values().size(); ++i) p.values()[i] = weight(rng);

  std::vector<Sequence> batch(2);
  for (Sequence& s : batch) {
    s.inputs.resize(input_dim, seq_len);
    s.targets.resize(seq_len);
    for (Eigen::Index j = 0; j < s.inputs.size(); ++j) s.inputs.data()[j] = normal(rng);
    for (Eigen::Index j = 0; j < s.targets.size(); ++j) s.targets[j] = normal(rng);
  }

  const Eigen::VectorXd analytic = backward(p, batch).grad.values();
  GradCheckResult result;
  for (const LstmParams::Tensor& t : p.tensors()) {
    double worst = 0.0;
    for (int c = 0; c < t.cols; ++c) {
      for (int r = 0; r < t.rows; ++r) {
        const auto k = static_cast<Eigen::Index>(t.offset) + static_cast<Eigen::Index>(c) * t.stride + r;
        const double saved = p.values()[k];
        p.values()[k] = saved + step;
        const double up = evaluate_loss(p, batch);
        p.values()[k] = saved - step;
        const double down = evaluate_loss(p, batch);
        p.values()[k] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double a = analytic[k];
        const double err =
            std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
        worst = std::max(worst, err);
      }
    }
    result.tensors.push_back({t.name, worst});
    result.max_rel_error = std::max(result.max_rel_error, worst);
  }
  return result;
}

}  // namespace pourbench
