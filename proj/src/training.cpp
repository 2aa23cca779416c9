#include "pourbench/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pourbench/errors.hpp"
#include "pourbench/seeding.hpp"

namespace pourbench {

namespace {
constexpr std::size_t kMinTrials = 10;
}

AdamOptimizer::AdamOptimizer(std::size_t n, double lr, double beta1, double beta2,
                             double eps)
    : lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -=
      lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

double clip_global_norm(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm && norm > 0.0) grad *= max_norm / norm;
  return norm;
}

Sequence make_sequence(const Trial& trial, const NormStats& norm) {
  const auto T = static_cast<Eigen::Index>(trial.size());
  Sequence seq{Eigen::MatrixXd(kNumFeatures, T), Eigen::VectorXd(T)};
  for (Eigen::Index k = 0; k < T; ++k) {
    const FeatureVector z = norm.normalize(trial.features(static_cast<std::size_t>(k)));
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
      seq.inputs(static_cast<Eigen::Index>(i), k) = z[i];
    }
    seq.targets(k) = trial.omega[static_cast<std::size_t>(k)];
  }
  return seq;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double val_frac, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, {stable_hash("split")}));
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_val = static_cast<std::size_t>(std::lround(val_frac * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> tr(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(val.begin(), val.end());
  std::sort(tr.begin(), tr.end());
  return {tr, val};
}

ModelCheckpoint train(std::span<const Trial> trials, const TrainHyper& hyper,
                      const EpochCallback& on_epoch) {
  if (trials.size() < kMinTrials) {
    throw ConfigError("training needs at least " + std::to_string(kMinTrials) +
                      " trials, got " + std::to_string(trials.size()));
  }
  if (hyper.epochs < 0 || hyper.batch < 1 || !(hyper.lr > 0.0) ||
      !(hyper.clip_norm > 0.0) || !(hyper.val_frac > 0.0 && hyper.val_frac < 1.0)) {
    throw ConfigError("invalid training hyperparameters");
  }

  const auto [train_idx, val_idx] = split_indices(trials.size(), hyper.val_frac, hyper.seed);
  std::vector<Trial> train_trials;
  for (std::size_t k : train_idx) train_trials.push_back(trials[k]);

  ModelCheckpoint cp;
  cp.norm = compute_norm_stats(train_trials);
  cp.params = init_params(derive_seed(hyper.seed, {stable_hash("init")}),
                          static_cast<int>(kNumFeatures), hyper.hidden);

  std::vector<Sequence> train_set;
  std::vector<Sequence> val_set;
  for (const Trial& t : train_trials) train_set.push_back(make_sequence(t, cp.norm));
  for (std::size_t k : val_idx) val_set.push_back(make_sequence(trials[k], cp.norm));

  TrainMetadata& meta = cp.metadata;
  meta.seed = hyper.seed;
  meta.epochs = hyper.epochs;
  meta.hyper = hyper;
  meta.train_trials = train_set.size();
  meta.val_trials = val_set.size();

  const EpochRecord initial{0, evaluate_loss(cp.params, train_set),
                            evaluate_loss(cp.params, val_set)};
  meta.history.push_back(initial);
  meta.initial_val_mse = initial.val_mse;
  meta.best_val_mse = initial.val_mse;
  meta.best_epoch = 0;
  if (on_epoch) on_epoch(initial);

  LstmParams current = cp.params;
  AdamOptimizer adam(current.size(), hyper.lr);
  std::mt19937_64 shuffle_rng(derive_seed(hyper.seed, {stable_hash("shuffle")}));
  const std::span<const Sequence> all(train_set);
  const auto batch_size = static_cast<std::size_t>(hyper.batch);

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::shuffle(train_set.begin(), train_set.end(), shuffle_rng);
    double sq_sum = 0.0;
    double steps = 0.0;
    for (std::size_t b = 0; b < all.size(); b += batch_size) {
      const auto batch = all.subspan(b, std::min(batch_size, all.size() - b));
      double batch_steps = 0.0;
      for (const Sequence& s : batch) batch_steps += static_cast<double>(s.targets.size());
      Gradient g = backward(current, batch, hyper.threads);
      sq_sum += g.loss * batch_steps;
      steps += batch_steps;
      clip_global_norm(g.grad.values(), hyper.clip_norm);
      adam.step(current.values(), g.grad.values());
    }
    const EpochRecord rec{epoch, sq_sum / steps, evaluate_loss(current, val_set)};
    meta.history.push_back(rec);
    if (rec.val_mse < meta.best_val_mse) {
      meta.best_val_mse = rec.val_mse;
      meta.best_epoch = epoch;
      cp.params = current;
    }
    if (on_epoch) on_epoch(rec);
  }
  return cp;
}

}  // namespace pourbench
