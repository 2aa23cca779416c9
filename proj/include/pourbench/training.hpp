#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pourbench/lstm.hpp"
#include "pourbench/normalization.hpp"
#include "pourbench/trial.hpp"

namespace pourbench {

struct TrainHyper {
  double lr = 1e-3;
  int epochs = 60;
  int batch = 8;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  double val_frac = 0.1;
  int hidden = 16;
  // Worker threads for gradient evaluation. Results are identical for any
  // value: per-sequence gradients are always reduced in batch order.
  int threads = 1;
};

struct EpochRecord {
  int epoch;  // 0 is the untrained model
  double train_mse;
  double val_mse;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainMetadata {
  std::uint64_t seed = 0;
  int epochs = 0;
  int best_epoch = 0;
  double initial_val_mse = 0.0;
  double best_val_mse = 0.0;
  std::size_t train_trials = 0;
  std::size_t val_trials = 0;
  TrainHyper hyper;
  std::vector<EpochRecord> history;
};

struct ModelCheckpoint {
  LstmParams params;
  NormStats norm;
  TrainMetadata metadata;
};

/// Adam with bias correction over the flat parameter vector.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

/// Rescales `grad` so its Euclidean norm is at most `max_norm`; returns the
/// norm before clipping.
double clip_global_norm(Eigen::VectorXd& grad, double max_norm);

/// Normalized input/target pairs for a trial.
Sequence make_sequence(const Trial& trial, const NormStats& norm);

/// Seeded train/validation split of indices [0, n): (train, validation).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double val_frac, std::uint64_t seed);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Behavioral cloning: fits the recorded velocities with mini-batch Adam and
/// keeps the parameters of the best validation epoch. Throws ConfigError
/// for fewer than 10 trials.
ModelCheckpoint train(std::span<const Trial> trials, const TrainHyper& hyper,
                      const EpochCallback& on_epoch = {});

/// JSON checkpoint with explicit shapes and round-trip-exact numbers.
void save_checkpoint(const ModelCheckpoint& cp, const std::string& path);

/// Throws IoError, ParseError (with byte offset) or ValidationError (shape).
ModelCheckpoint load_checkpoint(const std::string& path);

}  // namespace pourbench
