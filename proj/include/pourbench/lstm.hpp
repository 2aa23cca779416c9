#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pourbench {

/// Gate order inside the stacked weight matrices.
enum class Gate : int { kInput = 0, kForget = 1, kCell = 2, kOutput = 3 };
inline constexpr int kNumGates = 4;

/// Parameters of a single-layer peephole LSTM with a scalar linear readout.
///
/// All scalars live in one flat vector so optimizers, clipping and gradient
/// checks can treat the model as a point in R^n. The gate weights are stored
/// stacked [input; forget; cell; output] along rows, which lets a step compute
/// all pre-activations with one product; per-gate accessors are strided views.
class LstmParams {
 public:
  using Matrix = Eigen::Map<Eigen::MatrixXd, 0, Eigen::OuterStride<>>;
  using ConstMatrix = Eigen::Map<const Eigen::MatrixXd, 0, Eigen::OuterStride<>>;
  using Vector = Eigen::Map<Eigen::VectorXd>;
  using ConstVector = Eigen::Map<const Eigen::VectorXd>;

  /// Named tensor inside the flat vector. Matrices are column-major with
  /// leading dimension `stride`.
  struct Tensor {
    std::string name;
    std::size_t offset;
    int rows;
    int cols;
    int stride;
  };

  LstmParams() : LstmParams(6, 16) {}
  /// Zero-initialized parameters. Throws UsageError unless both dims >= 1.
  LstmParams(int input_dim, int hidden);

  int input_dim() const noexcept { return input_dim_; }
  int hidden() const noexcept { return hidden_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

  Eigen::VectorXd& values() noexcept { return values_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }

  // Stacked views: 4H x D, 4H x H, 4H.
  Matrix stacked_input_weights();
  ConstMatrix stacked_input_weights() const;
  Matrix stacked_recurrent_weights();
  ConstMatrix stacked_recurrent_weights() const;
  Vector stacked_bias();
  ConstVector stacked_bias() const;

  // Per-gate views: H x D, H x H, H.
  Matrix input_weights(Gate g);
  ConstMatrix input_weights(Gate g) const;
  Matrix recurrent_weights(Gate g);
  ConstMatrix recurrent_weights(Gate g) const;
  Vector bias(Gate g);
  ConstVector bias(Gate g) const;

  /// Diagonal peephole weights; the cell-input gate has none (UsageError).
  Vector peephole(Gate g);
  ConstVector peephole(Gate g) const;

  Vector readout_weights();
  ConstVector readout_weights() const;
  double& readout_bias();
  double readout_bias() const;

  /// Every named tensor in a fixed order, for serialization and reporting.
  std::vector<Tensor> tensors() const;

  friend bool operator==(const LstmParams& a, const LstmParams& b) {
    return a.input_dim_ == b.input_dim_ && a.hidden_ == b.hidden_ &&
           a.values_ == b.values_;
  }

 private:
  std::size_t input_offset() const noexcept { return 0; }
  std::size_t recurrent_offset() const noexcept;
  std::size_t bias_offset() const noexcept;
  std::size_t peephole_offset(Gate g) const;
  std::size_t readout_offset() const noexcept;

  int input_dim_;
  int hidden_;
  Eigen::VectorXd values_;
};

/// Uniform weights in +-1/sqrt(fan_in), forget-gate bias +1, other biases 0.
/// fan_in is input_dim + hidden for gate rows, hidden for the readout and
/// the peepholes.
LstmParams init_params(std::uint64_t seed, int input_dim = 6, int hidden = 16);

struct LstmState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;

  static LstmState zeros(int hidden);
};

struct LstmStepResult {
  LstmState state;
  double omega;
};

/// One peephole step. Input and forget gates read the previous cell state,
/// the output gate reads the updated one. Throws UsageError on dimension
/// mismatch.
LstmStepResult lstm_step(const LstmParams& p, const LstmState& s,
                         std::span<const double> x);

/// Runs from the zero state over the columns of `inputs` (input_dim x T).
/// Throws UsageError for an empty sequence.
Eigen::VectorXd forward_sequence(const LstmParams& p, const Eigen::MatrixXd& inputs);

/// A supervised sequence: inputs (input_dim x T) and per-step targets (T).
struct Sequence {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd targets;
};

/// Mean of squared errors over every step of every sequence.
/// Throws UsageError on count or length mismatch.
double mse_loss(std::span<const Eigen::VectorXd> pred,
                std::span<const Eigen::VectorXd> target);

/// Loss of the model over a set of sequences.
double evaluate_loss(const LstmParams& p, std::span<const Sequence> batch);

struct Gradient {
  LstmParams grad;
  double loss;
};

/// Exact gradient of mse_loss over the batch by backpropagation through time.
/// Per-sequence gradients are summed in batch order, so the result does not
/// depend on `threads`. Throws UsageError for an empty batch.
Gradient backward(const LstmParams& p, std::span<const Sequence> batch,
                  int threads = 1);

struct TensorCheck {
  std::string name;
  double max_rel_error;
};

struct GradCheckResult {
  double max_rel_error = 0.0;  // over every parameter
  std::vector<TensorCheck> tensors;
};

/// Compares backward() with central differences on a random network and a
/// random two-sequence batch. The error of one entry is
/// |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult gradient_check(std::uint64_t seed, int hidden = 2, int seq_len = 5,
                               int input_dim = 6, double step = 1e-6);

}  // namespace pourbench
