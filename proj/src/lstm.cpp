#include "pourbench/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "pourbench/errors.hpp"

namespace pourbench {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

const char* gate_suffix(Gate g) {
  switch (g) {
    case Gate::kInput: return "i";
    case Gate::kForget: return "f";
    case Gate::kCell: return "c";
    case Gate::kOutput: return "o";
  }
  return "?";
}

constexpr Gate kGates[] = {Gate::kInput, Gate::kForget, Gate::kCell, Gate::kOutput};
constexpr Gate kPeepholeGates[] = {Gate::kInput, Gate::kForget, Gate::kOutput};

// Columns of `cache` for step t hold the activated gates; c and h carry the
// initial state in column 0 and the state after step t in column t + 1.
struct ForwardCache {
  Eigen::MatrixXd gates;
  Eigen::MatrixXd c;
  Eigen::MatrixXd h;
  Eigen::MatrixXd tanh_c;
  Eigen::VectorXd y;
};

void cell_forward(const LstmParams& p, const Eigen::Ref<const Eigen::VectorXd>& x,
                  const Eigen::Ref<const Eigen::VectorXd>& h_prev,
                  const Eigen::Ref<const Eigen::VectorXd>& c_prev,
                  Eigen::Ref<Eigen::VectorXd> gates, Eigen::Ref<Eigen::VectorXd> c,
                  Eigen::Ref<Eigen::VectorXd> tanh_c, Eigen::Ref<Eigen::VectorXd> h) {
  const int H = p.hidden();
  gates.noalias() = p.stacked_input_weights() * x;
  gates.noalias() += p.stacked_recurrent_weights() * h_prev;
  gates += p.stacked_bias();

  auto i = gates.segment(0, H);
  auto f = gates.segment(H, H);
  auto g = gates.segment(2 * H, H);
  auto o = gates.segment(3 * H, H);

  i += p.peephole(Gate::kInput).cwiseProduct(c_prev);
  f += p.peephole(Gate::kForget).cwiseProduct(c_prev);
  i = i.unaryExpr([](double v) { return sigmoid(v); });
  f = f.unaryExpr([](double v) { return sigmoid(v); });
  g = g.array().tanh();

  c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);

  o += p.peephole(Gate::kOutput).cwiseProduct(c);
  o = o.unaryExpr([](double v) { return sigmoid(v); });

  tanh_c = c.array().tanh();
  h = o.cwiseProduct(tanh_c);
}

void check_inputs(const LstmParams& p, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() == 0) throw UsageError("sequence must be nonempty");
  if (inputs.rows() != p.input_dim()) {
    throw UsageError("input has " + std::to_string(inputs.rows()) +
                     " features, model expects " + std::to_string(p.input_dim()));
  }
}

void forward_cached(const LstmParams& p, const Eigen::MatrixXd& inputs,
                    ForwardCache& fc) {
  check_inputs(p, inputs);
  const int H = p.hidden();
  const Eigen::Index T = inputs.cols();
  fc.gates.resize(kNumGates * H, T);
  fc.c = Eigen::MatrixXd::Zero(H, T + 1);
  fc.h = Eigen::MatrixXd::Zero(H, T + 1);
  fc.tanh_c.resize(H, T);
  fc.y.resize(T);
  const auto w_out = p.readout_weights();
  const double b_out = p.readout_bias();
  for (Eigen::Index t = 0; t < T; ++t) {
    cell_forward(p, inputs.col(t), fc.h.col(t), fc.c.col(t), fc.gates.col(t),
                 fc.c.col(t + 1), fc.tanh_c.col(t), fc.h.col(t + 1));
    fc.y(t) = w_out.dot(fc.h.col(t + 1)) + b_out;
  }
}

// Accumulates scale * d(sum_t (y_t - target_t)^2 / 2) into `grad`, i.e. the
// caller picks scale = 2 / N for a mean-squared loss over N steps.
void sequence_backward(const LstmParams& p, const Sequence& seq,
                       const ForwardCache& fc, double scale, LstmParams& grad) {
  const int H = p.hidden();
  const Eigen::Index T = seq.inputs.cols();
  const auto w_out = p.readout_weights();
  const auto p_i = p.peephole(Gate::kInput);
  const auto p_f = p.peephole(Gate::kForget);
  const auto p_o = p.peephole(Gate::kOutput);
  const auto wh = p.stacked_recurrent_weights();

  auto g_wout = grad.readout_weights();
  auto g_pi = grad.peephole(Gate::kInput);
  auto g_pf = grad.peephole(Gate::kForget);
  auto g_po = grad.peephole(Gate::kOutput);
  double g_bout = 0.0;

  Eigen::MatrixXd d_pre(kNumGates * H, T);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dh(H), dc(H);

  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const double dy = scale * (fc.y(t) - seq.targets(t));
    const auto h_t = fc.h.col(t + 1);
    g_wout += dy * h_t;
    g_bout += dy;

    const auto gates = fc.gates.col(t);
    const auto i = gates.segment(0, H).array();
    const auto f = gates.segment(H, H).array();
    const auto g = gates.segment(2 * H, H).array();
    const auto o = gates.segment(3 * H, H).array();
    const auto tc = fc.tanh_c.col(t).array();
    const auto c_prev = fc.c.col(t).array();
    const auto c_t = fc.c.col(t + 1).array();

    dh = dh_next + dy * w_out;

    auto da = d_pre.col(t);
    auto da_i = da.segment(0, H).array();
    auto da_f = da.segment(H, H).array();
    auto da_g = da.segment(2 * H, H).array();
    auto da_o = da.segment(3 * H, H).array();

    da_o = dh.array() * tc * o * (1.0 - o);
    dc = dc_next.array() + dh.array() * o * (1.0 - tc * tc) + da_o * p_o.array();
    da_f = dc.array() * c_prev * f * (1.0 - f);
    da_i = dc.array() * g * i * (1.0 - i);
    da_g = dc.array() * i * (1.0 - g * g);

    g_po.array() += da_o * c_t;
    g_pi.array() += da_i * c_prev;
    g_pf.array() += da_f * c_prev;

    dc_next = (dc.array() * f + da_i * p_i.array() + da_f * p_f.array()).matrix();
    dh_next.noalias() = wh.transpose() * da;
  }

  grad.stacked_input_weights().noalias() += d_pre * seq.inputs.transpose();
  grad.stacked_recurrent_weights().noalias() += d_pre * fc.h.leftCols(T).transpose();
  grad.stacked_bias() += d_pre.rowwise().sum();
  grad.readout_bias() += g_bout;
}

}  // namespace

LstmParams::LstmParams(int input_dim, int hidden)
    : input_dim_(input_dim), hidden_(hidden) {
  if (input_dim < 1 || hidden < 1) {
    throw UsageError("LSTM dimensions must be >= 1");
  }
  const std::size_t H = static_cast<std::size_t>(hidden);
  const std::size_t D = static_cast<std::size_t>(input_dim);
  const std::size_t n = kNumGates * H * (D + H + 1) + 3 * H + H + 1;
  values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
}

std::size_t LstmParams::recurrent_offset() const noexcept {
  return static_cast<std::size_t>(kNumGates * hidden_ * input_dim_);
}

std::size_t LstmParams::bias_offset() const noexcept {
  return recurrent_offset() + static_cast<std::size_t>(kNumGates * hidden_ * hidden_);
}

std::size_t LstmParams::peephole_offset(Gate g) const {
  const std::size_t base = bias_offset() + static_cast<std::size_t>(kNumGates * hidden_);
  const std::size_t H = static_cast<std::size_t>(hidden_);
  switch (g) {
    case Gate::kInput: return base;
    case Gate::kForget: return base + H;
    case Gate::kOutput: return base + 2 * H;
    case Gate::kCell: break;
  }
  throw UsageError("the cell-input gate has no peephole");
}

std::size_t LstmParams::readout_offset() const noexcept {
  return bias_offset() + static_cast<std::size_t>(kNumGates * hidden_ + 3 * hidden_);
}

LstmParams::Matrix LstmParams::stacked_input_weights() {
  return {values_.data() + input_offset(), kNumGates * hidden_, input_dim_,
          Eigen::OuterStride<>(kNumGates * hidden_)};
}
LstmParams::ConstMatrix LstmParams::stacked_input_weights() const {
  return {values_.data() + input_offset(), kNumGates * hidden_, input_dim_,
          Eigen::OuterStride<>(kNumGates * hidden_)};
}
LstmParams::Matrix LstmParams::stacked_recurrent_weights() {
  return {values_.data() + recurrent_offset(), kNumGates * hidden_, hidden_,
          Eigen::OuterStride<>(kNumGates * hidden_)};
}
LstmParams::ConstMatrix LstmParams::stacked_recurrent_weights() const {
  return {values_.data() + recurrent_offset(), kNumGates * hidden_, hidden_,
          Eigen::OuterStride<>(kNumGates * hidden_)};
}
LstmParams::Vector LstmParams::stacked_bias() {
  return {values_.data() + bias_offset(), kNumGates * hidden_};
}
LstmParams::ConstVector LstmParams::stacked_bias() const {
  return {values_.data() + bias_offset(), kNumGates * hidden_};
}

LstmParams::Matrix LstmParams::input_weights(Gate g) {
  return {values_.data() + input_offset() + static_cast<int>(g) * hidden_, hidden_,
          input_dim_, Eigen::OuterStride<>(kNumGates * hidden_)};
}
LstmParams::ConstMatrix LstmParams::input_weights(Gate g) const {
  return {values_.data() + input_offset() + static_cast<int>(g) * hidden_, hidden_,
          input_dim_, Eigen::OuterStride<>(kNumGates * hidden_)};
}
LstmParams::Matrix LstmParams::recurrent_weights(Gate g) {
  return {values_.data() + recurrent_offset() + static_cast<int>(g) * hidden_, hidden_,
          hidden_, Eigen::OuterStride<>(kNumGates * hidden_)};
}
LstmParams::ConstMatrix LstmParams::recurrent_weights(Gate g) const {
  return {values_.data() + recurrent_offset() + static_cast<int>(g) * hidden_, hidden_,
          hidden_, Eigen::OuterStride<>(kNumGates * hidden_)};
}
LstmParams::Vector LstmParams::bias(Gate g) {
  return {values_.data() + bias_offset() + static_cast<int>(g) * hidden_, hidden_};
}
LstmParams::ConstVector LstmParams::bias(Gate g) const {
  return {values_.data() + bias_offset() + static_cast<int>(g) * hidden_, hidden_};
}
LstmParams::Vector LstmParams::peephole(Gate g) {
  return {values_.data() + peephole_offset(g), hidden_};
}
LstmParams::ConstVector LstmParams::peephole(Gate g) const {
  return {values_.data() + peephole_offset(g), hidden_};
}
LstmParams::Vector LstmParams::readout_weights() {
  return {values_.data() + readout_offset(), hidden_};
}
LstmParams::ConstVector LstmParams::readout_weights() const {
  return {values_.data() + readout_offset(), hidden_};
}
double& LstmParams::readout_bias() { return values_[values_.size() - 1]; }
double LstmParams::readout_bias() const { return values_[values_.size() - 1]; }

std::vector<LstmParams::Tensor> LstmParams::tensors() const {
  const int H = hidden_;
  const int D = input_dim_;
  const int S = kNumGates * H;
  std::vector<Tensor> out;
  for (Gate g : kGates) {
    const std::string s = gate_suffix(g);
    const auto row = static_cast<std::size_t>(static_cast<int>(g) * H);
    out.push_back({"W_x" + s, input_offset() + row, H, D, S});
    out.push_back({"W_h" + s, recurrent_offset() + row, H, H, S});
    out.push_back({"b_" + s, bias_offset() + row, H, 1, H});
  }
  for (Gate g : kPeepholeGates) {
    out.push_back({std::string("w_c") + gate_suffix(g), peephole_offset(g), H, 1, H});
  }
  out.push_back({"W_out", readout_offset(), 1, H, 1});
  out.push_back({"b_out", size() - 1, 1, 1, 1});
  return out;
}

LstmParams init_params(std::uint64_t seed, int input_dim, int hidden) {
  LstmParams p(input_dim, hidden);
  std::mt19937_64 rng(seed);
  const auto fill = [&rng](auto&& block, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index c = 0; c < block.cols(); ++c) {
      for (Eigen::Index r = 0; r < block.rows(); ++r) block(r, c) = dist(rng);
    }
  };
  const double gate_fan_in = static_cast<double>(input_dim + hidden);
  fill(p.stacked_input_weights(), gate_fan_in);
  fill(p.stacked_recurrent_weights(), gate_fan_in);
  for (Gate g : kPeepholeGates) fill(p.peephole(g), static_cast<double>(hidden));
  fill(p.readout_weights(), static_cast<double>(hidden));
  p.stacked_bias().setZero();
  p.bias(Gate::kForget).setOnes();
  p.readout_bias() = 0.0;
  return p;
}

LstmState LstmState::zeros(int hidden) {
  return {Eigen::VectorXd::Zero(hidden), Eigen::VectorXd::Zero(hidden)};
}

LstmStepResult lstm_step(const LstmParams& p, const LstmState& s,
                         std::span<const double> x) {
  const int H = p.hidden();
  if (static_cast<int>(x.size()) != p.input_dim()) {
    throw UsageError("input has " + std::to_string(x.size()) +
                     " features, model expects " + std::to_string(p.input_dim()));
  }
  if (s.h.size() != H || s.c.size() != H) {
    throw UsageError("state size does not match hidden size");
  }
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd gates(kNumGates * H), tanh_c(H);
  LstmStepResult out{LstmState::zeros(H), 0.0};
  cell_forward(p, xv, s.h, s.c, gates, out.state.c, tanh_c, out.state.h);
  out.omega = p.readout_weights().dot(out.state.h) + p.readout_bias();
  return out;
}

Eigen::VectorXd forward_sequence(const LstmParams& p, const Eigen::MatrixXd& inputs) {
  ForwardCache fc;
  forward_cached(p, inputs, fc);
  return fc.y;
}

double mse_loss(std::span<const Eigen::VectorXd> pred,
                std::span<const Eigen::VectorXd> target) {
  if (pred.size() != target.size()) {
    throw UsageError("prediction and target counts differ");
  }
  double sum = 0.0;
  double n = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (pred[k].size() != target[k].size()) {
      throw UsageError("prediction and target lengths differ");
    }
    sum += (pred[k] - target[k]).squaredNorm();
    n += static_cast<double>(pred[k].size());
  }
  if (n == 0.0) throw UsageError("mse_loss needs at least one step");
  return sum / n;
}

double evaluate_loss(const LstmParams& p, std::span<const Sequence> batch) {
  if (batch.empty()) throw UsageError("empty batch");
  double sum = 0.0;
  double n = 0.0;
  for (const Sequence& seq : batch) {
    sum += (forward_sequence(p, seq.inputs) - seq.targets).squaredNorm();
    n += static_cast<double>(seq.targets.size());
  }
  return sum / n;
}

Gradient backward(const LstmParams& p, std::span<const Sequence> batch, int threads) {
  if (batch.empty()) throw UsageError("backward needs a nonempty batch");
  double total_steps = 0.0;
  for (const Sequence& seq : batch) {
    check_inputs(p, seq.inputs);
    if (seq.targets.size() != seq.inputs.cols()) {
      throw UsageError("target length does not match input length");
    }
    total_steps += static_cast<double>(seq.targets.size());
  }
  const double scale = 2.0 / total_steps;

  std::vector<LstmParams> partial(batch.size(), LstmParams(p.input_dim(), p.hidden()));
  std::vector<double> sq_err(batch.size(), 0.0);
  const auto work = [&](std::size_t begin, std::size_t end) {
    ForwardCache fc;
    for (std::size_t k = begin; k < end; ++k) {
      forward_cached(p, batch[k].inputs, fc);
      sq_err[k] = (fc.y - batch[k].targets).squaredNorm();
      sequence_backward(p, batch[k], fc, scale, partial[k]);
    }
  };

  const std::size_t n_threads =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, batch.size());
  if (n_threads == 1) {
    work(0, batch.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (batch.size() + n_threads - 1) / n_threads;
    for (std::size_t b = 0; b < batch.size(); b += chunk) {
      pool.emplace_back(work, b, std::min(batch.size(), b + chunk));
    }
  }

  Gradient out{LstmParams(p.input_dim(), p.hidden()), 0.0};
  double sum = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    out.grad.values() += partial[k].values();
    sum += sq_err[k];
  }
  out.loss = sum / total_steps;
  return out;
}

}  // namespace pourbench
