// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace glyco::nnet {

/// Single-layer LSTM with a scalar affine head shared by the last two steps.
///
/// All parameters live in one flat vector so the optimizer and serializer see
/// a single tensor. Layout (column-major blocks, in this order):
///   input weights      4U x I
///   recurrent weights  4U x U
///   gate biases        4U
///   head weights       U
///   head bias          1
/// Gate rows are ordered input, forget, candidate, output.
class LstmParams {
 public:
  LstmParams() = default;
  LstmParams(int units, int inputs);

  int units() const noexcept { return units_; }
  int inputs() const noexcept { return inputs_; }

  Eigen::VectorXd& data() noexcept { return data_; }
  const Eigen::VectorXd& data() const noexcept { return data_; }

  Eigen::Map<Eigen::MatrixXd> input_weights() { return {ptr(0), 4 * units_, inputs_}; }
  Eigen::Map<const Eigen::MatrixXd> input_weights() const { return {ptr(0), 4 * units_, inputs_}; }
  Eigen::Map<Eigen::MatrixXd> recurrent_weights() { return {ptr(off_wh()), 4 * units_, units_}; }
  Eigen::Map<const Eigen::MatrixXd> recurrent_weights() const {
    return {ptr(off_wh()), 4 * units_, units_};
  }
  Eigen::Map<Eigen::VectorXd> gate_bias() { return {ptr(off_b()), 4 * units_}; }
  Eigen::Map<const Eigen::VectorXd> gate_bias() const { return {ptr(off_b()), 4 * units_}; }
  Eigen::Map<Eigen::VectorXd> head_weights() { return {ptr(off_head()), units_}; }
  Eigen::Map<const Eigen::VectorXd> head_weights() const { return {ptr(off_head()), units_}; }
  double& head_bias() { return data_[off_head() + units_]; }
  double head_bias() const { return data_[off_head() + units_]; }

  /// Mask with 1 on weights and 0 on biases (the L2 penalty's support).
  Eigen::VectorXd weight_mask() const;

  static Eigen::Index size_for(int units, int inputs) {
    return 4 * units * inputs + 4 * units * units + 4 * units + units + 1;
  }

  friend bool operator==(const LstmParams& a, const LstmParams& b) {
    return a.units_ == b.units_ && a.inputs_ == b.inputs_ && a.data_ == b.data_;
  }

 private:
  Eigen::Index off_wh() const { return 4 * units_ * inputs_; }
  Eigen::Index off_b() const { return off_wh() + 4 * units_ * units_; }
  Eigen::Index off_head() const { return off_b() + 4 * units_; }
  double* ptr(Eigen::Index off) { return data_.data() + off; }
  const double* ptr(Eigen::Index off) const { return data_.data() + off; }

  int units_ = 0;
  int inputs_ = 0;
  Eigen::VectorXd data_;
};

/// Uniform(+-1/sqrt(units)) weights, forget-gate bias 1, other biases 0.
LstmParams init_params(int units, int inputs, std::uint64_t seed);

struct TwoStepPrediction {
  double prev = 0;   // y at t + PH - 1
  double final = 0;  // y at t + PH

  double variation() const { return final - prev; }
  friend bool operator==(const TwoStepPrediction&, const TwoStepPrediction&) = default;
};
using TwoStepTarget = TwoStepPrediction;

/// Sequences stored time-major: `steps[k]` is the I x N input at step k for
/// all N samples.
struct SequenceData {
  std::vector<Eigen::MatrixXd> steps;
  std::vector<TwoStepTarget> targets;

  int history() const { return static_cast<int>(steps.size()); }
  Eigen::Index count() const { return steps.empty() ? 0 : steps.front().cols(); }
  /// Packs per-sample H x I matrices.
  static SequenceData from_samples(std::span<const Eigen::MatrixXd> samples,
                                   std::vector<TwoStepTarget> targets);
  SequenceData select(std::span<const Eigen::Index> columns) const;
};

/// Activations kept for backpropagation through time.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> gates;   // 4U x B, post-nonlinearity
  std::vector<Eigen::MatrixXd> cell;    // U x B
  std::vector<Eigen::MatrixXd> cell_tanh;
  std::vector<Eigen::MatrixXd> hidden;  // U x B
  std::vector<TwoStepPrediction> outputs;
};

ForwardCache lstm_forward_cached(const LstmParams& params, const SequenceData& batch);
std::vector<TwoStepPrediction> lstm_forward(const LstmParams& params, const SequenceData& data);
/// Single sequence, H x I.
TwoStepPrediction lstm_forward(const LstmParams& params, const Eigen::MatrixXd& sequence);

double loss_mse(std::span<const double> preds, std::span<const double> targets);

/// (1/n) sum (y_final - yhat_final)^2 + c (dy - dyhat)^2. With
/// `accuracy_on_both` the previous step adds its own squared error.
double loss_cmse(std::span<const TwoStepPrediction> preds, std::span<const TwoStepTarget> targets,
                 double coherence, bool accuracy_on_both = false);

struct LossConfig {
  double coherence = 0;
  double l2_penalty = 0;
  bool accuracy_on_both = false;
};

struct LossAndGradient {
  double loss = 0;  // cMSE + l2 * sum(weights^2)
  Eigen::VectorXd gradient;
};

LossAndGradient lstm_backward(const LstmParams& params, const SequenceData& batch,
                              const ForwardCache& cache, const LossConfig& config);
LossAndGradient lstm_loss_and_gradient(const LstmParams& params, const SequenceData& batch,
                                       const LossConfig& config);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Eigen::VectorXd m, v;
  std::int64_t step = 0;
};

void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& gradient,
               double learning_rate);

struct TrainConfig {
  double learning_rate = 5e-3;
  int batch_size = 10;
  double l2_penalty = 1e-4;
  double coherence = 0;
  int max_epochs = 500;
  int patience = 10;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;  // <= 0 disables clipping
  bool accuracy_on_both = false;
};

struct EpochLog {
  int epoch = 0;  // 0 is the initialization
  double train_loss = 0;
  double valid_loss = 0;
};

struct TrainResult {
  LstmParams params;  // best validation epoch
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

TrainResult train(LstmParams params, const SequenceData& train_data, const SequenceData& valid_data,
                  const TrainConfig& config);

/// Objective without the L2 term, evaluated in chunks.
double evaluate_loss(const LstmParams& params, const SequenceData& data, double coherence,
                     bool accuracy_on_both = false);

/// `PCL1` | u32 units | u32 history | f64 x size_for(units, 3), little-endian.
void save_params(std::ostream& out, const LstmParams& params, int history);
LstmParams load_params(std::istream& in, int* history = nullptr);

}  // namespace glyco::nnet
