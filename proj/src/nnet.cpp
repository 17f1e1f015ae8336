// SPDX-License-Identifier: Apache-2.0
#include "glyco/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>

#include "binary_io.hpp"
#include "glyco/error.hpp"
#include "glyco/rng.hpp"

namespace glyco::nnet {

namespace {

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

constexpr Eigen::Index kEvalChunk = 512;

}  // namespace

LstmParams::LstmParams(int units, int inputs)
    : units_(units), inputs_(inputs), data_(Eigen::VectorXd::Zero(size_for(units, inputs))) {
  if (units < 1 || inputs < 1) throw ContractError("LSTM needs at least one unit and one input");
}

Eigen::VectorXd LstmParams::weight_mask() const {
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(data_.size());
  mask.segment(off_b(), 4 * units_).setZero();
  mask[off_head() + units_] = 0.0;
  return mask;
}

LstmParams init_params(int units, int inputs, std::uint64_t seed) {
  LstmParams p(units, inputs);
  SplitMix64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(units));
  auto fill = [&](auto&& block) {
    for (Eigen::Index j = 0; j < block.cols(); ++j)
      for (Eigen::Index i = 0; i < block.rows(); ++i) block(i, j) = rng.uniform(-bound, bound);
  };
  fill(p.input_weights());
  fill(p.recurrent_weights());
  auto head = p.head_weights();
  for (Eigen::Index i = 0; i < head.size(); ++i) head[i] = rng.uniform(-bound, bound);
  p.gate_bias().segment(units, units).setOnes();
  return p;
}

SequenceData SequenceData::from_samples(std::span<const Eigen::MatrixXd> samples,
                                        std::vector<TwoStepTarget> targets) {
  if (samples.size() != targets.size()) throw ContractError("samples and targets differ in length");
  SequenceData out;
  out.targets = std::move(targets);
  if (samples.empty()) return out;
  const auto H = samples.front().rows();
  const auto I = samples.front().cols();
  const auto N = static_cast<Eigen::Index>(samples.size());
  out.steps.assign(static_cast<std::size_t>(H), Eigen::MatrixXd(I, N));
  for (Eigen::Index n = 0; n < N; ++n) {
    const auto& s = samples[static_cast<std::size_t>(n)];
    if (s.rows() != H || s.cols() != I) throw ContractError("inconsistent sample shapes");
    for (Eigen::Index k = 0; k < H; ++k) out.steps[static_cast<std::size_t>(k)].col(n) = s.row(k).transpose();
  }
  return out;
}

SequenceData SequenceData::select(std::span<const Eigen::Index> columns) const {
  SequenceData out;
  out.steps.reserve(steps.size());
  std::vector<Eigen::Index> idx(columns.begin(), columns.end());
  for (const auto& s : steps) out.steps.emplace_back(s(Eigen::all, idx));
  out.targets.reserve(columns.size());
  for (auto c : columns) out.targets.push_back(targets[static_cast<std::size_t>(c)]);
  return out;
}

ForwardCache lstm_forward_cached(const LstmParams& params, const SequenceData& batch) {
  const int H = batch.history();
  const int U = params.units();
  const Eigen::Index B = batch.count();
  if (H < 2) throw ContractError("sequences need at least 2 steps");
  if (batch.steps.front().rows() != params.inputs())
    throw ContractError("input width does not match the network");

  ForwardCache cache;
  cache.gates.reserve(static_cast<std::size_t>(H));
  cache.cell.reserve(static_cast<std::size_t>(H));
  cache.cell_tanh.reserve(static_cast<std::size_t>(H));
  cache.hidden.reserve(static_cast<std::size_t>(H));

  const auto Wx = params.input_weights();
  const auto Wh = params.recurrent_weights();
  const auto b = params.gate_bias();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(U, B);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(U, B);
  Eigen::MatrixXd z(4 * U, B);
  for (int t = 0; t < H; ++t) {
    z.noalias() = Wx * batch.steps[static_cast<std::size_t>(t)];
    z.noalias() += Wh * h;
    z.colwise() += b;
    Eigen::MatrixXd gates(4 * U, B);
    gates.topRows(2 * U) = sigmoid(z.topRows(2 * U));
    gates.middleRows(2 * U, U) = z.middleRows(2 * U, U).array().tanh().matrix();
    gates.bottomRows(U) = sigmoid(z.bottomRows(U));
    c = (gates.middleRows(U, U).array() * c.array() +
         gates.topRows(U).array() * gates.middleRows(2 * U, U).array())
            .matrix();
    Eigen::MatrixXd ct = c.array().tanh().matrix();
    h = (gates.bottomRows(U).array() * ct.array()).matrix();
    cache.gates.push_back(std::move(gates));
    cache.cell.push_back(c);
    cache.cell_tanh.push_back(std::move(ct));
    cache.hidden.push_back(h);
  }

  const auto w = params.head_weights();
  const double b0 = params.head_bias();
  Eigen::RowVectorXd prev = w.transpose() * cache.hidden[static_cast<std::size_t>(H - 2)];
  Eigen::RowVectorXd fin = w.transpose() * cache.hidden[static_cast<std::size_t>(H - 1)];
  cache.outputs.resize(static_cast<std::size_t>(B));
  for (Eigen::Index n = 0; n < B; ++n) {
    auto& o = cache.outputs[static_cast<std::size_t>(n)];
    o.prev = prev[n] + b0;
    o.final = fin[n] + b0;
    if (!std::isfinite(o.prev) || !std::isfinite(o.final))
      throw NumericError("non-finite LSTM output");
  }
  return cache;
}

std::vector<TwoStepPrediction> lstm_forward(const LstmParams& params, const SequenceData& data) {
  std::vector<TwoStepPrediction> out;
  out.reserve(static_cast<std::size_t>(data.count()));
  std::vector<Eigen::Index> cols;
  for (Eigen::Index begin = 0; begin < data.count(); begin += kEvalChunk) {
    Eigen::Index end = std::min(data.count(), begin + kEvalChunk);
    cols.resize(static_cast<std::size_t>(end - begin));
    std::iota(cols.begin(), cols.end(), begin);
    auto cache = lstm_forward_cached(params, data.select(cols));
    out.insert(out.end(), cache.outputs.begin(), cache.outputs.end());
  }
  return out;
}

TwoStepPrediction lstm_forward(const LstmParams& params, const Eigen::MatrixXd& sequence) {
  Eigen::MatrixXd copy = sequence;
  auto data = SequenceData::from_samples(std::span(&copy, 1), {TwoStepTarget{}});
  return lstm_forward_cached(params, data).outputs.front();
}

double loss_mse(std::span<const double> preds, std::span<const double> targets) {
  if (preds.size() != targets.size()) throw ContractError("loss_mse: length mismatch");
  if (preds.empty()) throw ContractError("loss_mse: empty input");
  double acc = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double e = targets[i] - preds[i];
    acc += e * e;
  }
  return acc / static_cast<double>(preds.size());
}

double loss_cmse(std::span<const TwoStepPrediction> preds, std::span<const TwoStepTarget> targets,
                 double coherence, bool accuracy_on_both) {
  if (preds.size() != targets.size()) throw ContractError("loss_cmse: length mismatch");
  if (preds.empty()) throw ContractError("loss_cmse: empty input");
  if (coherence < 0) throw ContractError("loss_cmse: negative coherence factor");
  double acc = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double e = targets[i].final - preds[i].final;
    double d = targets[i].variation() - preds[i].variation();
    double term = e * e + coherence * (d * d);
    if (accuracy_on_both) {
      double ep = targets[i].prev - preds[i].prev;
      term += ep * ep;
    }
    acc += term;
  }
  return acc / static_cast<double>(preds.size());
}

LossAndGradient lstm_backward(const LstmParams& params, const SequenceData& batch,
                              const ForwardCache& cache, const LossConfig& config) {
  const int H = batch.history();
  const int U = params.units();
  const Eigen::Index B = batch.count();
  const double inv_n = 1.0 / static_cast<double>(B);

  LossAndGradient out;
  out.loss = loss_cmse(cache.outputs, batch.targets, config.coherence, config.accuracy_on_both);
  out.gradient = Eigen::VectorXd::Zero(params.data().size());
  LstmParams grad(U, params.inputs());

  // d loss / d outputs
  Eigen::RowVectorXd d_prev(B), d_final(B);
  for (Eigen::Index n = 0; n < B; ++n) {
    const auto& o = cache.outputs[static_cast<std::size_t>(n)];
    const auto& y = batch.targets[static_cast<std::size_t>(n)];
    double e = o.final - y.final;
    double dv = o.variation() - y.variation();
    d_final[n] = 2.0 * inv_n * (e + config.coherence * dv);
    d_prev[n] = -2.0 * inv_n * config.coherence * dv;
    if (config.accuracy_on_both) d_prev[n] += 2.0 * inv_n * (o.prev - y.prev);
  }

  const auto w = params.head_weights();
  const auto& h_last = cache.hidden[static_cast<std::size_t>(H - 1)];
  const auto& h_before = cache.hidden[static_cast<std::size_t>(H - 2)];
  grad.head_weights() = h_last * d_final.transpose() + h_before * d_prev.transpose();
  grad.head_bias() = d_final.sum() + d_prev.sum();

  const auto Wh = params.recurrent_weights();
  auto dWx = grad.input_weights();
  auto dWh = grad.recurrent_weights();
  auto db = grad.gate_bias();

  Eigen::MatrixXd dh = w * d_final;  // U x B
  Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(U, B);
  Eigen::MatrixXd dz(4 * U, B);
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(U, B);
  for (int t = H - 1; t >= 0; --t) {
    const auto st = static_cast<std::size_t>(t);
    if (t == H - 2) dh.noalias() += w * d_prev;
    const auto& g = cache.gates[st];
    auto i = g.topRows(U).array();
    auto f = g.middleRows(U, U).array();
    auto cand = g.middleRows(2 * U, U).array();
    auto o = g.bottomRows(U).array();
    auto ct = cache.cell_tanh[st].array();
    const auto& c_prev = t > 0 ? cache.cell[st - 1] : zeros;
    const auto& h_prev = t > 0 ? cache.hidden[st - 1] : zeros;

    dc.array() += dh.array() * o * (1.0 - ct.square());
    dz.bottomRows(U) = (dh.array() * ct * o * (1.0 - o)).matrix();
    dz.topRows(U) = (dc.array() * cand * i * (1.0 - i)).matrix();
    dz.middleRows(U, U) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
    dz.middleRows(2 * U, U) = (dc.array() * i * (1.0 - cand.square())).matrix();

    dWx.noalias() += dz * batch.steps[st].transpose();
    if (t > 0) dWh.noalias() += dz * h_prev.transpose();
    db += dz.rowwise().sum();

    dc.array() *= f;
    dh.noalias() = Wh.transpose() * dz;
  }

  out.gradient = std::move(grad.data());
  if (config.l2_penalty > 0) {
    Eigen::VectorXd masked = params.data().cwiseProduct(params.weight_mask());
    out.loss += config.l2_penalty * masked.squaredNorm();
    out.gradient += 2.0 * config.l2_penalty * masked;
  }
  return out;
}

LossAndGradient lstm_loss_and_gradient(const LstmParams& params, const SequenceData& batch,
                                       const LossConfig& config) {
  auto cache = lstm_forward_cached(params, batch);
  return lstm_backward(params, batch, cache, config);
}

void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& gradient,
               double learning_rate) {
  if (gradient.size() != params.size()) throw ContractError("adam_step: shape mismatch");
  if (state.m.size() != params.size()) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
    state.step = 0;
  }
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * gradient;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * gradient.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= learning_rate * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + state.epsilon);
}

double evaluate_loss(const LstmParams& params, const SequenceData& data, double coherence,
                     bool accuracy_on_both) {
  auto preds = lstm_forward(params, data);
  return loss_cmse(preds, data.targets, coherence, accuracy_on_both);
}

TrainResult train(LstmParams params, const SequenceData& train_data, const SequenceData& valid_data,
                  const TrainConfig& config) {
  if (train_data.count() == 0 || valid_data.count() == 0)
    throw ContractError("train: empty training or validation set");
  if (!(config.learning_rate > 0) || config.batch_size < 1 || config.coherence < 0)
    throw ContractError("train: invalid configuration");

  const LossConfig loss_config{config.coherence, config.l2_penalty, config.accuracy_on_both};
  SplitMix64 rng(config.seed ^ 0x5DEECE66DULL);
  AdamState adam;

  TrainResult result;
  result.params = params;
  double best = evaluate_loss(params, valid_data, config.coherence, config.accuracy_on_both);
  double init_train = evaluate_loss(params, train_data, config.coherence, config.accuracy_on_both);
  if (!std::isfinite(best) || !std::isfinite(init_train))
    throw TrainingError(0, "non-finite initial loss");
  result.log.push_back({0, init_train, best});

  std::vector<Eigen::Index> order(static_cast<std::size_t>(train_data.count()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  int waited = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0;
    Eigen::Index seen = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      auto batch = train_data.select(std::span(order).subspan(begin, end - begin));
      LossAndGradient lg;
      try {
        lg = lstm_loss_and_gradient(params, batch, loss_config);
      } catch (const NumericError& e) {
        throw TrainingError(epoch, e.what());
      }
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite())
        throw TrainingError(epoch, "training diverged (non-finite loss)");
      if (config.clip_norm > 0) {
        double norm = lg.gradient.norm();
        if (norm > config.clip_norm) lg.gradient *= config.clip_norm / norm;
      }
      adam_step(adam, params.data(), lg.gradient, config.learning_rate);
      loss_sum += lg.loss * static_cast<double>(end - begin);
      seen += static_cast<Eigen::Index>(end - begin);
    }
    double valid_loss;
    try {
      valid_loss = evaluate_loss(params, valid_data, config.coherence, config.accuracy_on_both);
    } catch (const NumericError& e) {
      throw TrainingError(epoch, e.what());
    }
    if (!std::isfinite(valid_loss)) throw TrainingError(epoch, "non-finite validation loss");
    result.log.push_back({epoch, loss_sum / static_cast<double>(seen), valid_loss});
    if (valid_loss < best) {
      best = valid_loss;
      result.params = params;
      result.best_epoch = epoch;
      waited = 0;
    } else if (++waited >= config.patience) {
      break;
    }
  }
  return result;
}

using detail::read_f64;
using detail::read_u32;
using detail::write_f64;
using detail::write_u32;

void save_params(std::ostream& out, const LstmParams& params, int history) {
  if (params.inputs() != 3) throw ContractError("parameter files assume 3 input channels");
  out.write("PCL1", 4);
  write_u32(out, static_cast<std::uint32_t>(params.units()));
  write_u32(out, static_cast<std::uint32_t>(history));
  for (Eigen::Index i = 0; i < params.data().size(); ++i) write_f64(out, params.data()[i]);
}

LstmParams load_params(std::istream& in, int* history) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "PCL1", 4) != 0)
    throw Error("not a PCL1 parameter file");
  auto units = static_cast<int>(read_u32(in));
  auto h = static_cast<int>(read_u32(in));
  if (units < 1 || units > 1 << 16) throw Error("implausible unit count in parameter file");
  LstmParams p(units, 3);
  for (Eigen::Index i = 0; i < p.data().size(); ++i) p.data()[i] = read_f64(in);
  if (history) *history = h;
  return p;
}

}  // namespace glyco::nnet
