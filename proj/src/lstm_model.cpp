// SPDX-License-Identifier: Apache-2.0
#include "glyco/error.hpp"
#include "glyco/models.hpp"

namespace glyco::models {

nnet::SequenceData to_sequences(std::span<const SampleWindow> windows) {
  std::vector<Eigen::MatrixXd> samples;
  std::vector<nnet::TwoStepTarget> targets;
  samples.reserve(windows.size());
  targets.reserve(windows.size());
  for (const auto& w : windows) {
    samples.push_back(w.features);
    targets.push_back({w.target_prev, w.target_final});
  }
  return nnet::SequenceData::from_samples(samples, std::move(targets));
}

LstmPredictor::LstmPredictor(ModelKind kind, LstmModelConfig config) : kind_(kind), config_(config) {
  if (kind != ModelKind::lstm && kind != ModelKind::pclstm)
    throw ContractError("LstmPredictor needs kind lstm or pclstm");
}

void LstmPredictor::fit(std::span<const SampleWindow> train, std::span<const SampleWindow> valid) {
  if (train.empty() || valid.empty()) throw ContractError("LSTM needs training and validation windows");
  auto train_data = to_sequences(train);
  auto valid_data = to_sequences(valid);
  auto init = nnet::init_params(config_.units, preprocess::kChannels, config_.train.seed);
  auto result = nnet::train(std::move(init), train_data, valid_data, config_.train);
  params_ = std::move(result.params);
  log_ = std::move(result.log);
  history_ = train_data.history();
}

std::vector<TwoStepPrediction> LstmPredictor::predict(std::span<const SampleWindow> windows) const {
  if (params_.units() == 0) throw ContractError("LSTM used before fit");
  if (windows.empty()) return {};
  return nnet::lstm_forward(params_, to_sequences(windows));
}

void LstmPredictor::save(std::ostream& out) const { nnet::save_params(out, params_, history_); }

LstmPredictor LstmPredictor::load(std::istream& in, ModelKind kind) {
  LstmPredictor model(kind, {});
  model.params_ = nnet::load_params(in, &model.history_);
  model.config_.units = model.params_.units();
  return model;
}

std::unique_ptr<LstmPredictor> make_lstm(LstmModelConfig config) {
  config.train.coherence = 0.0;
  return std::make_unique<LstmPredictor>(ModelKind::lstm, config);
}

std::unique_ptr<LstmPredictor> make_pclstm(LstmModelConfig config, double coherence) {
  if (coherence < 0) throw ContractError("coherence factor must be >= 0");
  config.train.coherence = coherence;
  return std::make_unique<LstmPredictor>(ModelKind::pclstm, config);
}

}  // namespace glyco::models
