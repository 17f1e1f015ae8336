// SPDX-License-Identifier: Apache-2.0
#include "glyco/models.hpp"

#include <fstream>

#include "glyco/error.hpp"

namespace glyco::models {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::naive: return "naive";
    case ModelKind::elm: return "elm";
    case ModelKind::gp: return "gp";
    case ModelKind::svr: return "svr";
    case ModelKind::lstm: return "lstm";
    case ModelKind::pclstm: return "pclstm";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view text) {
  for (auto k : {ModelKind::naive, ModelKind::elm, ModelKind::gp, ModelKind::svr, ModelKind::lstm,
                 ModelKind::pclstm})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

Eigen::MatrixXd flatten_features(std::span<const SampleWindow> windows) {
  if (windows.empty()) return {};
  const auto rows = windows.front().features.rows();
  const auto cols = windows.front().features.cols();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(windows.size()), rows * cols);
  for (std::size_t n = 0; n < windows.size(); ++n) {
    const auto& f = windows[n].features;
    if (f.rows() != rows || f.cols() != cols) throw ContractError("inconsistent window shapes");
    for (Eigen::Index r = 0; r < rows; ++r)
      out.block(static_cast<Eigen::Index>(n), r * cols, 1, cols) = f.row(r);
  }
  return out;
}

Eigen::VectorXd final_targets(std::span<const SampleWindow> windows) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(windows.size()));
  for (std::size_t n = 0; n < windows.size(); ++n) y[static_cast<Eigen::Index>(n)] = windows[n].target_final;
  return y;
}

std::vector<TwoStepPrediction> LastValue::predict(std::span<const SampleWindow> windows) const {
  std::vector<TwoStepPrediction> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    double last = w.features(w.features.rows() - 1, preprocess::kGlucose);
    out.push_back({last, last});
  }
  return out;
}

void save_model(std::ostream& out, const Predictor& model) {
  out.put(static_cast<char>(model.kind()));
  model.save(out);
  if (!out) throw Error("failed writing model");
}

void save_model(const std::filesystem::path& path, const Predictor& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  save_model(out, model);
}

std::unique_ptr<Predictor> load_model(std::istream& in) {
  int tag = in.get();
  if (tag == std::char_traits<char>::eof()) throw Error("empty model file");
  switch (static_cast<ModelKind>(tag)) {
    case ModelKind::naive: return std::make_unique<LastValue>();
    case ModelKind::elm: return std::make_unique<Elm>(Elm::load(in));
    case ModelKind::gp: return std::make_unique<GaussianProcess>(GaussianProcess::load(in));
    case ModelKind::svr: return std::make_unique<Svr>(Svr::load(in));
    case ModelKind::lstm:
    case ModelKind::pclstm:
      return std::make_unique<LstmPredictor>(LstmPredictor::load(in, static_cast<ModelKind>(tag)));
  }
  throw Error("unknown model kind tag " + std::to_string(tag));
}

std::unique_ptr<Predictor> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return load_model(in);
}

metrics::PredictionTrace predict_trace(const Predictor& model, std::span<const SampleWindow> windows,
                                       const preprocess::Scaler& scaler,
                                       const preprocess::WindowConfig& window_config) {
  auto preds = model.predict(windows);
  metrics::PredictionTrace trace;
  trace.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    if (!std::isfinite(preds[i].final)) throw NumericError("non-finite prediction");
    trace.push_back({w.prediction_time(window_config),
                     scaler.unscale(preprocess::kGlucose, w.target_final),
                     scaler.unscale(preprocess::kGlucose, preds[i].final), w.segment_id});
  }
  return trace;
}

}  // namespace glyco::models
