// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "glyco/metrics.hpp"
#include "glyco/nnet.hpp"
#include "glyco/preprocess.hpp"

namespace glyco::models {

using nnet::TwoStepPrediction;
using preprocess::SampleWindow;

enum class ModelKind : std::uint8_t { naive = 0, elm = 1, gp = 2, svr = 3, lstm = 4, pclstm = 5 };

std::string_view to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view text);

/// Common contract of every forecaster. Single-output models report the same
/// value for both steps, since re-evaluating them on the window's features
/// reproduces their t + PH prediction.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual ModelKind kind() const = 0;
  /// `valid` is used for early stopping by the recurrent models only.
  virtual void fit(std::span<const SampleWindow> train, std::span<const SampleWindow> valid) = 0;
  virtual std::vector<TwoStepPrediction> predict(std::span<const SampleWindow> windows) const = 0;
  /// Writes the parameter block (without the kind tag).
  virtual void save(std::ostream& out) const = 0;
};

/// Row n = window n's H x 3 features flattened row-major (oldest step first).
Eigen::MatrixXd flatten_features(std::span<const SampleWindow> windows);
Eigen::VectorXd final_targets(std::span<const SampleWindow> windows);

/// Predicts the last observed glucose value (persistence baseline).
class LastValue final : public Predictor {
 public:
  ModelKind kind() const override { return ModelKind::naive; }
  void fit(std::span<const SampleWindow>, std::span<const SampleWindow>) override {}
  std::vector<TwoStepPrediction> predict(std::span<const SampleWindow> windows) const override;
  void save(std::ostream&) const override {}
};

struct ElmConfig {
  int hidden_neurons = 2000;
  double l2 = 500;
  std::uint64_t seed = 0;
};

/// Extreme learning machine: fixed random sigmoid layer, ridge-regressed
/// output weights.
class Elm final : public Predictor {
 public:
  explicit Elm(ElmConfig config = {}) : config_(config) {}
  ModelKind kind() const override { return ModelKind::elm; }
  void fit(std::span<const SampleWindow> train, std::span<const SampleWindow> valid) override;
  std::vector<TwoStepPrediction> predict(std::span<const SampleWindow> windows) const override;
  void save(std::ostream& out) const override;
  static Elm load(std::istream& in);

  /// Fits on a raw feature matrix; exposed for solver tests.
  void fit_features(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
  Eigen::VectorXd predict_features(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd hidden_layer(const Eigen::MatrixXd& x) const;

  /// (H^T H + l2 I)^-1 H^T y
  static Eigen::VectorXd solve_primal(const Eigen::MatrixXd& hidden, const Eigen::VectorXd& y, double l2);
  /// H^T (H H^T + l2 I)^-1 y
  static Eigen::VectorXd solve_dual(const Eigen::MatrixXd& hidden, const Eigen::VectorXd& y, double l2);

  const Eigen::VectorXd& output_weights() const { return beta_; }
  const ElmConfig& config() const { return config_; }

 private:
  ElmConfig config_;
  Eigen::MatrixXd input_weights_;  // neurons x d
  Eigen::VectorXd input_bias_;
  Eigen::VectorXd beta_;
};

struct GpConfig {
  double sigma0_sq = 1e-8;  // dot-product kernel inhomogeneity
  double noise = 1e-2;      // white-noise variance added to observations
};

/// Gaussian-process posterior mean with k(x, x') = sigma0^2 + x . x'.
class GaussianProcess final : public Predictor {
 public:
  explicit GaussianProcess(GpConfig config = {}) : config_(config) {}
  ModelKind kind() const override { return ModelKind::gp; }
  void fit(std::span<const SampleWindow> train, std::span<const SampleWindow> valid) override;
  std::vector<TwoStepPrediction> predict(std::span<const SampleWindow> windows) const override;
  void save(std::ostream& out) const override;
  static GaussianProcess load(std::istream& in);

  void fit_features(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
  Eigen::VectorXd predict_features(const Eigen::MatrixXd& x) const;
  const Eigen::VectorXd& weights() const { return alpha_; }

 private:
  GpConfig config_;
  Eigen::MatrixXd x_train_;
  Eigen::VectorXd alpha_;
};

struct SvrConfig {
  double gamma = 5e-4;
  double epsilon = 0.1;
  double c = 50;
  double tolerance = 1e-3;
  std::int64_t max_iterations = 10'000'000;
};

/// Epsilon-SVR with an RBF kernel, trained by SMO on the 2n-variable dual.
class Svr final : public Predictor {
 public:
  explicit Svr(SvrConfig config = {}) : config_(config) {}
  ModelKind kind() const override { return ModelKind::svr; }
  void fit(std::span<const SampleWindow> train, std::span<const SampleWindow> valid) override;
  std::vector<TwoStepPrediction> predict(std::span<const SampleWindow> windows) const override;
  void save(std::ostream& out) const override;
  static Svr load(std::istream& in);

  void fit_features(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
  Eigen::VectorXd predict_features(const Eigen::MatrixXd& x) const;

  const Eigen::VectorXd& alpha() const { return alpha_; }
  const Eigen::VectorXd& alpha_star() const { return alpha_star_; }
  double bias() const { return bias_; }
  std::int64_t iterations() const { return iterations_; }
  /// Dual objective (maximization form) at the fitted coefficients.
  double dual_objective() const { return dual_objective_; }

  static Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma);

 private:
  SvrConfig config_;
  Eigen::MatrixXd support_;  // rows with a nonzero coefficient
  Eigen::VectorXd coef_;     // alpha - alpha* on support rows
  Eigen::VectorXd alpha_, alpha_star_;
  double bias_ = 0;
  double dual_objective_ = 0;
  std::int64_t iterations_ = 0;
};

struct LstmModelConfig {
  int units = 128;
  nnet::TrainConfig train;  // train.coherence is the coherence factor
};

inline constexpr double kDefaultCoherence = 2.0;

/// Two-output LSTM trained on cMSE. With coherence 0 it is the plain LSTM.
class LstmPredictor final : public Predictor {
 public:
  LstmPredictor(ModelKind kind, LstmModelConfig config);
  ModelKind kind() const override { return kind_; }
  void fit(std::span<const SampleWindow> train, std::span<const SampleWindow> valid) override;
  std::vector<TwoStepPrediction> predict(std::span<const SampleWindow> windows) const override;
  void save(std::ostream& out) const override;
  static LstmPredictor load(std::istream& in, ModelKind kind);

  const nnet::LstmParams& params() const { return params_; }
  const std::vector<nnet::EpochLog>& train_log() const { return log_; }
  const LstmModelConfig& config() const { return config_; }

 private:
  ModelKind kind_;
  LstmModelConfig config_;
  nnet::LstmParams params_;
  int history_ = 0;
  std::vector<nnet::EpochLog> log_;
};

nnet::SequenceData to_sequences(std::span<const SampleWindow> windows);

/// Defaults: 128 units, lr 5e-3, batch 10, L2 1e-4; coherence 0.
std::unique_ptr<LstmPredictor> make_lstm(LstmModelConfig config = {});
/// Same as make_lstm with the coherence factor set (default 2).
std::unique_ptr<LstmPredictor> make_pclstm(LstmModelConfig config = {},
                                           double coherence = kDefaultCoherence);

/// Tagged model file: one kind byte, then the model's parameter block.
void save_model(std::ostream& out, const Predictor& model);
void save_model(const std::filesystem::path& path, const Predictor& model);
std::unique_ptr<Predictor> load_model(std::istream& in);
std::unique_ptr<Predictor> load_model(const std::filesystem::path& path);

/// Final-step predictions in mg/dL, stamped with their target time.
metrics::PredictionTrace predict_trace(const Predictor& model, std::span<const SampleWindow> windows,
                                       const preprocess::Scaler& scaler,
                                       const preprocess::WindowConfig& window_config);

}  // namespace glyco::models
