// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "binary_io.hpp"
#include "glyco/error.hpp"
#include "glyco/models.hpp"
#include "glyco/rng.hpp"

namespace glyco::models {

Eigen::MatrixXd Elm::hidden_layer(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd z = x * input_weights_.transpose();
  z.rowwise() += input_bias_.transpose();
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

Eigen::VectorXd Elm::solve_primal(const Eigen::MatrixXd& hidden, const Eigen::VectorXd& y, double l2) {
  const auto L = hidden.cols();
  Eigen::MatrixXd a = hidden.transpose() * hidden;
  a.diagonal().array() += l2;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw FitError("ELM primal system is not positive definite");
  Eigen::VectorXd beta = llt.solve(hidden.transpose() * y);
  if (!beta.allFinite() || beta.size() != L) throw FitError("ELM primal solve failed");
  return beta;
}

Eigen::VectorXd Elm::solve_dual(const Eigen::MatrixXd& hidden, const Eigen::VectorXd& y, double l2) {
  Eigen::MatrixXd gram = hidden * hidden.transpose();
  gram.diagonal().array() += l2;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw FitError("ELM dual system is not positive definite");
  Eigen::VectorXd alpha = llt.solve(y);
  if (!alpha.allFinite()) throw FitError("ELM dual solve failed");
  return hidden.transpose() * alpha;
}

void Elm::fit_features(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() == 0) throw ContractError("ELM: empty training set");
  if (config_.hidden_neurons < 1 || !(config_.l2 > 0)) throw ContractError("ELM: invalid configuration");
  const auto d = x.cols();
  const double scale = std::sqrt(3.0 / static_cast<double>(d));
  SplitMix64 rng(config_.seed);
  input_weights_.resize(config_.hidden_neurons, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < input_weights_.rows(); ++i)
      input_weights_(i, j) = scale * rng.uniform(-1.0, 1.0);
  input_bias_.resize(config_.hidden_neurons);
  for (Eigen::Index i = 0; i < input_bias_.size(); ++i) input_bias_[i] = rng.uniform(-1.0, 1.0);

  Eigen::MatrixXd hidden = hidden_layer(x);
  beta_ = config_.hidden_neurons <= x.rows() ? solve_primal(hidden, y, config_.l2)
                                            : solve_dual(hidden, y, config_.l2);
}

Eigen::VectorXd Elm::predict_features(const Eigen::MatrixXd& x) const {
  if (beta_.size() == 0) throw ContractError("ELM used before fit");
  return hidden_layer(x) * beta_;
}

void Elm::fit(std::span<const SampleWindow> train, std::span<const SampleWindow>) {
  fit_features(flatten_features(train), final_targets(train));
}

std::vector<TwoStepPrediction> Elm::predict(std::span<const SampleWindow> windows) const {
  Eigen::VectorXd y = predict_features(flatten_features(windows));
  std::vector<TwoStepPrediction> out(windows.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {y[static_cast<Eigen::Index>(i)], y[static_cast<Eigen::Index>(i)]};
  return out;
}

void Elm::save(std::ostream& out) const {
  detail::write_f64(out, config_.l2);
  detail::write_matrix(out, input_weights_);
  detail::write_matrix(out, input_bias_);
  detail::write_matrix(out, beta_);
}

Elm Elm::load(std::istream& in) {
  Elm elm;
  elm.config_.l2 = detail::read_f64(in);
  elm.input_weights_ = detail::read_matrix(in);
  elm.input_bias_ = detail::read_matrix(in);
  elm.beta_ = detail::read_matrix(in);
  elm.config_.hidden_neurons = static_cast<int>(elm.input_weights_.rows());
  return elm;
}

}  // namespace glyco::models
