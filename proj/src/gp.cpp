// SPDX-License-Identifier: Apache-2.0
#include "binary_io.hpp"
#include "glyco/error.hpp"
#include "glyco/models.hpp"

namespace glyco::models {

void GaussianProcess::fit_features(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() == 0) throw ContractError("GP: empty training set");
  if (!(config_.noise > 0) || config_.sigma0_sq < 0) throw ContractError("GP: invalid configuration");
  Eigen::MatrixXd k = x * x.transpose();
  k.array() += config_.sigma0_sq;
  k.diagonal().array() += config_.noise;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success)
    throw FitError("GP kernel matrix is not positive definite; try a larger noise variance");
  alpha_ = llt.solve(y);
  if (!alpha_.allFinite()) throw FitError("GP solve produced non-finite weights; try a larger noise variance");
  x_train_ = x;
}

Eigen::VectorXd GaussianProcess::predict_features(const Eigen::MatrixXd& x) const {
  if (alpha_.size() == 0) throw ContractError("GP used before fit");
  Eigen::MatrixXd k_star = x * x_train_.transpose();
  k_star.array() += config_.sigma0_sq;
  return k_star * alpha_;
}

void GaussianProcess::fit(std::span<const SampleWindow> train, std::span<const SampleWindow>) {
  fit_features(flatten_features(train), final_targets(train));
}

std::vector<TwoStepPrediction> GaussianProcess::predict(std::span<const SampleWindow> windows) const {
  Eigen::VectorXd y = predict_features(flatten_features(windows));
  std::vector<TwoStepPrediction> out(windows.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {y[static_cast<Eigen::Index>(i)], y[static_cast<Eigen::Index>(i)]};
  return out;
}

void GaussianProcess::save(std::ostream& out) const {
  detail::write_f64(out, config_.sigma0_sq);
  detail::write_f64(out, config_.noise);
  detail::write_matrix(out, x_train_);
  detail::write_matrix(out, alpha_);
}

GaussianProcess GaussianProcess::load(std::istream& in) {
  GaussianProcess gp;
  gp.config_.sigma0_sq = detail::read_f64(in);
  gp.config_.noise = detail::read_f64(in);
  gp.x_train_ = detail::read_matrix(in);
  gp.alpha_ = detail::read_matrix(in);
  return gp;
}

}  // namespace glyco::models
