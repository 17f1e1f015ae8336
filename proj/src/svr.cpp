// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <string>

#include "binary_io.hpp"
#include "glyco/error.hpp"
#include "glyco/models.hpp"

namespace glyco::models {

namespace {

constexpr double kTau = 1e-12;

// SMO on  min 1/2 b^T Q b + p^T b,  s.t. sum_t s_t b_t = 0, 0 <= b_t <= C,
// with b = [alpha; alpha*], s = [+1; -1], Q_st = s_s s_t K(s mod n, t mod n),
// p = [eps - y; eps + y]. Working pairs use second-order selection.
struct SmoSolver {
  const Eigen::MatrixXd& kernel;
  const Eigen::VectorXd& y;
  double eps, c, tol;
  std::int64_t max_iter;

  Eigen::Index n() const { return y.size(); }
  double sign(Eigen::Index t) const { return t < n() ? 1.0 : -1.0; }
  double q(Eigen::Index s, Eigen::Index t) const {
    return sign(s) * sign(t) * kernel(s % n(), t % n());
  }

  struct Result {
    Eigen::VectorXd beta;
    Eigen::VectorXd grad;
    std::int64_t iterations = 0;
    double violation = 0;
    bool converged = false;
  };

  Result run() const {
    const Eigen::Index l = 2 * n();
    Result r;
    r.beta = Eigen::VectorXd::Zero(l);
    r.grad.resize(l);
    for (Eigen::Index t = 0; t < n(); ++t) {
      r.grad[t] = eps - y[t];
      r.grad[t + n()] = eps + y[t];
    }
    auto at_upper = [&](Eigen::Index t) { return r.beta[t] >= c; };
    auto at_lower = [&](Eigen::Index t) { return r.beta[t] <= 0; };

    for (; r.iterations < max_iter; ++r.iterations) {
      double gmax = -std::numeric_limits<double>::infinity();
      double gmax2 = -std::numeric_limits<double>::infinity();
      Eigen::Index i = -1, j = -1;
      for (Eigen::Index t = 0; t < l; ++t) {
        if (sign(t) > 0) {
          if (!at_upper(t) && -r.grad[t] >= gmax) gmax = -r.grad[t], i = t;
        } else {
          if (!at_lower(t) && r.grad[t] >= gmax) gmax = r.grad[t], i = t;
        }
      }
      double best = std::numeric_limits<double>::infinity();
      if (i >= 0) {
        const double qii = kernel(i % n(), i % n());
        for (Eigen::Index t = 0; t < l; ++t) {
          const double qtt = kernel(t % n(), t % n());
          if (sign(t) > 0) {
            if (at_lower(t)) continue;
            double diff = gmax + r.grad[t];
            gmax2 = std::max(gmax2, r.grad[t]);
            if (diff > 0) {
              double quad = qii + qtt - 2.0 * sign(i) * q(i, t);
              double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
              if (obj <= best) best = obj, j = t;
            }
          } else {
            if (at_upper(t)) continue;
            double diff = gmax - r.grad[t];
            gmax2 = std::max(gmax2, -r.grad[t]);
            if (diff > 0) {
              double quad = qii + qtt + 2.0 * sign(i) * q(i, t);
              double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
              if (obj <= best) best = obj, j = t;
            }
          }
        }
      }
      r.violation = gmax + gmax2;
      if (i < 0 || j < 0 || r.violation < tol) {
        r.converged = true;
        return r;
      }

      const double qii = kernel(i % n(), i % n());
      const double qjj = kernel(j % n(), j % n());
      const double qij = q(i, j);
      const double old_i = r.beta[i], old_j = r.beta[j];
      double& ai = r.beta[i];
      double& aj = r.beta[j];
      if (sign(i) != sign(j)) {
        double quad = qii + qjj + 2.0 * qij;
        if (quad <= 0) quad = kTau;
        double delta = (-r.grad[i] - r.grad[j]) / quad;
        double diff = ai - aj;
        ai += delta;
        aj += delta;
        if (diff > 0) {
          if (aj < 0) aj = 0, ai = diff;
        } else if (ai < 0) {
          ai = 0, aj = -diff;
        }
        if (diff > 0) {
          if (ai > c) ai = c, aj = c - diff;
        } else if (aj > c) {
          aj = c, ai = c + diff;
        }
      } else {
        double quad = qii + qjj - 2.0 * qij;
        if (quad <= 0) quad = kTau;
        double delta = (r.grad[i] - r.grad[j]) / quad;
        double sum = ai + aj;
        ai -= delta;
        aj += delta;
        if (sum > c) {
          if (ai > c) ai = c, aj = sum - c;
        } else if (aj < 0) {
          aj = 0, ai = sum;
        }
        if (sum > c) {
          if (aj > c) aj = c, ai = sum - c;
        } else if (ai < 0) {
          ai = 0, aj = sum;
        }
      }
      const double di = ai - old_i, dj = aj - old_j;
      for (Eigen::Index t = 0; t < l; ++t) r.grad[t] += q(t, i) * di + q(t, j) * dj;
    }
    return r;
  }
};

}  // namespace

Eigen::MatrixXd Svr::rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma) {
  Eigen::VectorXd na = a.rowwise().squaredNorm();
  Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * a * b.transpose();
  d2.colwise() += na;
  d2.rowwise() += nb.transpose();
  return (-gamma * d2.array().max(0.0)).exp().matrix();
}

void Svr::fit_features(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.rows();
  if (n == 0) throw ContractError("SVR: empty training set");
  if (!(config_.gamma > 0) || config_.epsilon < 0 || !(config_.c > 0))
    throw ContractError("SVR: invalid configuration");
  Eigen::MatrixXd k = rbf_kernel(x, x, config_.gamma);
  SmoSolver solver{k, y, config_.epsilon, config_.c, config_.tolerance, config_.max_iterations};
  auto r = solver.run();
  iterations_ = r.iterations;
  if (!r.converged)
    throw FitError("SVR: SMO hit the iteration cap with max KKT violation " + std::to_string(r.violation));

  alpha_ = r.beta.head(n);
  alpha_star_ = r.beta.tail(n);
  // At the optimum alpha_i * alpha*_i = 0; remove any common residue, which
  // keeps alpha - alpha* and the equality constraint intact.
  for (Eigen::Index i = 0; i < n; ++i) {
    double common = std::min(alpha_[i], alpha_star_[i]);
    if (common > 0) alpha_[i] -= common, alpha_star_[i] -= common;
  }

  // Bias from free variables, midpoint of the feasible interval otherwise.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < 2 * n; ++t) {
    const double s = t < n ? 1.0 : -1.0;
    const double yg = s * r.grad[t];
    if (r.beta[t] >= config_.c) {
      if (s < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (r.beta[t] <= 0) {
      if (s > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
  bias_ = -rho;

  Eigen::VectorXd coef = alpha_ - alpha_star_;
  dual_objective_ = -0.5 * coef.dot(k * coef) - config_.epsilon * (alpha_ + alpha_star_).sum() + y.dot(coef);

  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < n; ++i)
    if (coef[i] != 0.0) support.push_back(i);
  support_ = x(support, Eigen::all);
  coef_ = coef(support);
}

Eigen::VectorXd Svr::predict_features(const Eigen::MatrixXd& x) const {
  if (support_.rows() == 0) return Eigen::VectorXd::Constant(x.rows(), bias_);
  return rbf_kernel(x, support_, config_.gamma) * coef_ + Eigen::VectorXd::Constant(x.rows(), bias_);
}

void Svr::fit(std::span<const SampleWindow> train, std::span<const SampleWindow>) {
  fit_features(flatten_features(train), final_targets(train));
}

std::vector<TwoStepPrediction> Svr::predict(std::span<const SampleWindow> windows) const {
  Eigen::VectorXd y = predict_features(flatten_features(windows));
  std::vector<TwoStepPrediction> out(windows.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {y[static_cast<Eigen::Index>(i)], y[static_cast<Eigen::Index>(i)]};
  return out;
}

void Svr::save(std::ostream& out) const {
  detail::write_f64(out, config_.gamma);
  detail::write_f64(out, bias_);
  detail::write_matrix(out, support_);
  detail::write_matrix(out, coef_);
}

Svr Svr::load(std::istream& in) {
  Svr svr;
  svr.config_.gamma = detail::read_f64(in);
  svr.bias_ = detail::read_f64(in);
  svr.support_ = detail::read_matrix(in);
  svr.coef_ = detail::read_matrix(in);
  return svr;
}

}  // namespace glyco::models
