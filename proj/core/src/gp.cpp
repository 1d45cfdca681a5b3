#include "fedcf/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace fedcf {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

// Cholesky factor of K_y plus the relative jitter that made it succeed.
struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

// Only sigma0 K + sigma_eps^2 I has a unit kernel diagonal, so the mean
// diagonal used to scale the jitter is sigma0 + sigma_eps^2.
Factorization factorize(const Eigen::MatrixXd& k_y, const HyperParams& params) {
  const double scale = params.sigma0() + params.sigma_eps() * params.sigma_eps();
  const auto n = k_y.rows();
  double jitter = kInitialJitter;
  for (;;) {
    Eigen::MatrixXd shifted = k_y;
    shifted.diagonal().array() += jitter * scale;
    Factorization f{Eigen::LLT<Eigen::MatrixXd>(shifted), jitter};
    if (f.llt.info() == Eigen::Success &&
        f.llt.matrixLLT().diagonal().allFinite() &&
        (f.llt.matrixLLT().diagonal().array() > 0.0).all()) {
      return f;
    }
    if (jitter * kJitterGrowth > kMaxJitter * (1.0 + 1e-9)) {
      std::ostringstream msg;
      msg << "Cholesky factorization of " << n << "x" << n
          << " covariance failed at jitter " << jitter << " x mean diagonal";
      throw NumericalError(msg.str(), jitter);
    }
    jitter *= kJitterGrowth;
  }
}

Eigen::Map<const Eigen::VectorXd> as_vector(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

void check_inputs(const Dataset& data) { data.validate(); }

}  // namespace

HyperParams::HyperParams(double sigma0, double length_scale,
                         double sigma_eps) {
  if (!positive_finite(sigma0) || !positive_finite(length_scale) ||
      !positive_finite(sigma_eps)) {
    std::ostringstream msg;
    msg << "invalid hyperparameters (sigma0=" << sigma0
        << ", length_scale=" << length_scale << ", sigma_eps=" << sigma_eps
        << "): all must be finite and > 0";
    throw std::invalid_argument(msg.str());
  }
  *this = from_log({std::log(sigma0), std::log(length_scale),
                    std::log(sigma_eps)});
}

HyperParams HyperParams::from_log(const LogParams& log_params) {
  HyperParams p;
  for (std::size_t j = 0; j < 3; ++j) {
    const double raw = std::exp(log_params[j]);
    if (!std::isfinite(log_params[j]) || !positive_finite(raw)) {
      std::ostringstream msg;
      msg << "log-space hyperparameter " << j << " = " << log_params[j]
          << " does not map to a finite positive value";
      throw std::invalid_argument(msg.str());
    }
    p.log_[j] = log_params[j];
    p.raw_[j] = raw;
  }
  return p;
}

void Dataset::validate() const {
  if (inputs.empty()) {
    throw std::invalid_argument("dataset '" + vehicle_id + "' is empty");
  }
  if (inputs.size() != outputs.size()) {
    throw std::invalid_argument("dataset '" + vehicle_id +
                                "': inputs and outputs differ in length");
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!std::isfinite(inputs[i]) || !std::isfinite(outputs[i])) {
      throw std::invalid_argument("dataset '" + vehicle_id +
                                  "': non-finite value at index " +
                                  std::to_string(i));
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.vehicle_id = vehicle_id;
  out.inputs.reserve(indices.size());
  out.outputs.reserve(indices.size());
  for (auto i : indices) {
    out.inputs.push_back(inputs.at(i));
    out.outputs.push_back(outputs.at(i));
  }
  return out;
}

double rbf_kernel(double x1, double x2, double length_scale) {
  if (!positive_finite(length_scale)) {
    throw std::invalid_argument("rbf_kernel: length scale must be > 0");
  }
  const double d = x1 - x2;
  return std::exp(-(d * d) / (2.0 * length_scale * length_scale));
}

Eigen::MatrixXd covariance_matrix(std::span<const double> x1,
                                  std::span<const double> x2,
                                  const HyperParams& params, bool add_noise) {
  if (x1.empty() || x2.empty()) {
    throw std::invalid_argument("covariance_matrix: empty input vector");
  }
  const auto rows = static_cast<Eigen::Index>(x1.size());
  const auto cols = static_cast<Eigen::Index>(x2.size());
  const double inv_two_l2 =
      1.0 / (2.0 * params.length_scale() * params.length_scale());
  Eigen::MatrixXd k(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double d = x1[i] - x2[j];
      k(i, j) = params.sigma0() * std::exp(-d * d * inv_two_l2);
    }
  }
  const bool same =
      x1.size() == x2.size() &&
      (x1.data() == x2.data() || std::equal(x1.begin(), x1.end(), x2.begin()));
  if (add_noise && same) {
    k.diagonal().array() += params.sigma_eps() * params.sigma_eps();
  }
  return k;
}

LossAndGradient nlml_with_grad(const HyperParams& params, const Dataset& data) {
  check_inputs(data);
  const std::span<const double> x(data.inputs);
  const auto n = static_cast<Eigen::Index>(data.size());
  const double inv_n = 1.0 / static_cast<double>(n);

  const Eigen::MatrixXd kernel = covariance_matrix(x, x, params, false);
  Eigen::MatrixXd k_y = kernel;
  k_y.diagonal().array() += params.sigma_eps() * params.sigma_eps();
  const auto f = factorize(k_y, params);

  const auto y = as_vector(data.outputs);
  const Eigen::VectorXd alpha = f.llt.solve(y);
  const double log_det =
      2.0 * f.llt.matrixLLT().diagonal().array().log().sum();

  LossAndGradient out;
  out.loss = inv_n * (0.5 * y.dot(alpha) + 0.5 * log_det +
                      0.5 * static_cast<double>(n) *
                          std::log(2.0 * std::numbers::pi));

  // W = K_y^{-1} - alpha alpha^T; dL/dtheta_j = (1/2n) tr(W dK_y/dtheta_j).
  Eigen::MatrixXd w = f.llt.solve(Eigen::MatrixXd::Identity(n, n));
  w.noalias() -= alpha * alpha.transpose();

  // The jitter term scales with sigma0 + sigma_eps^2 and is differentiated
  // along with the rest of K_y.
  const double jitter = f.jitter;
  const double l2 = params.length_scale() * params.length_scale();
  double tr_sigma0 = jitter * params.sigma0() * w.trace();
  double tr_length = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = x[i] - x[j];
      tr_sigma0 += w(i, j) * kernel(i, j);
      tr_length += w(i, j) * kernel(i, j) * (d * d / l2);
    }
  }
  const double tr_noise = 2.0 * params.sigma_eps() * params.sigma_eps() *
                          (1.0 + jitter) * w.trace();
  out.grad = {0.5 * inv_n * tr_sigma0, 0.5 * inv_n * tr_length,
              0.5 * inv_n * tr_noise};
  return out;
}

double nlml(const HyperParams& params, const Dataset& data) {
  check_inputs(data);
  const std::span<const double> x(data.inputs);
  const auto n = static_cast<Eigen::Index>(data.size());
  const Eigen::MatrixXd k_y = covariance_matrix(x, x, params, true);
  const auto f = factorize(k_y, params);
  const auto y = as_vector(data.outputs);
  const Eigen::VectorXd alpha = f.llt.solve(y);
  const double log_det =
      2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
  return (1.0 / static_cast<double>(n)) *
         (0.5 * y.dot(alpha) + 0.5 * log_det +
          0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi));
}

LogParams nlml_grad(const HyperParams& params, const Dataset& data) {
  return nlml_with_grad(params, data).grad;
}

PosteriorPrediction posterior_predict(const HyperParams& params,
                                      const Dataset& train,
                                      std::span<const double> query_inputs) {
  check_inputs(train);
  PosteriorPrediction out;
  if (query_inputs.empty()) return out;

  const std::span<const double> x(train.inputs);
  const Eigen::MatrixXd k_y = covariance_matrix(x, x, params, true);
  const auto f = factorize(k_y, params);
  const Eigen::MatrixXd k_star =
      covariance_matrix(x, query_inputs, params, false);
  const Eigen::VectorXd alpha = f.llt.solve(as_vector(train.outputs));
  const Eigen::VectorXd mean = k_star.transpose() * alpha;
  // diag(K_ss - K_s^T K_y^{-1} K_s) via v = L^{-1} K_s.
  const Eigen::MatrixXd v = f.llt.matrixL().solve(k_star);
  const Eigen::VectorXd reduction = v.colwise().squaredNorm().transpose();

  out.mean.assign(mean.data(), mean.data() + mean.size());
  out.variance.resize(query_inputs.size());
  for (std::size_t i = 0; i < query_inputs.size(); ++i) {
    out.variance[i] = std::max(0.0, params.sigma0() - reduction[i]);
  }
  return out;
}

}  // namespace fedcf
