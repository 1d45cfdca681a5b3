#pragma once

// Zero-mean Gaussian-process regression with an RBF kernel on scalar inputs.
//
// The covariance is c(x, x') = sigma0 * exp(-(x - x')^2 / (2 l^2)) and the
// observation model adds iid noise with standard deviation sigma_eps. All
// linear algebra goes through a Cholesky factorization of
// K_y = sigma0 K + sigma_eps^2 I; explicit inverses are never formed.

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fedcf {

/// Thrown when a symmetric positive-definite factorization cannot be
/// completed even at the largest jitter level.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double attempted_jitter)
      : std::runtime_error(what), attempted_jitter_(attempted_jitter) {}

  double attempted_jitter() const noexcept { return attempted_jitter_; }

 private:
  double attempted_jitter_;
};

/// Log-space coordinates (log sigma0, log l, log sigma_eps) used by the
/// optimizer, the aggregator and the proximal penalty.
using LogParams = std::array<double, 3>;

/// (sigma0, length_scale, sigma_eps): output variance scale, RBF length
/// scale in m/s, observation-noise standard deviation in m/s.
///
/// The canonical representation is log space; the positive values are
/// always exp() of the stored logs, so to_log/from_log is exact and
/// construction from positive values round-trips to within rounding.
class HyperParams {
 public:
  HyperParams() = default;
  /// Throws std::invalid_argument unless every value is finite and > 0.
  HyperParams(double sigma0, double length_scale, double sigma_eps);

  /// Throws std::invalid_argument if any exponentiated value is not a
  /// finite positive number.
  static HyperParams from_log(const LogParams& log_params);
  const LogParams& to_log() const noexcept { return log_; }

  double sigma0() const noexcept { return raw_[0]; }
  double length_scale() const noexcept { return raw_[1]; }
  double sigma_eps() const noexcept { return raw_[2]; }

  friend bool operator==(const HyperParams& a, const HyperParams& b) {
    return a.log_ == b.log_;
  }

 private:
  LogParams log_{0.0, 0.0, 0.0};
  std::array<double, 3> raw_{1.0, 1.0, 1.0};
};

struct Dataset {
  std::vector<double> inputs;   // leader speed, m/s
  std::vector<double> outputs;  // follower speed, m/s
  std::string vehicle_id;

  std::size_t size() const noexcept { return inputs.size(); }
  /// Throws std::invalid_argument on empty, mismatched or non-finite data.
  void validate() const;
  /// Restriction to the given indices, in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;
};

struct PosteriorPrediction {
  std::vector<double> mean;
  std::vector<double> variance;
};

// Jitter policy: jitter_factor * mean(diag K_y) is added to the diagonal,
// starting at kInitialJitter and escalating by kJitterGrowth up to
// kMaxJitter before giving up.
inline constexpr double kInitialJitter = 1e-8;
inline constexpr double kJitterGrowth = 10.0;
inline constexpr double kMaxJitter = 1e-2;

double rbf_kernel(double x1, double x2, double length_scale);

Eigen::MatrixXd covariance_matrix(std::span<const double> x1,
                                  std::span<const double> x2,
                                  const HyperParams& params, bool add_noise);

/// Scaled negative log marginal likelihood, -(1/n) log p(y | X, theta).
double nlml(const HyperParams& params, const Dataset& data);

/// Gradient of nlml with respect to the log-space parameters.
LogParams nlml_grad(const HyperParams& params, const Dataset& data);

struct LossAndGradient {
  double loss = 0.0;
  LogParams grad{};
};

/// nlml and nlml_grad sharing one factorization.
LossAndGradient nlml_with_grad(const HyperParams& params, const Dataset& data);

PosteriorPrediction posterior_predict(const HyperParams& params,
                                      const Dataset& train,
                                      std::span<const double> query_inputs);

}  // namespace fedcf
