#pragma once

// Mini-batch SGD on the scaled GP marginal likelihood, in log-parameter
// space. Used for standalone local training, inside federation rounds and
// for proximal personalization.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedcf/gp.hpp"
#include "fedcf/random.hpp"

namespace fedcf {

inline constexpr double kGradientClipNorm = 10.0;

struct TrainingConfig {
  int local_updates = 50;       // U
  double learning_rate = 0.05;  // eta at t = 0
  double lr_decay = 1.0;        // eta_t = eta * lr_decay^t
  std::size_t batch_size = 32;  // clamped to N_v
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument. A zero learning rate is allowed.
  void validate() const;
};

/// Penalty omega * ||theta - anchor||^2 in log space.
struct Proximal {
  double omega = 0.0;
  HyperParams anchor;
};

/// Raised when a local update cannot proceed; carries the step index.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int step)
      : std::runtime_error(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// batch_size distinct indices drawn uniformly without replacement by a
/// partial Fisher-Yates shuffle. When batch_size >= n, returns 0..n-1 in
/// order without consuming randomness.
std::vector<std::size_t> sample_minibatch(std::size_t n, std::size_t batch_size,
                                          Rng& rng);
std::vector<std::size_t> sample_minibatch(const Dataset& data,
                                          std::size_t batch_size, Rng& rng);

/// Scales g in place so its L2 norm is at most max_norm; returns the
/// original norm.
double clip_gradient(LogParams& g, double max_norm);

/// One update from log-params `current`: theta - eta * clip(g), followed by
/// the closed-form proximal map of omega ||theta - anchor||^2 when `prox`
/// is set.
LogParams sgd_step(const LogParams& current, LogParams grad, double eta,
                   const std::optional<Proximal>& prox);

/// Exactly cfg.local_updates steps; returns theta^(U).
HyperParams sgd_local(const HyperParams& start, const Dataset& data,
                      const TrainingConfig& cfg,
                      const std::optional<Proximal>& prox = std::nullopt);

}  // namespace fedcf
