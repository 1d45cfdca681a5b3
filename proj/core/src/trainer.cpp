#include "fedcf/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace fedcf {

void TrainingConfig::validate() const {
  if (local_updates < 1) {
    throw std::invalid_argument("training: local_updates must be >= 1");
  }
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
    throw std::invalid_argument("training: learning_rate must be >= 0");
  }
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw std::invalid_argument("training: lr_decay must be in (0, 1]");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("training: batch_size must be >= 1");
  }
}

std::vector<std::size_t> sample_minibatch(std::size_t n, std::size_t batch_size,
                                          Rng& rng) {
  if (n == 0) throw std::invalid_argument("sample_minibatch: empty dataset");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (batch_size >= n) return idx;
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch_size);
  return idx;
}

std::vector<std::size_t> sample_minibatch(const Dataset& data,
                                          std::size_t batch_size, Rng& rng) {
  return sample_minibatch(data.size(), batch_size, rng);
}

double clip_gradient(LogParams& g, double max_norm) {
  const double norm = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& v : g) v *= scale;
  }
  return norm;
}

LogParams sgd_step(const LogParams& current, LogParams grad, double eta,
                   const std::optional<Proximal>& prox) {
  clip_gradient(grad, kGradientClipNorm);
  LogParams next;
  for (std::size_t j = 0; j < 3; ++j) next[j] = current[j] - eta * grad[j];
  if (prox && prox->omega > 0.0) {
    // argmin_x omega ||x - a||^2 + ||x - next||^2 / (2 eta)
    const double shrink = 2.0 * eta * prox->omega;
    const auto& anchor = prox->anchor.to_log();
    for (std::size_t j = 0; j < 3; ++j) {
      next[j] = (next[j] + shrink * anchor[j]) / (1.0 + shrink);
    }
  }
  return next;
}

HyperParams sgd_local(const HyperParams& start, const Dataset& data,
                      const TrainingConfig& cfg,
                      const std::optional<Proximal>& prox) {
  cfg.validate();
  data.validate();
  if (prox && !(prox->omega >= 0.0 && std::isfinite(prox->omega))) {
    throw std::invalid_argument("sgd_local: omega must be finite and >= 0");
  }

  Rng rng(cfg.seed);
  LogParams theta = start.to_log();
  for (int t = 0; t < cfg.local_updates; ++t) {
    const auto batch = sample_minibatch(data, cfg.batch_size, rng);
    const Dataset mini =
        batch.size() == data.size() ? data : data.subset(batch);

    LossAndGradient lg;
    try {
      lg = nlml_with_grad(HyperParams::from_log(theta), mini);
    } catch (const NumericalError& e) {
      throw TrainingError("step " + std::to_string(t) + ": " + e.what(), t);
    } catch (const std::invalid_argument& e) {
      throw TrainingError("step " + std::to_string(t) + ": " + e.what(), t);
    }
    for (double g : lg.grad) {
      if (!std::isfinite(g)) {
        std::ostringstream msg;
        msg << "non-finite gradient at step " << t << " (log theta = ["
            << theta[0] << ", " << theta[1] << ", " << theta[2]
            << "], loss = " << lg.loss << ")";
        throw TrainingError(msg.str(), t);
      }
    }
    const double eta = cfg.learning_rate * std::pow(cfg.lr_decay, t);
    theta = sgd_step(theta, lg.grad, eta, prox);
  }
  try {
    return HyperParams::from_log(theta);
  } catch (const std::invalid_argument& e) {
    throw TrainingError(e.what(), cfg.local_updates);
  }
}

}  // namespace fedcf
