#include "fedcf/personalize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedcf {

void PersonalizationConfig::validate() const {
  if (!(omega >= 0.0) || !std::isfinite(omega)) {
    throw std::invalid_argument("personalization: omega must be finite and >= 0");
  }
  if (steps < 0) {
    throw std::invalid_argument("personalization: steps must be >= 0");
  }
  TrainingConfig t = training;
  t.local_updates = 1;
  t.validate();
}

int default_personalization_steps(int rounds, int local_updates) {
  return std::max(1, (rounds * local_updates) / 4);
}

std::uint64_t personalization_seed(std::uint64_t base_seed,
                                   const std::string& vehicle_id) noexcept {
  return derive_seed(base_seed, vehicle_stream_key(vehicle_id), ~std::uint64_t{0});
}

HyperParams personalize(const HyperParams& anchor, const Dataset& data,
                        const PersonalizationConfig& cfg) {
  cfg.validate();
  data.validate();
  if (cfg.steps == 0) return anchor;
  TrainingConfig t = cfg.training;
  t.local_updates = cfg.steps;
  return sgd_local(anchor, data, t, Proximal{cfg.omega, anchor});
}

}  // namespace fedcf
