#pragma once

#include <cstdint>
#include <string>

#include "fedcf/gp.hpp"
#include "fedcf/trainer.hpp"

namespace fedcf {

/// Fine-tuning of the federated parameters on one vehicle's data under the
/// penalty omega * ||theta - anchor||^2 (log space).
struct PersonalizationConfig {
  double omega = 1.0;
  int steps = 0;
  /// learning_rate, lr_decay, batch_size and seed; local_updates is
  /// replaced by `steps`.
  TrainingConfig training;

  void validate() const;
};

/// Default step budget: a quarter of the federated S * U updates.
int default_personalization_steps(int rounds, int local_updates);

/// Seed of the personalization stream of one vehicle; disjoint from the
/// per-round federation streams.
std::uint64_t personalization_seed(std::uint64_t base_seed,
                                   const std::string& vehicle_id) noexcept;

/// Returns `anchor` unchanged when cfg.steps == 0.
HyperParams personalize(const HyperParams& anchor, const Dataset& data,
                        const PersonalizationConfig& cfg);

}  // namespace fedcf
