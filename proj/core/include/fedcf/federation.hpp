#pragma once

// Synchronous knowledge sharing: each round the coordinator broadcasts the
// global parameters, every vehicle runs local SGD from them on its own data,
// and the coordinator replaces the global parameters by the size-weighted
// average of the local results (taken in log space).
//
// The coordinator only ever talks to VehicleClient, which exposes a
// cardinality and parameter-valued calls. Datasets stay inside the clients.

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedcf/gp.hpp"
#include "fedcf/trainer.hpp"

namespace fedcf {

struct FederationConfig {
  int rounds = 20;  // S
  TrainingConfig training;
  HyperParams initial_params;
  bool parallel = true;

  void validate() const;
};

struct FederationWeights {
  std::vector<double> alphas;

  void validate() const;
};

struct RoundRecord {
  HyperParams global;                // aggregate at the end of the round
  std::vector<HyperParams> locals;   // theta_v after local SGD
  std::vector<double> local_nlml;    // full-batch loss of theta_v on D_v
  std::vector<double> global_nlml;   // full-batch loss of the aggregate on D_v
};

struct FederationHistory {
  std::vector<std::string> vehicle_ids;
  std::vector<double> alphas;
  std::vector<RoundRecord> rounds;

  /// sum_v alpha_v * global_nlml[v] for the given round.
  double weighted_global_nlml(std::size_t round) const;
};

struct FederationResult {
  HyperParams global;
  FederationHistory history;
};

class FederationError : public std::runtime_error {
 public:
  FederationError(const std::string& what, std::string vehicle_id, int round)
      : std::runtime_error(what),
        vehicle_id_(std::move(vehicle_id)),
        round_(round) {}
  const std::string& vehicle_id() const noexcept { return vehicle_id_; }
  int round() const noexcept { return round_; }

 private:
  std::string vehicle_id_;
  int round_;
};

/// A participant as seen from the coordinator.
class VehicleClient {
 public:
  virtual ~VehicleClient() = default;

  virtual std::string id() const = 0;
  virtual std::size_t sample_count() const = 0;
  /// Local SGD from `global`; cfg.seed is already the per-round stream seed.
  virtual HyperParams local_update(const HyperParams& global,
                                   const TrainingConfig& cfg) = 0;
  /// Full-batch scaled NLML of `params` on the client's own data.
  virtual double evaluate(const HyperParams& params) const = 0;
};

/// Client that owns a Dataset and trains with sgd_local.
class LocalVehicle final : public VehicleClient {
 public:
  explicit LocalVehicle(Dataset data);

  std::string id() const override { return data_.vehicle_id; }
  std::size_t sample_count() const override { return data_.size(); }
  HyperParams local_update(const HyperParams& global,
                           const TrainingConfig& cfg) override;
  double evaluate(const HyperParams& params) const override;

 private:
  Dataset data_;
};

/// Seed used by vehicle `vehicle_id` in round `round` (0-based).
std::uint64_t round_seed(std::uint64_t base_seed, const std::string& vehicle_id,
                         int round) noexcept;

/// alpha_v = N_v / sum N.
FederationWeights compute_weights(std::span<const std::size_t> sizes);

/// Weighted average of log-parameters, evaluated as x_0 + sum alpha_v (x_v -
/// x_0) so that identical inputs reproduce themselves exactly.
HyperParams aggregate(std::span<const HyperParams> locals,
                      const FederationWeights& weights);

/// What one vehicle would reach on its own: cfg.rounds chained sgd_local
/// calls with the same per-round seeds a federation would give it.
HyperParams train_local_rounds(const HyperParams& start, const Dataset& data,
                               const FederationConfig& cfg);

FederationResult run_federation(std::span<VehicleClient* const> vehicles,
                                const FederationConfig& cfg);

FederationResult run_federation(const std::vector<Dataset>& datasets,
                                const FederationConfig& cfg);

}  // namespace fedcf
