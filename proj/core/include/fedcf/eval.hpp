#pragma once

// Metrics, the pooled-data baseline and the two experiment drivers:
//
//  * experiment 1 trains three vehicles on disjoint driving scenarios and
//    checks whether each can reproduce a full traffic oscillation, before
//    and after knowledge sharing;
//  * experiment 2 compares a single model trained on pooled data from an
//    aggressive and a passive AV against federated training followed by
//    per-vehicle personalization.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedcf/cf_sim.hpp"
#include "fedcf/data.hpp"
#include "fedcf/federation.hpp"
#include "fedcf/gp.hpp"
#include "fedcf/personalize.hpp"
#include "fedcf/trainer.hpp"

namespace fedcf {

double rmse(std::span<const double> pred, std::span<const double> actual);

/// (max - min of pred) / (max - min of actual). Throws when `actual` is
/// constant.
double oscillation_coverage(std::span<const double> pred,
                            std::span<const double> actual);

/// Concatenates the datasets and runs sgd_local on the union from `start`.
HyperParams train_pooled(const std::vector<Dataset>& datasets,
                         const HyperParams& start, const TrainingConfig& cfg);

/// A pipeline failure tagged with the stage that raised it.
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct ArmResult {
  std::string arm;  // "local", "shared", "pooled", "personalized"
  HyperParams params;
  std::vector<double> prediction;
  std::vector<double> variance;
  double rmse = 0.0;
  double coverage = 0.0;
};

struct VehicleReport {
  std::string vehicle_id;
  std::string scenario;
  std::size_t train_size = 0;
  Trajectory test;  // leader input and true follower response
  std::vector<ArmResult> arms;

  const ArmResult& arm(const std::string& name) const;
};

struct RoundSummary {
  HyperParams global;
  double weighted_global_nlml = 0.0;
};

struct ExperimentReport {
  int experiment = 0;
  std::string config_echo;  // JSON text of the run configuration
  std::vector<VehicleReport> vehicles;
  std::optional<HyperParams> federated_global;
  std::optional<HyperParams> pooled;
  std::vector<RoundSummary> rounds;
  /// Stage name and wall-clock seconds. Not part of the JSON report, which
  /// must be reproducible byte for byte.
  std::vector<std::pair<std::string, double>> timings;

  const VehicleReport& vehicle(const std::string& id) const;
};

struct ScenarioData {
  std::string vehicle_id;
  std::string scenario;  // label text, e.g. "constant"
  Trajectory train;
};

struct Experiment1Config {
  std::vector<ScenarioData> scenarios;
  Trajectory test;  // full oscillation: leader input, true AV response
  FederationConfig federation;
  PersonalizationConfig personalization;
};

ExperimentReport run_experiment1(const Experiment1Config& cfg);

struct Experiment2Config {
  SpeedProfile leader;
  ControllerConfig aggressive = aggressive_controller();
  ControllerConfig passive = passive_controller();
  FederationConfig federation;
  PersonalizationConfig personalization;
  TrainingConfig pooled;
  /// Evaluate on this leader profile instead of the training oscillation.
  std::optional<SpeedProfile> held_out_leader;
};

ExperimentReport run_experiment2(const Experiment2Config& cfg);

/// Rows pooled/personalized, columns aggressive/passive.
std::string format_rmse_table(const ExperimentReport& report);

}  // namespace fedcf
