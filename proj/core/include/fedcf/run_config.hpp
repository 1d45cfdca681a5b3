#pragma once

// Declarative run configuration. One JSON document per run carries every
// knob (seeds, learning rates, rounds, controllers, scenario sources); the
// canonical text of the document is echoed into every report.
//
// Data sources appear in several places and share one shape:
//
//   {"csv": "relative/or/absolute.csv"}
//   {"generator": {"base_speed": 15, "dip_speed": 5,
//                  "durations": [5, 4, 4, 6.7], "dt": 0.1},
//    "controller": "av"}
//
// optionally followed by "slice": [start, end) and measurement noise
// ("noise_std", "noise_seed") added to both speed columns. Relative paths
// resolve against the directory containing the config file.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedcf/cf_sim.hpp"
#include "fedcf/data.hpp"
#include "fedcf/eval.hpp"
#include "fedcf/federation.hpp"
#include "fedcf/personalize.hpp"

namespace fedcf {

/// Invalid or inconsistent configuration / input files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SourceSpec {
  std::optional<std::filesystem::path> csv;
  std::optional<OscillationSpec> generator;
  std::string controller;  // empty: the caller's default
  std::optional<std::pair<std::size_t, std::size_t>> slice;
  double noise_std = 0.0;
  std::uint64_t noise_seed = 1;
};

struct ScenarioSpec {
  std::string vehicle_id;
  ScenarioLabel label = ScenarioLabel::custom;
  SourceSpec source;
};

struct RunConfig {
  std::filesystem::path base_dir;
  std::uint64_t seed = 0;

  FederationConfig federation;
  PersonalizationConfig personalization;
  TrainingConfig pooled_training;
  std::map<std::string, ControllerConfig> controllers;

  // experiment 1
  std::string experiment1_controller = "av";
  std::vector<ScenarioSpec> experiment1_scenarios;
  std::optional<SourceSpec> experiment1_test;

  // experiment 2
  std::optional<SourceSpec> experiment2_leader;
  std::optional<SourceSpec> experiment2_held_out_leader;
  std::string experiment2_aggressive = "aggressive";
  std::string experiment2_passive = "passive";

  // simulate
  std::string simulate_controller = "aggressive";
  std::optional<SourceSpec> simulate_leader;

  // train
  std::vector<ScenarioSpec> train_datasets;
  std::optional<std::filesystem::path> train_anchor;

  std::filesystem::path output_dir = "out";

  /// Canonical JSON of the effective configuration (after overrides).
  std::string echo;

  const ControllerConfig& controller(const std::string& name) const;
};

/// Parses and validates a configuration document. `seed_override`
/// replaces the top-level seed and everything derived from it.
RunConfig parse_run_config(const std::string& json_text,
                           const std::filesystem::path& base_dir,
                           std::optional<std::uint64_t> seed_override = std::nullopt);

/// Reads `path`; throws ConfigError naming the path when it is missing.
RunConfig load_run_config(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed_override = std::nullopt);

/// Materializes a source: loads or generates, simulates the follower where
/// needed, slices, and adds measurement noise.
Trajectory build_source(const SourceSpec& spec, const RunConfig& cfg,
                        const std::string& default_controller,
                        const std::string& tag);

/// Leader speed profile of a source (the follower column is ignored).
SpeedProfile build_leader(const SourceSpec& spec);

Experiment1Config make_experiment1(const RunConfig& cfg);
Experiment2Config make_experiment2(const RunConfig& cfg);

}  // namespace fedcf
