#pragma once

// Trajectory CSV ingestion, scenario slicing and conversion to GP datasets.
//
// CSV format: header `time_s,leader_speed_mps,follower_speed_mps`, UTF-8,
// `.` decimal separator, strictly increasing times at a constant spacing
// (tolerance 1e-6 s). Lines starting with `#` are comments; a comment of
// the form `# source: <tag>` sets the trajectory's source tag.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedcf/cf_sim.hpp"
#include "fedcf/gp.hpp"

namespace fedcf {

inline constexpr double kTimestampTolerance = 1e-6;

struct Trajectory {
  double dt = 0.1;
  std::vector<double> leader_speed;
  std::vector<double> follower_speed;
  std::string source_tag;

  std::size_t size() const noexcept { return leader_speed.size(); }
  void validate() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Malformed CSV content; `line` is 1-based (0 when not tied to a line).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed CSV that violates a Trajectory invariant.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

enum class ScenarioLabel { constant, deceleration, acceleration, full_oscillation, custom };

std::string to_string(ScenarioLabel label);
ScenarioLabel scenario_label_from_string(const std::string& name);

struct ScenarioSlice {
  std::size_t start_index = 0;
  std::size_t end_index = 0;  // exclusive
  ScenarioLabel label = ScenarioLabel::custom;
};

Trajectory parse_trajectory_csv(const std::string& text,
                                const std::string& source_tag = {});
Trajectory load_trajectory_csv(const std::filesystem::path& path);

/// Serializes with times i * dt; `predicted` adds a fourth
/// `predicted_speed_mps` column when given.
std::string format_trajectory_csv(
    const Trajectory& traj,
    std::optional<std::span<const double>> predicted = std::nullopt);
void save_trajectory_csv(
    const Trajectory& traj, const std::filesystem::path& path,
    std::optional<std::span<const double>> predicted = std::nullopt);

Trajectory slice(const Trajectory& traj, const ScenarioSlice& s);

/// Concatenation of trajectories with a common dt.
Trajectory concatenate(std::span<const Trajectory> parts);

Dataset to_dataset(const Trajectory& traj, const std::string& vehicle_id);

/// Leader profile plus the follower response simulated by cf_sim, starting
/// at equilibrium for the leader's initial speed.
Trajectory simulate_trajectory(const SpeedProfile& leader,
                               const ControllerConfig& cfg,
                               const std::string& source_tag);

}  // namespace fedcf
