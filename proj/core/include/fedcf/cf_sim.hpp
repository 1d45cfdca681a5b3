#pragma once

// Linear car-following controller under a constant time gap policy, with a
// first-order (semi-implicit Euler) plant: the commanded acceleration sets
// the next speed, and the gap then advances with the updated speeds.

#include <array>
#include <cstddef>
#include <vector>

namespace fedcf {

inline constexpr double kMaxComfortAccel = 3.0;  // m/s^2, symmetric clamp

struct ControllerConfig {
  /// Feedback gains on spacing deviation (1/s^2), speed difference (1/s)
  /// and acceleration.
  std::array<double, 3> gains{0.0, 0.0, 0.0};
  double time_gap = 1.0;    // s
  double standstill = 2.0;  // m

  void validate() const;
};

ControllerConfig aggressive_controller();
ControllerConfig passive_controller();

struct CFState {
  double spacing = 0.0;  // m
  double speed = 0.0;    // m/s
  double accel = 0.0;    // m/s^2
};

struct SpeedProfile {
  double dt = 0.1;
  std::vector<double> speeds;

  std::size_t size() const noexcept { return speeds.size(); }
  void validate() const;
};

double desired_spacing(double speed, const ControllerConfig& cfg);

/// K^T [spacing - d*(speed), leader_speed - speed, accel] before clamping.
double raw_control_input(const CFState& state, double leader_speed,
                         const ControllerConfig& cfg);

/// raw_control_input clamped to +/- kMaxComfortAccel.
double control_input(const CFState& state, double leader_speed,
                     const ControllerConfig& cfg);

/// State that is at rest relative to a leader travelling at `speed`.
CFState equilibrium_state(double speed, const ControllerConfig& cfg);

struct FollowerRun {
  SpeedProfile follower;
  std::vector<double> spacing;
  std::vector<double> accel;
  std::size_t collision_steps = 0;  // samples with spacing <= 0
};

FollowerRun simulate_follower(const SpeedProfile& leader,
                              const ControllerConfig& cfg, const CFState& init);

struct OscillationSpec {
  double base_speed = 15.0;
  double dip_speed = 5.0;
  /// constant, deceleration, acceleration, constant (s)
  std::array<double, 4> durations{5.0, 4.0, 4.0, 6.7};
  double dt = 0.1;

  void validate() const;
};

/// Sample-index boundaries of the four phases: [b[k], b[k+1]).
std::array<std::size_t, 5> oscillation_phase_bounds(const OscillationSpec& spec);

/// Constant / linear ramp down / linear ramp up / constant, with a 3-point
/// moving average applied at each internal phase boundary.
SpeedProfile generate_oscillation(const OscillationSpec& spec);

}  // namespace fedcf
