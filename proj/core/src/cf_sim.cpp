#include "fedcf/cf_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedcf {

void ControllerConfig::validate() const {
  for (double g : gains) {
    if (!std::isfinite(g)) throw std::invalid_argument("controller: non-finite gain");
  }
  if (!(time_gap > 0.0) || !std::isfinite(time_gap)) {
    throw std::invalid_argument("controller: time_gap must be > 0");
  }
  if (!(standstill >= 0.0) || !std::isfinite(standstill)) {
    throw std::invalid_argument("controller: standstill must be >= 0");
  }
}

ControllerConfig aggressive_controller() {
  return {{0.01, 10.0, -0.01}, 0.5, 5.0};
}

ControllerConfig passive_controller() {
  return {{10.0, 0.01, -0.01}, 2.5, 7.0};
}

void SpeedProfile::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("speed profile: dt must be > 0");
  }
  for (double v : speeds) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("speed profile: speeds must be finite and >= 0");
    }
  }
}

double desired_spacing(double speed, const ControllerConfig& cfg) {
  return speed * cfg.time_gap + cfg.standstill;
}

double raw_control_input(const CFState& state, double leader_speed,
                         const ControllerConfig& cfg) {
  const double spacing_error = state.spacing - desired_spacing(state.speed, cfg);
  const double speed_diff = leader_speed - state.speed;
  return cfg.gains[0] * spacing_error + cfg.gains[1] * speed_diff +
         cfg.gains[2] * state.accel;
}

double control_input(const CFState& state, double leader_speed,
                     const ControllerConfig& cfg) {
  return std::clamp(raw_control_input(state, leader_speed, cfg),
                    -kMaxComfortAccel, kMaxComfortAccel);
}

CFState equilibrium_state(double speed, const ControllerConfig& cfg) {
  return {desired_spacing(speed, cfg), speed, 0.0};
}

FollowerRun simulate_follower(const SpeedProfile& leader,
                              const ControllerConfig& cfg, const CFState& init) {
  leader.validate();
  cfg.validate();
  if (leader.speeds.empty()) {
    throw std::invalid_argument("simulate_follower: empty leader profile");
  }
  const std::size_t n = leader.size();
  FollowerRun run;
  run.follower.dt = leader.dt;
  run.follower.speeds.reserve(n);
  run.spacing.reserve(n);
  run.accel.reserve(n);

  CFState s = init;
  s.speed = std::max(0.0, s.speed);
  for (std::size_t t = 0; t < n; ++t) {
    run.follower.speeds.push_back(s.speed);
    run.spacing.push_back(s.spacing);
    run.accel.push_back(s.accel);
    if (s.spacing <= 0.0) ++run.collision_steps;
    if (t + 1 == n) break;

    // Semi-implicit Euler: speeds first, then the gap with the updated
    // speeds of both vehicles.
    const double u = control_input(s, leader.speeds[t], cfg);
    CFState next;
    next.accel = u;
    next.speed = std::max(0.0, s.speed + u * leader.dt);
    next.spacing = s.spacing + (leader.speeds[t + 1] - next.speed) * leader.dt;
    s = next;
  }
  return run;
}

void OscillationSpec::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("oscillation: dt must be > 0");
  }
  for (double d : durations) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw std::invalid_argument("oscillation: phase durations must be > 0");
    }
  }
  if (!(dip_speed >= 0.0) || !std::isfinite(base_speed) ||
      !(dip_speed <= base_speed)) {
    throw std::invalid_argument(
        "oscillation: require base_speed >= dip_speed >= 0");
  }
}

std::array<std::size_t, 5> oscillation_phase_bounds(const OscillationSpec& spec) {
  spec.validate();
  std::array<std::size_t, 5> b{};
  double elapsed = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    elapsed += spec.durations[k];
    b[k + 1] = static_cast<std::size_t>(std::llround(elapsed / spec.dt));
  }
  for (std::size_t k = 1; k < 5; ++k) {
    if (b[k] <= b[k - 1]) {
      throw std::invalid_argument("oscillation: a phase is shorter than dt");
    }
  }
  return b;
}

SpeedProfile generate_oscillation(const OscillationSpec& spec) {
  const auto b = oscillation_phase_bounds(spec);
  const std::size_t n = b[4];
  const double drop = spec.base_speed - spec.dip_speed;

  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < b[1]) {
      raw[i] = spec.base_speed;
    } else if (i < b[2]) {
      const double frac = static_cast<double>(i - b[1]) /
                          static_cast<double>(b[2] - b[1]);
      raw[i] = spec.base_speed - drop * frac;
    } else if (i < b[3]) {
      const double frac = static_cast<double>(i - b[2]) /
                          static_cast<double>(b[3] - b[2]);
      raw[i] = spec.dip_speed + drop * frac;
    } else {
      raw[i] = spec.base_speed;
    }
  }

  SpeedProfile out{spec.dt, raw};
  for (std::size_t k = 1; k < 4; ++k) {
    const std::size_t j = b[k];
    if (j > 0 && j + 1 < n) {
      out.speeds[j] = (raw[j - 1] + raw[j] + raw[j + 1]) / 3.0;
    }
  }
  return out;
}

}  // namespace fedcf
