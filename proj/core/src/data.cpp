#include "fedcf/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fedcf {

namespace {

constexpr std::string_view kHeader = "time_s,leader_speed_mps,follower_speed_mps";
constexpr std::string_view kPredictedColumn = "predicted_speed_mps";
constexpr std::string_view kSourcePrefix = "# source:";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_field(std::string_view field, std::size_t line, const char* name) {
  field = trim(field);
  double value = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError("line " + std::to_string(line) + ": cannot parse " + name +
                         " from '" + std::string(field) + "'",
                     line);
  }
  return value;
}

std::vector<std::string_view> split(std::string_view row) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const auto comma = row.find(',', pos);
    out.push_back(row.substr(pos, comma == std::string_view::npos ? row.npos
                                                                  : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

void append_number(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

void Trajectory::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw ValidationError("trajectory: dt must be > 0", 0);
  }
  if (leader_speed.size() != follower_speed.size()) {
    throw ValidationError("trajectory: leader and follower lengths differ", 0);
  }
  for (std::size_t i = 0; i < leader_speed.size(); ++i) {
    for (double v : {leader_speed[i], follower_speed[i]}) {
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError("trajectory: speed at index " + std::to_string(i) +
                                  " is negative or not finite",
                              0);
      }
    }
  }
}

std::string to_string(ScenarioLabel label) {
  switch (label) {
    case ScenarioLabel::constant: return "constant";
    case ScenarioLabel::deceleration: return "deceleration";
    case ScenarioLabel::acceleration: return "acceleration";
    case ScenarioLabel::full_oscillation: return "full_oscillation";
    case ScenarioLabel::custom: return "custom";
  }
  return "custom";
}

ScenarioLabel scenario_label_from_string(const std::string& name) {
  for (auto l : {ScenarioLabel::constant, ScenarioLabel::deceleration,
                 ScenarioLabel::acceleration, ScenarioLabel::full_oscillation,
                 ScenarioLabel::custom}) {
    if (to_string(l) == name) return l;
  }
  throw std::invalid_argument("unknown scenario label '" + name + "'");
}

Trajectory parse_trajectory_csv(const std::string& text,
                                const std::string& source_tag) {
  Trajectory traj;
  traj.source_tag = source_tag;

  std::vector<double> times;
  std::vector<std::size_t> row_lines;
  bool have_header = false;
  std::size_t columns = 3;
  std::size_t line_no = 0;

  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.starts_with(kSourcePrefix)) {
        traj.source_tag = std::string(trim(line.substr(kSourcePrefix.size())));
      }
      continue;
    }
    if (!have_header) {
      if (line == kHeader) {
        columns = 3;
      } else if (line == std::string(kHeader) + "," + std::string(kPredictedColumn)) {
        columns = 4;
      } else {
        throw ParseError("line " + std::to_string(line_no) +
                             ": expected header '" + std::string(kHeader) + "'",
                         line_no);
      }
      have_header = true;
      continue;
    }
    const auto fields = split(line);
    if (fields.size() != columns) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(columns) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    times.push_back(parse_field(fields[0], line_no, "time_s"));
    traj.leader_speed.push_back(parse_field(fields[1], line_no, "leader_speed_mps"));
    traj.follower_speed.push_back(
        parse_field(fields[2], line_no, "follower_speed_mps"));
    row_lines.push_back(line_no);
  }

  if (!have_header) throw ParseError("missing header (empty file?)", 0);
  if (times.empty()) throw ParseError("no data rows", line_no);

  for (std::size_t i = 0; i < times.size(); ++i) {
    const std::size_t line = row_lines[i];
    if (!std::isfinite(times[i])) {
      throw ValidationError("line " + std::to_string(line) + ": non-finite time", line);
    }
    for (double v : {traj.leader_speed[i], traj.follower_speed[i]}) {
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError("line " + std::to_string(line) +
                                  ": speeds must be finite and >= 0",
                              line);
      }
    }
  }
  if (times.size() < 2) {
    throw ValidationError("line " + std::to_string(row_lines[0]) +
                              ": at least two rows are needed to determine dt",
                          row_lines[0]);
  }
  traj.dt = times[1] - times[0];
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double step = times[i] - times[i - 1];
    const std::size_t line = row_lines[i];
    if (!(step > 0.0)) {
      throw ValidationError("line " + std::to_string(line) +
                                ": timestamps are not strictly increasing",
                            line);
    }
    if (std::abs(step - traj.dt) > kTimestampTolerance) {
      std::ostringstream msg;
      msg << "line " << line << ": time step " << step
          << " s is inconsistent with dt " << traj.dt << " s";
      throw ValidationError(msg.str(), line);
    }
  }
  return traj;
}

Trajectory load_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open trajectory file '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trajectory_csv(buf.str(), path.string());
}

std::string format_trajectory_csv(const Trajectory& traj,
                                  std::optional<std::span<const double>> predicted) {
  traj.validate();
  if (predicted && predicted->size() != traj.size()) {
    throw std::invalid_argument("prediction length differs from trajectory length");
  }
  std::string out;
  if (!traj.source_tag.empty()) {
    out.append(kSourcePrefix).append(" ").append(traj.source_tag).append("\n");
  }
  out.append(kHeader);
  if (predicted) out.append(",").append(kPredictedColumn);
  out.append("\n");
  for (std::size_t i = 0; i < traj.size(); ++i) {
    append_number(out, static_cast<double>(i) * traj.dt);
    out.push_back(',');
    append_number(out, traj.leader_speed[i]);
    out.push_back(',');
    append_number(out, traj.follower_speed[i]);
    if (predicted) {
      out.push_back(',');
      append_number(out, (*predicted)[i]);
    }
    out.push_back('\n');
  }
  return out;
}

void save_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path,
                         std::optional<std::span<const double>> predicted) {
  const std::string text = format_trajectory_csv(traj, predicted);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write trajectory file '" + path.string() + "'");
  }
  out << text;
}

Trajectory slice(const Trajectory& traj, const ScenarioSlice& s) {
  if (!(s.start_index < s.end_index && s.end_index <= traj.size())) {
    throw std::invalid_argument(
        "slice [" + std::to_string(s.start_index) + ", " +
        std::to_string(s.end_index) + ") is out of range for a trajectory of " +
        std::to_string(traj.size()) + " samples");
  }
  Trajectory out;
  out.dt = traj.dt;
  out.source_tag = traj.source_tag;
  const auto b = static_cast<std::ptrdiff_t>(s.start_index);
  const auto e = static_cast<std::ptrdiff_t>(s.end_index);
  out.leader_speed.assign(traj.leader_speed.begin() + b, traj.leader_speed.begin() + e);
  out.follower_speed.assign(traj.follower_speed.begin() + b,
                            traj.follower_speed.begin() + e);
  return out;
}

Trajectory concatenate(std::span<const Trajectory> parts) {
  if (parts.empty()) throw std::invalid_argument("concatenate: nothing to join");
  Trajectory out;
  out.dt = parts.front().dt;
  out.source_tag = parts.front().source_tag;
  for (const auto& p : parts) {
    if (p.dt != out.dt) throw std::invalid_argument("concatenate: dt mismatch");
    out.leader_speed.insert(out.leader_speed.end(), p.leader_speed.begin(),
                            p.leader_speed.end());
    out.follower_speed.insert(out.follower_speed.end(), p.follower_speed.begin(),
                              p.follower_speed.end());
  }
  return out;
}

Dataset to_dataset(const Trajectory& traj, const std::string& vehicle_id) {
  if (traj.size() == 0) throw std::invalid_argument("to_dataset: empty trajectory");
  Dataset d{traj.leader_speed, traj.follower_speed, vehicle_id};
  d.validate();
  return d;
}

Trajectory simulate_trajectory(const SpeedProfile& leader,
                               const ControllerConfig& cfg,
                               const std::string& source_tag) {
  if (leader.speeds.empty()) {
    throw std::invalid_argument("simulate_trajectory: empty leader profile");
  }
  const auto run =
      simulate_follower(leader, cfg, equilibrium_state(leader.speeds.front(), cfg));
  return {leader.dt, leader.speeds, run.follower.speeds, source_tag};
}

}  // namespace fedcf
