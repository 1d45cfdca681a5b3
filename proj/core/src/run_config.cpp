#include "fedcf/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fedcf {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where.empty() ? what : where + ": " + what);
}

std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; })) {
      fail(join(where, key), "unknown key");
    }
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

std::int64_t integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<std::int64_t>();
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

template <typename T, typename Fn>
void optional_field(const json& obj, const char* key, const std::string& where,
                    T& target, Fn convert) {
  if (auto it = obj.find(key); it != obj.end() && !it->is_null()) {
    target = convert(*it, join(where, key));
  }
}

HyperParams parse_params(const json& j, const std::string& where) {
  check_keys(j, where, {"sigma0", "length_scale", "sigma_eps"});
  try {
    return HyperParams(number(j.at("sigma0"), join(where, "sigma0")),
                       number(j.at("length_scale"), join(where, "length_scale")),
                       number(j.at("sigma_eps"), join(where, "sigma_eps")));
  } catch (const json::out_of_range&) {
    fail(where, "needs sigma0, length_scale and sigma_eps");
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
}

void parse_training(const json& j, const std::string& where, TrainingConfig& t,
                    bool allow_updates) {
  if (allow_updates) {
    check_keys(j, where, {"local_updates", "learning_rate", "lr_decay", "batch_size"});
  } else {
    check_keys(j, where, {"learning_rate", "lr_decay", "batch_size"});
  }
  if (allow_updates) {
    optional_field(j, "local_updates", where, t.local_updates,
                   [](const json& v, const std::string& w) {
                     return static_cast<int>(integer(v, w));
                   });
  }
  optional_field(j, "learning_rate", where, t.learning_rate, number);
  optional_field(j, "lr_decay", where, t.lr_decay, number);
  optional_field(j, "batch_size", where, t.batch_size,
                 [](const json& v, const std::string& w) {
                   const auto b = integer(v, w);
                   if (b < 1) fail(w, "must be >= 1");
                   return static_cast<std::size_t>(b);
                 });
}

ControllerConfig parse_controller(const json& j, const std::string& where) {
  check_keys(j, where, {"gains", "time_gap", "standstill"});
  ControllerConfig c;
  const auto& g = j.at("gains");
  if (!g.is_array() || g.size() != 3) fail(join(where, "gains"), "expected [k_s, k_v, k_a]");
  for (std::size_t i = 0; i < 3; ++i) c.gains[i] = number(g[i], join(where, "gains"));
  c.time_gap = number(j.at("time_gap"), join(where, "time_gap"));
  c.standstill = number(j.at("standstill"), join(where, "standstill"));
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
  return c;
}

OscillationSpec parse_generator(const json& j, const std::string& where) {
  check_keys(j, where, {"base_speed", "dip_speed", "durations", "dt"});
  OscillationSpec o;
  optional_field(j, "base_speed", where, o.base_speed, number);
  optional_field(j, "dip_speed", where, o.dip_speed, number);
  optional_field(j, "dt", where, o.dt, number);
  if (auto it = j.find("durations"); it != j.end()) {
    if (!it->is_array() || it->size() != 4) {
      fail(join(where, "durations"), "expected four phase durations");
    }
    for (std::size_t i = 0; i < 4; ++i) {
      o.durations[i] = number((*it)[i], join(where, "durations"));
    }
  }
  try {
    o.validate();
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
  return o;
}

SourceSpec parse_source(const json& j, const std::string& where,
                        const std::filesystem::path& base_dir) {
  check_keys(j, where, {"csv", "generator", "controller", "slice", "noise_std",
                        "noise_seed"});
  SourceSpec s;
  const bool has_csv = j.contains("csv");
  const bool has_gen = j.contains("generator");
  if (has_csv == has_gen) fail(where, "needs exactly one of 'csv' or 'generator'");
  if (has_csv) {
    std::filesystem::path p = text(j.at("csv"), join(where, "csv"));
    if (p.is_relative()) p = base_dir / p;
    if (!std::filesystem::exists(p)) {
      fail(join(where, "csv"), "file not found: " + p.string());
    }
    s.csv = p;
  } else {
    s.generator = parse_generator(j.at("generator"), join(where, "generator"));
  }
  optional_field(j, "controller", where, s.controller, text);
  if (auto it = j.find("slice"); it != j.end()) {
    if (!it->is_array() || it->size() != 2) fail(join(where, "slice"), "expected [start, end]");
    const auto a = integer((*it)[0], join(where, "slice"));
    const auto b = integer((*it)[1], join(where, "slice"));
    if (a < 0 || b <= a) fail(join(where, "slice"), "require 0 <= start < end");
    s.slice = {static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
  }
  optional_field(j, "noise_std", where, s.noise_std, number);
  if (!(s.noise_std >= 0.0)) fail(join(where, "noise_std"), "must be >= 0");
  optional_field(j, "noise_seed", where, s.noise_seed,
                 [](const json& v, const std::string& w) {
                   const auto n = integer(v, w);
                   if (n < 0) fail(w, "must be >= 0");
                   return static_cast<std::uint64_t>(n);
                 });
  return s;
}

ScenarioSpec parse_scenario(const json& j, const std::string& where,
                            const std::filesystem::path& base_dir) {
  if (!j.is_object()) fail(where, "expected an object");
  ScenarioSpec sc;
  sc.vehicle_id = text(j.value("vehicle_id", json()), join(where, "vehicle_id"));
  if (sc.vehicle_id.empty()) fail(join(where, "vehicle_id"), "must not be empty");
  if (auto it = j.find("label"); it != j.end()) {
    try {
      sc.label = scenario_label_from_string(text(*it, join(where, "label")));
    } catch (const std::invalid_argument& e) {
      fail(join(where, "label"), e.what());
    }
  }
  json source = j;
  source.erase("vehicle_id");
  source.erase("label");
  sc.source = parse_source(source, where, base_dir);
  return sc;
}

std::vector<ScenarioSpec> parse_scenarios(const json& j, const std::string& where,
                                          const std::filesystem::path& base_dir) {
  if (!j.is_array()) fail(where, "expected an array");
  std::vector<ScenarioSpec> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(parse_scenario(j[i], where + "[" + std::to_string(i) + "]", base_dir));
    if (!ids.insert(out.back().vehicle_id).second) {
      fail(where, "duplicate vehicle_id '" + out.back().vehicle_id + "'");
    }
  }
  return out;
}

void add_noise(std::vector<double>& series, double std_dev, Rng& rng) {
  for (auto& v : series) v = std::max(0.0, v + std_dev * rng.normal());
}

}  // namespace

const ControllerConfig& RunConfig::controller(const std::string& name) const {
  auto it = controllers.find(name);
  if (it == controllers.end()) throw ConfigError("unknown controller '" + name + "'");
  return it->second;
}

RunConfig parse_run_config(const std::string& json_text,
                           const std::filesystem::path& base_dir,
                           std::optional<std::uint64_t> seed_override) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) fail("", "configuration must be a JSON object");
  check_keys(root, "", {"seed", "initial_params", "federation", "training",
                        "personalization", "pooled_training", "controllers",
                        "experiment1", "experiment2", "simulate", "train",
                        "output_dir", "description"});

  RunConfig cfg;
  cfg.base_dir = base_dir;
  try {
    optional_field(root, "seed", "", cfg.seed, [](const json& v, const std::string& w) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        fail(w, "expected a non-negative integer");
      }
      return v.get<std::uint64_t>();
    });
    if (seed_override) {
      cfg.seed = *seed_override;
      root["seed"] = *seed_override;
    }

    if (auto it = root.find("initial_params"); it != root.end()) {
      cfg.federation.initial_params = parse_params(*it, "initial_params");
    }
    if (auto it = root.find("federation"); it != root.end()) {
      check_keys(*it, "federation", {"rounds", "parallel"});
      optional_field(*it, "rounds", "federation", cfg.federation.rounds,
                     [](const json& v, const std::string& w) {
                       return static_cast<int>(integer(v, w));
                     });
      if (auto p = it->find("parallel"); p != it->end()) {
        if (!p->is_boolean()) fail("federation.parallel", "expected true or false");
        cfg.federation.parallel = p->get<bool>();
      }
    }
    if (auto it = root.find("training"); it != root.end()) {
      parse_training(*it, "training", cfg.federation.training, true);
    }
    cfg.federation.training.seed = cfg.seed;
    cfg.federation.validate();
    const int total_updates = cfg.federation.rounds * cfg.federation.training.local_updates;

    cfg.personalization.training = cfg.federation.training;
    cfg.personalization.steps = default_personalization_steps(
        cfg.federation.rounds, cfg.federation.training.local_updates);
    if (auto it = root.find("personalization"); it != root.end()) {
      check_keys(*it, "personalization",
                 {"omega", "steps", "learning_rate", "lr_decay", "batch_size"});
      optional_field(*it, "omega", "personalization", cfg.personalization.omega, number);
      optional_field(*it, "steps", "personalization", cfg.personalization.steps,
                     [](const json& v, const std::string& w) {
                       return static_cast<int>(integer(v, w));
                     });
      json training = *it;
      training.erase("omega");
      training.erase("steps");
      parse_training(training, "personalization", cfg.personalization.training, false);
    }
    cfg.personalization.validate();

    cfg.pooled_training = cfg.federation.training;
    cfg.pooled_training.local_updates = total_updates;
    if (auto it = root.find("pooled_training"); it != root.end()) {
      parse_training(*it, "pooled_training", cfg.pooled_training, true);
    }
    cfg.pooled_training.validate();

    cfg.controllers["aggressive"] = aggressive_controller();
    cfg.controllers["passive"] = passive_controller();
    if (auto it = root.find("controllers"); it != root.end()) {
      if (!it->is_object()) fail("controllers", "expected an object");
      for (const auto& [name, value] : it->items()) {
        cfg.controllers[name] = parse_controller(value, "controllers." + name);
      }
    }

    if (auto it = root.find("experiment1"); it != root.end()) {
      check_keys(*it, "experiment1", {"controller", "scenarios", "test"});
      optional_field(*it, "controller", "experiment1", cfg.experiment1_controller, text);
      if (auto s = it->find("scenarios"); s != it->end()) {
        cfg.experiment1_scenarios = parse_scenarios(*s, "experiment1.scenarios", base_dir);
      }
      if (auto t = it->find("test"); t != it->end()) {
        cfg.experiment1_test = parse_source(*t, "experiment1.test", base_dir);
      }
    }
    if (auto it = root.find("experiment2"); it != root.end()) {
      check_keys(*it, "experiment2", {"leader", "held_out_leader", "aggressive", "passive"});
      if (auto l = it->find("leader"); l != it->end()) {
        cfg.experiment2_leader = parse_source(*l, "experiment2.leader", base_dir);
      }
      if (auto l = it->find("held_out_leader"); l != it->end()) {
        cfg.experiment2_held_out_leader =
            parse_source(*l, "experiment2.held_out_leader", base_dir);
      }
      optional_field(*it, "aggressive", "experiment2", cfg.experiment2_aggressive, text);
      optional_field(*it, "passive", "experiment2", cfg.experiment2_passive, text);
    }
    if (auto it = root.find("simulate"); it != root.end()) {
      check_keys(*it, "simulate", {"controller", "leader"});
      optional_field(*it, "controller", "simulate", cfg.simulate_controller, text);
      if (auto l = it->find("leader"); l != it->end()) {
        cfg.simulate_leader = parse_source(*l, "simulate.leader", base_dir);
      }
    }
    if (auto it = root.find("train"); it != root.end()) {
      check_keys(*it, "train", {"datasets", "anchor"});
      if (auto d = it->find("datasets"); d != it->end()) {
        cfg.train_datasets = parse_scenarios(*d, "train.datasets", base_dir);
      }
      if (auto a = it->find("anchor"); a != it->end()) {
        std::filesystem::path p = text(*a, "train.anchor");
        if (p.is_relative()) p = base_dir / p;
        cfg.train_anchor = p.lexically_normal();
      }
    }
    if (auto it = root.find("output_dir"); it != root.end()) {
      std::filesystem::path p = text(*it, "output_dir");
      cfg.output_dir = (p.is_relative() ? base_dir / p : p).lexically_normal();
    } else {
      cfg.output_dir = (base_dir / "out").lexically_normal();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  // Every controller reference must resolve.
  auto require_controller = [&](const std::string& name, const std::string& where) {
    if (!name.empty() && !cfg.controllers.contains(name)) {
      fail(where, "unknown controller '" + name + "'");
    }
  };
  if (!cfg.experiment1_scenarios.empty() || cfg.experiment1_test) {
    require_controller(cfg.experiment1_controller, "experiment1.controller");
  }
  require_controller(cfg.experiment2_aggressive, "experiment2.aggressive");
  require_controller(cfg.experiment2_passive, "experiment2.passive");
  if (cfg.simulate_leader) require_controller(cfg.simulate_controller, "simulate.controller");
  for (const auto& s : cfg.experiment1_scenarios) {
    require_controller(s.source.controller, "experiment1.scenarios");
  }
  for (const auto& s : cfg.train_datasets) {
    require_controller(s.source.controller, "train.datasets");
  }

  cfg.echo = root.dump(2);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed_override) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config file not found: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  try {
    return parse_run_config(buf.str(), base, seed_override);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Trajectory build_source(const SourceSpec& spec, const RunConfig& cfg,
                        const std::string& default_controller,
                        const std::string& tag) {
  Trajectory traj;
  if (spec.csv) {
    traj = load_trajectory_csv(*spec.csv);
  } else {
    const auto leader = generate_oscillation(*spec.generator);
    const std::string& name = spec.controller.empty() ? default_controller : spec.controller;
    traj = simulate_trajectory(leader, cfg.controller(name), tag + ":" + name);
  }
  if (spec.slice) {
    traj = slice(traj, {spec.slice->first, spec.slice->second, ScenarioLabel::custom});
  }
  if (spec.noise_std > 0.0) {
    Rng rng(spec.noise_seed);
    add_noise(traj.leader_speed, spec.noise_std, rng);
    add_noise(traj.follower_speed, spec.noise_std, rng);
  }
  return traj;
}

SpeedProfile build_leader(const SourceSpec& spec) {
  Trajectory traj;
  if (spec.csv) {
    traj = load_trajectory_csv(*spec.csv);
  } else {
    traj.dt = spec.generator->dt;
    traj.leader_speed = generate_oscillation(*spec.generator).speeds;
    traj.follower_speed = traj.leader_speed;
  }
  if (spec.slice) {
    traj = slice(traj, {spec.slice->first, spec.slice->second, ScenarioLabel::custom});
  }
  if (spec.noise_std > 0.0) {
    Rng rng(spec.noise_seed);
    add_noise(traj.leader_speed, spec.noise_std, rng);
  }
  return {traj.dt, traj.leader_speed};
}

Experiment1Config make_experiment1(const RunConfig& cfg) {
  const ScenarioLabel required[] = {ScenarioLabel::constant, ScenarioLabel::deceleration,
                                    ScenarioLabel::acceleration};
  std::vector<std::string> missing;
  for (auto label : required) {
    const bool found = std::any_of(
        cfg.experiment1_scenarios.begin(), cfg.experiment1_scenarios.end(),
        [&](const ScenarioSpec& s) { return s.label == label; });
    if (!found) missing.push_back(to_string(label));
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw ConfigError("experiment1.scenarios: missing scenario(s): " + names +
                      " (need constant, deceleration and acceleration)");
  }
  if (cfg.experiment1_scenarios.size() != 3) {
    throw ConfigError("experiment1.scenarios: expected exactly three scenarios, got " +
                      std::to_string(cfg.experiment1_scenarios.size()));
  }
  if (!cfg.experiment1_test) throw ConfigError("experiment1.test: not configured");

  Experiment1Config e;
  for (auto label : required) {
    for (const auto& s : cfg.experiment1_scenarios) {
      if (s.label != label) continue;
      e.scenarios.push_back({s.vehicle_id, to_string(s.label),
                             build_source(s.source, cfg, cfg.experiment1_controller,
                                          s.vehicle_id)});
    }
  }
  e.test = build_source(*cfg.experiment1_test, cfg, cfg.experiment1_controller, "test");
  e.federation = cfg.federation;
  e.personalization = cfg.personalization;
  return e;
}

Experiment2Config make_experiment2(const RunConfig& cfg) {
  if (!cfg.experiment2_leader) throw ConfigError("experiment2.leader: not configured");
  Experiment2Config e;
  e.leader = build_leader(*cfg.experiment2_leader);
  if (cfg.experiment2_held_out_leader) {
    e.held_out_leader = build_leader(*cfg.experiment2_held_out_leader);
  }
  e.aggressive = cfg.controller(cfg.experiment2_aggressive);
  e.passive = cfg.controller(cfg.experiment2_passive);
  e.federation = cfg.federation;
  e.personalization = cfg.personalization;
  e.pooled = cfg.pooled_training;
  return e;
}

}  // namespace fedcf
