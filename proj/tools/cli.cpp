#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include "fedcf/cf_sim.hpp"
#include "fedcf/data.hpp"
#include "fedcf/eval.hpp"
#include "fedcf/federation.hpp"
#include "fedcf/personalize.hpp"
#include "fedcf/report.hpp"
#include "fedcf/run_config.hpp"

namespace fedcf::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int which = 0;
  std::string mode;
};

// Pipeline failure that is not a configuration problem.
struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path output_dir(const RunConfig& cfg, const Options& opt) {
  return opt.out_dir.empty() ? cfg.output_dir : fs::path(opt.out_dir);
}

int cmd_simulate(const Options& opt, std::ostream& out) {
  const RunConfig cfg = load_run_config(opt.config, opt.seed);
  if (!cfg.simulate_leader) throw ConfigError("simulate.leader: not configured");
  const ControllerConfig& controller = cfg.controller(cfg.simulate_controller);
  const SpeedProfile leader = build_leader(*cfg.simulate_leader);

  FollowerRun run;
  try {
    run = simulate_follower(leader, controller, equilibrium_state(leader.speeds.front(), controller));
  } catch (const std::exception& e) {
    throw PipelineError(std::string("simulation: ") + e.what());
  }
  Trajectory traj{leader.dt, leader.speeds, run.follower.speeds,
                  "simulate:" + cfg.simulate_controller};
  const fs::path dir = output_dir(cfg, opt);
  fs::create_directories(dir);
  const fs::path path = dir / ("follower_" + cfg.simulate_controller + ".csv");
  save_trajectory_csv(traj, path);
  out << "wrote " << path.string() << " (" << traj.size() << " rows)\n";
  out << "collision events: " << run.collision_steps << "\n";
  return kOk;
}

std::vector<Dataset> training_datasets(const RunConfig& cfg) {
  if (cfg.train_datasets.empty()) throw ConfigError("train.datasets: not configured");
  std::vector<Dataset> out;
  for (const auto& spec : cfg.train_datasets) {
    const auto traj = build_source(spec.source, cfg, "aggressive", spec.vehicle_id);
    out.push_back(to_dataset(traj, spec.vehicle_id));
  }
  return out;
}

int cmd_train(const Options& opt, std::ostream& out) {
  const RunConfig cfg = load_run_config(opt.config, opt.seed);
  const auto datasets = training_datasets(cfg);
  std::optional<HyperParams> anchor;
  if (opt.mode == "personalize") {
    if (!cfg.train_anchor) {
      throw ConfigError("train.anchor: personalize mode needs an anchor parameter file");
    }
    if (!fs::exists(*cfg.train_anchor)) {
      throw ConfigError("train.anchor: file not found: " + cfg.train_anchor->string());
    }
    try {
      anchor = load_params_file(*cfg.train_anchor);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  const fs::path dir = output_dir(cfg, opt);
  fs::create_directories(dir);

  auto emit = [&](const std::string& name, const HyperParams& p,
                  const FederationHistory* history) {
    const fs::path path = dir / (name + ".json");
    write_text_file(path, params_document(p, opt.mode, history));
    out << std::setprecision(6) << name << ": sigma0=" << p.sigma0()
        << " length_scale=" << p.length_scale() << " sigma_eps=" << p.sigma_eps()
        << "  -> " << path.string() << "\n";
  };

  try {
    if (opt.mode == "local") {
      for (const auto& d : datasets) {
        emit("local_" + d.vehicle_id,
             train_local_rounds(cfg.federation.initial_params, d, cfg.federation), nullptr);
      }
    } else if (opt.mode == "federated") {
      const auto result = run_federation(datasets, cfg.federation);
      emit("federated", result.global, &result.history);
    } else if (opt.mode == "pooled") {
      emit("pooled", train_pooled(datasets, cfg.federation.initial_params, cfg.pooled_training),
           nullptr);
    } else {
      for (const auto& d : datasets) {
        PersonalizationConfig p = cfg.personalization;
        p.training.seed = personalization_seed(p.training.seed, d.vehicle_id);
        emit("personalized_" + d.vehicle_id, personalize(*anchor, d, p), nullptr);
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError("train (" + opt.mode + "): " + e.what());
  }
  return kOk;
}

void write_predictions(const ExperimentReport& report, const fs::path& dir) {
  for (const auto& v : report.vehicles) {
    for (const auto& arm : v.arms) {
      Trajectory t = v.test;
      t.source_tag = "experiment" + std::to_string(report.experiment) + ":" +
                     v.vehicle_id + ":" + arm.arm;
      save_trajectory_csv(t, dir / (v.vehicle_id + "_" + arm.arm + ".csv"),
                          std::span<const double>(arm.prediction));
    }
  }
}

std::string coverage_table(const ExperimentReport& report) {
  std::string text;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %-14s %10s %10s %10s\n", "vehicle", "scenario",
                "local", "federated", "shared");
  text += line;
  for (const auto& v : report.vehicles) {
    std::snprintf(line, sizeof line, "%-12s %-14s %10.3f %10.3f %10.3f\n",
                  v.vehicle_id.c_str(), v.scenario.c_str(), v.arm("local").coverage,
                  v.arm("federated").coverage, v.arm("shared").coverage);
    text += line;
  }
  return text;
}

int cmd_experiment(const Options& opt, std::ostream& out) {
  const RunConfig cfg = load_run_config(opt.config, opt.seed);
  ExperimentReport report;
  if (opt.which == 1) {
    const auto e = make_experiment1(cfg);
    try {
      report = run_experiment1(e);
    } catch (const std::exception& ex) {
      throw PipelineError(std::string("experiment 1: ") + ex.what());
    }
  } else {
    const auto e = make_experiment2(cfg);
    try {
      report = run_experiment2(e);
    } catch (const std::exception& ex) {
      throw PipelineError(std::string("experiment 2: ") + ex.what());
    }
  }
  report.config_echo = cfg.echo;

  const fs::path dir = output_dir(cfg, opt) / ("experiment" + std::to_string(opt.which));
  fs::create_directories(dir);
  write_text_file(dir / "report.json", report_to_json(report));
  write_text_file(dir / "timings.json", timings_to_json(report));
  write_predictions(report, dir);

  if (opt.which == 1) {
    out << "Oscillation coverage on the full-oscillation test (predicted range / true range)\n";
    out << coverage_table(report);
  } else {
    out << format_rmse_table(report);
  }
  out << "report: " << (dir / "report.json").string() << "\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated knowledge sharing and personalization of GP car-following models",
               "fedcf"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Run configuration (JSON)")->required();
    sub->add_option("--out", opt.out_dir, "Output directory (overrides config)");
    sub->add_option("--seed", seed, "Override the configuration seed");
  };

  auto* simulate = app.add_subcommand("simulate", "Simulate a follower trajectory");
  add_common(simulate);

  auto* train = app.add_subcommand("train", "Train parameters and write them to JSON");
  add_common(train);
  train->add_option("mode", opt.mode, "local | federated | pooled | personalize")
      ->required()
      ->check(CLI::IsMember({"local", "federated", "pooled", "personalize"}));

  auto* experiment = app.add_subcommand("experiment", "Run an experiment end to end");
  add_common(experiment);
  experiment->add_option("--which", opt.which, "Experiment number")
      ->required()
      ->check(CLI::IsMember({1, 2}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  for (auto* sub : {simulate, train, experiment}) {
    if (sub->parsed() && sub->count("--seed") > 0) opt.seed = seed;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(opt, out);
    if (train->parsed()) return cmd_train(opt, out);
    return cmd_experiment(opt, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ValidationError& e) {
    err << "input error: " << e.what() << "\n";
    return kConfigError;
  } catch (const PipelineError& e) {
    err << "pipeline error: " << e.what() << "\n";
    return kPipelineError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

}  // namespace fedcf::cli
