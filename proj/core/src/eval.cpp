#include "fedcf/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

namespace fedcf {

double rmse(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size()) {
    throw std::invalid_argument("rmse: length mismatch (" +
                                std::to_string(pred.size()) + " vs " +
                                std::to_string(actual.size()) + ")");
  }
  if (pred.empty()) throw std::invalid_argument("rmse: empty series");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - actual[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

double oscillation_coverage(std::span<const double> pred,
                            std::span<const double> actual) {
  if (pred.empty() || actual.empty()) {
    throw std::invalid_argument("oscillation_coverage: empty series");
  }
  const auto [pmin, pmax] = std::minmax_element(pred.begin(), pred.end());
  const auto [amin, amax] = std::minmax_element(actual.begin(), actual.end());
  const double true_range = *amax - *amin;
  if (!(true_range > 0.0)) {
    throw std::invalid_argument("oscillation_coverage: true response is constant");
  }
  return (*pmax - *pmin) / true_range;
}

HyperParams train_pooled(const std::vector<Dataset>& datasets,
                         const HyperParams& start, const TrainingConfig& cfg) {
  if (datasets.empty()) throw std::invalid_argument("train_pooled: no datasets");
  if (datasets.size() == 1) return sgd_local(start, datasets.front(), cfg);
  Dataset pooled;
  pooled.vehicle_id = "pooled";
  for (const auto& d : datasets) {
    d.validate();
    pooled.inputs.insert(pooled.inputs.end(), d.inputs.begin(), d.inputs.end());
    pooled.outputs.insert(pooled.outputs.end(), d.outputs.begin(), d.outputs.end());
  }
  return sgd_local(start, pooled, cfg);
}

const ArmResult& VehicleReport::arm(const std::string& name) const {
  for (const auto& a : arms) {
    if (a.arm == name) return a;
  }
  throw std::out_of_range("vehicle '" + vehicle_id + "' has no arm '" + name + "'");
}

const VehicleReport& ExperimentReport::vehicle(const std::string& id) const {
  for (const auto& v : vehicles) {
    if (v.vehicle_id == id) return v;
  }
  throw std::out_of_range("report has no vehicle '" + id + "'");
}

namespace {

class StageTimer {
 public:
  explicit StageTimer(ExperimentReport& report) : report_(report) {}

  template <typename Fn>
  auto run(const std::string& stage, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<std::invoke_result_t<Fn>>) {
        fn();
        record(stage, start);
      } else {
        auto out = fn();
        record(stage, start);
        return out;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, e.what());
    }
  }

 private:
  void record(const std::string& stage,
              std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double> elapsed =
        std::chrono::steady_clock::now() - start;
    report_.timings.emplace_back(stage, elapsed.count());
  }

  ExperimentReport& report_;
};

ArmResult evaluate_arm(const std::string& name, const HyperParams& params,
                       const Dataset& conditioning, const Trajectory& test) {
  ArmResult arm;
  arm.arm = name;
  arm.params = params;
  auto post = posterior_predict(params, conditioning, test.leader_speed);
  arm.prediction = std::move(post.mean);
  arm.variance = std::move(post.variance);
  arm.rmse = rmse(arm.prediction, test.follower_speed);
  arm.coverage = oscillation_coverage(arm.prediction, test.follower_speed);
  return arm;
}

void record_rounds(ExperimentReport& report, const FederationHistory& history) {
  for (std::size_t s = 0; s < history.rounds.size(); ++s) {
    report.rounds.push_back(
        {history.rounds[s].global, history.weighted_global_nlml(s)});
  }
}

void personalize_all(const std::vector<Dataset>& datasets,
                     const HyperParams& anchor, const PersonalizationConfig& base,
                     std::vector<HyperParams>& out) {
  out.clear();
  for (const auto& d : datasets) {
    PersonalizationConfig p = base;
    p.training.seed = personalization_seed(base.training.seed, d.vehicle_id);
    out.push_back(personalize(anchor, d, p));
  }
}

}  // namespace

ExperimentReport run_experiment1(const Experiment1Config& cfg) {
  if (cfg.scenarios.size() != 3) {
    throw StageError("setup", "experiment 1 needs exactly three scenarios, got " +
                                  std::to_string(cfg.scenarios.size()));
  }
  ExperimentReport report;
  report.experiment = 1;
  StageTimer timer(report);

  std::vector<Dataset> datasets;
  timer.run("setup", [&] {
    cfg.test.validate();
    cfg.federation.validate();
    cfg.personalization.validate();
    for (const auto& s : cfg.scenarios) {
      datasets.push_back(to_dataset(s.train, s.vehicle_id));
    }
  });

  // Without knowledge sharing: each vehicle trains on its own scenario.
  std::vector<HyperParams> local(datasets.size());
  timer.run("local", [&] {
    for (std::size_t v = 0; v < datasets.size(); ++v) {
      local[v] = train_local_rounds(cfg.federation.initial_params, datasets[v],
                                    cfg.federation);
    }
  });

  FederationResult fed = timer.run(
      "federation", [&] { return run_federation(datasets, cfg.federation); });
  report.federated_global = fed.global;
  record_rounds(report, fed.history);

  std::vector<HyperParams> personal;
  timer.run("personalization", [&] {
    personalize_all(datasets, fed.global, cfg.personalization, personal);
  });

  timer.run("prediction", [&] {
    for (std::size_t v = 0; v < datasets.size(); ++v) {
      VehicleReport vr;
      vr.vehicle_id = datasets[v].vehicle_id;
      vr.scenario = cfg.scenarios[v].scenario;
      vr.train_size = datasets[v].size();
      vr.test = cfg.test;
      vr.arms.push_back(evaluate_arm("local", local[v], datasets[v], cfg.test));
      vr.arms.push_back(evaluate_arm("federated", fed.global, datasets[v], cfg.test));
      vr.arms.push_back(evaluate_arm("shared", personal[v], datasets[v], cfg.test));
      report.vehicles.push_back(std::move(vr));
    }
  });
  return report;
}

ExperimentReport run_experiment2(const Experiment2Config& cfg) {
  ExperimentReport report;
  report.experiment = 2;
  StageTimer timer(report);

  std::vector<Dataset> datasets;
  std::vector<Trajectory> tests;
  timer.run("simulation", [&] {
    cfg.federation.validate();
    cfg.personalization.validate();
    cfg.pooled.validate();
    const std::pair<const char*, const ControllerConfig*> vehicles[] = {
        {"aggressive", &cfg.aggressive}, {"passive", &cfg.passive}};
    for (const auto& [id, controller] : vehicles) {
      const Trajectory train = simulate_trajectory(cfg.leader, *controller, id);
      datasets.push_back(to_dataset(train, id));
      tests.push_back(cfg.held_out_leader
                          ? simulate_trajectory(*cfg.held_out_leader, *controller, id)
                          : train);
    }
  });

  const HyperParams pooled = timer.run("pooled", [&] {
    return train_pooled(datasets, cfg.federation.initial_params, cfg.pooled);
  });
  report.pooled = pooled;
  Dataset pooled_data;
  pooled_data.vehicle_id = "pooled";
  for (const auto& d : datasets) {
    pooled_data.inputs.insert(pooled_data.inputs.end(), d.inputs.begin(), d.inputs.end());
    pooled_data.outputs.insert(pooled_data.outputs.end(), d.outputs.begin(),
                               d.outputs.end());
  }

  FederationResult fed = timer.run(
      "federation", [&] { return run_federation(datasets, cfg.federation); });
  report.federated_global = fed.global;
  record_rounds(report, fed.history);

  std::vector<HyperParams> personal;
  timer.run("personalization", [&] {
    personalize_all(datasets, fed.global, cfg.personalization, personal);
  });

  timer.run("prediction", [&] {
    for (std::size_t v = 0; v < datasets.size(); ++v) {
      VehicleReport vr;
      vr.vehicle_id = datasets[v].vehicle_id;
      vr.scenario = to_string(ScenarioLabel::full_oscillation);
      vr.train_size = datasets[v].size();
      vr.test = tests[v];
      vr.arms.push_back(evaluate_arm("pooled", pooled, pooled_data, tests[v]));
      vr.arms.push_back(evaluate_arm("personalized", personal[v], datasets[v], tests[v]));
      report.vehicles.push_back(std::move(vr));
    }
  });
  return report;
}

std::string format_rmse_table(const ExperimentReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-36s | %-10s | %-10s\n", "Prediction Error (RMSE, m/s)",
                "Aggressive", "Passive");
  out << line;
  out << std::string(36, '-') << "-+-" << std::string(10, '-') << "-+-"
      << std::string(10, '-') << "\n";
  const auto& agg = report.vehicle("aggressive");
  const auto& pas = report.vehicle("passive");
  const std::pair<const char*, const char*> rows[] = {
      {"Pooling Data", "pooled"},
      {"Knowledge Sharing & Personalization", "personalized"}};
  for (const auto& [label, arm] : rows) {
    std::snprintf(line, sizeof line, "%-36s | %10.2f | %10.2f\n", label,
                  agg.arm(arm).rmse, pas.arm(arm).rmse);
    out << line;
  }
  return out.str();
}

}  // namespace fedcf
