#include "fedcf/federation.hpp"

#include <cmath>
#include <exception>
#include <future>
#include <sstream>

namespace fedcf {

void FederationConfig::validate() const {
  if (rounds < 1) throw std::invalid_argument("federation: rounds must be >= 1");
  training.validate();
}

void FederationWeights::validate() const {
  if (alphas.empty()) throw std::invalid_argument("weights: no vehicles");
  double sum = 0.0;
  for (double a : alphas) {
    if (!(a > 0.0 && a <= 1.0)) {
      throw std::invalid_argument("weights: each alpha must lie in (0, 1]");
    }
    sum += a;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("weights: alphas must sum to 1");
  }
}

double FederationHistory::weighted_global_nlml(std::size_t round) const {
  const auto& r = rounds.at(round);
  double total = 0.0;
  for (std::size_t v = 0; v < alphas.size(); ++v) {
    total += alphas[v] * r.global_nlml.at(v);
  }
  return total;
}

LocalVehicle::LocalVehicle(Dataset data) : data_(std::move(data)) {
  data_.validate();
}

HyperParams LocalVehicle::local_update(const HyperParams& global,
                                       const TrainingConfig& cfg) {
  return sgd_local(global, data_, cfg);
}

double LocalVehicle::evaluate(const HyperParams& params) const {
  return nlml(params, data_);
}

std::uint64_t round_seed(std::uint64_t base_seed, const std::string& vehicle_id,
                         int round) noexcept {
  return derive_seed(base_seed, vehicle_stream_key(vehicle_id),
                     static_cast<std::uint64_t>(round));
}

FederationWeights compute_weights(std::span<const std::size_t> sizes) {
  if (sizes.empty()) {
    throw std::invalid_argument("compute_weights: no vehicles");
  }
  double total = 0.0;
  for (auto n : sizes) {
    if (n == 0) throw std::invalid_argument("compute_weights: zero-size dataset");
    total += static_cast<double>(n);
  }
  FederationWeights w;
  w.alphas.reserve(sizes.size());
  for (auto n : sizes) w.alphas.push_back(static_cast<double>(n) / total);
  return w;
}

HyperParams aggregate(std::span<const HyperParams> locals,
                      const FederationWeights& weights) {
  if (locals.empty() || locals.size() != weights.alphas.size()) {
    throw std::invalid_argument(
        "aggregate: parameter and weight counts differ or are zero");
  }
  weights.validate();
  const LogParams& base = locals.front().to_log();
  LogParams delta{0.0, 0.0, 0.0};
  for (std::size_t v = 0; v < locals.size(); ++v) {
    const auto& x = locals[v].to_log();
    for (std::size_t j = 0; j < 3; ++j) {
      delta[j] += weights.alphas[v] * (x[j] - base[j]);
    }
  }
  LogParams out;
  for (std::size_t j = 0; j < 3; ++j) out[j] = base[j] + delta[j];
  return HyperParams::from_log(out);
}

HyperParams train_local_rounds(const HyperParams& start, const Dataset& data,
                               const FederationConfig& cfg) {
  cfg.validate();
  HyperParams theta = start;
  for (int s = 0; s < cfg.rounds; ++s) {
    TrainingConfig t = cfg.training;
    t.seed = round_seed(cfg.training.seed, data.vehicle_id, s);
    theta = sgd_local(theta, data, t);
  }
  return theta;
}

namespace {

struct VehicleOutcome {
  HyperParams local;
  double local_loss = 0.0;
  std::exception_ptr error;
};

VehicleOutcome update_vehicle(VehicleClient& vehicle, const HyperParams& global,
                              TrainingConfig cfg) {
  VehicleOutcome out;
  try {
    out.local = vehicle.local_update(global, cfg);
    out.local_loss = vehicle.evaluate(out.local);
  } catch (...) {
    out.error = std::current_exception();
  }
  return out;
}

[[noreturn]] void rethrow_with_context(std::exception_ptr error,
                                       const std::string& vehicle_id, int round,
                                       const char* stage) {
  std::ostringstream msg;
  msg << "vehicle '" << vehicle_id << "', round " << round << " (" << stage
      << "): ";
  try {
    std::rethrow_exception(error);
  } catch (const std::exception& e) {
    msg << e.what();
  } catch (...) {
    msg << "unknown error";
  }
  throw FederationError(msg.str(), vehicle_id, round);
}

}  // namespace

FederationResult run_federation(std::span<VehicleClient* const> vehicles,
                                const FederationConfig& cfg) {
  cfg.validate();
  if (vehicles.empty()) {
    throw std::invalid_argument("run_federation: at least one vehicle required");
  }

  FederationResult result;
  auto& history = result.history;
  std::vector<std::size_t> sizes;
  for (auto* v : vehicles) {
    history.vehicle_ids.push_back(v->id());
    sizes.push_back(v->sample_count());
  }
  const FederationWeights weights = compute_weights(sizes);
  history.alphas = weights.alphas;

  HyperParams global = cfg.initial_params;
  const std::size_t count = vehicles.size();
  for (int s = 0; s < cfg.rounds; ++s) {
    std::vector<VehicleOutcome> outcomes(count);
    auto training_for = [&](std::size_t v) {
      TrainingConfig t = cfg.training;
      t.seed = round_seed(cfg.training.seed, history.vehicle_ids[v], s);
      return t;
    };
    if (cfg.parallel && count > 1) {
      std::vector<std::future<VehicleOutcome>> pending;
      pending.reserve(count);
      for (std::size_t v = 0; v < count; ++v) {
        pending.push_back(std::async(std::launch::async, update_vehicle,
                                     std::ref(*vehicles[v]), global,
                                     training_for(v)));
      }
      for (std::size_t v = 0; v < count; ++v) outcomes[v] = pending[v].get();
    } else {
      for (std::size_t v = 0; v < count; ++v) {
        outcomes[v] = update_vehicle(*vehicles[v], global, training_for(v));
      }
    }

    RoundRecord record;
    for (std::size_t v = 0; v < count; ++v) {
      if (outcomes[v].error) {
        rethrow_with_context(outcomes[v].error, history.vehicle_ids[v], s,
                             "local update");
      }
      record.locals.push_back(outcomes[v].local);
      record.local_nlml.push_back(outcomes[v].local_loss);
    }

    global = aggregate(record.locals, weights);
    record.global = global;
    for (std::size_t v = 0; v < count; ++v) {
      try {
        record.global_nlml.push_back(vehicles[v]->evaluate(global));
      } catch (...) {
        rethrow_with_context(std::current_exception(), history.vehicle_ids[v],
                             s, "evaluation");
      }
    }
    history.rounds.push_back(std::move(record));
  }
  result.global = global;
  return result;
}

FederationResult run_federation(const std::vector<Dataset>& datasets,
                                const FederationConfig& cfg) {
  std::vector<std::unique_ptr<VehicleClient>> owned;
  std::vector<VehicleClient*> clients;
  for (const auto& d : datasets) {
    owned.push_back(std::make_unique<LocalVehicle>(d));
    clients.push_back(owned.back().get());
  }
  return run_federation(clients, cfg);
}

}  // namespace fedcf
