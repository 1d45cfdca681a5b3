#include <cmath>
#include <random>

#include <benchmark/benchmark.h>

#include "fedcf/cf_sim.hpp"
#include "fedcf/federation.hpp"
#include "fedcf/gp.hpp"
#include "fedcf/trainer.hpp"

using namespace fedcf;

namespace {

Dataset car_following(std::size_t n, std::uint64_t seed, const std::string& id) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  Dataset d;
  d.vehicle_id = id;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 5.0 + 10.0 * static_cast<double>(i) / static_cast<double>(n);
    d.inputs.push_back(x);
    d.outputs.push_back(10.0 + 4.0 * std::tanh((x - 10.0) / 3.0) + noise(rng));
  }
  return d;
}

const HyperParams kParams(100.0, 30.0, 1.0);

}  // namespace

static void BM_Nlml(benchmark::State& state) {
  const auto d = car_following(static_cast<std::size_t>(state.range(0)), 1, "v");
  for (auto _ : state) benchmark::DoNotOptimize(nlml(kParams, d));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Nlml)->RangeMultiplier(2)->Range(16, 512)->Complexity(benchmark::oNCubed);

static void BM_NlmlWithGrad(benchmark::State& state) {
  const auto d = car_following(static_cast<std::size_t>(state.range(0)), 1, "v");
  for (auto _ : state) benchmark::DoNotOptimize(nlml_with_grad(kParams, d));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_NlmlWithGrad)->RangeMultiplier(2)->Range(16, 512)->Complexity(benchmark::oNCubed);

// One local round (U steps) at the default mini-batch size.
static void BM_SgdLocal(benchmark::State& state) {
  const auto d = car_following(197, 2, "v");
  TrainingConfig cfg;
  cfg.local_updates = 50;
  cfg.batch_size = static_cast<std::size_t>(state.range(0));
  cfg.learning_rate = 0.05;
  for (auto _ : state) benchmark::DoNotOptimize(sgd_local(kParams, d, cfg));
}
BENCHMARK(BM_SgdLocal)->Arg(16)->Arg(64)->Arg(197)->Unit(benchmark::kMillisecond);

static void BM_FederationRound(benchmark::State& state) {
  std::vector<Dataset> data;
  for (int v = 0; v < state.range(0); ++v) data.push_back(car_following(197, 10 + v, "v" + std::to_string(v)));
  FederationConfig cfg;
  cfg.rounds = 1;
  cfg.parallel = false;
  cfg.training.local_updates = 50;
  cfg.training.batch_size = 64;
  cfg.initial_params = kParams;
  for (auto _ : state) benchmark::DoNotOptimize(run_federation(data, cfg));
}
BENCHMARK(BM_FederationRound)->Arg(1)->Arg(3)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_SimulateFollower(benchmark::State& state) {
  const auto leader = generate_oscillation({});
  const auto c = passive_controller();
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_follower(leader, c, equilibrium_state(leader.speeds.front(), c)));
  }
}
BENCHMARK(BM_SimulateFollower);
BENCHMARK_MAIN();
