#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "fedcf/trainer.hpp"
#include "oracles.hpp"

using namespace fedcf;

namespace {

// y ~ GP(0, K_y) with the given parameters.
Dataset gp_draw(std::size_t n, const HyperParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset d;
  d.vehicle_id = "draw";
  for (std::size_t i = 0; i < n; ++i) d.inputs.push_back(u(rng));
  const Eigen::MatrixXd l = oracle::noisy_covariance(p, d.inputs).llt().matrixL();
  Eigen::VectorXd e(static_cast<Eigen::Index>(n));
  for (auto& v : e) v = z(rng);
  const Eigen::VectorXd y = l * e;
  d.outputs.assign(y.data(), y.data() + y.size());
  return d;
}

double log_distance(const HyperParams& a, const HyperParams& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    const double d = a.to_log()[j] - b.to_log()[j];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("training config validation") {
  TrainingConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.local_updates = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.learning_rate = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.lr_decay = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.lr_decay = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("minibatch sampling") {
  Rng rng(1);
  SUBCASE("full batch") {
    auto b = sample_minibatch(5, 5, rng);
    std::sort(b.begin(), b.end());
    CHECK(b == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK(sample_minibatch(5, 64, rng).size() == 5);
  }
  SUBCASE("distinct indices, deterministic under a seed") {
    Rng a(77), b(77);
    for (int k = 0; k < 50; ++k) {
      const auto x = sample_minibatch(197, 32, a);
      CHECK(x == sample_minibatch(197, 32, b));
      CHECK(std::set<std::size_t>(x.begin(), x.end()).size() == 32);
      CHECK(*std::max_element(x.begin(), x.end()) < 197);
    }
  }
  SUBCASE("index frequencies are uniform") {
    std::map<std::size_t, int> count;
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) {
      for (auto i : sample_minibatch(10, 2, rng)) ++count[i];
    }
    const double expected = draws * 2.0 / 10.0;
    double chi2 = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(std::abs(count[i] - expected) / expected < 0.05);
      chi2 += (count[i] - expected) * (count[i] - expected) / expected;
    }
    // 9 degrees of freedom, 0.999 quantile.
    CHECK(chi2 < 27.88);
  }
  CHECK_THROWS_AS(sample_minibatch(0, 1, rng), std::invalid_argument);
}

TEST_CASE("gradient clipping") {
  LogParams g{30.0, 40.0, 0.0};
  CHECK(clip_gradient(g, 10.0) == doctest::Approx(50.0));
  CHECK(g[0] == doctest::Approx(6.0));
  CHECK(g[1] == doctest::Approx(8.0));
  LogParams small{0.1, 0.2, 0.3};
  clip_gradient(small, 10.0);
  CHECK(small == LogParams{0.1, 0.2, 0.3});
}

TEST_CASE("proximal step") {
  const LogParams x{1.0, 2.0, 3.0};
  const LogParams g{0.5, -0.5, 1.0};
  CHECK(sgd_step(x, g, 0.1, std::nullopt) == LogParams{1.0 - 0.05, 2.0 + 0.05, 3.0 - 0.1});
  // omega = 0 is plain gradient descent.
  const Proximal none{0.0, HyperParams(1, 1, 1)};
  CHECK(sgd_step(x, g, 0.1, none) == sgd_step(x, g, 0.1, std::nullopt));
  // The closed-form map is the minimizer of omega||y-a||^2 + ||y-z||^2/(2 eta).
  const Proximal prox{2.0, HyperParams::from_log({0.0, 0.0, 0.0})};
  const auto y = sgd_step(x, g, 0.1, prox);
  const auto z = sgd_step(x, g, 0.1, std::nullopt);
  for (std::size_t j = 0; j < 3; ++j) {
    const double stationarity = 2.0 * prox.omega * y[j] + (y[j] - z[j]) / 0.1;
    CHECK(std::abs(stationarity) < 1e-12);
  }
}

TEST_CASE("sgd_local") {
  const auto data = oracle::synthetic_cf(40, 3);
  const HyperParams start(50, 5, 0.5);

  SUBCASE("zero step size returns the start") {
    TrainingConfig cfg;
    cfg.local_updates = 1;
    cfg.learning_rate = 0.0;
    CHECK(sgd_local(start, data, cfg) == start);
    cfg.local_updates = 0;
    CHECK_THROWS_AS(sgd_local(start, data, cfg), std::invalid_argument);
  }

  SUBCASE("bitwise deterministic") {
    TrainingConfig cfg;
    cfg.local_updates = 30;
    cfg.batch_size = 8;
    cfg.seed = 12;
    CHECK(sgd_local(start, data, cfg) == sgd_local(start, data, cfg));
    auto other = cfg;
    other.seed = 13;
    CHECK_FALSE(sgd_local(start, data, cfg) == sgd_local(start, data, other));
  }

  SUBCASE("full-batch descent does not increase the loss") {
    const auto draw = gp_draw(30, HyperParams(1.0, 1.5, 0.2), 31);
    const HyperParams init(3.0, 0.5, 1.0);
    TrainingConfig cfg;
    cfg.local_updates = 500;
    cfg.learning_rate = 0.05;
    cfg.lr_decay = 0.995;
    cfg.batch_size = draw.size();
    const auto fitted = sgd_local(init, draw, cfg);
    CHECK(oracle::nlml(fitted, draw) <= oracle::nlml(init, draw));
  }

  SUBCASE("a huge proximal weight pins the anchor") {
    TrainingConfig cfg;
    cfg.local_updates = 200;
    cfg.learning_rate = 0.05;
    cfg.batch_size = 16;
    const auto out = sgd_local(start, data, cfg, Proximal{1e6, start});
    CHECK(log_distance(out, start) < 1e-3);
  }

  SUBCASE("a diverging run reports its step") {
    TrainingConfig cfg;
    cfg.local_updates = 10000;
    cfg.learning_rate = 1e3;
    cfg.batch_size = 8;
    try {
      sgd_local(start, data, cfg);
      FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
      CHECK(e.step() >= 0);
      CHECK(e.step() <= cfg.local_updates);
    }
  }
}

TEST_CASE("minibatch gradients average to the full-batch gradient on a separable kernel") {
  // With inputs much farther apart than the length scale the marginal
  // likelihood decouples across points, and the subset estimator is exact
  // in expectation over all size-2 batches.
  const Dataset d{{0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0},
                  {0.3, -1.2, 0.8, 2.0, -0.4, 0.1, 1.1, -0.9},
                  "sep"};
  const HyperParams p(1.3, 0.5, 0.4);
  const auto full = nlml_grad(p, d);
  LogParams mean{};
  int count = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = i + 1; j < d.size(); ++j) {
      const std::vector<std::size_t> idx{i, j};
      const auto g = nlml_grad(p, d.subset(idx));
      for (std::size_t k = 0; k < 3; ++k) mean[k] += g[k];
      ++count;
    }
  }
  for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(mean[k] / count - full[k]) <= 1e-8);
}
