#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "fedcf/gp.hpp"
#include "oracles.hpp"

using namespace fedcf;

TEST_CASE("hyperparameters round-trip through log space") {
  const HyperParams p(2.5, 0.3, 1e-3);
  const auto q = HyperParams::from_log(p.to_log());
  CHECK(q == p);
  CHECK(q.sigma0() == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(q.length_scale() == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(q.sigma_eps() == doctest::Approx(1e-3).epsilon(1e-12));

  CHECK_THROWS_AS(HyperParams(0.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(HyperParams(1.0, -1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(HyperParams(1.0, 1.0, NAN), std::invalid_argument);
  CHECK_THROWS_AS(HyperParams::from_log({800.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("dataset validation") {
  Dataset d{{1.0, 2.0}, {1.0}, "v"};
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  d = Dataset{{}, {}, "v"};
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  d = Dataset{{1.0, INFINITY}, {1.0, 2.0}, "v"};
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  CHECK_THROWS_AS(nlml(HyperParams(1, 1, 1), d), std::invalid_argument);
}

TEST_CASE("rbf kernel values") {
  CHECK(rbf_kernel(3.7, 3.7, 0.2) == 1.0);
  CHECK(rbf_kernel(0.0, 1.0, 1.0) == doctest::Approx(0.606531).epsilon(1e-6));
  CHECK(rbf_kernel(2.0, 5.0, 1.5) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
  CHECK(rbf_kernel(2.0, 5.0, 1.5) == doctest::Approx(0.135335).epsilon(1e-5));
  CHECK_THROWS_AS(rbf_kernel(0.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("covariance matrix") {
  const std::vector<double> v{4.2};
  const auto k1 = covariance_matrix(v, v, HyperParams(1, 7, 1), true);
  CHECK(k1(0, 0) == doctest::Approx(2.0));

  // sigma_eps = 0 is not representable; a tiny value stands in.
  const std::vector<double> x{0.0, 1.0};
  const auto k2 = covariance_matrix(x, x, HyperParams(2, 1, 1e-300), true);
  CHECK(k2(0, 0) == doctest::Approx(2.0));
  CHECK(k2(0, 1) == doctest::Approx(2.0 * std::exp(-0.5)));
  CHECK(k2(1, 0) == doctest::Approx(2.0 * std::exp(-0.5)));
  CHECK(k2(1, 1) == doctest::Approx(2.0));

  SUBCASE("random inputs give a positive semidefinite, symmetric kernel") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
      const auto p = oracle::random_params(rng);
      const auto d = oracle::random_dataset(rng, 10);
      const auto k = covariance_matrix(d.inputs, d.inputs, p, false);
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
      CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
      const auto ky = covariance_matrix(d.inputs, d.inputs, p, true);
      CHECK((ky - ky.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }

  SUBCASE("cross covariance never adds noise") {
    const std::vector<double> q{0.0, 2.0};
    const auto k = covariance_matrix(x, q, HyperParams(1, 1, 5), true);
    CHECK(k(0, 0) == doctest::Approx(1.0));
  }
}

TEST_CASE("nlml closed form and oracle") {
  const Dataset one{{0.0}, {0.0}, "v"};
  const double expected = 0.5 * (std::log(2.0) + std::log(2.0 * std::numbers::pi));
  CHECK(nlml(HyperParams(1, 1, 1), one) == doctest::Approx(1.26552).epsilon(1e-5));
  CHECK(nlml(HyperParams(1, 1, 1), one) == doctest::Approx(expected).epsilon(1e-7));

  // The determinant term dominates: increments approach log(sigma_eps ratio).
  const double a = nlml(HyperParams(1, 1, 1e3), one);
  const double b = nlml(HyperParams(1, 1, 1e4), one);
  CHECK(b > a);
  CHECK(b - a == doctest::Approx(std::log(10.0)).epsilon(1e-6));

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = oracle::random_params(rng);
    const auto d = oracle::random_dataset(rng, 5);
    CHECK(oracle::relative_error(nlml(p, d), oracle::nlml(p, d)) <= 1e-10);
    CHECK(nlml_with_grad(p, d).loss == doctest::Approx(nlml(p, d)).epsilon(1e-13));
  }
}

TEST_CASE("nlml is invariant to permuting the data") {
  std::mt19937_64 rng(17);
  const auto p = oracle::random_params(rng);
  auto d = oracle::random_dataset(rng, 12);
  const double before = nlml(p, d);
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  CHECK(nlml(p, d.subset(idx)) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("duplicate inputs stay factorizable") {
  Dataset d{{15.0, 15.0, 15.0, 15.0}, {15.0, 15.1, 14.9, 15.0}, "dup"};
  CHECK_NOTHROW(nlml(HyperParams(100, 30, 1e-3), d));
  d.inputs.assign(200, 15.0);
  d.outputs.assign(200, 15.0);
  CHECK(std::isfinite(nlml(HyperParams(225, 5, 1e-2), d)));
}

TEST_CASE("jitter escalation gives up with a numerical error") {
  // sigma0 + sigma_eps^2 overflows, so no jitter level can help.
  Dataset d{{0.0, 1.0}, {0.0, 1.0}, "v"};
  const auto p = HyperParams::from_log({709.7, 0.0, 354.85});
  try {
    nlml(p, d);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.attempted_jitter() == doctest::Approx(kMaxJitter));
  }
}

TEST_CASE("gradient") {
  SUBCASE("zero target: only the determinant term remains") {
    const Dataset d{{0.3}, {0.0}, "v"};
    const auto g = nlml_grad(HyperParams(2, 1, 0.5), d);
    CHECK(g[0] > 0.0);
    // dL/dlog sigma0 = (1/2) sigma0 / K_y for n = 1.
    CHECK(g[0] == doctest::Approx(0.5 * 2.0 / 2.25).epsilon(1e-6));
  }

  SUBCASE("matches central finite differences") {
    std::mt19937_64 rng(21);
    const auto p = oracle::random_params(rng);
    const auto d = oracle::random_dataset(rng, 20);
    const auto g = nlml_grad(p, d);
    const auto fd = oracle::finite_difference([&](const HyperParams& q) { return nlml(q, d); }, p);
    for (std::size_t j = 0; j < 3; ++j) CHECK(oracle::relative_error(g[j], fd[j]) <= 1e-5);
  }

  SUBCASE("vanishes at an optimum reached by long descent") {
    const auto d = oracle::synthetic_cf(25, 4);
    auto theta = HyperParams(50, 5, 0.5).to_log();
    for (int it = 0; it < 20000; ++it) {
      const auto g = nlml_grad(HyperParams::from_log(theta), d);
      for (std::size_t j = 0; j < 3; ++j) theta[j] -= 0.2 * g[j];
    }
    const auto g = nlml_grad(HyperParams::from_log(theta), d);
    CHECK(std::hypot(g[0], g[1], g[2]) < 1e-4);
  }
}

TEST_CASE("posterior prediction") {
  SUBCASE("near-interpolation with tiny noise") {
    const Dataset d{{0.0, 1.0, 2.5, 4.0}, {1.0, -0.5, 2.0, 0.3}, "v"};
    const auto post = posterior_predict(HyperParams(1, 1, 1e-4), d, d.inputs);
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(std::abs(post.mean[i] - d.outputs[i]) <= 1e-3);
    }
  }

  SUBCASE("prior reversion far away") {
    const Dataset d{{0.0, 1.0}, {3.0, 4.0}, "v"};
    const std::vector<double> far{1e3};
    const auto post = posterior_predict(HyperParams(2, 1, 0.1), d, far);
    CHECK(std::abs(post.mean[0]) < 1e-12);
    CHECK(post.variance[0] == doctest::Approx(2.0));
  }

  SUBCASE("matches a dense-inverse oracle") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 5; ++trial) {
      const auto p = oracle::random_params(rng);
      const auto d = oracle::random_dataset(rng, 10);
      const std::vector<double> q{-1.0, 0.5, 2.0, 3.3, 7.0};
      const auto got = posterior_predict(p, d, q);
      const auto want = oracle::posterior(p, d, q);
      REQUIRE(got.mean.size() == q.size());
      REQUIRE(got.variance.size() == q.size());
      for (std::size_t i = 0; i < q.size(); ++i) {
        CHECK(std::abs(got.mean[i] - want.mean[i]) <= 1e-8 * std::max(1.0, std::abs(want.mean[i])));
        CHECK(std::abs(got.variance[i] - std::max(0.0, want.variance[i])) <= 1e-8 * std::max(1.0, p.sigma0()));
        CHECK(got.variance[i] >= 0.0);
      }
    }
  }

  SUBCASE("empty query") {
    const Dataset d{{0.0}, {1.0}, "v"};
    CHECK(posterior_predict(HyperParams(1, 1, 1), d, std::vector<double>{}).mean.empty());
  }
}
