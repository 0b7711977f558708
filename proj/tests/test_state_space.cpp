#include "support/oracle.hpp"
#include "tasc/errors.hpp"
#include "tasc/state_space.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace tasc;
using tasc::testing::JointGaussian;
using tasc::testing::max_abs;

namespace {

StateSpaceParams scalar_model(double a, double h, double q, double r, double m0, double p0) {
  StateSpaceParams th;
  th.A = MatrixXd::Constant(1, 1, a);
  th.H = MatrixXd::Constant(1, 1, h);
  th.Q = MatrixXd::Constant(1, 1, q);
  th.R = MatrixXd::Constant(1, 1, r);
  th.m0 = VectorXd::Constant(1, m0);
  th.P0 = MatrixXd::Constant(1, 1, p0);
  return th;
}

// Drops row 0 from H and R.
StateSpaceParams donor_model(const StateSpaceParams& th) {
  StateSpaceParams out = th;
  const Index n = th.obs_dim() - 1;
  out.H = th.H.bottomRows(n);
  out.R = th.R.bottomRightCorner(n, n);
  return out;
}

}  // namespace

TEST_CASE("scalar kalman step by hand") {
  // P_pred = 0.5 + 0.5 = 1, S = 2, gain 0.5.
  const auto th = scalar_model(1.0, 1.0, 0.5, 1.0, 0.0, 0.5);
  const auto s = kalman_step(VectorXd::Constant(1, 1.0), initial_state(th), th);
  CHECK(s.k == 1);
  CHECK(s.m_pred(0) == doctest::Approx(0.0));
  CHECK(s.P_pred(0, 0) == doctest::Approx(1.0));
  CHECK(s.m(0) == doctest::Approx(0.5));
  CHECK(s.P(0, 0) == doctest::Approx(0.5));
  // innovation 1 with variance 2
  CHECK(s.log_density == doctest::Approx(-0.5 * (std::log(2.0 * std::numbers::pi * 2.0) + 0.5)));
}

TEST_CASE("seasonal offset shifts the innovation") {
  const auto th = scalar_model(1.0, 1.0, 0.5, 1.0, 0.0, 0.5);
  const auto plain = kalman_step(VectorXd::Constant(1, 1.0), initial_state(th), th);
  const auto shifted = kalman_step(VectorXd::Constant(1, 3.0), initial_state(th), th, 2.0);
  CHECK(shifted.m(0) == doctest::Approx(plain.m(0)));
  CHECK(shifted.log_density == doctest::Approx(plain.log_density));
}

TEST_CASE("unit-variance standard normal log density") {
  // y = 0 with S = 1 gives -0.5 log(2 pi).
  const auto th = scalar_model(1.0, 1.0, 0.25, 0.5, 0.0, 0.25);
  const auto s = kalman_step(VectorXd::Zero(1), initial_state(th), th);
  CHECK(s.log_density == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)));
}

TEST_CASE("filter and smoother match joint gaussian conditioning") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const Index d = 1 + trial % 3;
    const Index n = 1 + trial % 4;
    const Index K = 1 + trial % 5;
    const auto th = tasc::testing::random_model(d, n, rng, trial % 2 == 0);
    const MatrixXd Y = tasc::testing::gaussian(n, K, rng);
    const JointGaussian oracle(th, Y);

    const auto filtered = filter_pass(Y, th);
    REQUIRE(filtered.size() == static_cast<std::size_t>(K));
    for (Index k = 1; k <= K; ++k) {
      const auto [m, P] = oracle.posterior(k, k);
      const auto& f = filtered[static_cast<std::size_t>(k - 1)];
      CHECK(f.k == k);
      CHECK(max_abs(f.m, m) < 1e-9);
      CHECK(max_abs(f.P, P) < 1e-9);
    }
    const auto smoothed = smooth_pass(filtered, th);
    REQUIRE(smoothed.length() == K);
    for (Index k = 0; k <= K; ++k) {
      const auto [m, P] = oracle.posterior(k, K);
      CHECK(max_abs(smoothed.m_s[static_cast<std::size_t>(k)], m) < 1e-9);
      CHECK(max_abs(smoothed.P_s[static_cast<std::size_t>(k)], P) < 1e-9);
    }
    CHECK(log_likelihood(Y, th) == doctest::Approx(oracle.log_marginal()).epsilon(1e-10));
  }
}

TEST_CASE("seasonal filtering matches conditioning on offset-free data") {
  Rng rng(12);
  const auto th = tasc::testing::random_model(2, 3, rng, true);
  const MatrixXd Y = tasc::testing::gaussian(3, 4, rng);
  const std::vector<double> s = {0.5, -1.0, 2.0, 0.25};
  FilterOptions opts;
  opts.seasonal = s;
  const auto filtered = filter_pass(Y, th, opts);
  const JointGaussian oracle(th, Y, 0, s);
  for (Index k = 1; k <= 4; ++k)
    CHECK(max_abs(filtered[static_cast<std::size_t>(k - 1)].m, oracle.posterior(k, k).first) < 1e-9);
}

TEST_CASE("missing target equals the donor-only model") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 1 + trial % 3;
    const Index n = 2 + trial % 3;
    const auto th = tasc::testing::random_model(d, n, rng, trial % 2 == 1);
    const MatrixXd Y = tasc::testing::gaussian(n, 5, rng);
    FilterOptions opts;
    opts.missing_target_from = 1;
    const auto full = filter_pass(Y, th, opts);
    const auto reduced = filter_pass(Y.bottomRows(n - 1), donor_model(th));
    for (std::size_t k = 0; k < full.size(); ++k) {
      CHECK(max_abs(full[k].m, reduced[k].m) < 1e-12);
      CHECK(max_abs(full[k].P, reduced[k].P) < 1e-12);
      CHECK(full[k].log_density == doctest::Approx(reduced[k].log_density).epsilon(1e-12));
    }
  }
}

TEST_CASE("missing target ignores the target cell, including NaN") {
  Rng rng(14);
  const auto th = tasc::testing::random_model(2, 3, rng, true);
  VectorXd y = tasc::testing::gaussian(3, 1, rng);
  const auto a = kalman_step_missing_target(y, initial_state(th), th);
  y(0) = std::numeric_limits<double>::quiet_NaN();
  const auto b = kalman_step_missing_target(y, initial_state(th), th);
  CHECK(max_abs(a.m, b.m) == 0.0);
  CHECK(max_abs(a.P, b.P) == 0.0);
}

TEST_CASE("partially missing path matches conditioning") {
  Rng rng(15);
  const auto th = tasc::testing::random_model(2, 3, rng, false);
  const MatrixXd Y = tasc::testing::gaussian(3, 5, rng);
  FilterOptions opts;
  opts.missing_target_from = 3;
  const auto filtered = filter_pass(Y, th, opts);
  const auto smoothed = smooth_pass(filtered, th);
  const JointGaussian oracle(th, Y, 3);
  for (Index k = 1; k <= 5; ++k) {
    CHECK(max_abs(filtered[static_cast<std::size_t>(k - 1)].m, oracle.posterior(k, k).first) < 1e-9);
    CHECK(max_abs(smoothed.m_s[static_cast<std::size_t>(k)], oracle.posterior(k, 5).first) < 1e-9);
  }
  CHECK(log_likelihood(Y, th, opts) == doctest::Approx(oracle.log_marginal()).epsilon(1e-10));
}

TEST_CASE("rts step on a single step equals conditioning") {
  Rng rng(16);
  const auto th = tasc::testing::random_model(2, 2, rng, true);
  const MatrixXd Y = tasc::testing::gaussian(2, 1, rng);
  const auto f1 = filter_pass(Y, th);
  const auto step = rts_step(initial_state(th), f1[0].m, f1[0].P, th);
  const JointGaussian oracle(th, Y);
  CHECK(max_abs(step.m_s, oracle.posterior(0, 1).first) < 1e-10);
  CHECK(max_abs(step.P_s, oracle.posterior(0, 1).second) < 1e-10);
}

TEST_CASE("parameter validation") {
  Rng rng(17);
  auto th = tasc::testing::random_model(2, 3, rng, true);
  CHECK_NOTHROW(th.validate());
  auto bad = th;
  bad.H = MatrixXd::Zero(3, 3);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = th;
  bad.R(0, 1) = bad.R(1, 0) = 0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = th;
  bad.Q(0, 0) = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  const MatrixXd Y = MatrixXd::Zero(2, 4);
  CHECK_THROWS_AS(filter_pass(Y, th), ConfigError);
}
