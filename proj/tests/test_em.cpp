#include "support/em_oracle.hpp"
#include "support/oracle.hpp"
#include "tasc/em.hpp"
#include "tasc/errors.hpp"
#include "tasc/simulation.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace tasc;
using namespace tasc::testing;

namespace {

MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }

}  // namespace

TEST_CASE("m-step on scalar moments by hand") {
  SufficientStats s;
  s.Sigma = scalar(2.0);
  s.Phi = scalar(1.0);
  s.B = scalar(2.0);
  s.C = scalar(0.5);
  s.D = scalar(4.0);
  s.count = 10;
  StateSpaceParams old;
  old.A = old.H = old.Q = old.R = old.P0 = scalar(1.0);
  old.m0 = VectorXd::Zero(1);
  const auto th = m_step(s, old, VectorXd::Zero(1), scalar(1.0));
  CHECK(th.A(0, 0) == doctest::Approx(0.5));
  CHECK(th.H(0, 0) == doctest::Approx(1.0));
  CHECK(th.Q(0, 0) == doctest::Approx(1.75));
  CHECK(th.R(0, 0) == doctest::Approx(2.0));
  CHECK(th.P0(0, 0) == doctest::Approx(1.0));
  CHECK(th.m0(0) == doctest::Approx(0.0));
}

TEST_CASE("m-step initial covariance absorbs the mean shift") {
  SufficientStats s;
  s.Sigma = s.Phi = s.D = scalar(1.0);
  s.B = s.C = scalar(0.5);
  s.count = 3;
  StateSpaceParams old;
  old.A = old.H = old.Q = old.R = old.P0 = scalar(1.0);
  old.m0 = VectorXd::Zero(1);
  const auto th = m_step(s, old, VectorXd::Constant(1, 2.0), scalar(0.5));
  CHECK(th.m0(0) == doctest::Approx(2.0));
  CHECK(th.P0(0, 0) == doctest::Approx(4.5));
}

TEST_CASE("m-step is a stationary point of the expected log-likelihood") {
  Rng rng(21);
  for (int trial = 0; trial < 6; ++trial) {
    const bool diag = trial % 2 == 0;
    CHECK(m_step_gradient(random_moments(rng, diag), diag) < 1e-4);
  }
}

TEST_CASE("init_params is deterministic and well-formed") {
  Rng rng(22);
  const MatrixXd Y = gaussian(6, 20, rng);
  EmConfig cfg;
  cfg.d = 2;
  cfg.seed = 9;
  const auto a = init_params(Y, cfg, 1);
  const auto b = init_params(Y, cfg, 1);
  const auto c = init_params(Y, cfg, 2);
  CHECK(a.A == b.A);
  CHECK(a.A != c.A);
  CHECK(a.H == c.H);  // only the transition jitter depends on the restart
  CHECK(a.Q == MatrixXd::Identity(2, 2));
  CHECK(a.R.diagonal().minCoeff() >= 1e-4);
  CHECK_NOTHROW(a.validate());
  cfg.d = 7;
  CHECK_THROWS_AS(init_params(Y, cfg, 0), ConfigError);
}

TEST_CASE("em log-likelihood trace never decreases") {
  SimulationConfig sc;
  sc.d_true = 2;
  sc.n_units = 6;
  sc.t_total = 40;
  sc.t0 = 30;
  sc.seed = 5;
  const auto sim = simulate(sc);
  EmConfig cfg;
  cfg.d = 2;
  cfg.n_iters = 60;
  cfg.rel_tol = 0.0;
  cfg.n_restarts = 2;
  const auto res = em_pre(sim.panel.values().leftCols(30), cfg);
  REQUIRE(res.loglik_trace.size() >= 2);
  for (std::size_t i = 1; i < res.loglik_trace.size(); ++i)
    CHECK(res.loglik_trace[i] >= res.loglik_trace[i - 1] - 1e-6);
  CHECK(res.monotonicity_violations == 0);
  CHECK(res.final_loglik == doctest::Approx(res.loglik_trace.back()));
}

TEST_CASE("zero iterations return the initial parameters") {
  Rng rng(23);
  const MatrixXd Y = gaussian(4, 15, rng);
  EmConfig cfg;
  cfg.d = 2;
  cfg.n_iters = 0;
  cfg.n_restarts = 1;
  const auto res = em_pre(Y, cfg);
  CHECK(res.loglik_trace.empty());
  CHECK(res.theta.A == init_params(Y, cfg, 0).A);
}

TEST_CASE("tasc counterfactual ignores target post values") {
  SimulationConfig sc;
  sc.d_true = 2;
  sc.n_units = 5;
  sc.t_total = 30;
  sc.t0 = 20;
  sc.seed = 8;
  const auto sim = simulate(sc);
  EmConfig cfg;
  cfg.d = 2;
  cfg.n_restarts = 2;
  cfg.n_iters = 30;
  const auto base = tasc_infer(sim.panel, cfg);
  const auto noisy = tasc_infer(sim.panel.with_target_post(VectorXd::Constant(10, 1e6)), cfg);
  const auto missing = tasc_infer(
      sim.panel.with_target_post(VectorXd::Constant(10, std::numeric_limits<double>::quiet_NaN())), cfg);
  CHECK(base.estimate.y_hat == noisy.estimate.y_hat);
  CHECK(base.estimate.y_hat == missing.estimate.y_hat);
  CHECK(base.estimate.y_hat.size() == 10);
  CHECK(base.estimate.fitted_pre.size() == 20);
  CHECK(((base.estimate.ci_upper - base.estimate.ci_lower).array() > 0.0).all());
}

TEST_CASE("confidence band width from a known variance") {
  StateSpaceParams th;
  th.A = th.Q = th.P0 = scalar(1.0);
  th.H = MatrixXd::Zero(2, 1);
  th.R = MatrixXd::Identity(2, 2);
  th.m0 = VectorXd::Zero(1);
  // With h1 = 0 the predictive variance is r1 = 1.
  const PanelData panel(MatrixXd::Zero(2, 4), 2);
  const auto est = tasc_counterfactual(panel, th, {}, 0.95, CiVariance::Predictive);
  CHECK(confidence_width(est) == doctest::Approx(2.0 * 1.959963984540054));
  const auto sig = tasc_counterfactual(panel, th, {}, 0.95, CiVariance::SignalOnly);
  CHECK(confidence_width(sig) == doctest::Approx(0.0));
}

TEST_CASE("gaussian interval quantiles") {
  CHECK(gaussian_interval_z(0.95) == doctest::Approx(1.959963984540054));
  CHECK(gaussian_interval_z(0.6826894921370859) == doctest::Approx(1.0));
  CHECK_THROWS_AS(gaussian_interval_z(1.0), ConfigError);
  CHECK_THROWS_AS(gaussian_interval_z(0.0), ConfigError);
}

TEST_CASE("em config validation") {
  EmConfig cfg;
  cfg.d = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.n_restarts = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.rel_tol = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("em is deterministic for a fixed seed") {
  Rng rng(24);
  const MatrixXd Y = gaussian(5, 25, rng);
  EmConfig cfg;
  cfg.d = 2;
  cfg.n_iters = 20;
  cfg.n_restarts = 3;
  cfg.seed = 77;
  const auto a = em_pre(Y, cfg);
  const auto b = em_pre(Y, cfg);
  CHECK(a.theta.A == b.theta.A);
  CHECK(a.loglik_trace == b.loglik_trace);
  CHECK(a.best_restart == b.best_restart);
}
