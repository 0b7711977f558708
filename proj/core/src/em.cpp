#include "tasc/em.hpp"

#include "linalg.hpp"
#include "tasc/errors.hpp"
#include "tasc/log.hpp"
#include "tasc/random.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>

namespace tasc {

namespace {

constexpr double kResidualFloor = 1e-4;
constexpr double kNoiseFloor = 1e-10;
constexpr double kMonotoneSlack = 1e-6;

MatrixXd subtract_seasonal(const MatrixXd& Y, const VectorXd& seasonal) {
  if (seasonal.size() == 0) return Y;
  return Y.rowwise() - seasonal.transpose();
}

MatrixXd noise_update(const MatrixXd& full, bool diag) {
  MatrixXd out = detail::symmetrize(full);
  if (diag) out = MatrixXd(out.diagonal().asDiagonal());
  for (Index i = 0; i < out.rows(); ++i) out(i, i) = std::max(out(i, i), kNoiseFloor);
  return out;
}

struct RestartOutcome {
  StateSpaceParams theta;
  std::vector<double> trace;
  double final_loglik = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  bool violated = false;
  std::string note;
};

RestartOutcome run_restart(const MatrixXd& Y, const EmConfig& config, int restart) {
  RestartOutcome out;
  out.theta = init_params(Y, config, restart);
  if (config.n_iters == 0) {
    out.final_loglik = log_likelihood(Y, out.theta);
    return out;
  }
  for (int i = 0; i < config.n_iters; ++i) {
    const auto filtered = filter_pass(Y, out.theta);
    const double ll = log_likelihood(filtered);
    if (!out.trace.empty()) {
      const double prev = out.trace.back();
      if (ll < prev - kMonotoneSlack) {
        out.violated = true;
        out.note = "restart " + std::to_string(restart) + ": log-likelihood fell from " +
                   std::to_string(prev) + " to " + std::to_string(ll) + " at iteration " +
                   std::to_string(i) + "; keeping the previous iterate";
        out.final_loglik = prev;
        return out;
      }
      if (std::abs(ll - prev) <= config.rel_tol * std::abs(prev)) {
        out.trace.push_back(ll);
        out.final_loglik = ll;
        out.converged = true;
        return out;
      }
    }
    out.trace.push_back(ll);
    const auto smoothed = smooth_pass(filtered, out.theta);
    const auto stats = accumulate_stats(smoothed, Y);
    StateSpaceParams next = m_step(stats, out.theta, smoothed.m_s[0], smoothed.P_s[0]);
    out.theta = std::move(next);
    out.iterations = i + 1;
  }
  // theta^(N1) has not been scored yet.
  const double ll = log_likelihood(Y, out.theta);
  if (ll < out.trace.back() - kMonotoneSlack) {
    out.violated = true;
    out.note = "restart " + std::to_string(restart) + ": final M-step lowered the log-likelihood";
  }
  out.trace.push_back(ll);
  out.final_loglik = ll;
  return out;
}

}  // namespace

void EmConfig::validate() const {
  if (d < 1) throw ConfigError("latent dimension d must be >= 1");
  if (n_iters < 0) throw ConfigError("n_iters must be >= 0");
  if (!(rel_tol >= 0.0)) throw ConfigError("rel_tol must be >= 0");
  if (n_restarts < 1) throw ConfigError("n_restarts must be >= 1");
}

StateSpaceParams init_params(const MatrixXd& Y_pre, const EmConfig& config, int restart_index) {
  config.validate();
  const Index n = Y_pre.rows();
  const Index t0 = Y_pre.cols();
  const Index d = config.d;
  if (t0 < 2) throw ConfigError("EM needs at least 2 pre-intervention columns");
  if (d > std::min(n, t0))
    throw ConfigError("d = " + std::to_string(d) + " exceeds min(N, t0) = " +
                      std::to_string(std::min(n, t0)));
  if (!Y_pre.allFinite()) throw ConfigError("pre-intervention data must be finite");

  Eigen::BDCSVD<MatrixXd> svd(Y_pre, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double root_t0 = std::sqrt(static_cast<double>(t0));
  const MatrixXd U = svd.matrixU().leftCols(d);
  const VectorXd s = svd.singularValues().head(d);
  const MatrixXd V = svd.matrixV().leftCols(d);

  StateSpaceParams theta;
  theta.diag_noise = config.diag_noise;
  theta.H = U * s.asDiagonal() / root_t0;
  const MatrixXd X = root_t0 * V.transpose();  // H X is the rank-d reconstruction
  const MatrixXd residual = Y_pre - theta.H * X;
  theta.R = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    theta.R(i, i) = std::max(residual.row(i).squaredNorm() / static_cast<double>(t0), kResidualFloor);

  Rng rng(derive_seed(config.seed, {0x1A17ULL, static_cast<std::uint64_t>(restart_index)}));
  std::normal_distribution<double> jitter(0.0, 0.01);
  theta.A = 0.9 * MatrixXd::Identity(d, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) theta.A(i, j) += jitter(rng);
  theta.Q = MatrixXd::Identity(d, d);
  theta.m0 = X.col(0);
  theta.P0 = MatrixXd::Identity(d, d);
  return theta;
}

SufficientStats accumulate_stats(const SmoothedTrajectory& smoothed, const MatrixXd& Y) {
  const Index K = Y.cols();
  if (smoothed.length() != K)
    throw ConfigError("smoothed trajectory must cover indices 0..K for K observation columns");
  const Index d = smoothed.m_s[0].size();
  const Index n = Y.rows();
  SufficientStats st;
  st.Sigma = MatrixXd::Zero(d, d);
  st.Phi = MatrixXd::Zero(d, d);
  st.B = MatrixXd::Zero(n, d);
  st.C = MatrixXd::Zero(d, d);
  st.D = MatrixXd::Zero(n, n);
  st.count = K;
  for (Index k = 1; k <= K; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const VectorXd& m = smoothed.m_s[uk];
    const VectorXd& m_prev = smoothed.m_s[uk - 1];
    const auto y = Y.col(k - 1);
    st.Sigma += smoothed.P_s[uk] + m * m.transpose();
    st.Phi += smoothed.P_s[uk - 1] + m_prev * m_prev.transpose();
    st.B += y * m.transpose();
    st.C += smoothed.P_s[uk] * smoothed.G[uk - 1].transpose() + m * m_prev.transpose();
    st.D += y * y.transpose();
  }
  const double inv = 1.0 / static_cast<double>(K);
  st.Sigma = detail::symmetrize(st.Sigma * inv);
  st.Phi = detail::symmetrize(st.Phi * inv);
  st.B *= inv;
  st.C *= inv;
  st.D = detail::symmetrize(st.D * inv);
  return st;
}

StateSpaceParams m_step(const SufficientStats& stats, const StateSpaceParams& theta_old,
                        const VectorXd& m0_s, const MatrixXd& P0_s) {
  const auto phi = detail::spd_factor(stats.Phi, "M-step moment Phi");
  const auto sigma = detail::spd_factor(stats.Sigma, "M-step moment Sigma");

  StateSpaceParams out;
  out.diag_noise = theta_old.diag_noise;
  // A' = C Phi^{-1} and H' = B Sigma^{-1}, via the symmetric factors.
  out.A = phi.solve(stats.C.transpose()).transpose();
  out.H = sigma.solve(stats.B.transpose()).transpose();
  const MatrixXd CA = stats.C * out.A.transpose();
  const MatrixXd BH = stats.B * out.H.transpose();
  out.Q = noise_update(stats.Sigma - CA - CA.transpose() + out.A * stats.Phi * out.A.transpose(),
                       out.diag_noise);
  out.R = noise_update(stats.D - BH - BH.transpose() + out.H * stats.Sigma * out.H.transpose(),
                       out.diag_noise);
  out.m0 = m0_s;
  const VectorXd shift = m0_s - theta_old.m0;
  out.P0 = detail::symmetrize(P0_s + shift * shift.transpose());
  return out;
}

EmResult em_pre(const MatrixXd& Y_pre, const EmConfig& config) {
  config.validate();
  if (config.seasonal.size() != 0 && config.seasonal.size() < Y_pre.cols())
    throw ConfigError("seasonal offsets shorter than the pre-intervention period");
  const MatrixXd Y =
      subtract_seasonal(Y_pre, config.seasonal.size() ? VectorXd(config.seasonal.head(Y_pre.cols()))
                                                      : VectorXd());
  EmResult result;
  bool have_best = false;
  std::string failures;
  for (int r = 0; r < config.n_restarts; ++r) {
    RestartOutcome outcome;
    try {
      outcome = run_restart(Y, config, r);
    } catch (const NumericalError& e) {
      const std::string note = "restart " + std::to_string(r) + " failed: " + e.what();
      log(LogLevel::Info, note);
      result.diagnostics.push_back(note);
      failures += (failures.empty() ? "" : "; ") + note;
      continue;
    }
    if (outcome.violated) {
      ++result.monotonicity_violations;
      log(LogLevel::Warn, outcome.note);
      result.diagnostics.push_back(outcome.note);
    }
    if (!have_best || outcome.final_loglik > result.final_loglik) {
      have_best = true;
      result.theta = std::move(outcome.theta);
      result.loglik_trace = std::move(outcome.trace);
      result.final_loglik = outcome.final_loglik;
      result.best_restart = r;
      result.iterations = outcome.iterations;
      result.converged = outcome.converged;
    }
  }
  if (!have_best) throw FitError("all EM restarts failed: " + failures);
  return result;
}

double gaussian_interval_z(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  boost::math::normal_distribution<double> normal;
  return boost::math::quantile(normal, 0.5 + 0.5 * level);
}

CounterfactualEstimate tasc_counterfactual(const PanelData& panel, const StateSpaceParams& theta,
                                           const VectorXd& seasonal, double level,
                                           CiVariance variance) {
  const Index T = panel.n_times();
  const Index t0 = panel.t0();
  if (theta.obs_dim() != panel.n_units()) throw ConfigError("theta does not match the panel's N");
  if (seasonal.size() != 0 && seasonal.size() != T)
    throw ConfigError("seasonal offsets must cover every column");
  const double z = gaussian_interval_z(level);

  const MatrixXd Y = subtract_seasonal(panel.values(), seasonal);
  FilterOptions opts;
  opts.missing_target_from = t0 + 1;
  const auto filtered = filter_pass(Y, theta, opts);
  const auto smoothed = smooth_pass(filtered, theta);

  const VectorXd h1 = theta.H.row(0).transpose();
  const double r1 = theta.R(0, 0);
  auto s_at = [&](Index col) { return seasonal.size() ? seasonal(col) : 0.0; };

  CounterfactualEstimate est;
  est.level = level;
  est.variance = variance;
  const Index n_post = T - t0;
  est.y_hat.resize(n_post);
  est.var_signal.resize(n_post);
  est.var_pred.resize(n_post);
  est.ci_lower.resize(n_post);
  est.ci_upper.resize(n_post);
  for (Index j = 0; j < n_post; ++j) {
    const auto k = static_cast<std::size_t>(t0 + j + 1);
    est.y_hat(j) = h1.dot(smoothed.m_s[k]) + s_at(t0 + j);
    est.var_signal(j) = std::max(0.0, h1.dot(smoothed.P_s[k] * h1));
    est.var_pred(j) = est.var_signal(j) + r1;
    const double sd =
        std::sqrt(variance == CiVariance::Predictive ? est.var_pred(j) : est.var_signal(j));
    est.ci_lower(j) = est.y_hat(j) - z * sd;
    est.ci_upper(j) = est.y_hat(j) + z * sd;
  }
  est.fitted_pre.resize(t0);
  for (Index j = 0; j < t0; ++j)
    est.fitted_pre(j) = h1.dot(smoothed.m_s[static_cast<std::size_t>(j + 1)]) + s_at(j);
  return est;
}

TascResult tasc_infer(const PanelData& panel, const EmConfig& config, double level,
                      CiVariance variance) {
  config.validate();
  gaussian_interval_z(level);
  if (config.seasonal.size() != 0 && config.seasonal.size() != panel.n_times())
    throw ConfigError("seasonal offsets must cover every column of the panel");
  TascResult out;
  out.fit = em_pre(panel.values().leftCols(panel.t0()), config);
  out.theta = out.fit.theta;
  out.estimate = tasc_counterfactual(panel, out.theta, config.seasonal, level, variance);
  return out;
}

double confidence_width(const CounterfactualEstimate& est) {
  if (est.ci_upper.size() == 0) return 0.0;
  return (est.ci_upper - est.ci_lower).mean();
}

}  // namespace tasc
