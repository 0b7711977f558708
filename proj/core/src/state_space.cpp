#include "tasc/state_space.hpp"

#include "linalg.hpp"
#include "tasc/errors.hpp"

#include <cmath>

namespace tasc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_shapes(const StateSpaceParams& t) {
  const Index d = t.A.rows();
  const Index n = t.H.rows();
  if (d < 1 || t.A.cols() != d) throw ConfigError("A must be square and non-empty");
  if (t.H.cols() != d) throw ConfigError("H must have latent_dim columns");
  if (n < 1) throw ConfigError("H must have at least one row");
  if (t.Q.rows() != d || t.Q.cols() != d) throw ConfigError("Q must be latent_dim x latent_dim");
  if (t.R.rows() != n || t.R.cols() != n) throw ConfigError("R must be obs_dim x obs_dim");
  if (t.m0.size() != d) throw ConfigError("m0 must have latent_dim entries");
  if (t.P0.rows() != d || t.P0.cols() != d) throw ConfigError("P0 must be latent_dim x latent_dim");
}

void check_spd(const MatrixXd& m, const char* name) {
  if (!m.allFinite()) throw ConfigError(std::string(name) + " has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ConfigError(std::string(name) + " is not symmetric");
  if (detail::min_eigenvalue(m) <= 1e-10)
    throw ConfigError(std::string(name) + " is not positive definite");
}

bool off_diagonal_zero(const MatrixXd& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (i != j && m(i, j) != 0.0) return false;
  return true;
}

struct Prediction {
  VectorXd m;
  MatrixXd P;
};

Prediction predict(const FilterState& prev, const StateSpaceParams& theta) {
  return {theta.A * prev.m, detail::symmetrize(theta.A * prev.P * theta.A.transpose() + theta.Q)};
}

double gaussian_log_density(const VectorXd& v, const Eigen::LLT<MatrixXd>& llt) {
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const VectorXd w = llt.matrixL().solve(v);
  return -0.5 * (static_cast<double>(v.size()) * kLog2Pi + log_det + w.squaredNorm());
}

}  // namespace

void StateSpaceParams::validate() const {
  check_shapes(*this);
  if (!A.allFinite() || !H.allFinite() || !m0.allFinite())
    throw ConfigError("A, H and m0 must be finite");
  check_spd(Q, "Q");
  check_spd(R, "R");
  check_spd(P0, "P0");
  if (diag_noise && (!off_diagonal_zero(Q) || !off_diagonal_zero(R)))
    throw ConfigError("diag_noise requires diagonal Q and R");
}

FilterState initial_state(const StateSpaceParams& theta) {
  FilterState s;
  s.k = 0;
  s.m_pred = theta.m0;
  s.P_pred = theta.P0;
  s.m = theta.m0;
  s.P = theta.P0;
  return s;
}

FilterState kalman_step(const VectorXd& y_k, const FilterState& prev,
                        const StateSpaceParams& theta, std::optional<double> s_k) {
  const long step = static_cast<long>(prev.k + 1);
  if (y_k.size() != theta.obs_dim()) throw ConfigError("observation length does not match H");
  if (!y_k.allFinite()) throw ConfigError("observation at step " + std::to_string(step) + " is not finite");
  FilterState out;
  out.k = prev.k + 1;
  auto [m_pred, P_pred] = predict(prev, theta);

  VectorXd v = y_k - theta.H * m_pred;
  if (s_k) v.array() -= *s_k;
  const MatrixXd PHt = P_pred * theta.H.transpose();
  const MatrixXd S = detail::symmetrize(theta.H * PHt + theta.R);
  const auto llt = detail::spd_factor(S, "innovation covariance S", step);
  const MatrixXd K = llt.solve(PHt.transpose()).transpose();

  out.m = m_pred + K * v;
  out.P = detail::symmetrize(P_pred - K * S * K.transpose());
  out.log_density = gaussian_log_density(v, llt);
  out.m_pred = std::move(m_pred);
  out.P_pred = std::move(P_pred);
  return out;
}

FilterState kalman_step_missing_target(const VectorXd& y_k, const FilterState& prev,
                                       const StateSpaceParams& theta, std::optional<double> s_k) {
  const long step = static_cast<long>(prev.k + 1);
  const Index n_obs = theta.obs_dim();
  if (y_k.size() != n_obs) throw ConfigError("observation length does not match H");
  if (n_obs < 2) throw ConfigError("missing-target filtering needs at least one donor row");
  const Index n = n_obs - 1;
  if (!y_k.tail(n).allFinite())
    throw ConfigError("donor observation at step " + std::to_string(step) + " is not finite");

  FilterState out;
  out.k = prev.k + 1;
  // Prediction first; the augmented target value depends on it.
  auto [m_pred, P_pred] = predict(prev, theta);

  const double offset = s_k.value_or(0.0);
  VectorXd y = y_k;
  y(0) = theta.H.row(0).dot(m_pred) + offset;
  VectorXd v = y - theta.H * m_pred;
  v.array() -= offset;
  v(0) = 0.0;

  const auto H2 = theta.H.bottomRows(n);
  const MatrixXd PHt = P_pred * theta.H.transpose();
  const MatrixXd S2 =
      detail::symmetrize(H2 * PHt.rightCols(n) + theta.R.bottomRightCorner(n, n));
  const auto llt = detail::spd_factor(S2, "donor innovation covariance S2", step);

  // Zero-padded block inverse of S with the target variance at infinity.
  MatrixXd S_inv = MatrixXd::Zero(n_obs, n_obs);
  S_inv.bottomRightCorner(n, n) = llt.solve(MatrixXd::Identity(n, n));
  S_inv = detail::symmetrize(S_inv);
  const MatrixXd K = PHt * S_inv;

  // Column 0 of K is exactly zero, so only the donor block of S enters K S K'.
  const MatrixXd K2 = K.rightCols(n);
  out.m = m_pred + K * v;
  out.P = detail::symmetrize(P_pred - K2 * S2 * K2.transpose());
  out.log_density = gaussian_log_density(v.tail(n), llt);
  out.m_pred = std::move(m_pred);
  out.P_pred = std::move(P_pred);
  return out;
}

SmootherStep rts_step(const FilterState& filtered_k, const VectorXd& m_s_next,
                      const MatrixXd& P_s_next, const StateSpaceParams& theta) {
  const long step = static_cast<long>(filtered_k.k);
  const VectorXd m_next_pred = theta.A * filtered_k.m;
  const MatrixXd P_next_pred =
      detail::symmetrize(theta.A * filtered_k.P * theta.A.transpose() + theta.Q);
  const auto llt = detail::spd_factor(P_next_pred, "one-step predicted covariance", step);
  // G = P_k A' P_{k+1|k}^{-1}, solved through the symmetric factor.
  SmootherStep out;
  out.G = llt.solve(theta.A * filtered_k.P).transpose();
  out.m_s = filtered_k.m + out.G * (m_s_next - m_next_pred);
  out.P_s = detail::symmetrize(filtered_k.P + out.G * (P_s_next - P_next_pred) * out.G.transpose());
  return out;
}

std::vector<FilterState> filter_pass(const MatrixXd& Y, const StateSpaceParams& theta,
                                     const FilterOptions& options) {
  const Index K = Y.cols();
  if (K < 1) throw ConfigError("filter_pass needs at least one observation column");
  if (Y.rows() != theta.obs_dim()) throw ConfigError("Y rows do not match H");
  if (!options.seasonal.empty() && static_cast<Index>(options.seasonal.size()) != K)
    throw ConfigError("seasonal offsets must have one entry per column");

  std::vector<FilterState> out;
  out.reserve(static_cast<std::size_t>(K));
  FilterState state = initial_state(theta);
  for (Index j = 0; j < K; ++j) {
    const Index k = j + 1;
    std::optional<double> s;
    if (!options.seasonal.empty()) s = options.seasonal[static_cast<std::size_t>(j)];
    const VectorXd y = Y.col(j);
    if (options.missing_target_from && k >= *options.missing_target_from)
      state = kalman_step_missing_target(y, state, theta, s);
    else
      state = kalman_step(y, state, theta, s);
    out.push_back(state);
  }
  return out;
}

SmoothedTrajectory smooth_pass(std::span<const FilterState> filtered,
                               const StateSpaceParams& theta) {
  if (filtered.empty()) throw ConfigError("smooth_pass needs a non-empty filter pass");
  const std::size_t K = filtered.size();
  SmoothedTrajectory out;
  out.m_s.resize(K + 1);
  out.P_s.resize(K + 1);
  out.G.resize(K);
  out.m_s[K] = filtered[K - 1].m;
  out.P_s[K] = filtered[K - 1].P;
  const FilterState prior = initial_state(theta);
  for (std::size_t k = K; k-- > 0;) {
    const FilterState& f = k == 0 ? prior : filtered[k - 1];
    auto step = rts_step(f, out.m_s[k + 1], out.P_s[k + 1], theta);
    out.m_s[k] = std::move(step.m_s);
    out.P_s[k] = std::move(step.P_s);
    out.G[k] = std::move(step.G);
  }
  return out;
}

double log_likelihood(std::span<const FilterState> filtered) {
  double total = 0.0;
  for (const auto& s : filtered) total += s.log_density;
  return total;
}

double log_likelihood(const MatrixXd& Y, const StateSpaceParams& theta,
                      const FilterOptions& options) {
  return log_likelihood(filter_pass(Y, theta, options));
}

}  // namespace tasc
