#ifndef TASC_STATE_SPACE_HPP
#define TASC_STATE_SPACE_HPP

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace tasc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Linear-Gaussian state-space model
///
///   x_t = A x_{t-1} + q_t,   q_t ~ N(0, Q)
///   y_t = H x_t + s_t 1 + r_t,   r_t ~ N(0, R)
///
/// with x_0 ~ N(m0, P0). Observation row 0 is the target unit.
struct StateSpaceParams {
  MatrixXd A;   // d x d
  MatrixXd H;   // N x d
  MatrixXd Q;   // d x d
  MatrixXd R;   // N x N
  VectorXd m0;  // d
  MatrixXd P0;  // d x d
  bool diag_noise = true;

  Index latent_dim() const noexcept { return A.rows(); }
  Index obs_dim() const noexcept { return H.rows(); }

  /// Throws ConfigError on inconsistent shapes, asymmetric or non-PD
  /// covariances (eigenvalues must exceed 1e-10), or non-zero off-diagonals
  /// when diag_noise is set.
  void validate() const;
};

/// Filtered moments at time k. For k = 0 the prior (m0, P0) fills both the
/// predicted and filtered slots.
struct FilterState {
  Index k = 0;
  VectorXd m_pred;
  MatrixXd P_pred;
  VectorXd m;
  MatrixXd P;
  /// log N(v_k; 0, S_k) of this step's innovation over the observed rows.
  double log_density = 0.0;
};

FilterState initial_state(const StateSpaceParams& theta);

/// One Kalman predict/update step. `s_k` is the seasonal offset added to
/// every coordinate of the observation mean.
FilterState kalman_step(const VectorXd& y_k, const FilterState& prev,
                        const StateSpaceParams& theta, std::optional<double> s_k = {});

/// Kalman step with the target's observation variance taken to infinity.
/// y_k(0) is ignored; the update equals filtering the donor-only model
/// y_{k,2} = H2 x_k + r_{k,2}.
FilterState kalman_step_missing_target(const VectorXd& y_k, const FilterState& prev,
                                       const StateSpaceParams& theta,
                                       std::optional<double> s_k = {});

struct SmootherStep {
  VectorXd m_s;
  MatrixXd P_s;
  MatrixXd G;
};

/// One RTS backward step from the smoothed moments at k+1 to time k.
SmootherStep rts_step(const FilterState& filtered_k, const VectorXd& m_s_next,
                      const MatrixXd& P_s_next, const StateSpaceParams& theta);

/// Smoothed moments for k = 0..K. G has K entries (G[k] for k < K).
struct SmoothedTrajectory {
  std::vector<VectorXd> m_s;
  std::vector<MatrixXd> P_s;
  std::vector<MatrixXd> G;

  Index length() const noexcept { return static_cast<Index>(m_s.size()) - 1; }
};

struct FilterOptions {
  /// Per-column seasonal offsets, empty for none.
  std::span<const double> seasonal = {};
  /// 1-based time index from which the target observation is treated as
  /// missing; unset means every step observes the target.
  std::optional<Index> missing_target_from = {};
};

/// Runs the filter over the K columns of Y. Returns K states with k = 1..K
/// (column k-1 of Y); the k = 0 prior is implied by theta.
std::vector<FilterState> filter_pass(const MatrixXd& Y, const StateSpaceParams& theta,
                                     const FilterOptions& options = {});

/// Backward RTS recursion over a filter pass, including the k = 0 prior.
SmoothedTrajectory smooth_pass(std::span<const FilterState> filtered,
                               const StateSpaceParams& theta);

/// Innovation-decomposition log-likelihood of Y. Steps with a missing target
/// contribute the donor-only density.
double log_likelihood(const MatrixXd& Y, const StateSpaceParams& theta,
                      const FilterOptions& options = {});

/// Sum of the per-step log densities of a filter pass.
double log_likelihood(std::span<const FilterState> filtered);

}  // namespace tasc

#endif  // TASC_STATE_SPACE_HPP
