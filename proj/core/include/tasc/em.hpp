#ifndef TASC_EM_HPP
#define TASC_EM_HPP

#include "tasc/panel.hpp"
#include "tasc/state_space.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tasc {

struct EmConfig {
  Index d = 5;               // latent dimension
  int n_iters = 200;         // maximum EM iterations per restart
  double rel_tol = 1e-6;     // stop when the relative log-likelihood gain drops below this
  int n_restarts = 5;
  std::uint64_t seed = 0;
  bool diag_noise = true;
  VectorXd seasonal;         // fixed per-column offsets; empty for none

  void validate() const;
};

/// Averaged second moments of the smoothed latent path used by the M-step.
struct SufficientStats {
  MatrixXd Sigma;  // mean of E[x_k x_k']       over k = 1..K
  MatrixXd Phi;    // mean of E[x_{k-1} x_{k-1}']
  MatrixXd B;      // mean of y_k E[x_k]'
  MatrixXd C;      // mean of E[x_k x_{k-1}']
  MatrixXd D;      // mean of y_k y_k'
  Index count = 0; // K
};

/// Deterministic starting point for restart `restart_index`: H from the
/// scaled top-d left singular vectors of Y_pre, A = 0.9 I plus N(0, 1e-4)
/// noise, Q = P0 = I, R from rank-d residual variances floored at 1e-4.
StateSpaceParams init_params(const MatrixXd& Y_pre, const EmConfig& config, int restart_index);

SufficientStats accumulate_stats(const SmoothedTrajectory& smoothed, const MatrixXd& Y);

/// Closed-form maximiser of the expected complete-data log-likelihood.
/// Q' and R' use the freshly updated A' and H'.
StateSpaceParams m_step(const SufficientStats& stats, const StateSpaceParams& theta_old,
                        const VectorXd& m0_s, const MatrixXd& P0_s);

struct EmResult {
  StateSpaceParams theta;
  /// loglik_trace[i] is the log-likelihood of the i-th iterate theta^(i).
  std::vector<double> loglik_trace;
  double final_loglik = 0.0;
  int best_restart = 0;
  int iterations = 0;
  bool converged = false;
  /// Per-restart notes: numerical failures and monotonicity aborts.
  std::vector<std::string> diagnostics;
  int monotonicity_violations = 0;
};

/// EM on pre-intervention data with random restarts; the restart with the
/// highest final log-likelihood wins (ties go to the lower index).
EmResult em_pre(const MatrixXd& Y_pre, const EmConfig& config);

enum class CiVariance { Predictive, SignalOnly };

struct CounterfactualEstimate {
  VectorXd y_hat;       // target counterfactual for t > t0
  VectorXd var_signal;  // h1' P_t^s h1
  VectorXd var_pred;    // var_signal + r1
  VectorXd ci_lower;
  VectorXd ci_upper;
  VectorXd fitted_pre;  // in-sample target fit for t <= t0
  double level = 0.95;
  CiVariance variance = CiVariance::Predictive;
};

struct TascResult {
  StateSpaceParams theta;
  CounterfactualEstimate estimate;
  EmResult fit;
};

/// Two-sided Gaussian quantile z with P(|Z| <= z) = level.
double gaussian_interval_z(double level);

/// Learns theta on the pre-intervention columns, reruns the filter over the
/// full panel with the target missing after t0, smooths, and reads the
/// target's counterfactual from the smoothed states. Target cells after t0
/// are never read.
TascResult tasc_infer(const PanelData& panel, const EmConfig& config, double level = 0.95,
                      CiVariance variance = CiVariance::Predictive);

/// Counterfactual moments for a fixed theta (the inference half of tasc_infer).
CounterfactualEstimate tasc_counterfactual(const PanelData& panel, const StateSpaceParams& theta,
                                           const VectorXd& seasonal, double level,
                                           CiVariance variance);

/// Mean width of the confidence band over the post-intervention period.
double confidence_width(const CounterfactualEstimate& est);

}  // namespace tasc

#endif  // TASC_EM_HPP
