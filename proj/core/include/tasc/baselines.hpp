#ifndef TASC_BASELINES_HPP
#define TASC_BASELINES_HPP

#include "tasc/panel.hpp"

#include <optional>
#include <vector>

namespace tasc {

enum class WeightKind { Simplex, Ridge };

struct DonorWeights {
  VectorXd f;
  WeightKind kind = WeightKind::Simplex;
  double lambda = 0.0;  // ridge only
  Index d = 0;          // singular values kept, ridge only
};

struct ScOptions {
  double tol = 1e-10;  // bound on the projected-gradient step, in weight units
  int max_iters = 200000;
};

/// Simplex-constrained least squares: argmin ||y1_pre - f' donors_pre||^2
/// over f >= 0, sum f = 1.
DonorWeights sc_fit(const VectorXd& y1_pre, const MatrixXd& donors_pre,
                    const ScOptions& options = {});

/// f' donors_post, one entry per post-intervention column.
VectorXd sc_predict(const DonorWeights& weights, const MatrixXd& donors_post);

/// Euclidean projection onto the probability simplex.
VectorXd project_to_simplex(const VectorXd& v);

/// Truncated SVD keeping the d largest singular values.
MatrixXd hsvt(const MatrixXd& Y, Index d);

/// The default ridge grid {1e-1, 1e0, ..., 1e6}.
std::vector<double> default_lambda_grid();

struct RscConfig {
  Index d = 5;
  double lambda = 1.0;
  std::vector<double> cv_grid;  // when non-empty, lambda is chosen from it

  void validate(Index n_donors, Index n_times) const;
};

struct RscFit {
  DonorWeights weights;
  MatrixXd denoised;  // n x T donor block after HSVT
  std::vector<double> cv_errors;  // validation MSE per cv_grid entry
};

/// Ridge weights on the pre-intervention part of `denoised` (n x t0).
VectorXd ridge_weights(const VectorXd& y1_pre, const MatrixXd& denoised_pre, double lambda);

/// Robust synthetic control: HSVT over the donor rows (all columns), then
/// ridge regression of the target's pre-intervention path on the denoised
/// donors. With a cv_grid, lambda minimises the MSE on the last ceil(t0/5)
/// pre-intervention columns when trained on the rest.
RscFit rsc_fit(const PanelData& panel, const RscConfig& config);

VectorXd rsc_predict(const DonorWeights& weights, const MatrixXd& denoised_post);

}  // namespace tasc

#endif  // TASC_BASELINES_HPP
