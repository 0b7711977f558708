#ifndef TASC_SIMULATION_HPP
#define TASC_SIMULATION_HPP

#include "tasc/panel.hpp"
#include "tasc/state_space.hpp"

#include <cstdint>
#include <string>

namespace tasc {

/// Ground-truth generator settings. (a_q, b_q) and (a_r, b_r) bound the
/// standard deviations along the principal axes of Q and R, so the
/// covariance eigenvalues lie in [a^2, b^2].
struct SimulationConfig {
  Index d_true = 5;
  Index n_units = 20;
  Index t_total = 100;
  Index t0 = 50;
  double a_q = 0.01;
  double b_q = 0.1;
  double a_r = 0.01;
  double b_r = 0.1;
  double spectral_radius = 0.95;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SimulatedPanel {
  PanelData panel;
  MatrixXd signal;  // H X
  MatrixXd noise;   // E, so panel.values() == signal + noise
  StateSpaceParams theta_true;
  MatrixXd latent;  // d x T
};

/// U diag(lambda) U' with lambda_i ~ Uniform(a, b) and U Haar-distributed.
MatrixXd random_covariance(Index dim, double a, double b, std::uint64_t seed);

StateSpaceParams gen_params(const SimulationConfig& config);

SimulatedPanel gen_panel(const StateSpaceParams& theta, Index t_total, Index t0,
                         std::uint64_t seed);

/// gen_params followed by gen_panel, both seeded from config.seed.
SimulatedPanel simulate(const SimulationConfig& config);

struct SnrStats {
  double mean_abs_signal = 0.0;
  double mean_abs_noise = 0.0;
};

SnrStats snr_stats(const SimulatedPanel& sim);

/// Spectral radius of a square matrix.
double spectral_radius(const MatrixXd& A);

}  // namespace tasc

#endif  // TASC_SIMULATION_HPP
