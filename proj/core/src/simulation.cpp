#include "tasc/simulation.hpp"

#include "tasc/errors.hpp"
#include "tasc/random.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace tasc {

namespace {

constexpr double kCovFloor = 1e-12;

MatrixXd gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

// Symmetric square root with eigenvalues clamped at the floor, so zero
// covariances still yield a valid sampler.
MatrixXd covariance_root(const MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (cov + cov.transpose()));
  const VectorXd root = es.eigenvalues().cwiseMax(kCovFloor).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

void SimulationConfig::validate() const {
  if (!(a_q > 0.0 && a_q <= b_q)) throw ConfigError("need 0 < a_q <= b_q");
  if (!(a_r > 0.0 && a_r <= b_r)) throw ConfigError("need 0 < a_r <= b_r");
  if (!(spectral_radius > 0.0 && spectral_radius <= 1.0))
    throw ConfigError("spectral_radius must lie in (0, 1]");
  if (n_units < 2 || t_total < 2) throw ConfigError("need n_units >= 2 and t_total >= 2");
  if (t0 < 1 || t0 >= t_total) throw ConfigError("t0 must lie in [1, t_total - 1]");
  if (d_true < 1 || d_true > std::min(n_units, t_total))
    throw ConfigError("d_true must lie in [1, min(n_units, t_total)]");
}

MatrixXd random_covariance(Index dim, double a, double b, std::uint64_t seed) {
  if (!(a > 0.0 && a <= b)) throw ConfigError("random_covariance needs 0 < a <= b");
  if (dim < 1) throw ConfigError("random_covariance needs dim >= 1");
  if (a == b) return a * MatrixXd::Identity(dim, dim);
  Rng rng(seed);
  // Haar orthogonal matrix: QR of a Gaussian matrix with the sign of diag(R) fixed.
  Eigen::HouseholderQR<MatrixXd> qr(gaussian_matrix(dim, dim, rng));
  MatrixXd U = qr.householderQ() * MatrixXd::Identity(dim, dim);
  const MatrixXd Rfac = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j)
    if (Rfac(j, j) < 0.0) U.col(j) *= -1.0;
  std::uniform_real_distribution<double> uniform(a, b);
  VectorXd lambda(dim);
  for (Index i = 0; i < dim; ++i) lambda(i) = uniform(rng);
  const MatrixXd cov = U * lambda.asDiagonal() * U.transpose();
  return 0.5 * (cov + cov.transpose());
}

double spectral_radius(const MatrixXd& A) {
  Eigen::EigenSolver<MatrixXd> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

StateSpaceParams gen_params(const SimulationConfig& config) {
  config.validate();
  const Index d = config.d_true;
  const Index n = config.n_units;
  Rng rng(derive_seed(config.seed, {0x7E7AULL}));
  StateSpaceParams theta;
  theta.diag_noise = false;
  theta.A = gaussian_matrix(d, d, rng);
  const double rho = spectral_radius(theta.A);
  if (rho > 0.0) theta.A *= config.spectral_radius / rho;
  theta.H = gaussian_matrix(n, d, rng);
  theta.Q = random_covariance(d, config.a_q * config.a_q, config.b_q * config.b_q,
                              derive_seed(config.seed, {0x51ULL}));
  theta.R = random_covariance(n, config.a_r * config.a_r, config.b_r * config.b_r,
                              derive_seed(config.seed, {0x52ULL}));
  theta.m0 = gaussian_matrix(d, 1, rng);
  theta.P0 = MatrixXd::Identity(d, d);
  return theta;
}

SimulatedPanel gen_panel(const StateSpaceParams& theta, Index t_total, Index t0,
                         std::uint64_t seed) {
  if (t0 < 1 || t0 >= t_total) throw ConfigError("t0 must lie in [1, t_total - 1]");
  const Index d = theta.latent_dim();
  const Index n = theta.obs_dim();
  Rng rng(seed);
  const MatrixXd root_p0 = covariance_root(theta.P0);
  const MatrixXd root_q = covariance_root(theta.Q);
  const MatrixXd root_r = covariance_root(theta.R);

  VectorXd x = theta.m0 + root_p0 * gaussian_matrix(d, 1, rng);
  MatrixXd latent(d, t_total);
  MatrixXd noise(n, t_total);
  for (Index t = 0; t < t_total; ++t) {
    x = theta.A * x + root_q * gaussian_matrix(d, 1, rng);
    latent.col(t) = x;
    noise.col(t) = root_r * gaussian_matrix(n, 1, rng);
  }
  MatrixXd signal = theta.H * latent;
  MatrixXd values = signal + noise;
  return {PanelData(std::move(values), t0), std::move(signal), std::move(noise), theta,
          std::move(latent)};
}

SimulatedPanel simulate(const SimulationConfig& config) {
  return gen_panel(gen_params(config), config.t_total, config.t0,
                   derive_seed(config.seed, {0xDA7AULL}));
}

SnrStats snr_stats(const SimulatedPanel& sim) {
  return {sim.signal.cwiseAbs().mean(), sim.noise.cwiseAbs().mean()};
}

}  // namespace tasc
