#include "tasc/baselines.hpp"

#include "tasc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace tasc {

namespace {

double gradient_mapping(const MatrixXd& G, const VectorXd& c, const VectorXd& w, double L) {
  const VectorXd grad = 2.0 * (G * w - c);
  return (w - project_to_simplex(w - grad / L)).lpNorm<Eigen::Infinity>();
}

double quadratic(const MatrixXd& G, const VectorXd& c, const VectorXd& w) {
  return w.dot(G * w) - 2.0 * c.dot(w);
}

// Solves the equality-constrained problem on the current support exactly.
// Returns nullopt when the support system is singular or leaves the simplex.
std::optional<VectorXd> polish_on_support(const MatrixXd& G, const VectorXd& c,
                                          const VectorXd& w) {
  std::vector<Index> support;
  for (Index i = 0; i < w.size(); ++i)
    if (w(i) > 1e-12) support.push_back(i);
  const Index s = static_cast<Index>(support.size());
  if (s == 0) return std::nullopt;
  MatrixXd kkt = MatrixXd::Zero(s + 1, s + 1);
  VectorXd rhs(s + 1);
  for (Index a = 0; a < s; ++a) {
    for (Index b = 0; b < s; ++b) kkt(a, b) = 2.0 * G(support[a], support[b]);
    kkt(a, s) = 1.0;
    kkt(s, a) = 1.0;
    rhs(a) = 2.0 * c(support[a]);
  }
  rhs(s) = 1.0;
  Eigen::FullPivLU<MatrixXd> lu(kkt);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) return std::nullopt;
  const VectorXd sol = lu.solve(rhs);
  VectorXd out = VectorXd::Zero(w.size());
  for (Index a = 0; a < s; ++a) {
    if (sol(a) < 0.0) return std::nullopt;
    out(support[a]) = sol(a);
  }
  out /= out.sum();
  return out;
}

}  // namespace

VectorXd project_to_simplex(const VectorXd& v) {
  const Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (Index j = 0; j < n; ++j) {
    cumsum += u[static_cast<std::size_t>(j)];
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).max(0.0).matrix();
}

DonorWeights sc_fit(const VectorXd& y1_pre, const MatrixXd& donors_pre, const ScOptions& options) {
  const Index n = donors_pre.rows();
  if (n < 1) throw ConfigError("synthetic control needs at least one donor");
  if (donors_pre.cols() < 1 || donors_pre.cols() != y1_pre.size())
    throw ConfigError("donor and target pre-intervention lengths differ");

  DonorWeights out;
  out.kind = WeightKind::Simplex;
  if (n == 1) {
    out.f = VectorXd::Ones(1);
    return out;
  }

  const MatrixXd G = donors_pre * donors_pre.transpose();
  const VectorXd c = donors_pre * y1_pre;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G, Eigen::EigenvaluesOnly);
  const double L = std::max(2.0 * es.eigenvalues()(n - 1), 1e-300);

  // Start at the best single-donor vertex; ties go to the lowest index.
  Index start = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    const double val = G(i, i) - 2.0 * c(i);
    if (val < best) {
      best = val;
      start = i;
    }
  }
  VectorXd w = VectorXd::Unit(n, start);

  // Accelerated projected gradient with function-value restarts.
  VectorXd z = w;
  double t = 1.0;
  double f_prev = quadratic(G, c, w);
  double gap = gradient_mapping(G, c, w, L);
  int it = 0;
  for (; it < options.max_iters && gap > options.tol; ++it) {
    const VectorXd grad = 2.0 * (G * z - c);
    const VectorXd w_next = project_to_simplex(z - grad / L);
    const double f_next = quadratic(G, c, w_next);
    if (f_next > f_prev && t > 1.0) {
      // Restart momentum from the last iterate.
      z = w;
      t = 1.0;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = w_next + ((t - 1.0) / t_next) * (w_next - w);
    w = w_next;
    t = t_next;
    f_prev = f_next;
    if (it % 16 == 0) gap = gradient_mapping(G, c, w, L);
    if (it % 256 == 255) {
      // Once the support has settled the exact support solution finishes the job.
      if (auto polished = polish_on_support(G, c, w);
          polished && gradient_mapping(G, c, *polished, L) <= options.tol) {
        w = *polished;
        break;
      }
    }
  }
  gap = gradient_mapping(G, c, w, L);

  if (auto polished = polish_on_support(G, c, w)) {
    const double polished_gap = gradient_mapping(G, c, *polished, L);
    if (polished_gap <= std::max(gap, options.tol) &&
        quadratic(G, c, *polished) <= quadratic(G, c, w) + 1e-12 * (1.0 + std::abs(f_prev))) {
      w = *polished;
      gap = polished_gap;
    }
  }
  if (gap > options.tol)
    throw SolverError("simplex least squares did not converge after " + std::to_string(it) +
                          " iterations",
                      gap);
  out.f = std::move(w);
  return out;
}

VectorXd sc_predict(const DonorWeights& weights, const MatrixXd& donors_post) {
  if (weights.f.size() != donors_post.rows()) throw ConfigError("weight count does not match donors");
  return donors_post.transpose() * weights.f;
}

MatrixXd hsvt(const MatrixXd& Y, Index d) {
  if (d < 1 || d > std::min(Y.rows(), Y.cols()))
    throw ConfigError("hsvt rank d = " + std::to_string(d) + " outside [1, min(N, T)]");
  Eigen::BDCSVD<MatrixXd> svd(Y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU().leftCols(d) * svd.singularValues().head(d).asDiagonal() *
         svd.matrixV().leftCols(d).transpose();
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int e = -1; e <= 6; ++e) grid.push_back(std::pow(10.0, e));
  return grid;
}

void RscConfig::validate(Index n_donors, Index n_times) const {
  if (d < 1 || d > std::min(n_donors, n_times))
    throw ConfigError("RSC rank d = " + std::to_string(d) + " outside [1, min(n, T)]");
  if (!(lambda >= 0.0)) throw ConfigError("ridge lambda must be >= 0");
  for (double l : cv_grid)
    if (!(l >= 0.0)) throw ConfigError("cv_grid entries must be >= 0");
}

VectorXd ridge_weights(const VectorXd& y1_pre, const MatrixXd& denoised_pre, double lambda) {
  if (denoised_pre.cols() != y1_pre.size()) throw ConfigError("ridge inputs have different lengths");
  MatrixXd normal = denoised_pre * denoised_pre.transpose();
  normal.diagonal().array() += lambda;
  Eigen::LLT<MatrixXd> llt(normal);
  const double scale = std::max(normal.diagonal().maxCoeff(), 1e-300);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-13 ||
      normal.diagonal().minCoeff() <= 1e-14 * scale)
    throw SolverError(lambda == 0.0
                          ? "ridge normal matrix is singular with lambda = 0; use lambda > 0"
                          : "ridge normal matrix is singular",
                      llt.info() == Eigen::Success ? llt.rcond() : 0.0);
  return llt.solve(denoised_pre * y1_pre);
}

RscFit rsc_fit(const PanelData& panel, const RscConfig& config) {
  const Index n = panel.n_donors();
  const Index T = panel.n_times();
  const Index t0 = panel.t0();
  config.validate(n, T);

  RscFit out;
  out.denoised = hsvt(panel.values().bottomRows(n), config.d);
  const VectorXd y1 = panel.target_pre();
  const MatrixXd pre = out.denoised.leftCols(t0);

  double lambda = config.lambda;
  if (!config.cv_grid.empty()) {
    const Index k = (t0 + 4) / 5;
    if (t0 - k < 1) throw ConfigError("too few pre-intervention columns for lambda validation");
    const Index train = t0 - k;
    double best = std::numeric_limits<double>::infinity();
    for (double candidate : config.cv_grid) {
      double err = std::numeric_limits<double>::infinity();
      try {
        const VectorXd f = ridge_weights(y1.head(train), pre.leftCols(train), candidate);
        err = (y1.tail(k) - pre.rightCols(k).transpose() * f).squaredNorm() / static_cast<double>(k);
      } catch (const SolverError&) {
      }
      out.cv_errors.push_back(err);
      if (err < best) {
        best = err;
        lambda = candidate;
      }
    }
    if (!std::isfinite(best)) throw SolverError("every cv_grid lambda gave a singular system");
  }

  out.weights.kind = WeightKind::Ridge;
  out.weights.lambda = lambda;
  out.weights.d = config.d;
  out.weights.f = ridge_weights(y1, pre, lambda);
  return out;
}

VectorXd rsc_predict(const DonorWeights& weights, const MatrixXd& denoised_post) {
  if (weights.f.size() != denoised_post.rows()) throw ConfigError("weight count does not match donors");
  return denoised_post.transpose() * weights.f;
}

}  // namespace tasc
