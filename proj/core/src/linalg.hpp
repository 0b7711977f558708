// Internal numerical helpers shared by the filter, smoother and M-step.
#ifndef TASC_SRC_LINALG_HPP
#define TASC_SRC_LINALG_HPP

#include <Eigen/Dense>

#include <string>

namespace tasc::detail {

inline constexpr double kJitter = 1e-9;
inline constexpr double kMaxCondition = 1e12;

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

/// Cholesky factor of an SPD operand. On failure the operand receives
/// kJitter * I once (logged); a factorisation that still fails, or whose
/// reciprocal condition estimate is below 1 / kMaxCondition, raises
/// NumericalError tagged with `step`.
Eigen::LLT<Eigen::MatrixXd> spd_factor(const Eigen::MatrixXd& m, const std::string& what,
                                       long step = -1);

/// Smallest eigenvalue of the symmetric part of m.
double min_eigenvalue(const Eigen::MatrixXd& m);

}  // namespace tasc::detail

#endif  // TASC_SRC_LINALG_HPP
