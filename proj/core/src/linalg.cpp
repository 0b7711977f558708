#include "linalg.hpp"

#include "tasc/errors.hpp"
#include "tasc/log.hpp"

namespace tasc::detail {

Eigen::LLT<Eigen::MatrixXd> spd_factor(const Eigen::MatrixXd& m, const std::string& what,
                                       long step) {
  Eigen::MatrixXd sym = symmetrize(m);
  if (!sym.allFinite()) throw NumericalError(what + " has non-finite entries", step);
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) {
    log(LogLevel::Info, what + " is not positive definite; adding jitter" +
                            (step >= 0 ? " at step " + std::to_string(step) : std::string{}));
    sym.diagonal().array() += kJitter;
    llt.compute(sym);
    if (llt.info() != Eigen::Success) throw NumericalError(what + " is not positive definite", step);
  }
  if (llt.rcond() < 1.0 / kMaxCondition)
    throw NumericalError(what + " is numerically singular (condition > 1e12)", step);
  return llt;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace tasc::detail
