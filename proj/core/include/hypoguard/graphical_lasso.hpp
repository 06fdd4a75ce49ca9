#pragma once

#include <vector>

#include <Eigen/Core>

namespace hypoguard {

struct GlassoOptions {
  double tol = 1e-6;        // max-norm change of the precision between sweeps
  int max_sweeps = 500;
  double inner_tol = 1e-12;  // coordinate descent tolerance of each column lasso
  int max_inner = 10000;
};

struct GlassoResult {
  Eigen::MatrixXd precision;
  int sweeps = 0;
  std::vector<double> objective_trace;  // objective after each sweep, starting from the initial point
};

/// tr(S T) - log det T + lambda * sum_{j != k} |T_jk|. Returns +inf if T is
/// not positive definite.
double glasso_objective(const Eigen::MatrixXd& S, const Eigen::MatrixXd& T, double lambda);

/// Sparse precision estimate minimizing glasso_objective over T > 0. The
/// diagonal is not penalized.
///
/// Block coordinate descent over columns in the primal: with the other
/// columns fixed, the optimal Schur complement is 1 / S_jj and the
/// off-diagonal column solves a lasso whose quadratic form is
/// S_jj * T_11^{-1}. Each block update is an exact minimization, so the
/// objective never increases and every iterate stays positive definite.
///
/// Throws DataError for non-symmetric S or non-positive diagonal,
/// DomainError for lambda < 0, ConvergenceError (holding the last iterate)
/// after max_sweeps.
GlassoResult graphical_lasso(const Eigen::MatrixXd& S, double lambda,
                             const GlassoOptions& options = {});

}  // namespace hypoguard
