#include "hypoguard/graphical_lasso.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "hypoguard/errors.hpp"

namespace hypoguard {

namespace {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// Indices of all columns except j.
Eigen::VectorXi others(Eigen::Index d, Eigen::Index j) {
  Eigen::VectorXi idx(d - 1);
  for (Eigen::Index k = 0, m = 0; k < d; ++k)
    if (k != j) idx[m++] = static_cast<int>(k);
  return idx;
}

}  // namespace

double glasso_objective(const Eigen::MatrixXd& S, const Eigen::MatrixXd& T, double lambda) {
  Eigen::LLT<Eigen::MatrixXd> llt(T);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd L = llt.matrixL();
  const double log_det = 2.0 * L.diagonal().array().log().sum();
  const double off_l1 = T.cwiseAbs().sum() - T.diagonal().cwiseAbs().sum();
  return (S.cwiseProduct(T)).sum() - log_det + lambda * off_l1;
}

GlassoResult graphical_lasso(const Eigen::MatrixXd& S, double lambda,
                             const GlassoOptions& options) {
  const Eigen::Index d = S.rows();
  if (S.cols() != d) throw DataError("graphical_lasso: S must be square");
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, S.cwiseAbs().maxCoeff()))
    throw DataError("graphical_lasso: S must be symmetric");
  if (!(lambda >= 0.0)) throw DomainError("graphical_lasso: lambda must be >= 0");
  for (Eigen::Index j = 0; j < d; ++j)
    if (!(S(j, j) > 0.0))
      throw DataError("graphical_lasso: non-positive variance in column " + std::to_string(j));

  GlassoResult result;
  Eigen::MatrixXd T = S.diagonal().cwiseInverse().asDiagonal();
  result.objective_trace.push_back(glasso_objective(S, T, lambda));
  if (d == 1) {
    result.precision = T;
    return result;
  }

  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    const Eigen::MatrixXd previous = T;
    for (Eigen::Index j = 0; j < d; ++j) {
      const Eigen::VectorXi idx = others(d, j);
      const Eigen::Index m = d - 1;
      Eigen::MatrixXd T11(m, m);
      Eigen::VectorXd s12(m), x(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        s12[a] = S(idx[a], j);
        x[a] = T(idx[a], j);
        for (Eigen::Index b = 0; b < m; ++b) T11(a, b) = T(idx[a], idx[b]);
      }
      Eigen::LLT<Eigen::MatrixXd> llt(T11);
      if (llt.info() != Eigen::Success)
        throw NumericError("graphical_lasso: iterate lost positive definiteness");
      const Eigen::MatrixXd Q = S(j, j) * llt.solve(Eigen::MatrixXd::Identity(m, m));

      // min_x  x^T Q x + 2 s12^T x + 2 lambda ||x||_1  by cyclic coordinate descent.
      Eigen::VectorXd Qx = Q * x;
      for (int it = 0; it < options.max_inner; ++it) {
        double max_step = 0.0;
        for (Eigen::Index a = 0; a < m; ++a) {
          const double partial = Qx[a] - Q(a, a) * x[a] + s12[a];
          const double updated = -soft_threshold(partial, lambda) / Q(a, a);
          const double delta = updated - x[a];
          if (delta != 0.0) {
            Qx += Q.col(a) * delta;
            x[a] = updated;
            max_step = std::max(max_step, std::abs(delta));
          }
        }
        if (max_step < options.inner_tol) break;
      }

      const double t22 = 1.0 / S(j, j) + x.dot(Q * x) / S(j, j);
      for (Eigen::Index a = 0; a < m; ++a) {
        T(idx[a], j) = x[a];
        T(j, idx[a]) = x[a];
      }
      T(j, j) = t22;
    }
    result.sweeps = sweep;
    result.objective_trace.push_back(glasso_objective(S, T, lambda));
    if ((T - previous).cwiseAbs().maxCoeff() < options.tol) {
      result.precision = T;
      return result;
    }
  }
  throw ConvergenceError("graphical_lasso: no convergence after " +
                             std::to_string(options.max_sweeps) + " sweeps",
                         T);
}

}  // namespace hypoguard
