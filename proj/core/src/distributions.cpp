#include "hypoguard/distributions.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "hypoguard/errors.hpp"
#include "hypoguard/graphical_lasso.hpp"

namespace hypoguard {

double sigmoid(double t) noexcept {
  // Split on sign so exp never overflows.
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double logit(double t) {
  if (!(t > 0.0 && t < 1.0))
    throw DomainError("logit: argument " + std::to_string(t) + " outside (0, 1)");
  return std::log(t) - std::log1p(-t);
}

Eigen::VectorXd sigmoid(const Eigen::VectorXd& t) {
  return t.unaryExpr([](double v) { return sigmoid(v); });
}

Eigen::VectorXd logit(const Eigen::VectorXd& t) {
  Eigen::VectorXd out(t.size());
  for (Eigen::Index j = 0; j < t.size(); ++j) out[j] = logit(t[j]);
  return out;
}

void LogitNormal::validate() const {
  const auto d = mu.size();
  if (lower.size() != d || upper.size() != d || sigma.rows() != d || sigma.cols() != d)
    throw DomainError("LogitNormal: inconsistent dimensions");
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(upper[j] > lower[j]))
      throw DomainError("LogitNormal: upper <= lower in dimension " + std::to_string(j));
  }
  if (d > 0) {
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw DomainError("LogitNormal: sigma not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
      throw DomainError("LogitNormal: sigma not positive semidefinite");
  }
}

Eigen::VectorXd LogitNormal::to_logit(const Eigen::VectorXd& y) const {
  const Eigen::VectorXd u = (y - lower).cwiseQuotient(upper - lower);
  return logit(u);
}

Eigen::VectorXd LogitNormal::from_logit(const Eigen::VectorXd& z) const {
  Eigen::VectorXd y(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    double v = lower[j] + (upper[j] - lower[j]) * sigmoid(z[j]);
    if (v <= lower[j]) v = std::nextafter(lower[j], upper[j]);
    if (v >= upper[j]) v = std::nextafter(upper[j], lower[j]);
    y[j] = v;
  }
  return y;
}

double LogitNormal::log_density(const Eigen::VectorXd& y) const {
  const Eigen::VectorXd width = upper - lower;
  const Eigen::VectorXd u = (y - lower).cwiseQuotient(width);
  const Eigen::VectorXd z = logit(u);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw NumericError("LogitNormal::log_density: sigma not positive definite");
  const Eigen::VectorXd r = z - mu;
  const Eigen::VectorXd w = llt.matrixL().solve(r);
  const Eigen::MatrixXd L = llt.matrixL();
  const double log_det = 2.0 * L.diagonal().array().log().sum();
  const double d = static_cast<double>(mu.size());
  double log_jacobian = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j)
    log_jacobian -= std::log(width[j]) + std::log(u[j]) + std::log1p(-u[j]);
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det + w.squaredNorm()) +
         log_jacobian;
}

namespace {

struct Box {
  Eigen::VectorXd lower, upper;
};

Box padded_box(const Eigen::MatrixXd& samples, double pad) {
  if (!(pad >= 0.0)) throw DomainError("fit_logit_normal: pad must be >= 0");
  if (samples.rows() < 2)
    throw InsufficientDataError("fit_logit_normal: need at least 2 samples, got " +
                                std::to_string(samples.rows()));
  const Eigen::VectorXd lo = samples.colwise().minCoeff().transpose();
  const Eigen::VectorXd hi = samples.colwise().maxCoeff().transpose();
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    if (!std::isfinite(lo[j]) || !std::isfinite(hi[j]))
      throw DataError("fit_logit_normal: non-finite value in column " + std::to_string(j));
    if (!(hi[j] > lo[j]))
      throw DegenerateDimensionError(static_cast<std::size_t>(j),
                                     "fit_logit_normal: column " + std::to_string(j) +
                                         " is constant");
  }
  const Eigen::VectorXd range = hi - lo;
  return {lo - pad * range, hi + pad * range};
}

Eigen::MatrixXd transformed_rows(const Eigen::MatrixXd& samples, const Box& box) {
  Eigen::MatrixXd z(samples.rows(), samples.cols());
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const double width = box.upper[j] - box.lower[j];
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      const double u = (samples(i, j) - box.lower[j]) / width;
      if (!(u > 0.0 && u < 1.0))
        throw DegenerateDimensionError(
            static_cast<std::size_t>(j),
            "fit_logit_normal: datapoints of column " + std::to_string(j) +
                " lie on the support boundary (logit is infinite); use pad > 0");
      z(i, j) = logit(u);
    }
  }
  return z;
}

}  // namespace

LogitNormal fit_logit_normal(const Eigen::MatrixXd& samples, double pad) {
  const Box box = padded_box(samples, pad);
  const Eigen::MatrixXd z = transformed_rows(samples, box);
  const double n = static_cast<double>(z.rows());
  LogitNormal dist;
  dist.lower = box.lower;
  dist.upper = box.upper;
  dist.mu = z.colwise().mean().transpose();
  const Eigen::MatrixXd centered = z.rowwise() - dist.mu.transpose();
  dist.sigma = (centered.transpose() * centered) / n;
  return dist;
}

LogitNormal fit_logit_normal_sparse(const Eigen::MatrixXd& samples, double lambda, double pad) {
  LogitNormal dist = fit_logit_normal(samples, pad);
  const GlassoResult fit = graphical_lasso(dist.sigma, lambda);
  Eigen::MatrixXd cov = fit.precision.llt().solve(
      Eigen::MatrixXd::Identity(fit.precision.rows(), fit.precision.cols()));
  dist.sigma = 0.5 * (cov + cov.transpose());
  return dist;
}

Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("covariance_factor: eigen solve failed");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

Eigen::MatrixXd sample(const LogitNormal& dist, Rng& rng, std::size_t n) {
  dist.validate();
  const Eigen::MatrixXd L = covariance_factor(dist.sigma);
  const auto d = static_cast<Eigen::Index>(dist.dim());
  std::normal_distribution<double> normal;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd eps(d);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) eps[j] = normal(rng);
    out.row(i) = dist.from_logit(dist.mu + L * eps).transpose();
  }
  return out;
}

GaussianMeanFamily::GaussianMeanFamily(Eigen::MatrixXd cov, Eigen::VectorXd center,
                                       double radius)
    : cov_(std::move(cov)), center_(std::move(center)), radius_(radius) {
  if (cov_.rows() != center_.size() || cov_.cols() != center_.size())
    throw DomainError("GaussianMeanFamily: covariance/center dimension mismatch");
  if (!(radius_ >= 0.0)) throw DomainError("GaussianMeanFamily: radius must be >= 0");
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, cov_.norm()))
    throw NumericError("GaussianMeanFamily: covariance not symmetric");
  llt_.compute(cov_);
  if (llt_.info() != Eigen::Success)
    throw NumericError("GaussianMeanFamily: covariance not positive definite");
  factor_ = llt_.matrixL();
  const double log_det = 2.0 * factor_.diagonal().array().log().sum();
  log_norm_ = -0.5 * (static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) + log_det);
}

bool GaussianMeanFamily::admissible(const Eigen::VectorXd& theta, double tol) const {
  return theta.size() == center_.size() && (theta - center_).norm() <= radius_ + tol;
}

Eigen::VectorXd GaussianMeanFamily::project(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd offset = theta - center_;
  const double norm = offset.norm();
  if (norm <= radius_) return theta;
  return center_ + offset * (radius_ / norm);
}

double GaussianMeanFamily::mahalanobis_sq(const Eigen::VectorXd& theta,
                                          const Eigen::VectorXd& z) const {
  return llt_.matrixL().solve(z - theta).squaredNorm();
}

Eigen::VectorXd GaussianMeanFamily::draw(const Eigen::VectorXd& theta, Rng& rng) const {
  std::normal_distribution<double> normal;
  Eigen::VectorXd eps(center_.size());
  for (Eigen::Index j = 0; j < eps.size(); ++j) eps[j] = normal(rng);
  return theta + factor_ * eps;
}

double gaussian_log_density(const GaussianMeanFamily& family, const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& z) {
  return family.log_normalizer() - 0.5 * family.mahalanobis_sq(theta, z);
}

double log_likelihood_ratio(const GaussianMeanFamily& family, const Eigen::VectorXd& theta0,
                            const Eigen::VectorXd& theta, const Eigen::VectorXd& z) {
  return 0.5 * (family.mahalanobis_sq(theta, z) - family.mahalanobis_sq(theta0, z));
}

ClampedLogRatio clamp_log_ratio(double log_ratio) noexcept {
  if (log_ratio > kLogRatioClamp) return {kLogRatioClamp, true};
  if (log_ratio < -kLogRatioClamp) return {-kLogRatioClamp, true};
  return {log_ratio, false};
}

Eigen::VectorXd ce_projection_update(const GaussianMeanFamily& family,
                                     const Eigen::VectorXd& theta_k,
                                     const Eigen::VectorXd& weighted_stat, double weight_mass,
                                     double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw DomainError("ce_projection_update: alpha must lie in [0, 1]");
  if (!(weight_mass > 0.0))
    throw NoEliteMassError("ce_projection_update: no elite probability mass");
  if (alpha == 0.0) return family.project(theta_k);
  const Eigen::VectorXd elite_mean = weighted_stat / weight_mass;
  return family.project(alpha * elite_mean + (1.0 - alpha) * theta_k);
}

}  // namespace hypoguard
