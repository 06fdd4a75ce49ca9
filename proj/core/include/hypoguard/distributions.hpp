#pragma once

#include <cstddef>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "hypoguard/random.hpp"

namespace hypoguard {

/// Logistic function 1 / (1 + exp(-t)).
double sigmoid(double t) noexcept;

/// Inverse of sigmoid. Throws DomainError unless 0 < t < 1.
double logit(double t);

Eigen::VectorXd sigmoid(const Eigen::VectorXd& t);
Eigen::VectorXd logit(const Eigen::VectorXd& t);

/// Logistic transform of a multivariate Gaussian, rescaled onto the open box
/// (lower, upper):
///
///   Y = (upper - lower) * sigmoid(Z) + lower,   Z ~ N(mu, sigma)
///
/// mu and sigma live in logit space.
struct LogitNormal {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mu.size()); }

  /// Throws DomainError if shapes disagree, upper <= lower somewhere, or sigma
  /// is not symmetric PSD.
  void validate() const;

  /// logit((y - lower) / (upper - lower)); y must be strictly inside the box.
  Eigen::VectorXd to_logit(const Eigen::VectorXd& y) const;

  /// Inverse of to_logit. Results are kept strictly inside the box even when
  /// the sigmoid saturates in floating point.
  Eigen::VectorXd from_logit(const Eigen::VectorXd& z) const;

  /// Log density in observation space, including the logistic Jacobian.
  double log_density(const Eigen::VectorXd& y) const;
};

/// Fits a LogitNormal to the rows of `samples` (n x d). The empirical box is
/// widened by pad * (max - min) on both sides so no datapoint sits on the
/// boundary; mu/sigma are the mean and 1/n covariance of the logit-transformed
/// rows.
///
/// Throws InsufficientDataError for n < 2, DegenerateDimensionError for a
/// constant column or for datapoints on the boundary (pad == 0).
LogitNormal fit_logit_normal(const Eigen::MatrixXd& samples, double pad = 0.01);

/// Same as fit_logit_normal but the covariance is the inverse of the graphical
/// lasso precision estimate with penalty `lambda`.
LogitNormal fit_logit_normal_sparse(const Eigen::MatrixXd& samples, double lambda,
                                    double pad = 0.01);

/// n i.i.d. rows from `dist`.
Eigen::MatrixXd sample(const LogitNormal& dist, Rng& rng, std::size_t n);

/// Matrix L with L * L^T = cov. Uses Cholesky when cov is positive definite and
/// a symmetric eigen square root otherwise (PSD, e.g. zero covariance).
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov);

/// Gaussian family with fixed covariance and free mean theta, restricted to
/// the Euclidean ball ||theta - center|| <= radius. This is the importance
/// sampling family searched by the cross-entropy method; it lives in logit
/// space, where the logistic Jacobian cancels from likelihood ratios.
class GaussianMeanFamily {
 public:
  /// Throws NumericError if cov is not symmetric positive definite and
  /// DomainError on shape mismatch or negative radius.
  GaussianMeanFamily(Eigen::MatrixXd cov, Eigen::VectorXd center, double radius);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(center_.size()); }
  const Eigen::MatrixXd& cov() const noexcept { return cov_; }
  const Eigen::VectorXd& center() const noexcept { return center_; }
  double radius() const noexcept { return radius_; }

  bool admissible(const Eigen::VectorXd& theta, double tol = 1e-12) const;

  /// Euclidean projection onto the ball.
  Eigen::VectorXd project(const Eigen::VectorXd& theta) const;

  /// (z - theta)^T cov^{-1} (z - theta)
  double mahalanobis_sq(const Eigen::VectorXd& theta, const Eigen::VectorXd& z) const;

  /// theta + L * eps with eps ~ N(0, I).
  Eigen::VectorXd draw(const Eigen::VectorXd& theta, Rng& rng) const;

  double log_normalizer() const noexcept { return log_norm_; }

 private:
  Eigen::MatrixXd cov_;
  Eigen::VectorXd center_;
  double radius_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd factor_;
  double log_norm_;
};

/// log N(z; theta, cov).
double gaussian_log_density(const GaussianMeanFamily& family, const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& z);

/// log p_theta0(z) - log p_theta(z).
double log_likelihood_ratio(const GaussianMeanFamily& family, const Eigen::VectorXd& theta0,
                            const Eigen::VectorXd& theta, const Eigen::VectorXd& z);

inline constexpr double kLogRatioClamp = 50.0;

struct ClampedLogRatio {
  double value;
  bool clamped;
};

/// Clamps a log likelihood ratio to [-kLogRatioClamp, kLogRatioClamp].
ClampedLogRatio clamp_log_ratio(double log_ratio) noexcept;

/// Cross-entropy mean update for the Gaussian mean family:
///
///   candidate = alpha * weighted_stat / weight_mass + (1 - alpha) * theta_k
///
/// followed by Euclidean projection onto the search ball. weighted_stat is the
/// likelihood-ratio weighted sum of elite sufficient statistics and
/// weight_mass the matching sum of weights (pass weight_mass = 1 with an
/// already averaged statistic for the unnormalized variant).
///
/// Throws NoEliteMassError if weight_mass <= 0, DomainError if alpha is
/// outside [0, 1].
Eigen::VectorXd ce_projection_update(const GaussianMeanFamily& family,
                                     const Eigen::VectorXd& theta_k,
                                     const Eigen::VectorXd& weighted_stat, double weight_mass,
                                     double alpha);

}  // namespace hypoguard
