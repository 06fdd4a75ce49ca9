#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hypoguard/distributions.hpp"
#include "hypoguard/errors.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hypoguard;

TEST(Sigmoid, MidpointAndInverse) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_DOUBLE_EQ(logit(0.5), 0.0);
  EXPECT_NEAR(logit(sigmoid(3.7)), 3.7, 1e-12);
}

TEST(Sigmoid, LogitRejectsClosedEndpoints) {
  EXPECT_THROW(logit(0.0), DomainError);
  EXPECT_THROW(logit(1.0), DomainError);
  EXPECT_THROW(logit(-0.1), DomainError);
  EXPECT_THROW(logit(std::nan("")), DomainError);
}

TEST(Sigmoid, RoundTripOnOpenInterval) {
  // For t > 0 the double closest to sigmoid(t) drops the digits of 1 - sigmoid(t),
  // so the positive half goes through the exact symmetry 1 - sigmoid(t) = sigmoid(-t).
  for (double t = -49.99; t < 50.0; t += 0.01) {
    const double back = t <= 0.0 ? logit(sigmoid(t)) : -logit(sigmoid(-t));
    ASSERT_NEAR(back, t, 1e-9) << "t = " << t;
    ASSERT_NEAR(sigmoid(t) + sigmoid(-t), 1.0, 1e-15);
  }
  for (double t = -15.0; t <= 15.0; t += 0.01) ASSERT_NEAR(logit(sigmoid(t)), t, 1e-9);
}

TEST(Sigmoid, NoOverflowAtExtremes) {
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_TRUE(std::isfinite(sigmoid(-745.0)));
}

TEST(FitLogitNormal, ZeroPadLeavesBoundaryPointsInfinite) {
  Eigen::MatrixXd y(3, 1);
  y << 0.25, 0.5, 0.75;
  try {
    fit_logit_normal(y, 0.0);
    FAIL() << "expected DegenerateDimensionError";
  } catch (const DegenerateDimensionError& e) {
    EXPECT_EQ(e.dimension(), 0u);
  }
  const LogitNormal fit = fit_logit_normal(y, 0.01);
  EXPECT_NEAR(fit.lower[0], 0.245, 1e-15);
  EXPECT_NEAR(fit.upper[0], 0.755, 1e-15);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(fit.to_logit(y.row(i).transpose()).allFinite());
  EXPECT_TRUE(std::isfinite(fit.mu[0]));
  EXPECT_TRUE(fit.sigma.allFinite());
}

TEST(FitLogitNormal, SymmetricPointsGiveZeroMean) {
  Eigen::MatrixXd y(2, 1);
  y << -1.0, 1.0;
  const LogitNormal fit = fit_logit_normal(y, 0.01);
  EXPECT_NEAR(fit.mu[0], 0.0, 1e-9);
}

TEST(FitLogitNormal, UsesOneOverNCovariance) {
  Eigen::MatrixXd y(4, 2);
  y << 1, 10, 2, 14, 3, 11, 4, 13;
  const LogitNormal fit = fit_logit_normal(y, 0.05);
  Eigen::MatrixXd z(4, 2);
  for (int i = 0; i < 4; ++i) z.row(i) = fit.to_logit(y.row(i).transpose()).transpose();
  const Eigen::RowVectorXd mean = z.colwise().mean();
  const Eigen::MatrixXd c = z.rowwise() - mean;
  EXPECT_TRUE(mean.transpose().isApprox(fit.mu, 1e-12));
  EXPECT_TRUE((c.transpose() * c / 4.0).isApprox(fit.sigma, 1e-12));
}

TEST(FitLogitNormal, InputErrors) {
  EXPECT_THROW(fit_logit_normal(Eigen::MatrixXd::Ones(1, 2)), InsufficientDataError);
  Eigen::MatrixXd constant(5, 2);
  constant << 1, 3, 2, 3, 3, 3, 4, 3, 5, 3;
  try {
    fit_logit_normal(constant);
    FAIL() << "expected DegenerateDimensionError";
  } catch (const DegenerateDimensionError& e) {
    EXPECT_EQ(e.dimension(), 1u);
  }
  EXPECT_THROW(fit_logit_normal(Eigen::MatrixXd::Random(5, 2), -0.1), DomainError);
}

TEST(FitLogitNormal, RecoversMeanUnderFittedSupport) {
  // The padded refit lives on its own box [a', b'], so its mean is compared to
  // E[logit((Y - a') / (b' - a'))] for the generating model, by quadrature.
  LogitNormal truth;
  truth.lower = Eigen::VectorXd::Constant(1, 0.0);
  truth.upper = Eigen::VectorXd::Constant(1, 1.0);
  truth.mu = Eigen::VectorXd::Constant(1, 0.3);
  truth.sigma = Eigen::MatrixXd::Constant(1, 1, 0.2);
  Rng rng(11);
  const Eigen::MatrixXd y = sample(truth, rng, 10000);
  const LogitNormal fit = fit_logit_normal(y, 0.01);
  const double expected = testutil::expected_refit_logit(truth, 0, fit.lower[0], fit.upper[0]);
  const double se = std::sqrt(fit.sigma(0, 0) / 10000.0);
  EXPECT_NEAR(fit.mu[0], expected, 3.0 * se);
}

TEST(Sample, ZeroCovarianceIsDeterministic) {
  LogitNormal d;
  d.lower = Eigen::Vector2d(1.0, -2.0);
  d.upper = Eigen::Vector2d(3.0, 5.0);
  d.mu = Eigen::Vector2d(0.4, -1.2);
  d.sigma = Eigen::Matrix2d::Zero();
  Rng rng(3);
  const Eigen::MatrixXd y = sample(d, rng, 50);
  const Eigen::Vector2d expected = (d.upper - d.lower).cwiseProduct(sigmoid(Eigen::VectorXd(d.mu))) + d.lower;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    EXPECT_EQ(y(i, 0), expected[0]);
    EXPECT_EQ(y(i, 1), expected[1]);
  }
}

TEST(Sample, StrictlyInsideSupportEvenWhenSaturated) {
  LogitNormal d;
  d.lower = Eigen::Vector2d(0.0, 10.0);
  d.upper = Eigen::Vector2d(1.0, 11.0);
  d.mu = Eigen::Vector2d(0.0, 0.0);
  d.sigma = Eigen::Vector2d(900.0, 2500.0).asDiagonal();
  Rng rng(5);
  const Eigen::MatrixXd y = sample(d, rng, 20000);
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = 0; j < 2; ++j) {
      ASSERT_GT(y(i, j), d.lower[j]);
      ASSERT_LT(y(i, j), d.upper[j]);
    }
}

TEST(Sample, MedianIsSigmoidOfMean) {
  LogitNormal d;
  d.lower = Eigen::VectorXd::Zero(1);
  d.upper = Eigen::VectorXd::Ones(1);
  d.mu = Eigen::VectorXd::Zero(1);
  d.sigma = Eigen::MatrixXd::Identity(1, 1);
  Rng rng(7);
  Eigen::MatrixXd y = sample(d, rng, 100000);
  std::vector<double> v(y.data(), y.data() + y.size());
  std::nth_element(v.begin(), v.begin() + 50000, v.end());
  EXPECT_NEAR(v[50000], 0.5, 0.01);
}

TEST(Sample, LogitMeanConvergesToMu) {
  LogitNormal d;
  d.lower = Eigen::Vector2d(2.0, 5.0);
  d.upper = Eigen::Vector2d(200.0, 15.0);
  d.mu = Eigen::Vector2d(-0.7, 0.25);
  d.sigma.resize(2, 2);
  d.sigma << 0.5, -0.1, -0.1, 0.3;
  Rng rng(13);
  const std::size_t n = 100000;
  const Eigen::MatrixXd y = sample(d, rng, n);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (Eigen::Index i = 0; i < y.rows(); ++i) mean += d.to_logit(y.row(i).transpose());
  mean /= static_cast<double>(n);
  for (int j = 0; j < 2; ++j)
    EXPECT_NEAR(mean[j], d.mu[j], 3.0 * std::sqrt(d.sigma(j, j) / static_cast<double>(n)));
}

TEST(LogitNormal, ValidateRejectsBadShapes) {
  LogitNormal d;
  d.lower = Eigen::Vector2d(0, 0);
  d.upper = Eigen::Vector2d(1, 0);
  d.mu = Eigen::Vector2d(0, 0);
  d.sigma = Eigen::Matrix2d::Identity();
  EXPECT_THROW(d.validate(), DomainError);
  d.upper[1] = 1;
  EXPECT_NO_THROW(d.validate());
  d.sigma(0, 1) = 0.5;
  EXPECT_THROW(d.validate(), DomainError);
  d.sigma(1, 0) = 0.5;
  d.sigma(1, 1) = -1.0;
  EXPECT_THROW(d.validate(), DomainError);
}

TEST(LogitNormal, LogDensityIntegratesToOne) {
  LogitNormal d;
  d.lower = Eigen::VectorXd::Constant(1, 2.0);
  d.upper = Eigen::VectorXd::Constant(1, 7.0);
  d.mu = Eigen::VectorXd::Constant(1, 0.4);
  d.sigma = Eigen::MatrixXd::Constant(1, 1, 0.8);
  const double mass = oracle::simpson(
      [&](double y) { return std::exp(d.log_density(Eigen::VectorXd::Constant(1, y))); },
      2.0 + 1e-9, 7.0 - 1e-9, 200000);
  EXPECT_NEAR(mass, 1.0, 1e-6);
}

namespace {

GaussianMeanFamily family3(double radius = 10.0) {
  Eigen::Matrix3d cov;
  cov << 1.0, 0.3, -0.2, 0.3, 0.8, 0.1, -0.2, 0.1, 1.5;
  return GaussianMeanFamily(cov, Eigen::Vector3d(0.5, -1.0, 2.0), radius);
}

}  // namespace

TEST(GaussianLogDensity, StandardNormalMode) {
  const GaussianMeanFamily f(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1), 1.0);
  EXPECT_NEAR(gaussian_log_density(f, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)),
              -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
}

TEST(GaussianLogDensity, DifferenceIsQuadraticForm) {
  const GaussianMeanFamily f = family3();
  const Eigen::Vector3d theta(0.1, 0.2, 0.3), z(1.0, -0.5, 2.0), z2(-0.3, 0.7, 1.1);
  const Eigen::Matrix3d inv = f.cov().inverse();
  const double expected =
      -0.5 * ((z - theta).dot(inv * (z - theta)) - (z2 - theta).dot(inv * (z2 - theta)));
  EXPECT_NEAR(gaussian_log_density(f, theta, z) - gaussian_log_density(f, theta, z2), expected,
              1e-12);
}

TEST(GaussianLogDensity, MatchesExplicitFormula) {
  const GaussianMeanFamily f = family3();
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::Vector3d theta, z;
    for (int j = 0; j < 3; ++j) {
      theta[j] = normal(rng);
      z[j] = 2.0 * normal(rng);
    }
    EXPECT_NEAR(gaussian_log_density(f, theta, z),
                oracle::gaussian_log_density3(z, theta, f.cov()), 1e-10);
  }
}

TEST(LikelihoodRatio, IdenticalParametersGiveZero) {
  const GaussianMeanFamily f = family3();
  const Eigen::Vector3d theta(0.2, 0.1, -0.4);
  for (double s : {-3.0, 0.0, 5.0})
    EXPECT_NEAR(log_likelihood_ratio(f, theta, theta, Eigen::Vector3d::Constant(s)), 0.0, 1e-15);
}

TEST(LikelihoodRatio, MidpointSymmetry) {
  const GaussianMeanFamily f(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1), 2.0);
  EXPECT_NEAR(log_likelihood_ratio(f, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1),
                                   Eigen::VectorXd::Constant(1, 0.5)),
              0.0, 1e-15);
  EXPECT_NEAR(log_likelihood_ratio(f, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1),
                                   Eigen::VectorXd::Constant(1, 2.0)),
              0.5 * 1.0 - 0.5 * 4.0, 1e-15);
}

TEST(LikelihoodRatio, JacobianCancelsInObservationSpace) {
  const GaussianMeanFamily f = family3();
  LogitNormal base;
  base.lower = Eigen::Vector3d(0.0, 1.0, -5.0);
  base.upper = Eigen::Vector3d(2.0, 4.0, 5.0);
  base.sigma = f.cov();
  base.mu = f.center();
  LogitNormal tilted = base;
  tilted.mu = f.center() + Eigen::Vector3d(0.3, -0.2, 0.5);
  Rng rng(19);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::VectorXd z = f.draw(tilted.mu, rng);
    const Eigen::VectorXd y = base.from_logit(z);
    const double observation = base.log_density(y) - tilted.log_density(y);
    const double logit_space = log_likelihood_ratio(f, base.mu, tilted.mu, base.to_logit(y));
    EXPECT_NEAR(observation, logit_space, 1e-10);
  }
}

TEST(LikelihoodRatio, ChangeOfMeasure) {
  const GaussianMeanFamily f = family3();
  const Eigen::Vector3d theta = f.center() + Eigen::Vector3d(0.4, 0.3, -0.5);
  const auto h = [](const Eigen::VectorXd& z) { return sigmoid(z[0] - z[2]); };
  Rng rng(23);
  const int n = 100000;
  double s = 0.0, ss = 0.0, base = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd z = f.draw(theta, rng);
    const double v = std::exp(log_likelihood_ratio(f, f.center(), theta, z)) * h(z);
    s += v;
    ss += v * v;
    base += h(f.draw(f.center(), rng));
  }
  const double mean = s / n;
  const double se = std::sqrt((ss / n - mean * mean) / n);
  const double base_mean = base / n;
  // Two independent sample means; the base mean has standard error <= 0.5 / sqrt(n).
  EXPECT_NEAR(mean, base_mean, 3.0 * std::hypot(se, 0.5 / std::sqrt(n)));
}

TEST(LikelihoodRatio, ClampCountsEvents) {
  EXPECT_FALSE(clamp_log_ratio(49.9).clamped);
  const auto hi = clamp_log_ratio(70.0);
  EXPECT_TRUE(hi.clamped);
  EXPECT_EQ(hi.value, kLogRatioClamp);
  const auto lo = clamp_log_ratio(-70.0);
  EXPECT_TRUE(lo.clamped);
  EXPECT_EQ(lo.value, -kLogRatioClamp);
}

TEST(GaussianMeanFamily, RejectsNonPositiveDefiniteCovariance) {
  Eigen::Matrix2d cov;
  cov << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(GaussianMeanFamily(cov, Eigen::Vector2d::Zero(), 1.0), NumericError);
  EXPECT_THROW(GaussianMeanFamily(Eigen::Matrix2d::Identity(), Eigen::Vector3d::Zero(), 1.0),
               DomainError);
  EXPECT_THROW(GaussianMeanFamily(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero(), -1.0),
               DomainError);
}

TEST(CeProjectionUpdate, PureEmpiricalStep) {
  const GaussianMeanFamily f(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero(), 10.0);
  Eigen::MatrixXd elites(3, 2);
  elites << 1.0, 2.0, 3.0, -1.0, 2.0, 0.5;
  const Eigen::Vector2d stat = elites.colwise().sum().transpose();
  const Eigen::VectorXd next = ce_projection_update(f, Eigen::Vector2d(5.0, 5.0), stat, 3.0, 1.0);
  EXPECT_TRUE(next.isApprox(Eigen::Vector2d(2.0, 0.5), 1e-15));
}

TEST(CeProjectionUpdate, ZeroStepKeepsTheta) {
  const GaussianMeanFamily f(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero(), 1.0);
  const Eigen::Vector2d theta(0.3, -0.2);
  EXPECT_EQ(ce_projection_update(f, theta, Eigen::Vector2d(50.0, 50.0), 2.0, 0.0), theta);
}

TEST(CeProjectionUpdate, ProjectsRadially) {
  const GaussianMeanFamily f(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero(), 0.1);
  const Eigen::VectorXd next =
      ce_projection_update(f, Eigen::Vector2d::Zero(), Eigen::Vector2d(0.3, 0.4), 1.0, 1.0);
  EXPECT_NEAR(next[0], 0.06, 1e-15);
  EXPECT_NEAR(next[1], 0.08, 1e-15);
}

TEST(CeProjectionUpdate, AlwaysInsideBall) {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 2000; ++rep) {
    const double r = 2.0 * unit(rng);
    const Eigen::Vector3d center(normal(rng), normal(rng), normal(rng));
    const GaussianMeanFamily f(Eigen::Matrix3d::Identity(), center, r);
    const Eigen::VectorXd theta = f.project(center + 3.0 * Eigen::Vector3d(normal(rng), normal(rng), normal(rng)));
    const Eigen::Vector3d stat = 10.0 * Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
    const Eigen::VectorXd next = ce_projection_update(f, theta, stat, 0.1 + unit(rng), unit(rng));
    ASSERT_LE((next - center).norm(), r + 1e-12);
  }
}

TEST(CeProjectionUpdate, Errors) {
  const GaussianMeanFamily f(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero(), 1.0);
  EXPECT_THROW(ce_projection_update(f, Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones(), 0.0, 0.5),
               NoEliteMassError);
  EXPECT_THROW(ce_projection_update(f, Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones(), 1.0, 1.5),
               DomainError);
  EXPECT_THROW(ce_projection_update(f, Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones(), 1.0, -0.1),
               DomainError);
}

TEST(CovarianceFactor, HandlesSemidefiniteInput) {
  Eigen::Matrix2d psd;
  psd << 1.0, 1.0, 1.0, 1.0;
  const Eigen::MatrixXd L = covariance_factor(psd);
  EXPECT_TRUE((L * L.transpose()).isApprox(psd, 1e-12));
  const Eigen::MatrixXd Z = covariance_factor(Eigen::Matrix2d::Zero());
  EXPECT_TRUE(Z.isZero());
}

TEST(FitLogitNormalSparse, ZeroPenaltyMatchesDenseFit) {
  Rng rng(31);
  LogitNormal d;
  d.lower = Eigen::Vector3d(0, 0, 0);
  d.upper = Eigen::Vector3d(1, 2, 3);
  d.mu = Eigen::Vector3d(0.1, -0.2, 0.3);
  d.sigma.resize(3, 3);
  d.sigma << 1.0, 0.4, 0.1, 0.4, 0.9, -0.2, 0.1, -0.2, 0.7;
  const Eigen::MatrixXd y = sample(d, rng, 400);
  const LogitNormal dense = fit_logit_normal(y);
  const LogitNormal sparse = fit_logit_normal_sparse(y, 0.0);
  EXPECT_TRUE(sparse.mu.isApprox(dense.mu, 1e-14));
  EXPECT_LT((sparse.sigma - dense.sigma).norm(), 1e-6);
  const LogitNormal penalized = fit_logit_normal_sparse(y, 0.2);
  EXPECT_NO_THROW(penalized.validate());
}
