#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hypoguard/distributions.hpp"

namespace hypoguard {

/// Risk f evaluated at a logit-space point. `noise_seed` seeds any randomness
/// that is not tilted by importance sampling (e.g. CGM noise) and is the same
/// under every sampler for a given sample slot.
using RiskFn = std::function<double(const Eigen::VectorXd& z, std::uint64_t noise_seed)>;

enum class Method { mc, ce_is };

std::string_view to_string(Method m) noexcept;

struct Estimate {
  double p_hat = 0.0;
  double std_err = 0.0;
  std::size_t events = 0;
  std::size_t n = 0;
  Method method = Method::mc;
  std::size_t clamped_ratios = 0;
  double ess = 0.0;  // (sum w)^2 / sum w^2
};

/// Estimate plus the per-sample pieces needed for diagnostics and bootstrap.
struct Evaluation {
  Estimate estimate;
  std::vector<double> summands;  // w_i * 1{f_i <= gamma}
  std::vector<double> risks;     // f_i
};

struct RunOptions {
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Every estimator throws DomainError if the risk function returns NaN.

/// Naive Monte Carlo under the base distribution N(center, cov).
/// std_err = sqrt(p (1 - p) / n). Throws DomainError for n == 0.
Evaluation mc_estimate(const GaussianMeanFamily& family, const RiskFn& risk, double gamma,
                       std::size_t n, const RunOptions& options);

/// Importance sampling from N(theta, cov) with weights p0 / p_theta computed
/// in log space and clamped. std_err is the sample standard deviation of the
/// summands over sqrt(n). Throws DomainError if theta is not admissible or
/// n == 0.
Evaluation is_estimate(const Eigen::VectorXd& theta, const GaussianMeanFamily& family,
                       const RiskFn& risk, double gamma, std::size_t n,
                       const RunOptions& options);

struct CeConfig {
  double gamma = 70.0;
  double rho = 0.01;
  std::vector<double> alphas{0.8};             // per iteration; last entry repeats
  std::vector<std::size_t> batch_sizes{1000};  // per iteration; last entry repeats
  int iterations = 10;
  bool normalize_weights = true;

  double alpha(int k) const;
  std::size_t batch_size(int k) const;
  void validate() const;
};

struct CeIteration {
  Eigen::VectorXd theta;  // sampler used in this iteration
  double level = 0.0;     // gamma_k
  double quantile = 0.0;  // rho-quantile of the batch risks
  std::size_t elites = 0;
  double weight_mass = 0.0;
  std::size_t clamped_ratios = 0;
  bool stalled = false;
};

struct CeResult {
  Eigen::VectorXd theta_hat;
  int selected_iteration = 0;
  Eigen::VectorXd final_theta;  // iterate after the last update
  std::vector<CeIteration> history;
  std::size_t stalls = 0;
};

/// Lower empirical quantile: the ceil(rho * n)-th smallest value (1-based).
double lower_quantile(std::vector<double> values, double rho);

/// Cross-entropy training of the mean of the importance sampler.
///
/// Iteration k samples N_k points from N(theta_k, cov), sets the level
/// gamma_k = max(gamma, rho-quantile), weights the elites {f <= gamma_k} by
/// p0 / p_theta_k and moves theta by ce_projection_update. The returned
/// theta_hat is the iterate whose batch had the lowest rho-quantile (earliest
/// on ties). Iterations without elite mass keep theta and count as stalls;
/// throws TrainingFailed if every iteration stalls.
CeResult cross_entropy_train(const GaussianMeanFamily& family, const RiskFn& risk,
                             const CeConfig& config, const RunOptions& options);

struct EventComparison {
  std::size_t mc_events = 0;
  std::size_t ce_events = 0;
  std::size_t n = 0;
  double ratio = 0.0;  // ce_events / max(mc_events, 1)
};

/// Counts {f <= gamma} among n draws from P0 and from P_theta.
EventComparison event_count_comparison(const Eigen::VectorXd& theta,
                                       const GaussianMeanFamily& family, const RiskFn& risk,
                                       double gamma, std::size_t n, const RunOptions& options);

/// Standard deviation of the mean of `summands` over `resamples` bootstrap
/// resamples.
double bootstrap_std_of_mean(const std::vector<double>& summands, std::size_t resamples,
                             std::uint64_t seed);

}  // namespace hypoguard
