#include "hypoguard/rare_event.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "hypoguard/errors.hpp"
#include "hypoguard/parallel.hpp"
#include "hypoguard/random.hpp"

namespace hypoguard {

namespace {

constexpr std::uint64_t kEvaluationStream = 1;
constexpr std::uint64_t kTrainingStream = 0x1000;

struct Draws {
  std::vector<Eigen::VectorXd> z;
  std::vector<double> risk;
};

// Sample slot i always uses the generator seeded by (seed, stream, i), so the
// draws do not depend on the thread count.
Draws draw_and_evaluate(const Eigen::VectorXd& theta, const GaussianMeanFamily& family,
                        const RiskFn& risk, std::size_t n, std::uint64_t seed,
                        std::uint64_t stream, unsigned threads) {
  Draws d;
  d.z.resize(n);
  d.risk.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, stream, i));
    d.z[i] = family.draw(theta, rng);
    const std::uint64_t noise_seed = rng();
    d.risk[i] = risk(d.z[i], noise_seed);
  });
  for (std::size_t i = 0; i < n; ++i)
    if (std::isnan(d.risk[i]))
      throw DomainError("risk function returned NaN for sample " + std::to_string(i));
  return d;
}

Evaluation summarize(const Draws& d, const std::vector<double>& weights, double gamma,
                     Method method, std::size_t clamped) {
  const std::size_t n = d.risk.size();
  Evaluation ev;
  ev.risks = d.risk;
  ev.summands.resize(n);
  double sum = 0.0, sum_w = 0.0, sum_w2 = 0.0;
  std::size_t events = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool event = d.risk[i] <= gamma;
    ev.summands[i] = event ? weights[i] : 0.0;
    events += event ? 1 : 0;
    sum += ev.summands[i];
    sum_w += weights[i];
    sum_w2 += weights[i] * weights[i];
  }
  const double nn = static_cast<double>(n);
  Estimate& e = ev.estimate;
  e.n = n;
  e.events = events;
  e.method = method;
  e.clamped_ratios = clamped;
  e.p_hat = sum / nn;
  e.ess = sum_w2 > 0.0 ? sum_w * sum_w / sum_w2 : 0.0;
  if (method == Method::mc) {
    e.std_err = std::sqrt(e.p_hat * (1.0 - e.p_hat) / nn);
  } else if (n > 1) {
    double ss = 0.0;
    for (double s : ev.summands) ss += (s - e.p_hat) * (s - e.p_hat);
    e.std_err = std::sqrt(ss / (nn - 1.0)) / std::sqrt(nn);
  }
  return ev;
}

}  // namespace

std::string_view to_string(Method m) noexcept { return m == Method::mc ? "MC" : "CE-IS"; }

Evaluation mc_estimate(const GaussianMeanFamily& family, const RiskFn& risk, double gamma,
                       std::size_t n, const RunOptions& options) {
  if (n == 0) throw DomainError("mc_estimate: n must be >= 1");
  const Draws d = draw_and_evaluate(family.center(), family, risk, n, options.seed,
                                    kEvaluationStream, options.threads);
  return summarize(d, std::vector<double>(n, 1.0), gamma, Method::mc, 0);
}

Evaluation is_estimate(const Eigen::VectorXd& theta, const GaussianMeanFamily& family,
                       const RiskFn& risk, double gamma, std::size_t n,
                       const RunOptions& options) {
  if (n == 0) throw DomainError("is_estimate: n must be >= 1");
  if (!family.admissible(theta)) throw DomainError("is_estimate: theta outside search ball");
  const Draws d =
      draw_and_evaluate(theta, family, risk, n, options.seed, kEvaluationStream, options.threads);
  std::vector<double> weights(n);
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto lr = clamp_log_ratio(log_likelihood_ratio(family, family.center(), theta, d.z[i]));
    clamped += lr.clamped ? 1 : 0;
    weights[i] = std::exp(lr.value);
  }
  return summarize(d, weights, gamma, Method::ce_is, clamped);
}

double CeConfig::alpha(int k) const {
  return alphas[std::min<std::size_t>(static_cast<std::size_t>(k), alphas.size() - 1)];
}

std::size_t CeConfig::batch_size(int k) const {
  return batch_sizes[std::min<std::size_t>(static_cast<std::size_t>(k), batch_sizes.size() - 1)];
}

void CeConfig::validate() const {
  if (!(rho > 0.0 && rho <= 1.0)) throw DomainError("CeConfig: rho must lie in (0, 1]");
  if (iterations < 1) throw DomainError("CeConfig: iterations must be >= 1");
  if (alphas.empty() || batch_sizes.empty())
    throw DomainError("CeConfig: alphas and batch_sizes must be non-empty");
  for (double a : alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw DomainError("CeConfig: alpha must lie in [0, 1]");
  for (std::size_t b : batch_sizes)
    if (b == 0) throw DomainError("CeConfig: batch sizes must be >= 1");
}

double lower_quantile(std::vector<double> values, double rho) {
  if (values.empty()) throw DomainError("lower_quantile: empty sample");
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(rho * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(values.begin(), nth, values.end());
  return *nth;
}

CeResult cross_entropy_train(const GaussianMeanFamily& family, const RiskFn& risk,
                             const CeConfig& config, const RunOptions& options) {
  config.validate();
  CeResult result;
  Eigen::VectorXd theta = family.center();
  for (int k = 0; k < config.iterations; ++k) {
    const std::size_t n = config.batch_size(k);
    const Draws d = draw_and_evaluate(theta, family, risk, n, options.seed,
                                      kTrainingStream + static_cast<std::uint64_t>(k),
                                      options.threads);
    CeIteration it;
    it.theta = theta;
    it.quantile = lower_quantile(d.risk, config.rho);
    it.level = std::max(config.gamma, it.quantile);

    Eigen::VectorXd stat = Eigen::VectorXd::Zero(theta.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (d.risk[i] > it.level) continue;
      ++it.elites;
      const auto lr =
          clamp_log_ratio(log_likelihood_ratio(family, family.center(), theta, d.z[i]));
      it.clamped_ratios += lr.clamped ? 1 : 0;
      const double w = std::exp(lr.value);
      it.weight_mass += w;
      stat += w * d.z[i];
    }

    if (it.weight_mass > 0.0) {
      if (config.normalize_weights) {
        theta = ce_projection_update(family, theta, stat, it.weight_mass, config.alpha(k));
      } else {
        const double nn = static_cast<double>(n);
        theta = ce_projection_update(family, theta, stat / nn, 1.0, config.alpha(k));
      }
    } else {
      it.stalled = true;
      ++result.stalls;
    }
    result.history.push_back(std::move(it));
  }
  if (result.stalls == result.history.size())
    throw TrainingFailed("cross_entropy_train: every iteration stalled (no elite mass)");

  result.final_theta = theta;
  std::size_t best = 0;
  for (std::size_t k = 1; k < result.history.size(); ++k)
    if (result.history[k].quantile < result.history[best].quantile) best = k;
  result.selected_iteration = static_cast<int>(best);
  result.theta_hat = result.history[best].theta;
  return result;
}

EventComparison event_count_comparison(const Eigen::VectorXd& theta,
                                       const GaussianMeanFamily& family, const RiskFn& risk,
                                       double gamma, std::size_t n, const RunOptions& options) {
  RunOptions mc_opts = options;
  mc_opts.seed = derive_seed(options.seed, 0x4d43, 0);
  RunOptions ce_opts = options;
  ce_opts.seed = derive_seed(options.seed, 0x4345, 0);
  EventComparison c;
  c.n = n;
  c.mc_events = mc_estimate(family, risk, gamma, n, mc_opts).estimate.events;
  c.ce_events = is_estimate(theta, family, risk, gamma, n, ce_opts).estimate.events;
  c.ratio = static_cast<double>(c.ce_events) / static_cast<double>(std::max<std::size_t>(c.mc_events, 1));
  return c;
}

double bootstrap_std_of_mean(const std::vector<double>& summands, std::size_t resamples,
                             std::uint64_t seed) {
  if (summands.empty() || resamples < 2) return 0.0;
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, summands.size() - 1);
  std::vector<double> means(resamples);
  const double n = static_cast<double>(summands.size());
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < summands.size(); ++i) s += summands[pick(rng)];
    m = s / n;
  }
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(resamples);
  double ss = 0.0;
  for (double m : means) ss += (m - mean) * (m - mean);
  return std::sqrt(ss / static_cast<double>(resamples - 1));
}

}  // namespace hypoguard
