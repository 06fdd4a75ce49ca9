#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hypoguard/config_io.hpp"
#include "hypoguard/population.hpp"
#include "hypoguard/rare_event.hpp"

namespace hypoguard {

/// Search radius of the importance sampler per age group.
double default_radius(AgeGroup group) noexcept;

/// f(z) = minimum glucose of the rollout decoded from z.
RiskFn patient_risk(const ScenarioModel& model, const ControllerConfig& controller,
                    const SimConfig& sim);

struct ExperimentConfig {
  SimulationSetup setup;
  CeConfig ce;  // gamma is overwritten per comparison
  std::optional<double> radius;
  std::size_t n = 10000;
  std::size_t bootstrap_resamples = 500;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  /// Desk-scale defaults: N_k = 500, K = 10, rho = 0.01, alpha = 0.8.
  static ExperimentConfig desk_scale();
};

struct CeSummary {
  Eigen::VectorXd theta_hat;
  double theta_offset_norm = 0.0;  // ||theta_hat - center||
  int selected_iteration = 0;
  std::size_t stalls = 0;
  std::vector<double> quantiles;
  std::vector<double> levels;
  std::vector<std::size_t> elites;
};

struct ComparisonReport {
  std::string patient;
  double gamma = 0.0;
  std::size_t n = 0;
  double radius = 0.0;
  Estimate mc;
  Estimate ce;
  double event_ratio = 0.0;          // ce.events / max(mc.events, 1)
  std::optional<double> std_ratio;   // mc.std_err / ce.std_err
  double mc_bootstrap_std = 0.0;
  double ce_bootstrap_std = 0.0;
  std::optional<double> bootstrap_std_ratio;
  std::optional<double> truth;       // analytic probability when known
  CeSummary ce_history;
  std::size_t rollouts = 0;
  double wall_time_s = 0.0;
  double rollouts_per_second = 0.0;
};

/// Trains the cross-entropy sampler for `profile` at level `gamma`, then
/// evaluates naive MC and CE-IS on fresh seeds with config.n samples each.
/// Throws DomainError for n == 0.
ComparisonReport run_comparison(const PatientProfile& profile, const LogitNormal& behavior,
                                const ExperimentConfig& config, double gamma);

struct SyntheticConfig {
  double gamma = -3.0;
  std::size_t n = 10000;
  double radius = 3.0;
  CeConfig ce = [] {
    CeConfig c;
    c.rho = 0.01;
    c.alphas = {0.8};
    c.batch_sizes = {1000};
    c.iterations = 10;
    return c;
  }();
  std::size_t bootstrap_resamples = 500;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// f(x) = x with X ~ N(0, 1); the true probability is Phi(gamma).
ComparisonReport run_synthetic_validation(const SyntheticConfig& config);

double standard_normal_cdf(double x) noexcept;

/// Serialized report; timing fields are included only when requested so that
/// reports are reproducible byte for byte.
std::string report_to_json(const ComparisonReport& report, bool include_timing);
std::string estimate_to_json(const Estimate& estimate, double gamma, const std::string& patient,
                             std::uint64_t seed);
Estimate estimate_from_json(const std::string& text, double* gamma = nullptr,
                            std::string* patient = nullptr);

/// report_<patient>.json per patient plus events.csv and std.csv.
void write_report_files(const std::filesystem::path& dir,
                        const std::vector<ComparisonReport>& reports, bool include_timing);

}  // namespace hypoguard
