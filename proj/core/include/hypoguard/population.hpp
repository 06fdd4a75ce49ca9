#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hypoguard/distributions.hpp"
#include "hypoguard/random.hpp"
#include "hypoguard/simulator.hpp"

namespace hypoguard {

/// Last evening meal and the overnight fast that follows it.
struct BehaviorRecord {
  double carbs_g = 0.0;     // > 0
  double fast_hours = 0.0;  // > 5
};

/// Parses `carbs_g,fast_hours` CSV. Rows violating the record invariants are
/// rejected; the DataError lists every offending line number.
std::vector<BehaviorRecord> parse_behavior_csv(std::istream& in, std::string_view source);
std::vector<BehaviorRecord> load_behavior_csv(const std::filesystem::path& path);

/// Logit-normal over (carbs_g, fast_hours), box padded by `pad` of the range.
LogitNormal fit_behavior_model(std::span<const BehaviorRecord> records, double pad = 0.01);

enum class AgeGroup { child, adolescent, adult };

std::string_view to_string(AgeGroup group) noexcept;
/// Throws DataError for unknown names.
AgeGroup parse_age_group(std::string_view name);

/// One reference patient: nominal physiology and the range of its
/// subpopulation, in kParamNames order.
struct PatientProfile {
  std::string id;
  AgeGroup age_group = AgeGroup::adult;
  Eigen::VectorXd nominal;
  Eigen::VectorXd pop_lo;
  Eigen::VectorXd pop_hi;
  std::vector<bool> nonneg;

  /// Throws DataError if bounds are inconsistent, a nonnegative parameter is
  /// not strictly positive, or the nominal parameters are not simulable.
  void validate() const;

  PhysParams nominal_params() const { return PhysParams::from_vector(nominal); }
};

/// `patient.json`: {"id", "age_group", "params": {name: {value, lo, hi, nonneg}}}.
/// Every simulator parameter must be present.
PatientProfile parse_patient_json(std::string_view text);
PatientProfile load_patient_json(const std::filesystem::path& path);

/// Per-patient perturbation model: a box of 1/10 of the subpopulation range
/// centred on the nominal parameters (lower edge clamped at 0 for
/// nonnegative parameters), logit-space mean placing the nominal value at
/// its pre-image, covariance 0.25 I.
LogitNormal build_patient_model(const PatientProfile& profile);

/// Base distribution P0 over scenarios: physiology and behavior blocks are
/// independent. In logit space the joint vector is physiology followed by
/// (carbs_g, fast_hours).
struct ScenarioModel {
  LogitNormal physiology;
  LogitNormal behavior;

  std::size_t dim() const noexcept { return physiology.dim() + behavior.dim(); }

  Eigen::VectorXd joint_mean() const;
  Eigen::MatrixXd joint_cov() const;  // block diagonal

  /// Importance-sampling family centred at the base mean.
  GaussianMeanFamily family(double radius) const;

  /// Maps a joint logit-space vector to a simulator scenario.
  ScenarioSample decode(const Eigen::VectorXd& z, std::uint64_t noise_seed) const;

  /// Joint log density in observation space of (physiology, carbs, fast).
  double log_density(const Eigen::VectorXd& physiology_y, const Eigen::VectorXd& behavior_y) const;
};

ScenarioModel make_scenario_model(const PatientProfile& profile, const LogitNormal& behavior);

/// n i.i.d. scenarios from P0; noise seeds are drawn from the same generator.
std::vector<ScenarioSample> sample_scenario(const ScenarioModel& model, Rng& rng, std::size_t n);

}  // namespace hypoguard
