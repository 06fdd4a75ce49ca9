#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "hypoguard/distributions.hpp"
#include "hypoguard/population.hpp"
#include "hypoguard/rare_event.hpp"
#include "hypoguard/simulator.hpp"

namespace hypoguard {

/// Contents of a simulation config file:
///
///   {"step_min": 1, "cgm_period_min": 5, "gamma": 70,
///    "arma": {"phi": .., "psi": .., "sigma": ..},
///    "pid": {"kp", "ki", "kd", "target", "basal_rate", "max_rate", "carb_ratio"},
///    "pid_by_age_group": {"child": {...partial pid...}, ...}}
///
/// When basal_rate is absent, the pump basal is programmed from the
/// patient's nominal parameters.
struct SimulationSetup {
  SimConfig sim;
  PidConfig pid;
  std::optional<double> basal_rate;
  std::map<AgeGroup, PidConfig> pid_by_group;
  std::map<AgeGroup, std::optional<double>> basal_by_group;

  /// Controller for `profile`: age-group overrides applied, basal resolved.
  ControllerConfig controller_for(const PatientProfile& profile) const;
};

SimulationSetup parse_simulation_setup(std::string_view json_text);
SimulationSetup load_simulation_setup(const std::filesystem::path& path);

/// Contents of a cross-entropy config file:
/// {rho, alpha, batch_size, iterations, radius, gamma, seed, normalize_weights}.
/// radius may be null (age-group default); alpha and batch_size may be scalars
/// or per-iteration arrays.
struct CeSettings {
  CeConfig ce;
  std::optional<double> radius;
  std::uint64_t seed = 0;
};

CeSettings parse_ce_settings(std::string_view json_text);
CeSettings load_ce_settings(const std::filesystem::path& path);

/// {"a": [...], "b": [...], "mu": [...], "sigma": [[...], ...]}
std::string logit_normal_to_json(const LogitNormal& dist);
LogitNormal logit_normal_from_json(std::string_view json_text);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace hypoguard
