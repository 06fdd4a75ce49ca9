#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hypoguard/random.hpp"

namespace hypoguard {

// Glucose-insulin-carbohydrate model used in place of a full T1D simulator.
//
// Bergman minimal-model core, two-compartment gut and two-compartment
// subcutaneous insulin (time in minutes):
//
//   G'  = -(p1 + X) G + p1 Gb + fbio kabs Q2 / (Vg BW)       [mg/dL]
//   X'  = -p2 X + p2 SI (I - Ib)                             [1/min]
//   Q1' = -kemp Q1                                           [mg]
//   Q2' =  kemp Q1 - kabs Q2                                 [mg]
//   S1' =  u - ka1 S1                                        [uU]
//   S2' =  ka1 S1 - ka2 S2                                   [uU]
//   I'  =  ka2 S2 / (Vi BW) - ke I                           [uU/mL]
//
// Vi is fixed at kInsulinVolume. A constant infusion of
// equilibrium_basal() holds I at Ib, X at 0 and G at Gb.

inline constexpr std::size_t kParamCount = 13;
inline constexpr std::array<std::string_view, kParamCount> kParamNames = {
    "Vg", "p1", "SI", "p2", "ka1", "ka2", "ke", "kabs", "kemp", "fbio", "Gb", "Ib", "BW"};

/// Plasma insulin distribution volume, mL/kg.
inline constexpr double kInsulinVolume = 120.0;

/// Default hypoglycemia threshold, mg/dL.
inline constexpr double kHypoThreshold = 70.0;

struct PhysParams {
  double Vg = 1.6;      // glucose distribution volume, dL/kg
  double p1 = 0.008;    // glucose effectiveness, 1/min
  double SI = 3e-4;     // insulin sensitivity, 1/min per uU/mL
  double p2 = 0.02;     // remote insulin decay, 1/min
  double ka1 = 0.018;   // subcutaneous absorption, 1/min
  double ka2 = 0.018;   // subcutaneous absorption, 1/min
  double ke = 0.14;     // plasma insulin clearance, 1/min
  double kabs = 0.04;   // gut absorption, 1/min
  double kemp = 0.05;   // gastric emptying, 1/min
  double fbio = 0.9;    // carbohydrate bioavailability
  double Gb = 120.0;    // basal glucose, mg/dL
  double Ib = 10.0;     // basal plasma insulin, uU/mL
  double BW = 70.0;     // body weight, kg

  /// Order follows kParamNames.
  static PhysParams from_vector(const Eigen::VectorXd& v);
  Eigen::VectorXd to_vector() const;

  /// Throws DomainError unless all rates and volumes are > 0, 0 < fbio <= 1 and
  /// Gb in [70, 180].
  void validate() const;

  /// Infusion (uU/min) that keeps plasma insulin at Ib.
  double equilibrium_basal() const noexcept { return ke * Ib * kInsulinVolume * BW; }
};

struct ArmaConfig {
  double phi = 0.7;    // AR coefficient
  double psi = 0.3;    // MA coefficient
  double sigma = 2.0;  // innovation standard deviation, mg/dL
};

struct PidConfig {
  double kp = 50.0;          // uU/min per mg/dL
  double ki = 0.05;          // uU/min per mg/dL*min
  double kd = 0.0;           // uU/min per mg/dL/min
  double target = 120.0;     // mg/dL
  double basal_rate = 0.0;   // uU/min
  double max_rate = 5e6 / 60.0;  // uU/min (5 U/h)
  double carb_ratio = 14.0;  // g carbohydrate per U bolus

  void validate() const;
};

using ControllerConfig = PidConfig;

struct SimConfig {
  double step_min = 1.0;
  double cgm_period_min = 5.0;
  double gamma = kHypoThreshold;
  ArmaConfig arma;

  void validate() const;
};

struct ScenarioSample {
  PhysParams params;
  double carbs_g = 0.0;
  double fast_hours = 0.0;
  std::uint64_t seed = 0;  // CGM noise stream
};

struct Rollout {
  std::vector<double> t;        // minutes
  std::vector<double> bg;       // true blood glucose, mg/dL
  std::vector<double> cgm;      // sensor reading held since last tick, mg/dL
  std::vector<double> insulin;  // infusion rate, uU/min
  double min_bg = 0.0;
  bool hypo = false;
};

/// ARMA(1,1) CGM error: e_t = phi e_{t-1} + eta_t + psi eta_{t-1},
/// eta_t ~ N(0, sigma^2). Readings are floored at 1 mg/dL.
class CgmSensor {
 public:
  CgmSensor(const ArmaConfig& config, std::uint64_t seed);

  double read(double true_bg);
  double error() const noexcept { return error_; }

 private:
  ArmaConfig config_;
  Rng rng_;
  double error_ = 0.0;
  double innovation_ = 0.0;
};

/// Positional PID on (cgm - target) around a basal rate. The integral is
/// frozen on ticks where the output saturates.
class PidController {
 public:
  PidController(const PidConfig& config, double tick_min);

  /// Infusion in uU/min for the next tick.
  double step(double cgm);

  /// Meal bolus in U.
  double meal_bolus_units(double carbs_g) const noexcept { return carbs_g / config_.carb_ratio; }

 private:
  PidConfig config_;
  double tick_min_;
  double integral_ = 0.0;
  double previous_error_ = 0.0;
  bool first_ = true;
};

/// Simulates the meal at t = 0 and the fast until fast_hours. Fixed-step RK4;
/// CGM and controller tick every cgm_period_min. Throws SimulationDiverged on
/// non-finite or negative state, DomainError on invalid inputs.
Rollout rollout(const ScenarioSample& sample, const ControllerConfig& controller,
                const SimConfig& sim);

/// Minimum glucose of the same simulation without storing traces.
double simulate_min_bg(const ScenarioSample& sample, const ControllerConfig& controller,
                       const SimConfig& sim);

/// f(X): minimum blood glucose over the fast.
inline double risk(const Rollout& r) noexcept { return r.min_bg; }

}  // namespace hypoguard
