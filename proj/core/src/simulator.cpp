#include "hypoguard/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "hypoguard/errors.hpp"

namespace hypoguard {

PhysParams PhysParams::from_vector(const Eigen::VectorXd& v) {
  if (v.size() != static_cast<Eigen::Index>(kParamCount))
    throw DomainError("PhysParams: expected " + std::to_string(kParamCount) + " values, got " +
                      std::to_string(v.size()));
  PhysParams p;
  p.Vg = v[0];
  p.p1 = v[1];
  p.SI = v[2];
  p.p2 = v[3];
  p.ka1 = v[4];
  p.ka2 = v[5];
  p.ke = v[6];
  p.kabs = v[7];
  p.kemp = v[8];
  p.fbio = v[9];
  p.Gb = v[10];
  p.Ib = v[11];
  p.BW = v[12];
  return p;
}

Eigen::VectorXd PhysParams::to_vector() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(kParamCount));
  v << Vg, p1, SI, p2, ka1, ka2, ke, kabs, kemp, fbio, Gb, Ib, BW;
  return v;
}

void PhysParams::validate() const {
  const Eigen::VectorXd v = to_vector();
  for (std::size_t j = 0; j < kParamCount; ++j) {
    if (!(std::isfinite(v[static_cast<Eigen::Index>(j)]) && v[static_cast<Eigen::Index>(j)] > 0.0))
      throw DomainError("PhysParams: " + std::string(kParamNames[j]) + " must be positive");
  }
  if (fbio > 1.0) throw DomainError("PhysParams: fbio must be <= 1");
  if (Gb < 70.0 || Gb > 180.0) throw DomainError("PhysParams: Gb must lie in [70, 180]");
}

void PidConfig::validate() const {
  if (!(max_rate > 0.0)) throw DomainError("PidConfig: max_rate must be positive");
  if (!(basal_rate >= 0.0 && basal_rate <= max_rate))
    throw DomainError("PidConfig: basal_rate must lie in [0, max_rate]");
  if (!(carb_ratio > 0.0)) throw DomainError("PidConfig: carb_ratio must be positive");
  if (!(std::isfinite(kp) && std::isfinite(ki) && std::isfinite(kd) && std::isfinite(target)))
    throw DomainError("PidConfig: gains and target must be finite");
}

void SimConfig::validate() const {
  if (!(step_min > 0.0)) throw DomainError("SimConfig: step_min must be positive");
  if (!(cgm_period_min >= step_min)) throw DomainError("SimConfig: cgm_period_min < step_min");
  const double ratio = cgm_period_min / step_min;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw DomainError("SimConfig: cgm_period_min must be a multiple of step_min");
  if (!(arma.sigma >= 0.0)) throw DomainError("SimConfig: arma.sigma must be >= 0");
  if (!(std::abs(arma.phi) < 1.0)) throw DomainError("SimConfig: |arma.phi| must be < 1");
}

CgmSensor::CgmSensor(const ArmaConfig& config, std::uint64_t seed)
    : config_(config), rng_(seed) {}

double CgmSensor::read(double true_bg) {
  if (config_.sigma > 0.0) {
    std::normal_distribution<double> normal(0.0, config_.sigma);
    const double eta = normal(rng_);
    error_ = config_.phi * error_ + eta + config_.psi * innovation_;
    innovation_ = eta;
  }
  return std::max(1.0, true_bg + error_);
}

PidController::PidController(const PidConfig& config, double tick_min)
    : config_(config), tick_min_(tick_min) {}

double PidController::step(double cgm) {
  const double error = cgm - config_.target;
  const double derivative = first_ ? 0.0 : (error - previous_error_) / tick_min_;
  first_ = false;
  previous_error_ = error;
  const double raw = config_.basal_rate + config_.kp * error + config_.ki * integral_ +
                     config_.kd * derivative;
  const double out = std::clamp(raw, 0.0, config_.max_rate);
  if (out == raw) integral_ += error * tick_min_;
  return out;
}

namespace {

using State = std::array<double, 7>;  // G, X, Q1, Q2, S1, S2, I
enum : std::size_t { kG, kX, kQ1, kQ2, kS1, kS2, kI };

State derivative(const PhysParams& p, const State& s, double u) {
  State d;
  d[kG] = -(p.p1 + s[kX]) * s[kG] + p.p1 * p.Gb + p.fbio * p.kabs * s[kQ2] / (p.Vg * p.BW);
  d[kX] = -p.p2 * s[kX] + p.p2 * p.SI * (s[kI] - p.Ib);
  d[kQ1] = -p.kemp * s[kQ1];
  d[kQ2] = p.kemp * s[kQ1] - p.kabs * s[kQ2];
  d[kS1] = u - p.ka1 * s[kS1];
  d[kS2] = p.ka1 * s[kS1] - p.ka2 * s[kS2];
  d[kI] = p.ka2 * s[kS2] / (kInsulinVolume * p.BW) - p.ke * s[kI];
  return d;
}

State axpy(const State& s, double h, const State& d) {
  State out;
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] + h * d[i];
  return out;
}

void rk4_step(const PhysParams& p, State& s, double u, double h) {
  const State k1 = derivative(p, s, u);
  const State k2 = derivative(p, axpy(s, 0.5 * h, k1), u);
  const State k3 = derivative(p, axpy(s, 0.5 * h, k2), u);
  const State k4 = derivative(p, axpy(s, h, k3), u);
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

void check_state(const State& s, double t) {
  for (double v : s)
    if (!std::isfinite(v))
      throw SimulationDiverged("rollout: non-finite state at t = " + std::to_string(t) + " min", t);
  // X may be negative; everything else is a mass or concentration.
  for (std::size_t i : {kG, kQ1, kQ2, kS1, kS2, kI})
    if (s[i] < 0.0)
      throw SimulationDiverged("rollout: negative state at t = " + std::to_string(t) + " min", t);
}

// Calls observe(t, bg, cgm, infusion) at every grid point and returns the
// minimum glucose over the fast.
template <typename Observer>
double integrate(const ScenarioSample& sample, const ControllerConfig& controller,
                 const SimConfig& sim, Observer&& observe) {
  sample.params.validate();
  controller.validate();
  sim.validate();
  if (!(sample.carbs_g >= 0.0 && std::isfinite(sample.carbs_g)))
    throw DomainError("rollout: carbs_g must be >= 0");
  if (!(sample.fast_hours > 5.0 && std::isfinite(sample.fast_hours)))
    throw DomainError("rollout: fast_hours must exceed 5");

  const PhysParams& p = sample.params;
  const double h = sim.step_min;
  const auto steps = static_cast<long>(std::floor(sample.fast_hours * 60.0 / h + 1e-9));
  const auto tick_every = static_cast<long>(std::llround(sim.cgm_period_min / h));

  // Insulin compartments start at the steady state of the programmed basal.
  const double basal = controller.basal_rate;
  State s{};
  s[kS1] = basal / p.ka1;
  s[kS2] = basal / p.ka2;
  s[kI] = basal / (p.ke * kInsulinVolume * p.BW);
  s[kX] = p.SI * (s[kI] - p.Ib);
  s[kG] = p.Gb;

  PidController pid(controller, sim.cgm_period_min);
  CgmSensor sensor(sim.arma, sample.seed);
  s[kQ1] = sample.carbs_g * 1000.0;
  s[kS1] += pid.meal_bolus_units(sample.carbs_g) * 1e6;

  double reading = 0.0;
  double infusion = basal;
  double min_bg = s[kG];
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * h;
    if (k % tick_every == 0) {
      reading = sensor.read(s[kG]);
      infusion = pid.step(reading);
    }
    observe(t, s[kG], reading, infusion);
    min_bg = std::min(min_bg, s[kG]);
    if (k == steps) break;
    rk4_step(p, s, infusion, h);
    check_state(s, t + h);
  }
  return min_bg;
}

}  // namespace

Rollout rollout(const ScenarioSample& sample, const ControllerConfig& controller,
                const SimConfig& sim) {
  Rollout r;
  const auto expected = static_cast<std::size_t>(
      std::floor(sample.fast_hours * 60.0 / sim.step_min + 1e-9)) + 1;
  r.t.reserve(expected);
  r.bg.reserve(expected);
  r.cgm.reserve(expected);
  r.insulin.reserve(expected);
  r.min_bg = integrate(sample, controller, sim, [&](double t, double bg, double cgm, double u) {
    r.t.push_back(t);
    r.bg.push_back(bg);
    r.cgm.push_back(cgm);
    r.insulin.push_back(u);
  });
  r.hypo = r.min_bg <= sim.gamma;
  return r;
}

double simulate_min_bg(const ScenarioSample& sample, const ControllerConfig& controller,
                       const SimConfig& sim) {
  return integrate(sample, controller, sim, [](double, double, double, double) {});
}

}  // namespace hypoguard
