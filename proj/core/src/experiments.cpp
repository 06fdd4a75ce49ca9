#include "hypoguard/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "hypoguard/errors.hpp"
#include "hypoguard/random.hpp"

namespace hypoguard {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTrainSeed = 0x7472;
constexpr std::uint64_t kMcSeed = 0x6d63;
constexpr std::uint64_t kIsSeed = 0x6973;
constexpr std::uint64_t kBootSeed = 0x6273;

std::optional<double> safe_ratio(double num, double den) {
  if (!(den > 0.0)) return std::nullopt;
  return num / den;
}

CeSummary summarize(const CeResult& r, const GaussianMeanFamily& family) {
  CeSummary s;
  s.theta_hat = r.theta_hat;
  s.theta_offset_norm = (r.theta_hat - family.center()).norm();
  s.selected_iteration = r.selected_iteration;
  s.stalls = r.stalls;
  for (const auto& it : r.history) {
    s.quantiles.push_back(it.quantile);
    s.levels.push_back(it.level);
    s.elites.push_back(it.elites);
  }
  return s;
}

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// Shared by the patient and synthetic comparisons.
ComparisonReport compare(const std::string& id, const GaussianMeanFamily& family,
                         const RiskFn& risk, CeConfig ce, double gamma, std::size_t n,
                         std::size_t resamples, std::uint64_t seed, unsigned threads) {
  if (n == 0) throw DomainError("comparison: n must be >= 1");
  Clock clock;
  ce.gamma = gamma;
  const CeResult trained =
      cross_entropy_train(family, risk, ce, {derive_seed(seed, kTrainSeed, 0), threads});
  const Evaluation mc = mc_estimate(family, risk, gamma, n, {derive_seed(seed, kMcSeed, 0), threads});
  const Evaluation is =
      is_estimate(trained.theta_hat, family, risk, gamma, n, {derive_seed(seed, kIsSeed, 0), threads});

  ComparisonReport r;
  r.patient = id;
  r.gamma = gamma;
  r.n = n;
  r.radius = family.radius();
  r.mc = mc.estimate;
  r.ce = is.estimate;
  r.event_ratio =
      static_cast<double>(r.ce.events) / static_cast<double>(std::max<std::size_t>(r.mc.events, 1));
  r.std_ratio = safe_ratio(r.mc.std_err, r.ce.std_err);
  r.mc_bootstrap_std = bootstrap_std_of_mean(mc.summands, resamples, derive_seed(seed, kBootSeed, 1));
  r.ce_bootstrap_std = bootstrap_std_of_mean(is.summands, resamples, derive_seed(seed, kBootSeed, 2));
  r.bootstrap_std_ratio = safe_ratio(r.mc_bootstrap_std, r.ce_bootstrap_std);
  r.ce_history = summarize(trained, family);
  for (int k = 0; k < ce.iterations; ++k) r.rollouts += ce.batch_size(k);
  r.rollouts += 2 * n;
  r.wall_time_s = clock.seconds();
  r.rollouts_per_second =
      r.wall_time_s > 0.0 ? static_cast<double>(r.rollouts) / r.wall_time_s : 0.0;
  return r;
}

json estimate_json(const Estimate& e) {
  return json{{"method", std::string(to_string(e.method))},
              {"p_hat", e.p_hat},
              {"std_err", e.std_err},
              {"events", e.events},
              {"n", e.n},
              {"ess", e.ess},
              {"clamped_ratios", e.clamped_ratios}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

double default_radius(AgeGroup group) noexcept {
  switch (group) {
    case AgeGroup::child:
    case AgeGroup::adolescent:
      return 0.1;
    case AgeGroup::adult:
      return 0.5;
  }
  return 0.5;
}

double standard_normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

RiskFn patient_risk(const ScenarioModel& model, const ControllerConfig& controller,
                    const SimConfig& sim) {
  return [model, controller, sim](const Eigen::VectorXd& z, std::uint64_t noise_seed) {
    return simulate_min_bg(model.decode(z, noise_seed), controller, sim);
  };
}

ExperimentConfig ExperimentConfig::desk_scale() {
  ExperimentConfig c;
  c.ce.rho = 0.01;
  c.ce.alphas = {0.8};
  c.ce.batch_sizes = {500};
  c.ce.iterations = 10;
  c.n = 10000;
  return c;
}

ComparisonReport run_comparison(const PatientProfile& profile, const LogitNormal& behavior,
                                const ExperimentConfig& config, double gamma) {
  const ScenarioModel model = make_scenario_model(profile, behavior);
  const double radius = config.radius.value_or(default_radius(profile.age_group));
  const GaussianMeanFamily family = model.family(radius);
  SimConfig sim = config.setup.sim;
  sim.gamma = gamma;
  const RiskFn risk = patient_risk(model, config.setup.controller_for(profile), sim);
  return compare(profile.id, family, risk, config.ce, gamma, config.n,
                 config.bootstrap_resamples, config.seed, config.threads);
}

ComparisonReport run_synthetic_validation(const SyntheticConfig& config) {
  const GaussianMeanFamily family(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1),
                                  config.radius);
  const RiskFn risk = [](const Eigen::VectorXd& z, std::uint64_t) { return z[0]; };
  ComparisonReport r = compare("synthetic", family, risk, config.ce, config.gamma, config.n,
                               config.bootstrap_resamples, config.seed, config.threads);
  r.truth = standard_normal_cdf(config.gamma);
  return r;
}

std::string report_to_json(const ComparisonReport& r, bool include_timing) {
  const auto& h = r.ce_history;
  json history{
      {"theta_hat", std::vector<double>(h.theta_hat.data(), h.theta_hat.data() + h.theta_hat.size())},
      {"theta_offset_norm", h.theta_offset_norm},
      {"selected_iteration", h.selected_iteration},
      {"stalls", h.stalls},
      {"quantiles", h.quantiles},
      {"levels", h.levels},
      {"elites", h.elites}};
  json j{{"patient", r.patient},
         {"gamma", r.gamma},
         {"n", r.n},
         {"radius", r.radius},
         {"mc", estimate_json(r.mc)},
         {"ce", estimate_json(r.ce)},
         {"event_ratio", r.event_ratio},
         {"std_ratio", optional_json(r.std_ratio)},
         {"mc_bootstrap_std", r.mc_bootstrap_std},
         {"ce_bootstrap_std", r.ce_bootstrap_std},
         {"bootstrap_std_ratio", optional_json(r.bootstrap_std_ratio)},
         {"truth", optional_json(r.truth)},
         {"ce_history", history},
         {"rollouts", r.rollouts}};
  if (include_timing) {
    j["wall_time_s"] = r.wall_time_s;
    j["rollouts_per_second"] = r.rollouts_per_second;
  }
  return j.dump(2) + "\n";
}

std::string estimate_to_json(const Estimate& estimate, double gamma, const std::string& patient,
                             std::uint64_t seed) {
  json j = estimate_json(estimate);
  j["gamma"] = gamma;
  j["patient"] = patient;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

Estimate estimate_from_json(const std::string& text, double* gamma, std::string* patient) {
  try {
    const json j = json::parse(text);
    Estimate e;
    const auto method = j.at("method").get<std::string>();
    if (method == "MC") e.method = Method::mc;
    else if (method == "CE-IS") e.method = Method::ce_is;
    else throw DataError("estimate json: unknown method '" + method + "'");
    e.p_hat = j.at("p_hat").get<double>();
    e.std_err = j.at("std_err").get<double>();
    e.events = j.at("events").get<std::size_t>();
    e.n = j.at("n").get<std::size_t>();
    e.ess = j.value("ess", 0.0);
    e.clamped_ratios = j.value("clamped_ratios", std::size_t{0});
    if (gamma) *gamma = j.at("gamma").get<double>();
    if (patient) *patient = j.value("patient", std::string{});
    return e;
  } catch (const json::exception& e) {
    throw DataError(std::string("estimate json: ") + e.what());
  }
}

void write_report_files(const std::filesystem::path& dir,
                        const std::vector<ComparisonReport>& reports, bool include_timing) {
  std::filesystem::create_directories(dir);
  std::map<std::string, std::vector<const ComparisonReport*>> by_patient;
  for (const auto& r : reports) by_patient[r.patient].push_back(&r);
  for (const auto& [patient, list] : by_patient) {
    json body = json::array();
    for (const auto* r : list) body.push_back(json::parse(report_to_json(*r, include_timing)));
    write_file_atomic(dir / ("report_" + patient + ".json"), body.dump(2) + "\n");
  }

  std::ostringstream events, stds;
  events << "patient,gamma,method,events,n\n";
  stds << "patient,gamma,method,std_err\n";
  for (const auto& r : reports) {
    const std::string g = format_number(r.gamma);
    events << r.patient << ',' << g << ",MC," << r.mc.events << ',' << r.mc.n << '\n';
    events << r.patient << ',' << g << ",CE-IS," << r.ce.events << ',' << r.ce.n << '\n';
    stds << r.patient << ',' << g << ",MC," << format_number(r.mc_bootstrap_std) << '\n';
    stds << r.patient << ',' << g << ",CE-IS," << format_number(r.ce_bootstrap_std) << '\n';
  }
  write_file_atomic(dir / "events.csv", events.str());
  write_file_atomic(dir / "std.csv", stds.str());
}

}  // namespace hypoguard
