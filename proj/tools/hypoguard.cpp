// hypoguard: command-line front end for the population models, the overnight
// simulator and the rare-event estimators.
//
// Exit codes: 0 success, 1 --check threshold violated, 2 usage or data error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hypoguard/config_io.hpp"
#include "hypoguard/errors.hpp"
#include "hypoguard/experiments.hpp"
#include "hypoguard/parallel.hpp"
#include "hypoguard/population.hpp"
#include "hypoguard/random.hpp"
#include "hypoguard/rare_event.hpp"
#include "hypoguard/simulator.hpp"

#ifndef HYPOGUARD_DATA_DIR
#define HYPOGUARD_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace hypoguard;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("HYPOGUARD_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw DataError(std::string("HYPOGUARD_SEED is not an unsigned integer: ") + env);
    }
  }
  return 0;
}

struct Common {
  fs::path data_dir = HYPOGUARD_DATA_DIR;
  std::string behavior;
  std::string sim_config;
  std::string ce_config;
  std::uint64_t seed = 0;
  unsigned threads = default_thread_count();

  fs::path behavior_path() const {
    return behavior.empty() ? data_dir / "behavior.csv" : fs::path(behavior);
  }
  fs::path sim_path() const {
    return sim_config.empty() ? data_dir / "config" / "sim.json" : fs::path(sim_config);
  }
  fs::path ce_path() const {
    return ce_config.empty() ? data_dir / "config" / "ce.json" : fs::path(ce_config);
  }
};

PatientProfile resolve_patient(const Common& c, const std::string& id_or_path) {
  const fs::path as_path(id_or_path);
  if (as_path.has_extension() && fs::exists(as_path)) return load_patient_json(as_path);
  const fs::path bundled = c.data_dir / "patients" / (id_or_path + ".json");
  if (!fs::exists(bundled))
    throw DataError("unknown patient '" + id_or_path + "' (no file " + bundled.string() + ")");
  return load_patient_json(bundled);
}

void emit(const std::string& out, const std::string& contents) {
  if (out.empty() || out == "-") {
    std::cout << contents;
    return;
  }
  const fs::path p(out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_file_atomic(p, contents);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw DataError("cannot parse number '" + item + "' in list '" + text + "'");
    }
  }
  return out;
}

// Scenario model, risk and sampler family shared by estimate / train-ce.
struct PatientProblem {
  PatientProfile profile;
  ScenarioModel model;
  ControllerConfig controller;
  SimConfig sim;
  CeSettings ce;
  double radius;
};

PatientProblem load_problem(const Common& c, const std::string& patient, double gamma) {
  PatientProblem p{resolve_patient(c, patient), {}, {}, {}, load_ce_settings(c.ce_path()), 0.0};
  const auto records = load_behavior_csv(c.behavior_path());
  p.model = make_scenario_model(p.profile, fit_behavior_model(records));
  const SimulationSetup setup = load_simulation_setup(c.sim_path());
  p.controller = setup.controller_for(p.profile);
  p.sim = setup.sim;
  p.sim.gamma = gamma;
  p.ce.ce.gamma = gamma;
  p.radius = p.ce.radius.value_or(default_radius(p.profile.age_group));
  return p;
}

nlohmann::json history_json(const CeResult& r) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& it : r.history) {
    hist.push_back({{"theta", std::vector<double>(it.theta.data(), it.theta.data() + it.theta.size())},
                    {"level", it.level},
                    {"quantile", it.quantile},
                    {"elites", it.elites},
                    {"weight_mass", it.weight_mass},
                    {"clamped_ratios", it.clamped_ratios},
                    {"stalled", it.stalled}});
  }
  return hist;
}

int cmd_fit_behavior(const Common& c, const std::string& data, double pad, const std::string& out) {
  const fs::path path = data.empty() ? c.behavior_path() : fs::path(data);
  const auto records = load_behavior_csv(path);
  const LogitNormal model = fit_behavior_model(records, pad);
  for (const auto& r : records) {
    Eigen::VectorXd y(2);
    y << r.carbs_g, r.fast_hours;
    if ((y.array() <= model.lower.array()).any() || (y.array() >= model.upper.array()).any())
      throw DataError("fitted support does not contain every record");
  }
  emit(out, logit_normal_to_json(model));
  std::cerr << "fitted " << records.size() << " records from " << path.string() << "\n";
  return 0;
}

int cmd_estimate(const Common& c, const std::string& method, const std::string& patient,
                 double gamma, std::size_t n, const std::string& out) {
  if (n == 0) throw DataError("--n must be >= 1");
  const PatientProblem p = load_problem(c, patient, gamma);
  const GaussianMeanFamily family = p.model.family(p.radius);
  const RiskFn risk = patient_risk(p.model, p.controller, p.sim);
  Evaluation ev;
  if (method == "mc") {
    ev = mc_estimate(family, risk, gamma, n, {derive_seed(c.seed, 0x6d63, 0), c.threads});
  } else {
    const CeResult trained =
        cross_entropy_train(family, risk, p.ce.ce, {derive_seed(c.seed, 0x7472, 0), c.threads});
    ev = is_estimate(trained.theta_hat, family, risk, gamma, n,
                     {derive_seed(c.seed, 0x6973, 0), c.threads});
  }
  const Estimate& e = ev.estimate;
  std::cout << to_string(e.method) << " p_hat=" << e.p_hat << " std_err=" << e.std_err
            << " events=" << e.events << "/" << e.n << " ess=" << e.ess
            << " clamped=" << e.clamped_ratios << "\n";
  if (!out.empty()) emit(out, estimate_to_json(e, gamma, p.profile.id, c.seed));
  return 0;
}

int cmd_train_ce(const Common& c, const std::string& patient, double gamma,
                 const std::string& out) {
  const PatientProblem p = load_problem(c, patient, gamma);
  const GaussianMeanFamily family = p.model.family(p.radius);
  const RiskFn risk = patient_risk(p.model, p.controller, p.sim);
  const CeResult r =
      cross_entropy_train(family, risk, p.ce.ce, {derive_seed(c.seed, 0x7472, 0), c.threads});
  nlohmann::json j{
      {"patient", p.profile.id},
      {"gamma", gamma},
      {"radius", p.radius},
      {"seed", c.seed},
      {"center", std::vector<double>(family.center().data(), family.center().data() + family.dim())},
      {"theta_hat", std::vector<double>(r.theta_hat.data(), r.theta_hat.data() + r.theta_hat.size())},
      {"selected_iteration", r.selected_iteration},
      {"stalls", r.stalls},
      {"history", history_json(r)}};
  std::cout << "theta_hat from iteration " << r.selected_iteration << ", offset norm "
            << (r.theta_hat - family.center()).norm() << ", stalls " << r.stalls << "\n";
  emit(out, j.dump(2) + "\n");
  return 0;
}

int cmd_rollout(const Common& c, const std::string& patient, double carbs, double fast,
                bool no_noise, const std::string& out) {
  const PatientProfile profile = resolve_patient(c, patient);
  const SimulationSetup setup = load_simulation_setup(c.sim_path());
  SimConfig sim = setup.sim;
  if (no_noise) sim.arma.sigma = 0.0;
  ScenarioSample s{profile.nominal_params(), carbs, fast, derive_seed(c.seed, 0x726f, 0)};
  const Rollout r = rollout(s, setup.controller_for(profile), sim);
  std::ostringstream csv;
  csv << "t_min,bg,cgm,insulin\n";
  char line[160];
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    std::snprintf(line, sizeof line, "%.10g,%.10g,%.10g,%.10g\n", r.t[i], r.bg[i], r.cgm[i],
                  r.insulin[i]);
    csv << line;
  }
  emit(out, csv.str());
  std::cerr << "min_bg=" << r.min_bg << " hypo=" << (r.hypo ? "true" : "false") << "\n";
  return 0;
}

struct CompareArgs {
  std::vector<std::string> patients{"adult"};
  double gamma = kHypoThreshold;
  std::string sweep = "50,60,70";
  std::size_t n = 10000;
  std::string out_dir = "results";
  bool check = false;
  double min_event_ratio = 2.0;
  double min_std_ratio = 1.5;
  bool timing = false;
  std::string mc_estimate;
  std::string ce_estimate;
};

int compare_from_estimates(const CompareArgs& a) {
  double gamma_mc = 0.0, gamma_ce = 0.0;
  std::string patient_mc, patient_ce;
  ComparisonReport r;
  r.mc = estimate_from_json(read_file(a.mc_estimate), &gamma_mc, &patient_mc);
  r.ce = estimate_from_json(read_file(a.ce_estimate), &gamma_ce, &patient_ce);
  if (gamma_mc != gamma_ce || patient_mc != patient_ce)
    throw DataError("estimate files disagree on patient or gamma");
  r.patient = patient_mc;
  r.gamma = gamma_mc;
  r.n = r.mc.n;
  r.event_ratio = static_cast<double>(r.ce.events) /
                  static_cast<double>(std::max<std::size_t>(r.mc.events, 1));
  if (r.ce.std_err > 0.0) r.std_ratio = r.mc.std_err / r.ce.std_err;
  write_report_files(a.out_dir, {r}, false);
  std::cout << r.patient << " gamma=" << r.gamma << " event_ratio=" << r.event_ratio
            << " std_ratio=" << (r.std_ratio ? *r.std_ratio : 0.0) << "\n";
  if (a.check && (r.event_ratio < a.min_event_ratio ||
                  !(r.std_ratio && *r.std_ratio >= a.min_std_ratio)))
    return kExitCheckFailed;
  return 0;
}

int cmd_compare(const Common& c, const CompareArgs& a) {
  if (!a.mc_estimate.empty() || !a.ce_estimate.empty()) {
    if (a.mc_estimate.empty() || a.ce_estimate.empty())
      throw DataError("--mc-estimate and --ce-estimate must be given together");
    return compare_from_estimates(a);
  }
  if (a.n == 0) throw DataError("--n must be >= 1");
  std::vector<double> gammas = parse_list(a.sweep);
  if (std::find(gammas.begin(), gammas.end(), a.gamma) == gammas.end()) gammas.push_back(a.gamma);

  const auto records = load_behavior_csv(c.behavior_path());
  const LogitNormal behavior = fit_behavior_model(records);
  const CeSettings ce = load_ce_settings(c.ce_path());
  ExperimentConfig cfg;
  cfg.setup = load_simulation_setup(c.sim_path());
  cfg.ce = ce.ce;
  cfg.radius = ce.radius;
  cfg.n = a.n;
  cfg.seed = c.seed;
  cfg.threads = c.threads;

  std::vector<PatientProfile> profiles;
  for (const auto& id : a.patients) profiles.push_back(resolve_patient(c, id));

  std::vector<ComparisonReport> reports;
  bool ok = true;
  for (const auto& profile : profiles) {
    for (double g : gammas) {
      ComparisonReport r = run_comparison(profile, behavior, cfg, g);
      std::cout << profile.id << " gamma=" << g << " mc_events=" << r.mc.events
                << " ce_events=" << r.ce.events << " event_ratio=" << r.event_ratio
                << " p_mc=" << r.mc.p_hat << " p_ce=" << r.ce.p_hat << " bootstrap_std_ratio="
                << (r.bootstrap_std_ratio ? *r.bootstrap_std_ratio : 0.0) << "\n";
      std::cerr << "  " << r.rollouts << " rollouts in " << r.wall_time_s << " s ("
                << r.rollouts_per_second << " rollouts/s)\n";
      if (a.check && g == a.gamma) {
        const bool pass = r.event_ratio >= a.min_event_ratio && r.bootstrap_std_ratio &&
                          *r.bootstrap_std_ratio >= a.min_std_ratio;
        if (!pass) {
          std::cerr << "CHECK FAILED for " << profile.id << " at gamma " << g << "\n";
          ok = false;
        }
      }
      reports.push_back(std::move(r));
    }
  }
  write_report_files(a.out_dir, reports, a.timing);
  return ok ? 0 : kExitCheckFailed;
}

struct SynthArgs {
  double gamma = -3.0;
  std::size_t n = 10000;
  double radius = 3.0;
  std::string out_dir = "results";
  bool check = false;
  bool timing = false;
};

int cmd_synth(const Common& c, const SynthArgs& a) {
  if (a.n == 0) throw DataError("--n must be >= 1");
  SyntheticConfig cfg;
  cfg.gamma = a.gamma;
  cfg.n = a.n;
  cfg.radius = a.radius;
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  const CeSettings ce = load_ce_settings(c.ce_path());
  cfg.ce.rho = ce.ce.rho;
  cfg.ce.alphas = ce.ce.alphas;
  cfg.ce.iterations = ce.ce.iterations;
  cfg.ce.normalize_weights = ce.ce.normalize_weights;
  const ComparisonReport r = run_synthetic_validation(cfg);
  const double truth = *r.truth;
  std::cout << "truth=" << truth << " mc=" << r.mc.p_hat << " (se " << r.mc.std_err << ")"
            << " ce=" << r.ce.p_hat << " (se " << r.ce.std_err << ")"
            << " event_ratio=" << r.event_ratio << "\n";
  write_report_files(a.out_dir, {r}, a.timing);
  if (a.check) {
    const bool mc_ok = std::abs(r.mc.p_hat - truth) <= 3.0 * r.mc.std_err;
    const bool ce_ok = std::abs(r.ce.p_hat - truth) <= 3.0 * r.ce.std_err;
    if (!mc_ok || !ce_ok) {
      std::cerr << "CHECK FAILED: estimate outside 3 standard errors of the truth\n";
      return kExitCheckFailed;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hypoguard: rare-event evaluation of overnight closed-loop insulin control"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();

  Common common;
  try {
    common.seed = default_seed();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  app.add_option("--data-dir", common.data_dir, "Directory holding behavior.csv, patients/ and config/");
  app.add_option("--behavior", common.behavior, "Behavior CSV (default <data-dir>/behavior.csv)");
  app.add_option("--sim-config", common.sim_config, "Simulation config JSON (default <data-dir>/config/sim.json)");
  app.add_option("--ce-config", common.ce_config, "Cross-entropy config JSON (default <data-dir>/config/ce.json)");
  app.add_option("--seed", common.seed, "Master seed (default: $HYPOGUARD_SEED or 0)");
  app.add_option("--threads", common.threads, "Worker threads")->check(CLI::PositiveNumber);

  std::function<int()> run;

  std::string fit_data, fit_out;
  double fit_pad = 0.01;
  auto* fit = app.add_subcommand("fit-behavior", "Fit the logit-normal meal/fast model");
  fit->add_option("--data", fit_data, "Behavior CSV (default: --behavior)");
  fit->add_option("--pad", fit_pad, "Fraction of the range added on each side of the support")
      ->check(CLI::NonNegativeNumber);
  fit->add_option("--out", fit_out, "Output JSON path ('-' or empty for stdout)");
  fit->callback([&] { run = [&] { return cmd_fit_behavior(common, fit_data, fit_pad, fit_out); }; });

  std::string est_method = "mc", est_patient = "adult", est_out;
  double est_gamma = kHypoThreshold;
  std::size_t est_n = 10000;
  auto* est = app.add_subcommand("estimate", "Estimate P(min BG <= gamma) for one patient");
  est->add_option("--method", est_method, "Estimator")->check(CLI::IsMember({"mc", "ce"}));
  est->add_option("--patient", est_patient, "Bundled patient id or patient JSON path");
  est->add_option("--gamma", est_gamma, "Hypoglycemia threshold, mg/dL");
  est->add_option("--n", est_n, "Evaluation samples");
  est->add_option("--out", est_out, "Estimate JSON path");
  est->callback([&] {
    run = [&] { return cmd_estimate(common, est_method, est_patient, est_gamma, est_n, est_out); };
  });

  std::string tr_patient = "adult", tr_out;
  double tr_gamma = kHypoThreshold;
  auto* tr = app.add_subcommand("train-ce", "Train the cross-entropy importance sampler");
  tr->add_option("--patient", tr_patient, "Bundled patient id or patient JSON path");
  tr->add_option("--gamma", tr_gamma, "Hypoglycemia threshold, mg/dL");
  tr->add_option("--out", tr_out, "Output JSON path ('-' or empty for stdout)");
  tr->callback([&] { run = [&] { return cmd_train_ce(common, tr_patient, tr_gamma, tr_out); }; });

  std::string ro_patient = "adult", ro_out;
  double ro_carbs = 60.0, ro_fast = 9.0;
  bool ro_no_noise = false;
  auto* ro = app.add_subcommand("rollout", "Simulate one nominal scenario and dump the trace");
  ro->add_option("--patient", ro_patient, "Bundled patient id or patient JSON path");
  ro->add_option("--carbs", ro_carbs, "Evening meal carbohydrates, g")->check(CLI::NonNegativeNumber);
  ro->add_option("--fast", ro_fast, "Overnight fast duration, h");
  ro->add_flag("--no-noise", ro_no_noise, "Disable CGM noise");
  ro->add_option("--out", ro_out, "Trace CSV path ('-' or empty for stdout)");
  ro->callback([&] {
    run = [&] { return cmd_rollout(common, ro_patient, ro_carbs, ro_fast, ro_no_noise, ro_out); };
  });

  CompareArgs cmp;
  auto* cm = app.add_subcommand("compare", "MC versus CE-IS comparison per patient");
  cm->add_option("--patient", cmp.patients, "Patient ids or JSON paths (repeatable)");
  cm->add_option("--gamma", cmp.gamma, "Threshold checked by --check, mg/dL");
  cm->add_option("--sweep", cmp.sweep, "Comma-separated thresholds to report");
  cm->add_option("--n", cmp.n, "Evaluation samples per estimator");
  cm->add_option("--out-dir", cmp.out_dir, "Directory for report_<patient>.json, events.csv, std.csv");
  cm->add_flag("--check", cmp.check, "Exit 1 if the thresholds below are violated at --gamma");
  cm->add_option("--min-event-ratio", cmp.min_event_ratio, "Required CE/MC event ratio");
  cm->add_option("--min-std-ratio", cmp.min_std_ratio, "Required MC/CE bootstrap std ratio");
  cm->add_flag("--timing", cmp.timing, "Include wall time in reports (breaks byte reproducibility)");
  cm->add_option("--mc-estimate", cmp.mc_estimate, "Build the report from an existing MC estimate JSON");
  cm->add_option("--ce-estimate", cmp.ce_estimate, "Build the report from an existing CE estimate JSON");
  cm->callback([&] { run = [&] { return cmd_compare(common, cmp); }; });

  SynthArgs syn;
  auto* sy = app.add_subcommand("synth", "Validate both estimators on f(x) = x, X ~ N(0, 1)");
  sy->add_option("--gamma", syn.gamma, "Threshold; the truth is Phi(gamma)");
  sy->add_option("--n", syn.n, "Evaluation samples per estimator");
  sy->add_option("--radius", syn.radius, "Search radius of the sampler mean")->check(CLI::NonNegativeNumber);
  sy->add_option("--out-dir", syn.out_dir, "Output directory");
  sy->add_flag("--check", syn.check, "Exit 1 unless both estimates lie within 3 standard errors");
  sy->add_flag("--timing", syn.timing, "Include wall time in reports");
  sy->callback([&] { run = [&] { return cmd_synth(common, syn); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    return run();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
