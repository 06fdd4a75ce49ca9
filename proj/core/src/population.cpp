#include "hypoguard/population.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hypoguard/errors.hpp"

namespace hypoguard {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool parse_double(const std::string& field, double& out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(t, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == t.size() && std::isfinite(out);
}

}  // namespace

std::vector<BehaviorRecord> parse_behavior_csv(std::istream& in, std::string_view source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(std::string(source) + ": empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF)
    line.erase(0, 3);
  if (trim(line) != "carbs_g,fast_hours")
    throw DataError(std::string(source) + ": expected header 'carbs_g,fast_hours'");

  std::vector<BehaviorRecord> records;
  std::ostringstream problems;
  std::size_t bad = 0;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    BehaviorRecord r;
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos ||
        !parse_double(line.substr(0, comma), r.carbs_g) ||
        !parse_double(line.substr(comma + 1), r.fast_hours)) {
      problems << "\n  line " << lineno << ": malformed row";
      ++bad;
      continue;
    }
    if (!(r.carbs_g > 0.0)) {
      problems << "\n  line " << lineno << ": carbs_g must be > 0";
      ++bad;
      continue;
    }
    if (!(r.fast_hours > 5.0)) {
      problems << "\n  line " << lineno << ": fast_hours must be > 5";
      ++bad;
      continue;
    }
    records.push_back(r);
  }
  if (bad > 0)
    throw DataError(std::string(source) + ": " + std::to_string(bad) + " invalid row(s)" +
                    problems.str());
  if (records.empty()) throw DataError(std::string(source) + ": no records");
  return records;
}

std::vector<BehaviorRecord> load_behavior_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open behavior file '" + path.string() + "'");
  return parse_behavior_csv(in, path.string());
}

LogitNormal fit_behavior_model(std::span<const BehaviorRecord> records, double pad) {
  Eigen::MatrixXd y(static_cast<Eigen::Index>(records.size()), 2);
  for (std::size_t i = 0; i < records.size(); ++i) {
    y(static_cast<Eigen::Index>(i), 0) = records[i].carbs_g;
    y(static_cast<Eigen::Index>(i), 1) = records[i].fast_hours;
  }
  return fit_logit_normal(y, pad);
}

std::string_view to_string(AgeGroup group) noexcept {
  switch (group) {
    case AgeGroup::child:
      return "child";
    case AgeGroup::adolescent:
      return "adolescent";
    case AgeGroup::adult:
      return "adult";
  }
  return "adult";
}

AgeGroup parse_age_group(std::string_view name) {
  if (name == "child") return AgeGroup::child;
  if (name == "adolescent") return AgeGroup::adolescent;
  if (name == "adult") return AgeGroup::adult;
  throw DataError("unknown age group '" + std::string(name) + "'");
}

void PatientProfile::validate() const {
  const auto d = static_cast<Eigen::Index>(kParamCount);
  if (nominal.size() != d || pop_lo.size() != d || pop_hi.size() != d ||
      nonneg.size() != kParamCount)
    throw DataError("patient '" + id + "': expected " + std::to_string(kParamCount) +
                    " parameters");
  for (Eigen::Index j = 0; j < d; ++j) {
    const std::string name(kParamNames[static_cast<std::size_t>(j)]);
    if (!(pop_hi[j] > pop_lo[j]))
      throw DegenerateDimensionError(static_cast<std::size_t>(j),
                                     "patient '" + id + "': " + name + " has hi <= lo");
    if (!(pop_lo[j] <= nominal[j] && nominal[j] <= pop_hi[j]))
      throw DataError("patient '" + id + "': " + name + " outside [lo, hi]");
    // A clamped lower edge at 0 would put the nominal value on the boundary.
    if (nonneg[static_cast<std::size_t>(j)] && !(nominal[j] > 0.0))
      throw DataError("patient '" + id + "': nonnegative parameter " + name +
                      " must be strictly positive");
  }
  try {
    nominal_params().validate();
  } catch (const DomainError& e) {
    throw DataError("patient '" + id + "': " + e.what());
  }
}

PatientProfile parse_patient_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("patient json: ") + e.what());
  }
  try {
    PatientProfile p;
    p.id = j.at("id").get<std::string>();
    p.age_group = parse_age_group(j.at("age_group").get<std::string>());
    const auto& params = j.at("params");
    if (params.size() != kParamCount)
      throw DataError("patient '" + p.id + "': expected exactly " + std::to_string(kParamCount) +
                      " params");
    const auto d = static_cast<Eigen::Index>(kParamCount);
    p.nominal.resize(d);
    p.pop_lo.resize(d);
    p.pop_hi.resize(d);
    p.nonneg.assign(kParamCount, false);
    for (std::size_t k = 0; k < kParamCount; ++k) {
      const std::string name(kParamNames[k]);
      if (!params.contains(name)) throw DataError("patient '" + p.id + "': missing " + name);
      const auto& e = params.at(name);
      const auto i = static_cast<Eigen::Index>(k);
      p.nominal[i] = e.at("value").get<double>();
      p.pop_lo[i] = e.at("lo").get<double>();
      p.pop_hi[i] = e.at("hi").get<double>();
      p.nonneg[k] = e.value("nonneg", false);
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("patient json: ") + e.what());
  }
}

PatientProfile load_patient_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open patient file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_patient_json(buffer.str());
}

LogitNormal build_patient_model(const PatientProfile& profile) {
  profile.validate();
  const auto d = static_cast<Eigen::Index>(kParamCount);
  LogitNormal m;
  m.lower.resize(d);
  m.upper.resize(d);
  m.mu.resize(d);
  const Eigen::VectorXd half_width = (profile.pop_hi - profile.pop_lo) / 20.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double y = profile.nominal[j];
    double lo = y - half_width[j];
    if (profile.nonneg[static_cast<std::size_t>(j)]) lo = std::max(lo, 0.0);
    m.lower[j] = lo;
    m.upper[j] = y + half_width[j];
    m.mu[j] = logit((y - m.lower[j]) / (m.upper[j] - m.lower[j]));
  }
  m.sigma = 0.25 * Eigen::MatrixXd::Identity(d, d);

  // Every interior point of the box must be simulable.
  const Eigen::VectorXd inset = 1e-9 * (m.upper - m.lower);
  try {
    PhysParams::from_vector(m.lower + inset).validate();
    PhysParams::from_vector(m.upper - inset).validate();
  } catch (const DomainError& e) {
    throw DataError("patient '" + profile.id + "': perturbation box not simulable: " + e.what());
  }
  return m;
}

Eigen::VectorXd ScenarioModel::joint_mean() const {
  Eigen::VectorXd mean(static_cast<Eigen::Index>(dim()));
  mean << physiology.mu, behavior.mu;
  return mean;
}

Eigen::MatrixXd ScenarioModel::joint_cov() const {
  const auto p = static_cast<Eigen::Index>(physiology.dim());
  const auto b = static_cast<Eigen::Index>(behavior.dim());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p + b, p + b);
  cov.topLeftCorner(p, p) = physiology.sigma;
  cov.bottomRightCorner(b, b) = behavior.sigma;
  return cov;
}

GaussianMeanFamily ScenarioModel::family(double radius) const {
  return GaussianMeanFamily(joint_cov(), joint_mean(), radius);
}

ScenarioSample ScenarioModel::decode(const Eigen::VectorXd& z, std::uint64_t noise_seed) const {
  const auto p = static_cast<Eigen::Index>(physiology.dim());
  const auto b = static_cast<Eigen::Index>(behavior.dim());
  if (z.size() != p + b) throw DomainError("ScenarioModel::decode: dimension mismatch");
  ScenarioSample s;
  s.params = PhysParams::from_vector(physiology.from_logit(z.head(p)));
  const Eigen::VectorXd y = behavior.from_logit(z.tail(b));
  s.carbs_g = y[0];
  s.fast_hours = y[1];
  s.seed = noise_seed;
  return s;
}

double ScenarioModel::log_density(const Eigen::VectorXd& physiology_y,
                                  const Eigen::VectorXd& behavior_y) const {
  return physiology.log_density(physiology_y) + behavior.log_density(behavior_y);
}

ScenarioModel make_scenario_model(const PatientProfile& profile, const LogitNormal& behavior) {
  behavior.validate();
  if (behavior.dim() != 2) throw DomainError("behavior model must be 2-dimensional");
  return ScenarioModel{build_patient_model(profile), behavior};
}

std::vector<ScenarioSample> sample_scenario(const ScenarioModel& model, Rng& rng, std::size_t n) {
  model.physiology.validate();
  model.behavior.validate();
  const Eigen::MatrixXd L = covariance_factor(model.joint_cov());
  const Eigen::VectorXd mean = model.joint_mean();
  std::normal_distribution<double> normal;
  std::vector<ScenarioSample> out;
  out.reserve(n);
  Eigen::VectorXd eps(mean.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < eps.size(); ++j) eps[j] = normal(rng);
    out.push_back(model.decode(mean + L * eps, rng()));
  }
  return out;
}

}  // namespace hypoguard
