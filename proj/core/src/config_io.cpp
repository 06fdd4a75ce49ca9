#include "hypoguard/config_io.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "hypoguard/errors.hpp"

namespace hypoguard {

using nlohmann::json;

namespace {

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string(what) + ": " + e.what());
  }
}

PidConfig pid_from_json(const json& j, PidConfig base) {
  base.kp = j.value("kp", base.kp);
  base.ki = j.value("ki", base.ki);
  base.kd = j.value("kd", base.kd);
  base.target = j.value("target", base.target);
  base.basal_rate = j.value("basal_rate", base.basal_rate);
  base.max_rate = j.value("max_rate", base.max_rate);
  base.carb_ratio = j.value("carb_ratio", base.carb_ratio);
  return base;
}

std::optional<double> optional_number(const json& j, const char* key,
                                      std::optional<double> fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<double>();
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

ControllerConfig SimulationSetup::controller_for(const PatientProfile& profile) const {
  PidConfig c = pid;
  std::optional<double> basal = basal_rate;
  if (auto it = pid_by_group.find(profile.age_group); it != pid_by_group.end()) c = it->second;
  if (auto it = basal_by_group.find(profile.age_group); it != basal_by_group.end())
    basal = it->second;
  c.basal_rate = basal ? *basal : profile.nominal_params().equilibrium_basal();
  c.validate();
  return c;
}

SimulationSetup parse_simulation_setup(std::string_view json_text) {
  const json j = parse_json(json_text, "sim config");
  try {
    SimulationSetup s;
    s.sim.step_min = j.value("step_min", s.sim.step_min);
    s.sim.cgm_period_min = j.value("cgm_period_min", s.sim.cgm_period_min);
    s.sim.gamma = j.value("gamma", s.sim.gamma);
    if (j.contains("arma")) {
      const auto& a = j.at("arma");
      s.sim.arma.phi = a.value("phi", s.sim.arma.phi);
      s.sim.arma.psi = a.value("psi", s.sim.arma.psi);
      s.sim.arma.sigma = a.value("sigma", s.sim.arma.sigma);
    }
    const json pid = j.value("pid", json::object());
    s.pid = pid_from_json(pid, PidConfig{});
    s.basal_rate = optional_number(pid, "basal_rate", std::nullopt);
    if (j.contains("pid_by_age_group")) {
      for (const auto& [name, override_json] : j.at("pid_by_age_group").items()) {
        const AgeGroup g = parse_age_group(name);
        s.pid_by_group[g] = pid_from_json(override_json, s.pid);
        s.basal_by_group[g] = optional_number(override_json, "basal_rate", s.basal_rate);
      }
    }
    s.sim.validate();
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("sim config: ") + e.what());
  } catch (const DomainError& e) {
    throw DataError(std::string("sim config: ") + e.what());
  }
}

SimulationSetup load_simulation_setup(const std::filesystem::path& path) {
  return parse_simulation_setup(read_file(path));
}

CeSettings parse_ce_settings(std::string_view json_text) {
  const json j = parse_json(json_text, "ce config");
  try {
    CeSettings s;
    s.ce.rho = j.value("rho", s.ce.rho);
    s.ce.gamma = j.value("gamma", s.ce.gamma);
    s.ce.iterations = j.value("iterations", s.ce.iterations);
    s.ce.normalize_weights = j.value("normalize_weights", s.ce.normalize_weights);
    if (j.contains("alpha")) {
      const auto& a = j.at("alpha");
      s.ce.alphas = a.is_array() ? a.get<std::vector<double>>() : std::vector<double>{a.get<double>()};
    }
    if (j.contains("batch_size")) {
      const auto& b = j.at("batch_size");
      s.ce.batch_sizes = b.is_array() ? b.get<std::vector<std::size_t>>()
                                      : std::vector<std::size_t>{b.get<std::size_t>()};
    }
    s.radius = optional_number(j, "radius", std::nullopt);
    s.seed = j.value("seed", std::uint64_t{0});
    s.ce.validate();
    if (s.radius && !(*s.radius >= 0.0)) throw DataError("ce config: radius must be >= 0");
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("ce config: ") + e.what());
  } catch (const DomainError& e) {
    throw DataError(std::string("ce config: ") + e.what());
  }
}

CeSettings load_ce_settings(const std::filesystem::path& path) {
  return parse_ce_settings(read_file(path));
}

std::string logit_normal_to_json(const LogitNormal& dist) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json sigma = json::array();
  for (Eigen::Index i = 0; i < dist.sigma.rows(); ++i) {
    const Eigen::VectorXd row = dist.sigma.row(i).transpose();
    sigma.push_back(vec(row));
  }
  json j{{"a", vec(dist.lower)}, {"b", vec(dist.upper)}, {"mu", vec(dist.mu)}, {"sigma", sigma}};
  return j.dump(2) + "\n";
}

LogitNormal logit_normal_from_json(std::string_view json_text) {
  const json j = parse_json(json_text, "logit-normal model");
  try {
    LogitNormal d;
    d.lower = vector_from_json(j.at("a"));
    d.upper = vector_from_json(j.at("b"));
    d.mu = vector_from_json(j.at("mu"));
    const auto rows = j.at("sigma").get<std::vector<std::vector<double>>>();
    d.sigma.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw DataError("logit-normal model: sigma not square");
      for (std::size_t k = 0; k < rows.size(); ++k)
        d.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    d.validate();
    return d;
  } catch (const json::exception& e) {
    throw DataError(std::string("logit-normal model: ") + e.what());
  } catch (const DomainError& e) {
    throw DataError(std::string("logit-normal model: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace hypoguard
