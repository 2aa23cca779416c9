#include "pourbench/trial.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pourbench/errors.hpp"
#include "pourbench/json_io.hpp"

namespace pourbench {

using nlohmann::json;

FeatureVector Trial::features(std::size_t step) const {
  return {vol_total, vol_2pour, d, h, theta.at(step), vol.at(step)};
}

void Trial::validate() const {
  if (theta.size() != vol.size() || theta.size() != omega.size()) {
    throw ValidationError("invariant violated: theta, vol, omega must have equal length");
  }
  if (theta.size() < 2) {
    throw ValidationError("invariant violated: sequences need length >= 2");
  }
  if (!(vol_2pour > 0.0 && vol_2pour <= vol_total)) {
    throw ValidationError("invariant violated: 0 < vol_2pour <= vol_total");
  }
  if (!(dt > 0.0)) throw ValidationError("invariant violated: dt > 0");
  if (!(d > 0.0 && h > 0.0)) {
    throw ValidationError("invariant violated: d > 0 and h > 0");
  }
  for (double th : theta) {
    if (!(th >= 0.0 && th <= std::numbers::pi / 2.0)) {
      throw ValidationError("invariant violated: theta entries in [0, pi/2]");
    }
  }
  for (double v : vol) {
    if (!std::isfinite(v)) throw ValidationError("invariant violated: vol entries finite");
  }
  for (double w : omega) {
    if (!std::isfinite(w)) throw ValidationError("invariant violated: omega entries finite");
  }
}

std::vector<double> derive_omega(std::span<const double> theta, double dt) {
  if (theta.size() < 2) {
    throw UsageError("derive_omega needs at least two angle samples");
  }
  if (!(dt > 0.0)) throw UsageError("derive_omega needs dt > 0");
  std::vector<double> omega(theta.size());
  for (std::size_t k = 0; k + 1 < theta.size(); ++k) {
    omega[k] = (theta[k + 1] - theta[k]) / dt;
  }
  omega.back() = omega[omega.size() - 2];
  return omega;
}

json trial_to_json(const Trial& t) {
  json j;
  j["vol_total"] = t.vol_total;
  j["vol_2pour"] = t.vol_2pour;
  j["d"] = t.d;
  j["h"] = t.h;
  j["dt"] = t.dt;
  j["theta"] = t.theta;
  j["vol"] = t.vol;
  j["omega"] = t.omega;
  if (!t.container.empty()) j["container"] = t.container;
  j["liquid"] = t.liquid;
  j["viscosity"] = t.viscosity;
  return j;
}

namespace {

std::string at_line(std::size_t line) {
  return line > 0 ? "line " + std::to_string(line) + ": " : std::string{};
}

double number_field(const json& j, const char* key, std::size_t line) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ParseError(at_line(line) + "missing field '" + key + "'", line);
  }
  if (!it->is_number()) {
    throw ParseError(at_line(line) + "field '" + key + "' must be a number", line);
  }
  return it->get<double>();
}

std::vector<double> array_field(const json& j, const char* key, std::size_t line) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ParseError(at_line(line) + "missing field '" + key + "'", line);
  }
  if (!it->is_array()) {
    throw ParseError(at_line(line) + "field '" + key + "' must be an array", line);
  }
  std::vector<double> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number()) {
      throw ParseError(at_line(line) + "field '" + key + "' must hold numbers", line);
    }
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

Trial trial_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) {
    throw ParseError(at_line(line) + "trial record must be a JSON object", line);
  }
  Trial t;
  t.vol_total = number_field(j, "vol_total", line);
  t.vol_2pour = number_field(j, "vol_2pour", line);
  t.d = number_field(j, "d", line);
  t.h = number_field(j, "h", line);
  t.dt = number_field(j, "dt", line);
  t.theta = array_field(j, "theta", line);
  t.vol = array_field(j, "vol", line);
  if (j.contains("omega") && !j["omega"].is_null()) {
    t.omega = array_field(j, "omega", line);
  } else if (t.theta.size() >= 2 && t.dt > 0.0) {
    t.omega = derive_omega(t.theta, t.dt);
  }
  if (auto it = j.find("container"); it != j.end() && it->is_string()) {
    t.container = it->get<std::string>();
  }
  if (auto it = j.find("liquid"); it != j.end() && it->is_string()) {
    t.liquid = it->get<std::string>();
  }
  if (auto it = j.find("viscosity"); it != j.end() && it->is_number()) {
    t.viscosity = it->get<double>();
  }
  try {
    t.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(at_line(line) + e.what(), line);
  }
  return t;
}

void save_trials(const std::filesystem::path& path, std::span<const Trial> trials) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write trials to " + path.string());
  for (const Trial& t : trials) out << trial_to_json(t).dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Trial> load_trials(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trial file " + path.string());
  std::vector<Trial> trials;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ": line " + std::to_string(line) +
                           ": malformed JSON (" + e.what() + ")",
                       line);
    }
    trials.push_back(trial_from_json(j, line));
  }
  return trials;
}

json to_json(const SimConfig& cfg) {
  return {{"dt", cfg.dt},
          {"tau0", cfg.tau0},
          {"alpha", cfg.alpha},
          {"omega_limit", cfg.omega_limit}};
}

json to_json(const SensorModel& sm) {
  return {{"latency", sm.latency_s},
          {"impact_gain", sm.impact_gain},
          {"noise_std", sm.noise_std},
          {"seed", sm.seed}};
}

json to_json(const LiquidSpec& liquid) {
  return {{"name", liquid.name}, {"viscosity", liquid.viscosity_cps}};
}

void merge_json(const json& j, SimConfig& cfg) {
  cfg.dt = j.value("dt", cfg.dt);
  cfg.tau0 = j.value("tau0", cfg.tau0);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.omega_limit = j.value("omega_limit", cfg.omega_limit);
}

void merge_json(const json& j, SensorModel& sm) {
  sm.latency_s = j.value("latency", sm.latency_s);
  sm.impact_gain = j.value("impact_gain", sm.impact_gain);
  sm.noise_std = j.value("noise_std", sm.noise_std);
  sm.seed = j.value("seed", sm.seed);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": malformed JSON at byte " +
                     std::to_string(e.byte) + " (" + e.what() + ")");
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace pourbench
