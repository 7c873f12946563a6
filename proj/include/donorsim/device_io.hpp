#pragma once

#include "donorsim/spin_system.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace donorsim {

using json = nlohmann::json;

namespace detail {

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

template <typename T>
T optional(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

}  // namespace detail

inline SpinSystemSpec device_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("device config must be an object");
  SpinSystemSpec spec;
  spec.b_field = detail::require<double>(j, "b_field_T", "device");
  spec.electron_gamma = detail::require<double>(j, "electron_gamma_Hz_per_T", "device");
  spec.electron_t2_star = detail::optional<double>(j, "electron_T2_star_s", spec.electron_t2_star, "device");
  spec.electron_t1 = detail::optional<double>(j, "electron_T1_s", spec.electron_t1, "device");
  spec.esr_rabi = detail::optional<double>(j, "esr_rabi_Hz", spec.esr_rabi, "device");
  if (!j.contains("nuclei") || !j.at("nuclei").is_array()) throw ConfigError("device: 'nuclei' must be an array");
  bool any_mask = false;
  std::vector<bool> mask;
  int idx = 0;
  for (const auto& jn : j.at("nuclei")) {
    const std::string where = "nuclei[" + std::to_string(idx++) + "]";
    NucleusSpec n;
    n.label = detail::optional<std::string>(jn, "label", "N" + std::to_string(idx), where);
    n.gamma = detail::require<double>(jn, "gamma_Hz_per_T", where);
    n.hyperfine = detail::require<double>(jn, "A_Hz", where);
    n.t2_star = detail::require<double>(jn, "T2_star_s", where);
    n.t1 = detail::require<double>(jn, "T1_s", where);
    n.nmr_rabi = detail::optional<double>(jn, "nmr_rabi_Hz", 0.0, where);
    const auto frozen = detail::optional<std::string>(jn, "frozen_state", "up", where);
    if (frozen != "up" && frozen != "down") throw ConfigError(where + ": frozen_state must be up or down");
    n.frozen_bit = frozen == "up" ? 1 : 0;
    if (jn.contains("active")) any_mask = true;
    mask.push_back(detail::optional<bool>(jn, "active", true, where));
    spec.nuclei.push_back(n);
  }
  if (any_mask) spec.active_mask = mask;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("device: ") + e.what());
  }
  return spec;
}

inline json device_to_json(const SpinSystemSpec& spec) {
  json j;
  j["b_field_T"] = spec.b_field;
  j["electron_gamma_Hz_per_T"] = spec.electron_gamma;
  if (std::isfinite(spec.electron_t2_star)) j["electron_T2_star_s"] = spec.electron_t2_star;
  if (std::isfinite(spec.electron_t1)) j["electron_T1_s"] = spec.electron_t1;
  j["esr_rabi_Hz"] = spec.esr_rabi;
  j["nuclei"] = json::array();
  for (int i = 0; i < static_cast<int>(spec.nuclei.size()); ++i) {
    const auto& n = spec.nuclei[i];
    json jn;
    jn["label"] = n.label;
    jn["gamma_Hz_per_T"] = n.gamma;
    jn["A_Hz"] = n.hyperfine;
    jn["T2_star_s"] = n.t2_star;
    jn["T1_s"] = n.t1;
    if (n.nmr_rabi > 0) jn["nmr_rabi_Hz"] = n.nmr_rabi;
    jn["frozen_state"] = n.frozen_bit ? "up" : "down";
    jn["active"] = spec.is_active(i);
    j["nuclei"].push_back(jn);
  }
  return j;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
}

inline SpinSystemSpec load_device(const std::string& path) { return device_from_json(read_json_file(path)); }

// The bundled device, kept in code so tests do not depend on the working directory.
inline SpinSystemSpec default_device() {
  SpinSystemSpec spec;
  spec.b_field = 1.35;
  spec.electron_gamma = 27.92991e9;
  spec.electron_t2_star = 23.4e-6;
  spec.esr_rabi = 250e3;
  auto p = [](std::string label, double a, double t2, double t1, double rabi) {
    NucleusSpec n;
    n.label = std::move(label);
    n.gamma = 17.23e6;
    n.hyperfine = a;
    n.t2_star = t2;
    n.t1 = t1;
    n.nmr_rabi = rabi;
    return n;
  };
  spec.nuclei = {p("N1", 28.6e6, 441e-6, 174.0, 9712.5), p("N2", 73.7e6, 349e-6, 100.0, 15432.1),
                 p("N3", 137.0e6, 788e-6, 300.0, 15432.1), p("N4", 226e3, 24.8e-3, 100.0, 6177.4),
                 p("N5", 168e3, 24.8e-3, 100.0, 0.0), p("N6", 211e3, 24.8e-3, 100.0, 0.0)};
  spec.nuclei[5].gamma = 42.57e6;
  spec.active_mask = {true, true, true, true, false, false};
  return spec;
}

}  // namespace donorsim
