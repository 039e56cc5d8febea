#pragma once

// JSON model files:
//   {"name": "...", "n_y": 2, "n_u": 2, "tau_d": 1, "ell": 2,
//    "sample_time": 1.0, "input_range": [0, 1], "output_range": [0, 0.5],
//    "terms": [{"coeff": 0.9, "factors": [{"sig": "y", "lag": 1, "pow": 1}]}]}
// name and sample_time are optional.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "narxcomp/error.hpp"
#include "narxcomp/model.hpp"

namespace narxcomp {

namespace detail {

using Json = nlohmann::json;

inline const Json& require_key(const Json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return obj.at(key);
}

template <typename T>
T read_as(const Json& obj, const std::string& key, const std::string& where) {
  const Json& v = require_key(obj, key, where);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": key '" + key + "' has the wrong type");
  }
}

inline Range read_range(const Json& obj, const std::string& key) {
  const Json& v = require_key(obj, key, "model");
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError("model: key '" + key + "' must be a two-element numeric array");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

inline Signal parse_signal(const std::string& s, const std::string& where) {
  if (s == "y") return Signal::output_y;
  if (s == "u") return Signal::input_u;
  if (s == "phi1") return Signal::phi1;
  if (s == "phi2") return Signal::phi2;
  throw ConfigError(where + ": key 'sig' must be one of y, u, phi1, phi2 (got '" + s + "')");
}

}  // namespace detail

inline NarxModel model_from_json(const nlohmann::json& j) {
  NarxModel m;
  m.name = j.is_object() && j.contains("name") ? detail::read_as<std::string>(j, "name", "model") : "";
  m.n_y = detail::read_as<int>(j, "n_y", "model");
  m.n_u = detail::read_as<int>(j, "n_u", "model");
  m.tau_d = detail::read_as<int>(j, "tau_d", "model");
  m.ell = detail::read_as<int>(j, "ell", "model");
  m.input_range = detail::read_range(j, "input_range");
  m.output_range = detail::read_range(j, "output_range");
  if (j.contains("sample_time")) m.sample_time = detail::read_as<double>(j, "sample_time", "model");

  const auto& terms = detail::require_key(j, "terms", "model");
  if (!terms.is_array()) throw ConfigError("model: key 'terms' must be an array");
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const std::string where = "terms[" + std::to_string(i) + "]";
    Term t;
    t.coefficient = detail::read_as<double>(terms[i], "coeff", where);
    const auto& factors = detail::require_key(terms[i], "factors", where);
    if (!factors.is_array()) throw ConfigError(where + ": key 'factors' must be an array");
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const std::string fwhere = where + ".factors[" + std::to_string(f) + "]";
      Factor fac;
      fac.signal = detail::parse_signal(detail::read_as<std::string>(factors[f], "sig", fwhere), fwhere);
      fac.lag = detail::read_as<int>(factors[f], "lag", fwhere);
      fac.power = factors[f].contains("pow") ? detail::read_as<int>(factors[f], "pow", fwhere) : 1;
      t.factors.push_back(fac);
    }
    m.terms.push_back(std::move(t));
  }

  const auto problems = validate(m);
  if (!problems.empty()) {
    std::string msg = "model: invalid structure:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return m;
}

inline nlohmann::json model_to_json(const NarxModel& m) {
  nlohmann::json j;
  if (!m.name.empty()) j["name"] = m.name;
  j["n_y"] = m.n_y;
  j["n_u"] = m.n_u;
  j["tau_d"] = m.tau_d;
  j["ell"] = m.ell;
  j["sample_time"] = m.sample_time;
  j["input_range"] = {m.input_range.lo, m.input_range.hi};
  j["output_range"] = {m.output_range.lo, m.output_range.hi};
  j["terms"] = nlohmann::json::array();
  for (const Term& t : m.terms) {
    nlohmann::json jt;
    jt["coeff"] = t.coefficient;
    jt["factors"] = nlohmann::json::array();
    for (const Factor& f : t.factors) {
      jt["factors"].push_back({{"sig", to_string(f.signal)}, {"lag", f.lag}, {"pow", f.power}});
    }
    j["terms"].push_back(std::move(jt));
  }
  return j;
}

inline NarxModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("model file '" + path.string() + "' cannot be opened");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("model file '" + path.string() + "': " + e.what());
  }
  return model_from_json(j);
}

inline void save_model(const NarxModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file '" + path.string() + "'");
  out << model_to_json(m).dump(2) << '\n';
}

}  // namespace narxcomp
