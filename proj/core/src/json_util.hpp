#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gridse/error.hpp"

namespace gridse::detail {

using nlohmann::json;

inline const json& require(const json& object, const char* key, const std::string& where) {
  if (!object.is_object() || !object.contains(key)) {
    throw ModelError(where + ": missing field '" + key + "'");
  }
  return object.at(key);
}

inline double number(const json& object, const char* key, const std::string& where) {
  const json& value = require(object, key, where);
  if (!value.is_number()) throw ModelError(where + "." + key + ": expected a number");
  return value.get<double>();
}

inline double number_or(const json& object, const char* key, double fallback, const std::string& where) {
  if (!object.contains(key)) return fallback;
  return number(object, key, where);
}

inline std::string string_or(const json& object, const char* key, const std::string& fallback,
                             const std::string& where) {
  if (!object.contains(key)) return fallback;
  const json& value = object.at(key);
  if (!value.is_string()) throw ModelError(where + "." + key + ": expected a string");
  return value.get<std::string>();
}

// Bus ids may be written as strings or integers.
inline std::string id_value(const json& value, const std::string& where) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  throw ModelError(where + ": expected a bus id");
}

inline std::string id_field(const json& object, const char* key, const std::string& where) {
  return id_value(require(object, key, where), where + "." + key);
}

inline const json& array_field(const json& object, const char* key, const std::string& where, bool optional) {
  static const json empty = json::array();
  if (optional && !object.contains(key)) return empty;
  const json& value = require(object, key, where);
  if (!value.is_array()) throw ModelError(where + "." + key + ": expected an array");
  return value;
}

inline json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ModelError(path + ": cannot open " + what);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ModelError(path + ": " + e.what());
  }
}

}  // namespace gridse::detail
