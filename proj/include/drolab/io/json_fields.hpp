#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <string>
#include <vector>

#include "drolab/box.hpp"
#include "drolab/errors.hpp"

namespace drolab::io {

using Json = nlohmann::json;

/// Typed field access whose errors name the offending field.
inline const Json& field(const Json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) throw ConfigError("'" + where + "' must be a JSON object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError("missing field '" + where + "." + key + "'");
  return *it;
}

inline double number(const Json& v, const std::string& name) {
  if (!v.is_number()) throw ConfigError("field '" + name + "' must be a number");
  return v.get<double>();
}

inline long long integer(const Json& v, const std::string& name) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("field '" + name + "' must be an integer");
  return v.get<long long>();
}

inline std::string text(const Json& v, const std::string& name) {
  if (!v.is_string()) throw ConfigError("field '" + name + "' must be a string");
  return v.get<std::string>();
}

inline Vec vector(const Json& v, const std::string& name) {
  if (v.is_number()) return Vec::Constant(1, v.get<double>());
  if (!v.is_array()) throw ConfigError("field '" + name + "' must be an array of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = number(v[i], name + "[" + std::to_string(i) + "]");
  return out;
}

/// Array of equal-length rows, returned as columns of a matrix.
inline Eigen::MatrixXd columns(const Json& v, const std::string& name) {
  if (!v.is_array() || v.empty()) throw ConfigError("field '" + name + "' must be a nonempty array");
  const Vec first = vector(v[0], name + "[0]");
  Eigen::MatrixXd out(first.size(), static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec row = vector(v[i], name + "[" + std::to_string(i) + "]");
    if (row.size() != first.size()) throw ConfigError("rows of '" + name + "' have unequal length");
    out.col(static_cast<Eigen::Index>(i)) = row;
  }
  return out;
}

inline Json to_json(const VecRef& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

/// Matrix as an array of its columns.
inline Json columns_to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(to_json(m.col(j)));
  return out;
}

/// Matrix as an array of its rows.
inline Json rows_to_json(const Eigen::MatrixXd& m) { return columns_to_json(m.transpose()); }

inline Eigen::MatrixXd rows(const Json& v, const std::string& name) { return columns(v, name).transpose(); }

/// [lo, hi] (scalar bounds for every coordinate) or {"lower": [...], "upper": [...]}.
inline Box box(const Json& v, Eigen::Index dim, const std::string& name) {
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    return Box::cube(dim, v[0].get<double>(), v[1].get<double>());
  }
  if (v.is_object()) return Box(vector(field(v, "lower", name), name + ".lower"), vector(field(v, "upper", name), name + ".upper"));
  throw ConfigError("field '" + name + "' must be [lo, hi] or {lower, upper}");
}

inline Json box_to_json(const Box& b) { return Json{{"lower", to_json(b.lower())}, {"upper", to_json(b.upper())}}; }

}  // namespace drolab::io
