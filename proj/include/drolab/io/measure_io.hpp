#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "drolab/io/json_fields.hpp"
#include "drolab/measures.hpp"

namespace drolab::io {

inline Json measure_to_json(const EmpiricalMeasure& mu) {
  return Json{{"points", columns_to_json(mu.points())}, {"weights", to_json(mu.weights())}};
}

/// {"points": [[...], ...], "weights": [...]}; weights default to uniform.
inline EmpiricalMeasure measure_from_json(const Json& j) {
  const Eigen::MatrixXd pts = columns(field(j, "points", "measure"), "measure.points");
  if (j.contains("weights")) return EmpiricalMeasure(pts, vector(j.at("weights"), "measure.weights"));
  return EmpiricalMeasure::uniform(pts);
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size();
}
}  // namespace detail

/// One point per row. An optional header row is detected by non-numeric cells; a last
/// header column named "weight" or "w", or `weighted = true`, marks a weight column.
inline EmpiricalMeasure measure_from_csv(std::istream& in, const std::string& source, bool weighted = false) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    std::vector<double> row;
    bool numeric = true;
    for (const auto& c : cells) {
      double v = 0.0;
      if (!detail::parse_double(c, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (rows.empty() && !header_seen) {
        header_seen = true;
        const std::string last = cells.empty() ? "" : cells.back();
        if (last == "weight" || last == "w") weighted = true;
        continue;
      }
      throw ConfigError(source + ":" + std::to_string(line_no) + ": non-numeric cell");
    }
    if (width == 0) width = row.size();
    if (row.size() != width) throw ConfigError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) + " columns");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(source + ": no data rows");
  const std::size_t dim = weighted ? width - 1 : width;
  if (dim == 0) throw ConfigError(source + ": a weighted CSV needs at least one coordinate column");
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rows.size()));
  Vec w(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) pts(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = rows[i][j];
    w[static_cast<Eigen::Index>(i)] = weighted ? rows[i][dim] : 1.0 / static_cast<double>(rows.size());
  }
  return EmpiricalMeasure(std::move(pts), std::move(w));
}

/// Loads .json measures or CSV otherwise.
inline EmpiricalMeasure load_measure(const std::string& path, bool weighted = false) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    Json j;
    try {
      in >> j;
    } catch (const Json::parse_error& e) {
      throw ConfigError("malformed JSON in '" + path + "': " + e.what());
    }
    return measure_from_json(j);
  }
  return measure_from_csv(in, path, weighted);
}

}  // namespace drolab::io
