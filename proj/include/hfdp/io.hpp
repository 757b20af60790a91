#pragma once

// File formats: comma-separated datasets with a header row, two-column
// assignment files, and JSON trace serialization. Feature reals are written
// with 17 significant digits so a write/read cycle is value-identical.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hfdp/common.hpp"
#include "hfdp/core.hpp"
#include "hfdp/sampler.hpp"

namespace hfdp {

struct CsvDataset {
  LabeledDataset data;
  std::vector<std::string> feature_names;
  std::vector<std::string> level_names;  // index = internal label
};

namespace detail {

inline std::string trim_cell(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim_cell(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline CsvDataset load_csv(const std::string& path,
                           const std::vector<std::string>& feature_columns,
                           const std::string& attribute_column) {
  std::ifstream in(path);
  if (!in) throw invalid_input("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw invalid_input(path + ": empty file");
  const auto header = detail::split_line(line);

  auto column_of = [&](const std::string& name) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return static_cast<int>(c);
    throw invalid_input(path + ": missing column '" + name + "'");
  };
  const int attr_col = column_of(attribute_column);
  std::vector<int> feat_cols;
  if (feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (static_cast<int>(c) != attr_col) feat_cols.push_back(static_cast<int>(c));
  } else {
    for (const auto& name : feature_columns) {
      int c = column_of(name);
      if (c == attr_col)
        throw invalid_input(path + ": attribute column listed as a feature");
      feat_cols.push_back(c);
    }
  }
  if (feat_cols.empty()) throw invalid_input(path + ": no feature columns");

  CsvDataset out;
  for (int c : feat_cols) out.feature_names.push_back(header[c]);

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim_cell(line).empty()) continue;
    const auto cells = detail::split_line(line);
    if (cells.size() != header.size())
      throw invalid_input(path + ": line " + std::to_string(line_no) + " has " +
                          std::to_string(cells.size()) + " cells, expected " +
                          std::to_string(header.size()));
    std::vector<double> row;
    for (int c : feat_cols) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[c], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cells[c].size() || cells[c].empty())
        throw invalid_input(path + ": line " + std::to_string(line_no) +
                            ": cannot parse '" + cells[c] + "' in column '" +
                            header[c] + "' as a real");
      row.push_back(v);
    }
    const std::string& level = cells[attr_col];
    if (level.empty())
      throw invalid_input(path + ": line " + std::to_string(line_no) +
                          ": empty attribute cell");
    int idx = -1;
    for (std::size_t a = 0; a < out.level_names.size(); ++a)
      if (out.level_names[a] == level) idx = static_cast<int>(a);
    if (idx < 0) {
      idx = static_cast<int>(out.level_names.size());
      out.level_names.push_back(level);
    }
    rows.push_back(std::move(row));
    labels.push_back(idx);
  }
  if (rows.empty()) throw invalid_input(path + ": no data rows");
  const int r = static_cast<int>(out.level_names.size());
  if (r < 2) throw invalid_input(path + ": attribute has a single level");
  if (r > 20) throw invalid_input(path + ": attribute has more than 20 levels");

  MatrixXd points(static_cast<int>(rows.size()), static_cast<int>(feat_cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      points(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  out.data = LabeledDataset::create(points, labels, r);
  return out;
}

inline void write_dataset(const std::string& path, const MatrixXd& points,
                          const std::vector<int>& labels,
                          const std::vector<std::string>& level_names,
                          const std::vector<std::string>& feature_names = {}) {
  std::ofstream out(path);
  if (!out) throw invalid_input("cannot write " + path);
  for (int j = 0; j < points.cols(); ++j) {
    if (j < static_cast<int>(feature_names.size()))
      out << feature_names[j] << ',';
    else
      out << 'x' << (j + 1) << ',';
  }
  out << "attribute\n";
  for (int i = 0; i < points.rows(); ++i) {
    for (int j = 0; j < points.cols(); ++j)
      out << detail::format_real(points(i, j)) << ',';
    out << level_names.at(labels[static_cast<std::size_t>(i)]) << '\n';
  }
}

// assignment files carry 1-based cluster labels; internal labels are 0-based
inline void write_assignment(const std::string& path, const std::vector<int>& z) {
  std::ofstream out(path);
  if (!out) throw invalid_input("cannot write " + path);
  out << "row,cluster\n";
  for (std::size_t i = 0; i < z.size(); ++i) out << i << ',' << z[i] + 1 << '\n';
}

inline std::vector<int> load_assignment(const std::string& path, int n) {
  std::ifstream in(path);
  if (!in) throw invalid_input("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw invalid_input(path + ": empty file");
  std::vector<int> z(n, -1);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim_cell(line).empty()) continue;
    const auto cells = detail::split_line(line);
    if (cells.size() != 2)
      throw invalid_input(path + ": line " + std::to_string(line_no) +
                          ": expected two cells");
    int row, cluster;
    try {
      row = std::stoi(cells[0]);
      cluster = std::stoi(cells[1]);
    } catch (const std::exception&) {
      throw invalid_input(path + ": line " + std::to_string(line_no) +
                          ": cannot parse integers");
    }
    if (row < 0 || row >= n)
      throw invalid_input(path + ": line " + std::to_string(line_no) +
                          ": row index " + std::to_string(row) + " out of range");
    if (cluster < 1)
      throw invalid_input(path + ": line " + std::to_string(line_no) +
                          ": cluster labels are 1-based");
    if (z[row] != -1)
      throw invalid_input(path + ": line " + std::to_string(line_no) +
                          ": duplicate row index " + std::to_string(row));
    z[row] = cluster - 1;
  }
  for (int i = 0; i < n; ++i)
    if (z[i] == -1)
      throw invalid_input(path + ": missing assignment for row " + std::to_string(i));
  return z;
}

inline nlohmann::json matrix_to_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline MatrixXd matrix_from_json(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(j.at(0).size());
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  return m;
}

inline nlohmann::json trace_to_json(const ChainTrace& trace) {
  nlohmann::json doc;
  doc["n"] = trace.n;
  doc["K"] = trace.K;
  doc["r"] = trace.r;
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : trace.samples) {
    nlohmann::json js;
    js["iteration"] = s.iteration;
    js["alpha0"] = s.state.alpha0;
    js["beta"] = std::vector<double>(s.state.beta.data(),
                                     s.state.beta.data() + s.state.beta.size());
    js["w"] = matrix_to_json(s.state.w);
    nlohmann::json m = nlohmann::json::array();
    for (int a = 0; a < s.state.m.rows(); ++a) {
      nlohmann::json row = nlohmann::json::array();
      for (int k = 0; k < s.state.m.cols(); ++k) row.push_back(s.state.m(a, k));
      m.push_back(row);
    }
    js["m"] = m;
    js["z_flat"] = s.z_flat;
    js["labels"] = s.labels;
    js["alpha0_accepted"] = s.alpha0_accepted;
    js["z_accepted"] = std::vector<int>(s.z_accepted.begin(), s.z_accepted.end());
    js["log_marginal"] = s.log_marginal;
    samples.push_back(std::move(js));
  }
  doc["samples"] = std::move(samples);
  return doc;
}

inline ChainTrace trace_from_json(const nlohmann::json& doc) {
  ChainTrace trace;
  trace.n = doc.at("n").get<int>();
  trace.K = doc.at("K").get<int>();
  trace.r = doc.at("r").get<int>();
  for (const auto& js : doc.at("samples")) {
    TraceSample s;
    s.iteration = js.at("iteration").get<int>();
    s.state.alpha0 = js.at("alpha0").get<double>();
    const auto beta = js.at("beta").get<std::vector<double>>();
    s.state.beta = Eigen::Map<const VectorXd>(beta.data(),
                                              static_cast<int>(beta.size()));
    s.state.w = matrix_from_json(js.at("w"));
    const auto& m = js.at("m");
    s.state.m = MatrixXi(static_cast<int>(m.size()), trace.K);
    for (int a = 0; a < s.state.m.rows(); ++a)
      for (int k = 0; k < trace.K; ++k)
        s.state.m(a, k) = m.at(a).at(k).get<int>();
    s.z_flat = js.at("z_flat").get<std::vector<int>>();
    s.labels = js.at("labels").get<std::vector<int>>();
    s.alpha0_accepted = js.at("alpha0_accepted").get<bool>();
    for (int v : js.at("z_accepted").get<std::vector<int>>())
      s.z_accepted.push_back(static_cast<char>(v));
    s.log_marginal = js.at("log_marginal").get<double>();
    // rebuild the per-attribute view from the flat assignment
    s.state.z.assign(trace.r, {});
    for (std::size_t i = 0; i < s.z_flat.size(); ++i)
      s.state.z[s.labels[i]].push_back(s.z_flat[i]);
    trace.samples.push_back(std::move(s));
  }
  return trace;
}

inline void save_trace(const std::string& path, const ChainTrace& trace) {
  std::ofstream out(path);
  if (!out) throw invalid_input("cannot write " + path);
  out << trace_to_json(trace).dump();
}

inline ChainTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw invalid_input("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw invalid_input(path + ": " + e.what());
  }
  return trace_from_json(doc);
}

}  // namespace hfdp
