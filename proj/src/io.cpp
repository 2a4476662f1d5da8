#include "timescale/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "timescale/errors.hpp"

namespace timescale {

std::string format_sci(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.16e", value);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Matrix& rows) {
  if (Index(header.size()) != rows.cols())
    throw InvalidParameterError("write_csv: header size does not match column count");
  std::ofstream out(path);
  if (!out) throw IoError("write_csv: cannot open " + path);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << "\n";
  for (Index r = 0; r < rows.rows(); ++r) {
    for (Index c = 0; c < rows.cols(); ++c)
      out << (c ? "," : "") << format_sci(rows(r, c));
    out << "\n";
  }
  if (!out) throw IoError("write_csv: write failed for " + path);
}

Matrix read_csv(const std::string& path, std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw IoError("read_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw IoError("read_csv: empty file " + path);
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  if (header != nullptr) *header = names;

  std::vector<double> values;
  Index n_rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Index n_cols = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::strtod(cell.c_str(), nullptr));
      ++n_cols;
    }
    if (n_cols != Index(names.size()))
      throw IoError("read_csv: ragged row in " + path);
    ++n_rows;
  }
  Matrix rows(n_rows, Index(names.size()));
  for (Index r = 0; r < n_rows; ++r)
    for (Index c = 0; c < rows.cols(); ++c) rows(r, c) = values[r * rows.cols() + c];
  return rows;
}

namespace {

std::vector<std::string> state_columns(const EnsembleModel& model, const std::string& prefix) {
  std::vector<std::string> names;
  for (int level = 1; level <= model.params.n; ++level)
    for (int clock = 1; clock <= model.params.m; ++clock)
      names.push_back(prefix + "_" + std::to_string(level) + "_" + std::to_string(clock));
  return names;
}

}  // namespace

void write_trace_csv(const std::string& path, const SimTrace& trace,
                     const EnsembleModel& model) {
  std::vector<std::string> header{"k"};
  for (const auto& name : state_columns(model, "x")) header.push_back(name);
  for (Index j = 1; j <= model.meas_dim(); ++j) header.push_back("y_" + std::to_string(j));
  header.push_back("z");

  Matrix rows(trace.horizon + 1, Index(header.size()));
  for (Index k = 0; k <= trace.horizon; ++k) {
    Index col = 0;
    rows(k, col++) = double(k);
    for (Index i = 0; i < trace.x.cols(); ++i) rows(k, col++) = trace.x(k, i);
    for (Index j = 0; j < model.meas_dim(); ++j)
      rows(k, col++) = k < trace.horizon ? trace.y(k, j) : std::nan("");
    rows(k, col) = trace.z[k];
  }
  write_csv(path, header, rows);
}

SimTrace read_trace_csv(const std::string& path, const EnsembleModel& model) {
  const Matrix rows = read_csv(path);
  const Index nm = model.state_dim(), my = model.meas_dim();
  if (rows.cols() != 1 + nm + my + 1)
    throw IoError("read_trace_csv: column count does not match the model in " + path);
  if (rows.rows() < 2) throw IoError("read_trace_csv: need at least two rows in " + path);

  SimTrace trace;
  trace.horizon = rows.rows() - 1;
  trace.x = rows.block(0, 1, rows.rows(), nm);
  trace.y = rows.block(0, 1 + nm, trace.horizon, my);
  trace.z = rows.col(1 + nm + my);
  return trace;
}

void write_filter_csv(const std::string& path, const Matrix& estimates, const Vector& ta,
                      const EnsembleModel& model) {
  if (estimates.rows() != ta.size())
    throw InvalidParameterError("write_filter_csv: estimate and TA lengths differ");
  std::vector<std::string> header{"k"};
  for (const auto& name : state_columns(model, "xhat")) header.push_back(name);
  header.push_back("TA");

  Matrix rows(estimates.rows(), Index(header.size()));
  for (Index k = 0; k < estimates.rows(); ++k) {
    Index col = 0;
    rows(k, col++) = double(k);
    for (Index i = 0; i < estimates.cols(); ++i) rows(k, col++) = estimates(k, i);
    rows(k, col) = ta[k];
  }
  write_csv(path, header, rows);
}

void write_moments_csv(const std::string& path, const TaMoments& moments,
                       const ConfidenceBand& band) {
  Matrix rows(moments.mean.size(), 5);
  for (Index k = 0; k < moments.mean.size(); ++k) {
    rows(k, 0) = double(k);
    rows(k, 1) = moments.mean[k];
    rows(k, 2) = moments.var[k];
    rows(k, 3) = band.lo[k];
    rows(k, 4) = band.hi[k];
  }
  write_csv(path, {"k", "mean", "var", "lo98", "hi98"}, rows);
}

void write_adev_csv(const std::string& path, const AdevCurve& curve) {
  Matrix rows(curve.taus.size(), 3);
  for (Index i = 0; i < curve.taus.size(); ++i) {
    rows(i, 0) = curve.taus[i];
    rows(i, 1) = curve.sigmas[i];
    rows(i, 2) = double(curve.n_samples[i]);
  }
  write_csv(path, {"tau", "sigma", "n_samples"}, rows);
}

void write_gamma_json(const std::string& path, const Matrix& gamma) {
  nlohmann::json doc;
  doc["rows"] = gamma.rows();
  doc["cols"] = gamma.cols();
  doc["layout"] = "row-major";
  std::vector<double> data;
  data.reserve(gamma.size());
  for (Index r = 0; r < gamma.rows(); ++r)
    for (Index c = 0; c < gamma.cols(); ++c) data.push_back(gamma(r, c));
  doc["data"] = data;

  std::ofstream out(path);
  if (!out) throw IoError("write_gamma_json: cannot open " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("write_gamma_json: write failed for " + path);
}

Matrix read_gamma_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_gamma_json: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("read_gamma_json: " + path + ": " + e.what());
  }
  if (!doc.contains("rows") || !doc.contains("cols") || !doc.contains("data"))
    throw IoError("read_gamma_json: " + path + " lacks rows/cols/data fields");
  const Index rows = doc["rows"].get<Index>();
  const Index cols = doc["cols"].get<Index>();
  const auto data = doc["data"].get<std::vector<double>>();
  if (rows < 1 || cols < 1 || Index(data.size()) != rows * cols)
    throw IoError("read_gamma_json: " + path + " shape metadata does not match data length");

  Matrix gamma(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) gamma(r, c) = data[r * cols + c];
  return gamma;
}

}  // namespace timescale
