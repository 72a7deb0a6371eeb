#include "epsdiag/telemetry.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "epsdiag/errors.hpp"

namespace epsdiag::io {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_telemetry_csv(std::ostream& out,
                         const std::vector<sim::SystemSample>& samples) {
  out << kTelemetryHeader << '\n';
  for (const auto& s : samples) {
    out << fmt17(s.time_s) << ',' << fmt17(s.env.irradiance_w_m2) << ','
        << fmt17(s.env.temperature_c) << ',' << fmt17(s.pv.voltage_v) << ','
        << fmt17(s.pv.current_a) << ',' << fmt17(s.bus_voltage_v) << ','
        << fmt17(s.load_current_a) << ',' << fmt17(s.battery.soc) << ','
        << fmt17(s.battery.cell_voltage_v) << ','
        << faults::to_token(s.fault) << '\n';
  }
}

void write_telemetry_csv(const std::string& path,
                         const std::vector<sim::SystemSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write telemetry CSV: " + path);
  write_telemetry_csv(out, samples);
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& text, const std::string& name,
                    int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) {
      throw FormatError(name, line_no, "trailing characters in number");
    }
    return v;
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception&) {
    throw FormatError(name, line_no, "expected a number, got '" + text + "'");
  }
}

}  // namespace

std::vector<sim::SystemSample> read_telemetry_csv(std::istream& in,
                                                  const std::string& name) {
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) {
    throw FormatError(name, 1, "empty file, expected telemetry header");
  }
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTelemetryHeader) {
    throw FormatError(name, 1, "bad telemetry header");
  }

  std::vector<sim::SystemSample> samples;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 10) {
      throw FormatError(name, line_no, "expected 10 fields, got " +
                                           std::to_string(fields.size()));
    }
    sim::SystemSample s;
    s.time_s = parse_double(fields[0], name, line_no);
    s.env.irradiance_w_m2 = parse_double(fields[1], name, line_no);
    s.env.temperature_c = parse_double(fields[2], name, line_no);
    s.pv.voltage_v = parse_double(fields[3], name, line_no);
    s.pv.current_a = parse_double(fields[4], name, line_no);
    s.bus_voltage_v = parse_double(fields[5], name, line_no);
    s.load_current_a = parse_double(fields[6], name, line_no);
    s.battery.soc = parse_double(fields[7], name, line_no);
    s.battery.cell_voltage_v = parse_double(fields[8], name, line_no);
    const auto fault = faults::from_token(fields[9]);
    if (!fault) {
      throw FormatError(name, line_no, "unknown fault token '" + fields[9] + "'");
    }
    s.fault = *fault;
    samples.push_back(s);
  }
  return samples;
}

std::vector<sim::SystemSample> read_telemetry_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open telemetry CSV: " + path);
  return read_telemetry_csv(in, path);
}

}  // namespace epsdiag::io

namespace epsdiag::io {

void write_feature_csv(std::ostream& out, const std::string& kind,
                       const Eigen::MatrixXd& features,
                       const std::vector<faults::FaultClass>& labels) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw ShapeError("write_feature_csv: feature/label count mismatch");
  }
  out << "sample_id,kind";
  for (Eigen::Index j = 0; j < features.cols(); ++j) out << ",f" << j;
  out << ",label\n";
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out << i << ',' << kind;
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      out << ',' << fmt17(features(i, j));
    }
    out << ',' << faults::to_token(labels[static_cast<std::size_t>(i)]) << '\n';
  }
}

void write_feature_csv(const std::string& path, const std::string& kind,
                       const Eigen::MatrixXd& features,
                       const std::vector<faults::FaultClass>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write feature CSV: " + path);
  write_feature_csv(out, kind, features, labels);
}

}  // namespace epsdiag::io
