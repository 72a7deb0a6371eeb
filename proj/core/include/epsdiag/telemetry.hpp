#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "epsdiag/envsim.hpp"

namespace epsdiag::io {

/// Shortest exact decimal text for a double (17 significant digits);
/// round-trips bit-exactly through parsing.
std::string fmt17(double v);

/// Telemetry CSV, one row per sample:
/// time_s,irr_w_m2,temp_c,pv_v,pv_i,bus_v,load_i_a,soc,cell_v,fault_class
/// Mandatory header row, '.' decimal separator, UTF-8.
inline constexpr const char* kTelemetryHeader =
    "time_s,irr_w_m2,temp_c,pv_v,pv_i,bus_v,load_i_a,soc,cell_v,fault_class";

void write_telemetry_csv(std::ostream& out,
                         const std::vector<sim::SystemSample>& samples);
void write_telemetry_csv(const std::string& path,
                         const std::vector<sim::SystemSample>& samples);

/// Parses a telemetry CSV. Throws FormatError naming the file and line on
/// any malformed row, header mismatch, or unknown fault token.
std::vector<sim::SystemSample> read_telemetry_csv(std::istream& in,
                                                  const std::string& name);
std::vector<sim::SystemSample> read_telemetry_csv(const std::string& path);

/// Classifier feature CSV: sample_id,kind,f0,...,f{k-1},label.
void write_feature_csv(std::ostream& out, const std::string& kind,
                       const Eigen::MatrixXd& features,
                       const std::vector<faults::FaultClass>& labels);
void write_feature_csv(const std::string& path, const std::string& kind,
                       const Eigen::MatrixXd& features,
                       const std::vector<faults::FaultClass>& labels);

}  // namespace epsdiag::io
