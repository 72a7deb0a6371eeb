#pragma once

#include <string>
#include <vector>

#include "epsdiag/classify.hpp"
#include "epsdiag/config.hpp"
#include "epsdiag/modelbank.hpp"

namespace epsdiag::app {

inline constexpr const char* kToolName = "epsdiag";
inline constexpr const char* kToolVersion = "0.1.0";

/// Diagnostics level from EPSDIAG_LOG (error | info | debug), stderr only.
enum class LogLevel { Error = 0, Info = 1, Debug = 2 };
LogLevel log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

struct RunOptions {
  bool no_timestamp = false;  // golden-test mode: omit timestamps everywhere
  bool quiet = false;         // stdout carries only machine-readable results
};

/// Writes the run manifest (exactly one per output directory).
void write_manifest(const RunConfig& config, const RunOptions& opts,
                    const std::string& command,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    const std::string& out_dir);

/// gen-data: one telemetry CSV per class of the configured task.
std::vector<std::string> cmd_gen_data(const RunConfig& config,
                                      const RunOptions& opts,
                                      const std::string& out_dir);

/// fit-bank: trains the model bank from a gen-data directory; writes the
/// bank files plus per-model training reports.
bank::ModelBank cmd_fit_bank(const RunConfig& config, const RunOptions& opts,
                             const std::string& data_dir,
                             const std::string& out_dir);

/// Feature views (i1, i2, raw) derived from a bank and a data directory.
cls::TaskDatasets build_task_datasets(const RunConfig& config,
                                      const bank::ModelBank& bank,
                                      const std::string& data_dir);

/// train-eval: one method on the shared split. Methods: mlp_i1, mlp_i2,
/// knn, dt, pca. Writes report.json + confusion.csv (+ loss_curve.csv for
/// knn). Returns the report JSON text.
std::string cmd_train_eval(const RunConfig& config, const RunOptions& opts,
                           const std::string& bank_dir,
                           const std::string& data_dir,
                           const std::string& method,
                           const std::string& out_dir);

/// compare: all four methods under one seed; Table-5/Table-6 style JSON
/// report, plot-data CSV and a static SVG bar chart. Returns the report
/// JSON text.
std::string cmd_compare(const RunConfig& config, const RunOptions& opts,
                        const std::string& bank_dir,
                        const std::string& data_dir,
                        const std::string& out_dir);

/// Telemetry file name for a class: telemetry_<token>.csv.
std::string telemetry_filename(faults::FaultClass f);

}  // namespace epsdiag::app
