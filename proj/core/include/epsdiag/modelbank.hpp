#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "epsdiag/envsim.hpp"
#include "epsdiag/mlp.hpp"

namespace epsdiag::bank {

using faults::FaultClass;

/// The two diagnosis tasks. The system task models (irr, T) -> I_load for
/// the five electrical-power-system states; the PV task models
/// (irr, T) -> (V, I) of the array for the three photovoltaic states.
enum class Task { System5, Pv3 };

std::string task_token(Task t);             // "system_5class" / "pv_3class"
Task task_from_token(const std::string&);   // throws ConfigError
const std::vector<FaultClass>& task_classes(Task t);

struct FittedModel {
  FaultClass fault = FaultClass::NoFault;
  mlp::MlpNetwork net;
  mlp::Normalizer input_norm;
  mlp::Normalizer output_norm;
  // Held-out statistics on normalized data (the Fig 2-style numbers).
  double validation_mse = 0.0;
  mlp::ErrorStats validation_stats;
  double train_mse = 0.0;
  int train_epochs = 0;
};

struct ModelBank {
  Task task = Task::System5;
  std::vector<FittedModel> models;  // one per task class, task order

  int model_index(FaultClass f) const;  // -1 when absent
  /// Model prediction in physical units for inputs (irr, T).
  Eigen::VectorXd predict(int model_idx, double irr_w_m2, double temp_c) const;
};

struct FitOptions {
  int hidden = 10;
  double train_frac = 0.7;
  std::uint64_t seed = 1;
  mlp::TrainConfig train;  // per-model seeds are derived internally
};

/// Trains one regression model per task class on its telemetry. Duplicate
/// or missing classes and undersized datasets (< 100 samples) raise
/// ConfigError. Deterministic per (datasets, options).
ModelBank fit_bank(
    Task task,
    const std::vector<std::pair<FaultClass, std::vector<sim::SystemSample>>>&
        datasets,
    const FitOptions& options);

/// Residuals r_i = observed - prediction_i, physical units, one entry per
/// model (system task) or a stacked (dV, dI) pair per model (PV task).
struct ResidualVector {
  std::vector<double> values;
  bool extrapolated = false;  // inputs left the normalizer's fitted range
};

/// y_observed: system task = [load_i], PV task = [pv_v, pv_i].
ResidualVector residuals(const ModelBank& bank,
                         const Eigen::VectorXd& y_observed, double irr_w_m2,
                         double temp_c);
ResidualVector residuals(const ModelBank& bank, const sim::SystemSample& s);

/// Streaming first moment of a current channel.
struct RunningMoment {
  std::int64_t count = 0;
  double mean = 0.0;
};

RunningMoment update_moment(const RunningMoment& m, double value);

enum class FeatureKind { I1, I2 };

struct FeatureVector {
  FeatureKind kind = FeatureKind::I1;
  std::vector<double> values;
};

/// i1 = [r_1 .. r_L]; i2 = [r_1, E(I_1), r_2, E(I_2), ..., r_L, E(I_L)]
/// with E(I_i) the running mean of model i's predicted load current.
/// I2 requires one moment per model (ConfigError otherwise).
FeatureVector build_features(FeatureKind kind, const ResidualVector& r,
                             const std::vector<RunningMoment>* moments);

/// Bank serialization: a directory holding manifest.json plus one mlp-v1
/// file per model. Reload restores predictions bit-exactly.
void save_bank(const ModelBank& bank, const std::string& dir);
ModelBank load_bank(const std::string& dir);

}  // namespace epsdiag::bank
