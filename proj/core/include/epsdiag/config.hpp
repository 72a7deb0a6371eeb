#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "epsdiag/classify.hpp"
#include "epsdiag/envsim.hpp"
#include "epsdiag/faults.hpp"
#include "epsdiag/mlp.hpp"
#include "epsdiag/modelbank.hpp"

namespace epsdiag::app {

/// Effective run configuration: documented defaults overlaid with the
/// values from an INI-style config file (sections [simulate], [faults],
/// [rates], [train], [classify], [report]). Unknown sections or keys are
/// rejected naming the offender.
struct RunConfig {
  // [simulate]; numeric defaults come from ScenarioConfig so the two stay
  // in lockstep
  bank::Task task = bank::Task::System5;
  int sample_count = sim::ScenarioConfig{}.sample_count;
  double timestep_s = sim::ScenarioConfig{}.timestep_s;
  std::uint64_t seed = 7;
  double noise_sigma_frac = sim::ScenarioConfig{}.noise_sigma_frac;
  double soc_noise_sigma = sim::ScenarioConfig{}.soc_noise_sigma;
  double soc_quantum = sim::ScenarioConfig{}.soc_quantum;
  std::optional<double> initial_soc;

  // [faults]
  sim::PlantParams plant;

  // [rates]
  std::map<std::string, faults::RateBand> rates = faults::default_rates();

  // [train]
  int hidden = 10;
  double train_frac = 0.7;
  mlp::TrainConfig train;  // regression models

  // [classify]
  double classify_train_frac = 0.7;
  // The alternative methods read (I_L, SOC) from the housekeeping data
  // path, which reports currents at register resolution; 0 disables.
  double feature_quantum_i = 0.0;
  int knn_k = 3;
  int folds = 10;
  int knn_curve_k_max = 15;
  bool knn_standardize = false;
  bool pca_standardize = true;
  bool pca_center = true;
  cls::DtConfig dt;
  int classifier_hidden = 14;
  int classifier_max_epochs = 120;
  double classifier_goal_mse = 5.0e-4;

  // [report]
  bool timestamps = true;
  bool svg = true;

  RunConfig();

  /// Scenario for one fault class under this configuration.
  sim::ScenarioConfig scenario(faults::FaultClass fault,
                               std::uint64_t scenario_seed) const;

  cls::CompareOptions compare_options() const;

  /// Throws ConfigError on inconsistent values.
  void validate() const;

  /// FNV-1a hash of the canonical serialization; reruns with equal
  /// effective configuration share the hash.
  std::string config_hash() const;
  std::string canonical_text() const;
};

/// Parses INI text over the defaults. Throws ConfigError naming any
/// unknown section or key and any malformed value.
RunConfig parse_config_text(const std::string& text, const std::string& name);
RunConfig load_config_file(const std::string& path);

}  // namespace epsdiag::app
