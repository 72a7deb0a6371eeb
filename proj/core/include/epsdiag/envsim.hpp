#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epsdiag/faults.hpp"

namespace epsdiag::sim {

using faults::FaultClass;

/// Environment input pair driving the plant.
struct EnvSample {
  double irradiance_w_m2 = 1000.0;  // [200, 1200]
  double temperature_c = 25.0;      // [-20, 80]
};

struct PvOutput {
  double voltage_v = 0.0;  // [0, 60]
  double current_a = 0.0;  // [0, 30]
};

struct BatteryState {
  double soc = 0.5;             // [0, 1]
  double cell_voltage_v = 3.6;  // [3.0, 4.2]
  double current_a = 0.0;       // signed, + = discharge, |I| <= 20
  bool saturated = false;       // soc or current clamp hit on the last step
};

struct SystemSample {
  double time_s = 0.0;
  EnvSample env;
  PvOutput pv;
  double bus_voltage_v = 0.0;   // [0, 100]
  double load_current_a = 0.0;  // [0, 50]
  BatteryState battery;
  FaultClass fault = FaultClass::NoFault;
};

/// Plant constants and declared fault-effect magnitudes. The plant is a
/// minimal physics-flavored model; every value here is a named,
/// overridable default rather than a measured constant.
struct PlantParams {
  // photovoltaic array: I = i_ref*(irr/1000)*(1+alpha_i*(T-25)),
  //                     V = v_ref*(1+alpha_v*(T-25))
  double i_ref_a = 24.0;
  double v_ref_v = 42.0;
  double alpha_i_per_c = 5.0e-4;
  double alpha_v_per_c = -4.0e-3;

  // converter / regulator
  double efficiency = 0.95;  // (0, 1]
  double k_reg = 1.0;        // regulated bus = k_reg * 48 V
  double v_bus_reg_v = 48.0;

  // battery (coulomb counting)
  double c_batt_ah = 20.0;
  double i_batt_max_a = 20.0;   // |cell current| bound
  double soc_full = 0.98;       // charging stops above this
  double ocv_shape = 0.8;       // cell curve g(s) = s + a/(2*pi)*sin(2*pi*s)

  // Power manager: each mode runs a characteristic load tier (protection
  // circuitry sheds payloads on charge deficit / bus undervoltage), plus a
  // small payload duty cycle that tracks the sun-proxy current
  // h(irr,T) = eta * P_pv_healthy / 48. Load is therefore a pure function
  // of (irr, T) within each mode.
  double load_beta = 0.008;
  double tier_none_a = 14.2;
  double tier_pv_line_line_a = 13.6;
  double tier_pv_open_a = 12.4;
  double tier_mppt_open_a = 4.1;
  double tier_reg_open_a = 4.3;  // near the MPPT-fault shed level
  double tier_reg_short_a = 14.45;
  double tier_battery_ground_a = 12.94;

  // fault effect magnitudes
  double pv_open_fraction = 0.25;      // lose 1 of 4 strings
  double line_line_v_fraction = 0.15;  // bridged series cells
  double line_line_i_noise = 0.02;     // multiplicative current disturbance
  double mppt_scale = 0.5;             // converter current factor
  double reg_open_scale = 0.1;         // converter current factor
  double leak_a = 1.0;                 // battery ground leakage
  // Degraded conversion leaves switching ripple on the bus; the two
  // converter faults share it, which is what makes them hard to tell
  // apart from instantaneous residuals alone.
  double load_ripple_mppt_open_a = 0.2;
  double load_ripple_reg_open_a = 0.2;

  // mode operating points: SOC the battery has settled at by the time the
  // observation window starts
  double initial_soc_none = 0.78;
  double initial_soc_pv_line_line = 0.74;
  double initial_soc_pv_open = 0.70;
  double initial_soc_mppt_open = 0.605;
  double initial_soc_reg_open = 0.59;
  double initial_soc_reg_short = 0.82;
  double initial_soc_battery_ground = 0.71;

  double load_tier_a(FaultClass f) const;
  double initial_soc(FaultClass f) const;
  double load_ripple_a(FaultClass f) const;

  /// Throws ConfigError on out-of-range magnitudes.
  void validate() const;
};

/// Scenario description; `simulate` is a pure function of this value.
struct ScenarioConfig {
  int sample_count = 2001;
  std::uint64_t seed = 1;
  double timestep_s = 1.0;
  FaultClass fault = FaultClass::NoFault;
  PlantParams plant;

  // Measurement noise: electrical channels get sigma = noise_sigma_frac *
  // full scale; the SOC estimate carries its own absolute sigma plus the
  // coulomb counter's register quantum (firmware LSB).
  double noise_sigma_frac = 2.0e-6;
  double soc_noise_sigma = 0.004;
  double soc_quantum = 0.004;

  std::optional<double> initial_soc;  // default: plant.initial_soc(fault)

  void validate() const;
};

/// Deterministic environment profile: slow triangular sweeps (seeded phase
/// and period jitter) plus a band-limited random wiggle. Covers >= 80% of
/// both input ranges over any window of >= 2001 samples.
std::vector<EnvSample> generate_env_profile(int count, std::uint64_t seed);

/// PV array response under a fault mode. Healthy response is linear in
/// irradiance with temperature coefficients; PV-stage faults scale current
/// (open string) or voltage (line-to-line bridge). Outputs clamp to the
/// array ratings.
PvOutput pv_response(const EnvSample& env, FaultClass fault,
                     const PlantParams& p);

struct ConverterOutput {
  double bus_voltage_v = 0.0;
  double current_a = 0.0;
};

/// MPPT + regulator chain. Healthy: regulated 48 V bus, power conservation
/// at the configured efficiency. RegIgbtShort passes the PV voltage through
/// unregulated; the IGBT-open faults scale the delivered current.
ConverterOutput converter_chain(const PvOutput& pv, FaultClass fault,
                                const PlantParams& p);

/// Coulomb-counting step: soc' = clamp01(soc - net_current*dt/C). A
/// BatteryGround fault adds the leakage current to net_current. Cell
/// voltage follows a monotone open-circuit curve of SOC. Saturation
/// (SOC rails, current bound) is flagged, never an error.
BatteryState battery_step(const BatteryState& state, double net_current_a,
                          double dt_s, FaultClass fault,
                          const PlantParams& p);

/// Per-channel clamp event counts for one simulation run.
struct ClampStats {
  std::map<std::string, std::int64_t> counts;
  std::int64_t total() const;
};

struct SimulationResult {
  std::vector<SystemSample> samples;
  ClampStats clamps;
};

/// Full scenario simulation. Bit-identical for equal configs.
SimulationResult simulate(const ScenarioConfig& config);

/// Channel full-scale widths used for noise scaling and clamping.
struct ChannelRange {
  double lo, hi;
  double width() const { return hi - lo; }
};
ChannelRange channel_range(const std::string& channel);

}  // namespace epsdiag::sim
