#include "epsdiag/envsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "epsdiag/errors.hpp"
#include "epsdiag/rng.hpp"

namespace epsdiag::sim {

namespace {

constexpr double kIrrLo = 200.0, kIrrHi = 1200.0;
constexpr double kTempLo = -20.0, kTempHi = 80.0;

double clamp(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

/// Triangle wave of unit period mapping phase -> [-1, 1].
double triangle(double phase) {
  const double s = phase - std::floor(phase);
  return s < 0.5 ? 4.0 * s - 1.0 : 3.0 - 4.0 * s;
}

}  // namespace

double PlantParams::load_tier_a(FaultClass f) const {
  switch (f) {
    case FaultClass::NoFault: return tier_none_a;
    case FaultClass::PvLineToLine: return tier_pv_line_line_a;
    case FaultClass::PvOpenCircuit: return tier_pv_open_a;
    case FaultClass::MpptIgbtOpen: return tier_mppt_open_a;
    case FaultClass::RegIgbtOpen: return tier_reg_open_a;
    case FaultClass::RegIgbtShort: return tier_reg_short_a;
    case FaultClass::BatteryGround: return tier_battery_ground_a;
  }
  throw std::domain_error("load_tier_a: unknown fault class");
}

double PlantParams::initial_soc(FaultClass f) const {
  switch (f) {
    case FaultClass::NoFault: return initial_soc_none;
    case FaultClass::PvLineToLine: return initial_soc_pv_line_line;
    case FaultClass::PvOpenCircuit: return initial_soc_pv_open;
    case FaultClass::MpptIgbtOpen: return initial_soc_mppt_open;
    case FaultClass::RegIgbtOpen: return initial_soc_reg_open;
    case FaultClass::RegIgbtShort: return initial_soc_reg_short;
    case FaultClass::BatteryGround: return initial_soc_battery_ground;
  }
  throw std::domain_error("initial_soc: unknown fault class");
}

double PlantParams::load_ripple_a(FaultClass f) const {
  switch (f) {
    case FaultClass::MpptIgbtOpen: return load_ripple_mppt_open_a;
    case FaultClass::RegIgbtOpen: return load_ripple_reg_open_a;
    default: return 0.0;
  }
}

void PlantParams::validate() const {
  if (!(i_ref_a > 0.0 && i_ref_a <= 30.0))
    throw ConfigError("plant.i_ref_a must be in (0, 30]");
  if (!(v_ref_v > 0.0 && v_ref_v <= 60.0))
    throw ConfigError("plant.v_ref_v must be in (0, 60]");
  if (!(efficiency > 0.0 && efficiency <= 1.0))
    throw ConfigError("plant.efficiency must be in (0, 1]");
  if (!(k_reg > 0.0)) throw ConfigError("plant.k_reg must be > 0");
  if (!(c_batt_ah > 0.0)) throw ConfigError("plant.c_batt_ah must be > 0");
  if (!(pv_open_fraction >= 0.0 && pv_open_fraction < 1.0))
    throw ConfigError("plant.pv_open_fraction must be in [0, 1)");
  if (!(line_line_v_fraction >= 0.0 && line_line_v_fraction < 1.0))
    throw ConfigError("plant.line_line_v_fraction must be in [0, 1)");
  if (!(line_line_i_noise >= 0.0))
    throw ConfigError("plant.line_line_i_noise must be >= 0");
  if (!(mppt_scale >= 0.0 && mppt_scale <= 1.0))
    throw ConfigError("plant.mppt_scale must be in [0, 1]");
  if (!(reg_open_scale >= 0.0 && reg_open_scale <= 1.0))
    throw ConfigError("plant.reg_open_scale must be in [0, 1]");
  if (!(leak_a >= 0.0)) throw ConfigError("plant.leak_a must be >= 0");
  if (!(load_beta >= 0.0)) throw ConfigError("plant.load_beta must be >= 0");
  if (!(load_ripple_mppt_open_a >= 0.0) || !(load_ripple_reg_open_a >= 0.0)) {
    throw ConfigError("plant load ripple magnitudes must be >= 0");
  }
  if (!(ocv_shape >= 0.0 && ocv_shape < 1.0))
    throw ConfigError("plant.ocv_shape must be in [0, 1)");
  for (FaultClass f : faults::all_classes()) {
    const double s = initial_soc(f);
    if (!(s >= 0.0 && s <= 1.0))
      throw ConfigError("plant initial SOC values must be in [0, 1]");
    if (!(load_tier_a(f) >= 0.0 && load_tier_a(f) <= 50.0))
      throw ConfigError("plant load tiers must be in [0, 50] A");
  }
}

void ScenarioConfig::validate() const {
  if (sample_count < 1) throw ConfigError("simulate.sample_count must be >= 1");
  if (!(timestep_s > 0.0)) throw ConfigError("simulate.timestep_s must be > 0");
  if (!(noise_sigma_frac >= 0.0))
    throw ConfigError("simulate.noise_sigma_frac must be >= 0");
  if (!(soc_noise_sigma >= 0.0))
    throw ConfigError("simulate.soc_noise_sigma must be >= 0");
  if (!(soc_quantum >= 0.0))
    throw ConfigError("simulate.soc_quantum must be >= 0");
  if (initial_soc && !(*initial_soc >= 0.0 && *initial_soc <= 1.0))
    throw ConfigError("simulate.initial_soc must be in [0, 1]");
  plant.validate();
}

ChannelRange channel_range(const std::string& channel) {
  if (channel == "irr") return {kIrrLo, kIrrHi};
  if (channel == "temp") return {kTempLo, kTempHi};
  if (channel == "pv_v") return {0.0, 60.0};
  if (channel == "pv_i") return {0.0, 30.0};
  if (channel == "bus_v") return {0.0, 100.0};
  if (channel == "load_i") return {0.0, 50.0};
  if (channel == "soc") return {0.0, 1.0};
  if (channel == "cell_v") return {3.0, 4.2};
  throw std::domain_error("channel_range: unknown channel " + channel);
}

std::vector<EnvSample> generate_env_profile(int count, std::uint64_t seed) {
  if (count < 1) {
    throw std::domain_error("generate_env_profile: count must be >= 1");
  }

  rng::SplitMix64 stream(rng::derive(seed, "envsim.profile"));

  // Deterministic triangular sweeps guarantee range coverage; the seeded
  // phase, period jitter and smoothed random wiggle differentiate profiles.
  const double irr_mid = 0.5 * (kIrrLo + kIrrHi);
  const double irr_amp = 0.47 * (kIrrHi - kIrrLo);
  const double temp_mid = 0.5 * (kTempLo + kTempHi);
  const double temp_amp = 0.47 * (kTempHi - kTempLo);

  const double irr_period = 400.0 * (0.9 + 0.2 * stream.uniform());
  const double temp_period = 553.0 * (0.9 + 0.2 * stream.uniform());
  const double irr_phase = stream.uniform();
  const double temp_phase = stream.uniform();

  double irr_wiggle = 0.0;
  double temp_wiggle = 0.0;
  const double irr_step = 0.012 * (kIrrHi - kIrrLo);
  const double temp_step = 0.012 * (kTempHi - kTempLo);
  const double smooth = 0.12;  // EMA factor; keeps the walk band-limited

  std::vector<EnvSample> profile;
  profile.reserve(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) {
    irr_wiggle += smooth * (irr_step * stream.gaussian() - irr_wiggle);
    temp_wiggle += smooth * (temp_step * stream.gaussian() - temp_wiggle);

    EnvSample s;
    s.irradiance_w_m2 =
        clamp(irr_mid + irr_amp * triangle(irr_phase + t / irr_period) +
                  irr_wiggle,
              kIrrLo, kIrrHi);
    s.temperature_c =
        clamp(temp_mid + temp_amp * triangle(temp_phase + t / temp_period) +
                  temp_wiggle,
              kTempLo, kTempHi);
    profile.push_back(s);
  }
  return profile;
}

PvOutput pv_response(const EnvSample& env, FaultClass fault,
                     const PlantParams& p) {
  p.validate();
  const double irr = env.irradiance_w_m2;
  const double dt = env.temperature_c - 25.0;

  double current = p.i_ref_a * (irr / 1000.0) * (1.0 + p.alpha_i_per_c * dt);
  double voltage = p.v_ref_v * (1.0 + p.alpha_v_per_c * dt);

  switch (fault) {
    case FaultClass::PvOpenCircuit:
      current *= 1.0 - p.pv_open_fraction;
      break;
    case FaultClass::PvLineToLine:
      voltage *= 1.0 - p.line_line_v_fraction;
      break;
    default:
      break;
  }

  PvOutput out;
  out.current_a = clamp(current, 0.0, 30.0);
  out.voltage_v = clamp(voltage, 0.0, 60.0);
  return out;
}

ConverterOutput converter_chain(const PvOutput& pv, FaultClass fault,
                                const PlantParams& p) {
  const double p_in = pv.voltage_v * pv.current_a;
  if (p_in <= 0.0) return {0.0, 0.0};

  double bus = p.k_reg * p.v_bus_reg_v;
  double scale = 1.0;
  switch (fault) {
    case FaultClass::RegIgbtShort:
      bus = pv.voltage_v;  // regulation lost, bus tracks the array
      break;
    case FaultClass::MpptIgbtOpen:
      scale = p.mppt_scale;
      break;
    case FaultClass::RegIgbtOpen:
      scale = p.reg_open_scale;
      break;
    default:
      break;
  }

  ConverterOutput out;
  out.bus_voltage_v = clamp(bus, 0.0, 100.0);
  out.current_a =
      out.bus_voltage_v > 0.0
          ? scale * p.efficiency * p_in / out.bus_voltage_v
          : 0.0;
  return out;
}

BatteryState battery_step(const BatteryState& state, double net_current_a,
                          double dt_s, FaultClass fault,
                          const PlantParams& p) {
  if (!(dt_s > 0.0)) throw std::domain_error("battery_step: dt must be > 0");

  double net = net_current_a;
  if (fault == FaultClass::BatteryGround) net += p.leak_a;

  BatteryState next;
  next.saturated = false;
  if (std::abs(net) > p.i_batt_max_a) {
    net = clamp(net, -p.i_batt_max_a, p.i_batt_max_a);
    next.saturated = true;
  }
  next.current_a = net;

  const double capacity_c = p.c_batt_ah * 3600.0;
  double soc = state.soc - net * dt_s / capacity_c;
  if (soc < 0.0 || soc > 1.0) {
    soc = clamp(soc, 0.0, 1.0);
    next.saturated = true;
  }
  next.soc = soc;

  // Monotone open-circuit curve: steep near the rails, flat mid-range.
  const double a = p.ocv_shape;
  const double g =
      soc + a / (2.0 * std::numbers::pi) * std::sin(2.0 * std::numbers::pi * soc);
  next.cell_voltage_v = 3.0 + 1.2 * g;
  return next;
}

std::int64_t ClampStats::total() const {
  std::int64_t t = 0;
  for (const auto& [k, v] : counts) t += v;
  return t;
}

namespace {

/// Adds measurement noise and clamps to the channel range, counting clamps.
double observe(double value, const std::string& channel, double sigma,
               rng::SplitMix64& noise, ClampStats& clamps) {
  const ChannelRange r = channel_range(channel);
  double v = value + sigma * noise.gaussian();
  if (v < r.lo || v > r.hi) {
    v = clamp(v, r.lo, r.hi);
    ++clamps.counts[channel];
  }
  return v;
}

}  // namespace

SimulationResult simulate(const ScenarioConfig& config) {
  config.validate();
  const PlantParams& p = config.plant;
  const FaultClass fault = config.fault;
  const double dt = config.timestep_s;

  const std::vector<EnvSample> profile =
      generate_env_profile(config.sample_count, config.seed);
  rng::SplitMix64 noise(rng::derive(config.seed, "envsim.noise"));
  rng::SplitMix64 disturbance(rng::derive(config.seed, "envsim.disturbance"));

  SimulationResult result;
  result.samples.reserve(profile.size());

  BatteryState battery;
  battery.soc = config.initial_soc.value_or(p.initial_soc(fault));
  const double a = p.ocv_shape;
  battery.cell_voltage_v =
      3.0 + 1.2 * (battery.soc + a / (2.0 * std::numbers::pi) *
                                     std::sin(2.0 * std::numbers::pi *
                                              battery.soc));

  const double tier = p.load_tier_a(fault);
  const double ripple = p.load_ripple_a(fault);

  for (std::size_t t = 0; t < profile.size(); ++t) {
    const EnvSample& env = profile[t];

    PvOutput pv = pv_response(env, fault, p);
    if (fault == FaultClass::PvLineToLine && p.line_line_i_noise > 0.0) {
      // Arc disturbance in the bridged string; propagates down the chain.
      pv.current_a = clamp(
          pv.current_a * (1.0 + p.line_line_i_noise * disturbance.gaussian()),
          0.0, 30.0);
    }

    const ConverterOutput conv = converter_chain(pv, fault, p);

    // Sun-proxy current: the power manager duty-cycles payloads against its
    // irradiance model of the healthy chain, not the live converter.
    const PvOutput pv_h = pv_response(env, FaultClass::NoFault, p);
    const double h =
        p.efficiency * pv_h.voltage_v * pv_h.current_a / p.v_bus_reg_v;
    double load = tier + p.load_beta * h;
    if (ripple > 0.0) {
      load = std::max(0.0, load + ripple * disturbance.gaussian());
    }

    // Battery-clamped bus: the battery absorbs the full converter/load
    // imbalance (surplus beyond the current bound goes to the shunt).
    const double net_batt = load - conv.current_a;  // + = discharge
    battery = battery_step(battery, net_batt, dt, fault, p);

    SystemSample s;
    s.time_s = static_cast<double>(t) * dt;
    s.fault = fault;

    const double frac = config.noise_sigma_frac;
    s.env.irradiance_w_m2 =
        observe(env.irradiance_w_m2, "irr", frac * channel_range("irr").width(),
                noise, result.clamps);
    s.env.temperature_c =
        observe(env.temperature_c, "temp", frac * channel_range("temp").width(),
                noise, result.clamps);
    s.pv.voltage_v = observe(pv.voltage_v, "pv_v",
                             frac * channel_range("pv_v").width(), noise,
                             result.clamps);
    s.pv.current_a = observe(pv.current_a, "pv_i",
                             frac * channel_range("pv_i").width(), noise,
                             result.clamps);
    s.bus_voltage_v = observe(conv.bus_voltage_v, "bus_v",
                              frac * channel_range("bus_v").width(), noise,
                              result.clamps);
    s.load_current_a = observe(load, "load_i",
                               frac * channel_range("load_i").width(), noise,
                               result.clamps);
    s.battery.soc = observe(battery.soc, "soc", config.soc_noise_sigma, noise,
                            result.clamps);
    if (config.soc_quantum > 0.0) {
      // coulomb-counter register LSB
      s.battery.soc = std::round(s.battery.soc / config.soc_quantum) *
                      config.soc_quantum;
    }
    s.battery.cell_voltage_v =
        observe(battery.cell_voltage_v, "cell_v",
                frac * channel_range("cell_v").width(), noise, result.clamps);
    s.battery.current_a = battery.current_a;
    s.battery.saturated = battery.saturated;

    result.samples.push_back(s);
  }
  return result;
}

}  // namespace epsdiag::sim
