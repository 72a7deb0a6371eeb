#include "epsdiag/faults.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "epsdiag/rng.hpp"

namespace epsdiag::faults {

namespace {

struct TokenEntry {
  FaultClass f;
  std::string_view token;
};

constexpr TokenEntry kTokens[] = {
    {FaultClass::NoFault, "none"},
    {FaultClass::PvLineToLine, "pv_line_line"},
    {FaultClass::PvOpenCircuit, "pv_open"},
    {FaultClass::MpptIgbtOpen, "mppt_igbt_open"},
    {FaultClass::RegIgbtOpen, "reg_igbt_open"},
    {FaultClass::RegIgbtShort, "reg_igbt_short"},
    {FaultClass::BatteryGround, "battery_ground"},
};

}  // namespace

std::string_view to_token(FaultClass f) {
  for (const auto& e : kTokens) {
    if (e.f == f) return e.token;
  }
  throw std::domain_error("unknown FaultClass value");
}

std::optional<FaultClass> from_token(std::string_view token) {
  for (const auto& e : kTokens) {
    if (e.token == token) return e.f;
  }
  return std::nullopt;
}

const std::vector<FaultClass>& all_classes() {
  static const std::vector<FaultClass> v = {
      FaultClass::NoFault,      FaultClass::PvLineToLine,
      FaultClass::PvOpenCircuit, FaultClass::MpptIgbtOpen,
      FaultClass::RegIgbtOpen,  FaultClass::RegIgbtShort,
      FaultClass::BatteryGround,
  };
  return v;
}

const std::vector<FaultClass>& system_task_classes() {
  static const std::vector<FaultClass> v = {
      FaultClass::NoFault,      FaultClass::BatteryGround,
      FaultClass::MpptIgbtOpen, FaultClass::RegIgbtOpen,
      FaultClass::RegIgbtShort,
  };
  return v;
}

const std::vector<FaultClass>& pv_task_classes() {
  static const std::vector<FaultClass> v = {
      FaultClass::NoFault,
      FaultClass::PvLineToLine,
      FaultClass::PvOpenCircuit,
  };
  return v;
}

double fault_rate(double t_int_hours, std::uint64_t n_fail,
                  std::uint64_t n_total) {
  if (!(t_int_hours > 0.0)) {
    throw std::domain_error("fault_rate: t_int must be > 0 hours");
  }
  if (n_total == 0) {
    throw std::domain_error("fault_rate: total element count must be >= 1");
  }
  if (n_fail > n_total) {
    throw std::domain_error("fault_rate: n_fail exceeds n_total");
  }
  return (1.0 / t_int_hours) *
         (static_cast<double>(n_fail) / static_cast<double>(n_total));
}

const std::map<std::string, RateBand>& default_rates() {
  static const std::map<std::string, RateBand> rates = {
      {"transistor", {1e-9, 70e-9}},
      {"thyristor", {36e-9, 360e-9}},
      {"digital_ic", {30e-9, 30e-9}},
      {"logic", {30e-9, 30e-9}},
      {"analog_switch", {2000e-9, 2000e-9}},
      {"amplifier", {300e-9, 900e-9}},
      {"diode", {1e-9, 6e-9}},
      {"battery", {200e-9, 300e-9}},
      {"solar_array", {100e-9, 200e-9}},
  };
  return rates;
}

FaultClass component_fault_class(std::string_view component) {
  // Power-path components map to the fault their failure would express;
  // control-electronics rows map to the converter stage they drive.
  if (component == "solar_array") return FaultClass::PvOpenCircuit;
  if (component == "diode") return FaultClass::PvLineToLine;
  if (component == "battery") return FaultClass::BatteryGround;
  if (component == "transistor") return FaultClass::MpptIgbtOpen;
  if (component == "amplifier") return FaultClass::MpptIgbtOpen;
  if (component == "thyristor") return FaultClass::RegIgbtShort;
  if (component == "analog_switch") return FaultClass::RegIgbtShort;
  if (component == "digital_ic") return FaultClass::RegIgbtOpen;
  if (component == "logic") return FaultClass::RegIgbtOpen;
  return FaultClass::NoFault;
}

FaultSchedule sample_schedule(const std::map<std::string, RateBand>& rates,
                              double horizon_hours, std::uint64_t seed) {
  if (!(horizon_hours > 0.0)) {
    throw std::domain_error("sample_schedule: horizon must be > 0 hours");
  }
  FaultSchedule schedule;
  rng::SplitMix64 stream(rng::derive(seed, "faults.schedule"));
  // std::map iterates keys lexicographically; the u-draw order is therefore
  // a documented function of the rate table alone.
  for (const auto& [component, band] : rates) {
    const double lambda = band.midpoint();
    const double u = stream.uniform_open0();
    if (lambda <= 0.0) continue;
    const double t_hours = -std::log(u) / lambda;
    if (t_hours > horizon_hours) continue;
    schedule.events.push_back({t_hours * 3600.0,
                               component_fault_class(component), component});
  }
  std::sort(schedule.events.begin(), schedule.events.end(),
            [](const auto& a, const auto& b) {
              return a.onset_time_s < b.onset_time_s;
            });
  return schedule;
}

}  // namespace epsdiag::faults
