#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace epsdiag::faults {

/// The seven diagnosable system states. Closed set; canonical string tokens
/// are the wire format used in every CSV and report.
enum class FaultClass : int {
  NoFault = 0,
  PvLineToLine,
  PvOpenCircuit,
  MpptIgbtOpen,
  RegIgbtOpen,
  RegIgbtShort,
  BatteryGround,
};

inline constexpr int kFaultClassCount = 7;

/// Canonical token, e.g. FaultClass::NoFault -> "none".
std::string_view to_token(FaultClass f);

/// Inverse of to_token. Returns nullopt for unknown tokens.
std::optional<FaultClass> from_token(std::string_view token);

/// All seven classes in enum order.
const std::vector<FaultClass>& all_classes();

/// The 5-class electrical power system task:
/// none, battery_ground, mppt_igbt_open, reg_igbt_open, reg_igbt_short.
const std::vector<FaultClass>& system_task_classes();

/// The 3-class photovoltaic task: none, pv_line_line, pv_open.
const std::vector<FaultClass>& pv_task_classes();

/// Component fault rate: lambda failures per hour, referenced to 40 degC.
struct FaultRate {
  double lambda_per_h = 0.0;
  std::string component;
  double temperature_ref_c = 40.0;
};

/// Inclusive [min, max] band of per-hour rates. Single-valued table rows are
/// degenerate bands [v, v].
struct RateBand {
  double lambda_min = 0.0;
  double lambda_max = 0.0;

  double midpoint() const { return 0.5 * (lambda_min + lambda_max); }
};

/// lambda = (1 / t_int) * (n_fail / n_total), exact on rational inputs.
/// Throws std::domain_error when t_int <= 0, n_total == 0, or n_fail > n_total.
double fault_rate(double t_int_hours, std::uint64_t n_fail,
                  std::uint64_t n_total);

/// Reference fault-rate bands at 40 degC, keyed by component name:
/// transistor, thyristor, digital_ic, logic, analog_switch, amplifier,
/// diode, battery, solar_array.
const std::map<std::string, RateBand>& default_rates();

/// Failure events ordered by onset; onset times strictly increasing.
struct FaultSchedule {
  struct Event {
    double onset_time_s = 0.0;
    FaultClass fault = FaultClass::NoFault;
    std::string component;
  };
  std::vector<Event> events;
};

/// First-failure sampling: one exponential draw per component (rate = band
/// midpoint), t = -ln(u) / lambda with u drawn from a SplitMix64 stream
/// seeded by `seed`, components visited in lexicographic key order. Events
/// past the horizon (hours) are dropped; lambda == 0 never fires.
FaultSchedule sample_schedule(const std::map<std::string, RateBand>& rates,
                              double horizon_hours, std::uint64_t seed);

/// Component -> fault-class association used by sample_schedule.
FaultClass component_fault_class(std::string_view component);

}  // namespace epsdiag::faults
