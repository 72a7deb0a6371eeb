#include <doctest.h>

#include <sstream>

#include "epsdiag/envsim.hpp"
#include "epsdiag/errors.hpp"
#include "epsdiag/telemetry.hpp"

using namespace epsdiag;

TEST_CASE("telemetry CSV round-trips exactly") {
  sim::ScenarioConfig cfg;
  cfg.sample_count = 50;
  cfg.fault = faults::FaultClass::RegIgbtShort;
  const auto result = sim::simulate(cfg);

  std::ostringstream out;
  io::write_telemetry_csv(out, result.samples);

  std::istringstream in(out.str());
  const auto loaded = io::read_telemetry_csv(in, "buffer");
  REQUIRE(loaded.size() == result.samples.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].time_s == result.samples[i].time_s);
    CHECK(loaded[i].env.irradiance_w_m2 ==
          result.samples[i].env.irradiance_w_m2);
    CHECK(loaded[i].load_current_a == result.samples[i].load_current_a);
    CHECK(loaded[i].battery.soc == result.samples[i].battery.soc);
    CHECK(loaded[i].fault == result.samples[i].fault);
  }
}

TEST_CASE("telemetry header is mandatory and exact") {
  CHECK(std::string(io::kTelemetryHeader) ==
        "time_s,irr_w_m2,temp_c,pv_v,pv_i,bus_v,load_i_a,soc,cell_v,"
        "fault_class");
  std::istringstream bad("time,irr\n1,2\n");
  CHECK_THROWS_AS(io::read_telemetry_csv(bad, "bad"), FormatError);
}

TEST_CASE("telemetry parse errors carry file and line") {
  const std::string text = std::string(io::kTelemetryHeader) +
                           "\n0,1000,25,40,20,48,14,0.7,3.9,none\n"
                           "1,1000,25,40,20,48,14,0.7,3.9,gremlin\n";
  std::istringstream in(text);
  try {
    io::read_telemetry_csv(in, "t.csv");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.file() == "t.csv");
    CHECK(e.line() == 3);
  }

  std::istringstream short_row(std::string(io::kTelemetryHeader) +
                               "\n0,1000,25\n");
  CHECK_THROWS_AS(io::read_telemetry_csv(short_row, "s.csv"), FormatError);
}

TEST_CASE("feature CSV layout") {
  Eigen::MatrixXd features(2, 3);
  features << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  std::vector<faults::FaultClass> labels = {faults::FaultClass::NoFault,
                                            faults::FaultClass::BatteryGround};
  std::ostringstream out;
  io::write_feature_csv(out, "i1", features, labels);

  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "sample_id,kind,f0,f1,f2,label");
  std::getline(in, line);
  CHECK(line == "0,i1,1,2,3,none");
  std::getline(in, line);
  CHECK(line == "1,i1,4,5,6,battery_ground");
}

TEST_CASE("fmt17 round-trips doubles") {
  for (double v : {0.1, 1.0 / 3.0, 2.280744034782031e-06, -17.125}) {
    CHECK(std::stod(io::fmt17(v)) == v);
  }
}
