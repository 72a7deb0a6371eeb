#include <doctest.h>

#include "epsdiag/config.hpp"
#include "epsdiag/errors.hpp"

using namespace epsdiag;

TEST_CASE("defaults are valid and hash-stable") {
  app::RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.config_hash() == app::RunConfig{}.config_hash());
  CHECK(cfg.sample_count == 2001);
  CHECK(cfg.task == bank::Task::System5);
}

TEST_CASE("parsing overlays the defaults") {
  const std::string text = R"(
# comment
[simulate]
task = pv
sample_count = 500
seed = 77

[train]
hidden = 6

[classify]
knn_k = 5
pca_center = false
)";
  const auto cfg = app::parse_config_text(text, "test.ini");
  CHECK(cfg.task == bank::Task::Pv3);
  CHECK(cfg.sample_count == 500);
  CHECK(cfg.seed == 77);
  CHECK(cfg.hidden == 6);
  CHECK(cfg.knn_k == 5);
  CHECK(cfg.pca_center == false);
  // untouched keys keep their defaults
  CHECK(cfg.folds == app::RunConfig{}.folds);
  CHECK(cfg.config_hash() != app::RunConfig{}.config_hash());
}

TEST_CASE("unknown keys are rejected by name") {
  try {
    app::parse_config_text("[simulate]\nwarp_factor = 9\n", "bad.ini");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("simulate.warp_factor") != std::string::npos);
  }
  CHECK_THROWS_AS(app::parse_config_text("[warp]\nx = 1\n", "bad.ini"),
                  ConfigError);
  CHECK_THROWS_AS(
      app::parse_config_text("[simulate]\nsample_count = many\n", "bad.ini"),
      ConfigError);
  CHECK_THROWS_AS(app::parse_config_text("stray = 1\n", "bad.ini"),
                  ConfigError);
}

TEST_CASE("rate overrides") {
  const auto cfg = app::parse_config_text(
      "[rates]\nbattery = 1e-7, 4e-7\ndiode = 2e-9\n", "rates.ini");
  CHECK(cfg.rates.at("battery").lambda_min == 1e-7);
  CHECK(cfg.rates.at("battery").lambda_max == 4e-7);
  CHECK(cfg.rates.at("diode").lambda_min == 2e-9);
  CHECK(cfg.rates.at("diode").lambda_max == 2e-9);
  CHECK_THROWS_AS(
      app::parse_config_text("[rates]\nflux_capacitor = 1e-9\n", "r.ini"),
      ConfigError);
}

TEST_CASE("invalid values fail validation") {
  CHECK_THROWS_AS(
      app::parse_config_text("[simulate]\nsample_count = 0\n", "v.ini"),
      ConfigError);
  CHECK_THROWS_AS(
      app::parse_config_text("[classify]\nfolds = 1\n", "v.ini"),
      ConfigError);
  CHECK_THROWS_AS(
      app::parse_config_text("[faults]\nefficiency = 1.5\n", "v.ini"),
      ConfigError);
}

TEST_CASE("fault parameters flow into scenarios") {
  const auto cfg = app::parse_config_text(
      "[faults]\nleak_a = 2.5\ntier_none_a = 10\n[simulate]\nsoc_quantum = 0\n",
      "f.ini");
  const auto scenario = cfg.scenario(faults::FaultClass::NoFault, 5);
  CHECK(scenario.plant.leak_a == 2.5);
  CHECK(scenario.plant.tier_none_a == 10.0);
  CHECK(scenario.soc_quantum == 0.0);
  CHECK(scenario.seed == 5);
}

TEST_CASE("canonical text covers every section") {
  const std::string canon = app::RunConfig{}.canonical_text();
  for (const char* section :
       {"[simulate]", "[faults]", "[rates]", "[train]", "[classify]",
        "[report]"}) {
    CHECK(canon.find(section) != std::string::npos);
  }
  // canonical text re-parses to the same configuration
  const auto reparsed = app::parse_config_text(canon, "canon.ini");
  CHECK(reparsed.config_hash() == app::RunConfig{}.config_hash());
}
