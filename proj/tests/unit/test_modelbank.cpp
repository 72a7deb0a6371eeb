#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "epsdiag/envsim.hpp"
#include "epsdiag/errors.hpp"
#include "epsdiag/modelbank.hpp"

using namespace epsdiag;
using faults::FaultClass;

namespace {

/// Small, fast scenario set for bank tests.
std::vector<std::pair<FaultClass, std::vector<sim::SystemSample>>>
make_datasets(bank::Task task, int count = 401, std::uint64_t seed = 3) {
  std::vector<std::pair<FaultClass, std::vector<sim::SystemSample>>> out;
  std::uint64_t s = seed;
  for (FaultClass f : bank::task_classes(task)) {
    sim::ScenarioConfig cfg;
    cfg.sample_count = count;
    cfg.seed = ++s;
    cfg.fault = f;
    out.emplace_back(f, sim::simulate(cfg).samples);
  }
  return out;
}

bank::FitOptions fast_options() {
  bank::FitOptions o;
  o.hidden = 6;
  o.seed = 17;
  o.train.max_epochs = 80;
  return o;
}

}  // namespace

TEST_CASE("fit_bank produces one model per task class") {
  SUBCASE("pv task") {
    const auto bank =
        bank::fit_bank(bank::Task::Pv3, make_datasets(bank::Task::Pv3),
                       fast_options());
    CHECK(bank.models.size() == 3);
    for (const auto& m : bank.models) {
      CHECK(std::isfinite(m.validation_mse));
      CHECK(m.net.outputs() == 2);  // (V, I)
    }
  }
  SUBCASE("system task") {
    const auto bank = bank::fit_bank(
        bank::Task::System5, make_datasets(bank::Task::System5),
        fast_options());
    CHECK(bank.models.size() == 5);
    for (const auto& m : bank.models) CHECK(m.net.outputs() == 1);
  }
}

TEST_CASE("fit_bank rejects bad dataset maps") {
  auto data = make_datasets(bank::Task::Pv3);
  SUBCASE("duplicate class") {
    data.push_back(data.front());
    CHECK_THROWS_AS(bank::fit_bank(bank::Task::Pv3, data, fast_options()),
                    ConfigError);
  }
  SUBCASE("missing class") {
    data.pop_back();
    CHECK_THROWS_AS(bank::fit_bank(bank::Task::Pv3, data, fast_options()),
                    ConfigError);
  }
  SUBCASE("undersized dataset") {
    data.back().second.resize(50);
    CHECK_THROWS_AS(bank::fit_bank(bank::Task::Pv3, data, fast_options()),
                    ConfigError);
  }
  SUBCASE("class outside the task") {
    data.back().first = FaultClass::MpptIgbtOpen;
    CHECK_THROWS_AS(bank::fit_bank(bank::Task::Pv3, data, fast_options()),
                    ConfigError);
  }
}

TEST_CASE("residuals") {
  const auto datasets = make_datasets(bank::Task::System5);
  const auto mb =
      bank::fit_bank(bank::Task::System5, datasets, fast_options());

  SUBCASE("zero residual when the observation equals the prediction") {
    const Eigen::VectorXd pred = mb.predict(0, 800.0, 10.0);
    const auto r = bank::residuals(mb, pred, 800.0, 10.0);
    REQUIRE(r.values.size() == 5);
    CHECK(r.values[0] == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("pv task stacks (dV, dI) per model") {
    const auto pv_bank =
        bank::fit_bank(bank::Task::Pv3, make_datasets(bank::Task::Pv3),
                       fast_options());
    const Eigen::VectorXd pred = pv_bank.predict(1, 700.0, 30.0);
    const auto r = bank::residuals(pv_bank, pred, 700.0, 30.0);
    REQUIRE(r.values.size() == 6);
    CHECK(r.values[2] == doctest::Approx(0.0).epsilon(1e-12));  // dV model 1
    CHECK(r.values[3] == doctest::Approx(0.0).epsilon(1e-12));  // dI model 1
  }

  SUBCASE("residual linearity: shifting y shifts every residual equally") {
    Eigen::VectorXd y(1);
    y << 12.0;
    const auto r0 = bank::residuals(mb, y, 700.0, 20.0);
    const double delta = 0.75;
    Eigen::VectorXd y2 = y.array() + delta;
    const auto r1 = bank::residuals(mb, y2, 700.0, 20.0);
    for (std::size_t i = 0; i < r0.values.size(); ++i) {
      CHECK(r1.values[i] - r0.values[i] == doctest::Approx(delta));
    }
  }

  SUBCASE("own-class residual is the smallest in median magnitude") {
    // Healthy telemetry through the fitted bank: model 0 should win.
    std::vector<std::vector<double>> abs_r(5);
    for (const auto& s : datasets[0].second) {
      const auto r = bank::residuals(mb, s);
      for (int m = 0; m < 5; ++m) {
        abs_r[static_cast<std::size_t>(m)].push_back(
            std::abs(r.values[static_cast<std::size_t>(m)]));
      }
    }
    std::vector<double> medians;
    for (auto& v : abs_r) {
      std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
      medians.push_back(v[v.size() / 2]);
    }
    for (int m = 1; m < 5; ++m) CHECK(medians[0] < medians[m]);
  }

  SUBCASE("shape mismatch") {
    Eigen::VectorXd y(2);
    y << 1.0, 2.0;
    CHECK_THROWS_AS(bank::residuals(mb, y, 700.0, 20.0), ShapeError);
  }
}

TEST_CASE("running moment") {
  bank::RunningMoment m;
  m = bank::update_moment(m, 5.0);
  CHECK(m.mean == 5.0);
  CHECK(m.count == 1);
  m = bank::update_moment({}, 2.0);
  m = bank::update_moment(m, 4.0);
  CHECK(m.mean == doctest::Approx(3.0));

  SUBCASE("constant stream stays exact") {
    bank::RunningMoment c;
    for (int i = 0; i < 1000; ++i) c = bank::update_moment(c, 7.25);
    CHECK(c.mean == doctest::Approx(7.25).epsilon(1e-12));
  }

  SUBCASE("streaming equals batch mean") {
    std::vector<double> xs = {1.5, -2.0, 4.25, 0.0, 9.5, -3.125};
    bank::RunningMoment s;
    double sum = 0.0;
    for (double x : xs) {
      s = bank::update_moment(s, x);
      sum += x;
    }
    CHECK(s.mean == doctest::Approx(sum / xs.size()).epsilon(1e-12));
  }
}

TEST_CASE("feature building") {
  bank::ResidualVector r;
  r.values = {1.0, 2.0, 3.0, 4.0, 5.0};

  SUBCASE("i1 is the residual vector") {
    const auto f = bank::build_features(bank::FeatureKind::I1, r, nullptr);
    CHECK(f.values == std::vector<double>{1.0, 2.0, 3.0, 4.0, 5.0});
  }
  SUBCASE("i2 interleaves residuals and moments") {
    std::vector<bank::RunningMoment> moments(5);
    const auto f = bank::build_features(bank::FeatureKind::I2, r, &moments);
    CHECK(f.values ==
          std::vector<double>{1, 0, 2, 0, 3, 0, 4, 0, 5, 0});
    CHECK(f.values.size() == 2 * r.values.size());
  }
  SUBCASE("i2 without moments is a configuration error") {
    CHECK_THROWS_AS(bank::build_features(bank::FeatureKind::I2, r, nullptr),
                    ConfigError);
    std::vector<bank::RunningMoment> three(3);
    CHECK_THROWS_AS(bank::build_features(bank::FeatureKind::I2, r, &three),
                    ConfigError);
  }
}

TEST_CASE("bank serialization round-trip") {
  namespace fs = std::filesystem;
  const auto mb =
      bank::fit_bank(bank::Task::Pv3, make_datasets(bank::Task::Pv3),
                     fast_options());
  const fs::path dir = fs::temp_directory_path() / "epsdiag_bank_test";
  fs::remove_all(dir);
  bank::save_bank(mb, dir.string());

  CHECK(fs::exists(dir / "bank.json"));
  CHECK(fs::exists(dir / "model_none.mlp"));
  CHECK(fs::exists(dir / "model_pv_line_line.mlp"));
  CHECK(fs::exists(dir / "model_pv_open.mlp"));

  const auto loaded = bank::load_bank(dir.string());
  CHECK(loaded.task == bank::Task::Pv3);
  REQUIRE(loaded.models.size() == mb.models.size());
  for (std::size_t i = 0; i < mb.models.size(); ++i) {
    const Eigen::VectorXd a = mb.predict(static_cast<int>(i), 650.0, 12.0);
    const Eigen::VectorXd b = loaded.predict(static_cast<int>(i), 650.0, 12.0);
    CHECK(a == b);  // bit-exact through the text format
  }
  fs::remove_all(dir);
}
