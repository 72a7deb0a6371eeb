#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "epsdiag/config.hpp"
#include "epsdiag/errors.hpp"
#include "epsdiag/pipeline.hpp"

using namespace epsdiag;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Desk-scale configuration so the integration suite runs in seconds.
app::RunConfig small_config() {
  return app::parse_config_text(R"(
[simulate]
sample_count = 401
seed = 11
[train]
hidden = 6
max_epochs = 60
[classify]
mlp_hidden = 8
mlp_max_epochs = 25
folds = 5
knn_curve_k_max = 15
)",
                                "small.ini");
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "epsdiag_it" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EPSDIAG_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("gen-data writes one telemetry file per class plus a manifest") {
  const auto cfg = small_config();
  const app::RunOptions opts{true, true};

  SUBCASE("system task: 5 files") {
    const fs::path dir = fresh_dir("gen_sys");
    const auto files = app::cmd_gen_data(cfg, opts, dir.string());
    CHECK(files.size() == 5);
    for (const auto& f : files) {
      const std::string text = slurp(dir / f);
      CHECK(count_lines(text) == 402);  // header + sample_count
    }
    CHECK(fs::exists(dir / "manifest.json"));
    // exactly one manifest in the directory
    int manifests = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
      manifests += e.path().filename() == "manifest.json";
    }
    CHECK(manifests == 1);

    const json manifest = json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["tool"] == "epsdiag");
    CHECK(manifest["seed"] == 11);
    CHECK(!manifest.contains("timestamp_utc"));  // --no-timestamp
  }

  SUBCASE("pv task: 3 files") {
    auto pv = cfg;
    pv.task = bank::Task::Pv3;
    const fs::path dir = fresh_dir("gen_pv");
    const auto files = app::cmd_gen_data(pv, opts, dir.string());
    CHECK(files.size() == 3);
  }

  SUBCASE("rerun is byte-identical") {
    const fs::path a = fresh_dir("gen_a");
    const fs::path b = fresh_dir("gen_b");
    app::cmd_gen_data(cfg, opts, a.string());
    app::cmd_gen_data(cfg, opts, b.string());
    for (const auto& e : fs::directory_iterator(a)) {
      CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    }
  }
}

TEST_CASE("fit-bank and feature building") {
  const auto cfg = small_config();
  const app::RunOptions opts{true, true};
  const fs::path data = fresh_dir("fb_data");
  const fs::path bank_dir = fresh_dir("fb_bank");
  app::cmd_gen_data(cfg, opts, data.string());
  const auto fitted =
      app::cmd_fit_bank(cfg, opts, data.string(), bank_dir.string());
  CHECK(fitted.models.size() == 5);
  CHECK(fs::exists(bank_dir / "bank.json"));
  CHECK(fs::exists(bank_dir / "train_reports.json"));
  int mlp_files = 0;
  for (const auto& e : fs::directory_iterator(bank_dir)) {
    mlp_files += e.path().extension() == ".mlp";
  }
  CHECK(mlp_files == 5);

  SUBCASE("missing class file is a named error") {
    fs::remove(data / "telemetry_battery_ground.csv");
    try {
      app::cmd_fit_bank(cfg, opts, data.string(), bank_dir.string());
      FAIL("expected runtime_error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("battery_ground") != std::string::npos);
    }
  }

  SUBCASE("corrupt model file on reload names file and line") {
    const fs::path model = bank_dir / "model_none.mlp";
    std::ofstream out(model, std::ios::binary);
    out << "mlp-v1\n2 6 1\nnot-a-number\n";
    out.close();
    try {
      bank::load_bank(bank_dir.string());
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("model_none.mlp") != std::string::npos);
      CHECK(e.line() == 3);
    }
  }

  SUBCASE("task datasets have the documented shapes") {
    const auto datasets =
        app::build_task_datasets(cfg, fitted, data.string());
    CHECK(datasets.i1.dims() == 5);
    CHECK(datasets.i2.dims() == 10);
    CHECK(datasets.raw.dims() == 2);
    CHECK(datasets.i1.n() == 5 * 401);
    CHECK(datasets.i2.labels == datasets.raw.labels);
  }
}

TEST_CASE("train-eval emits report, confusion, features and loss curve") {
  const auto cfg = small_config();
  const app::RunOptions opts{true, true};
  const fs::path data = fresh_dir("te_data");
  const fs::path bank_dir = fresh_dir("te_bank");
  app::cmd_gen_data(cfg, opts, data.string());
  app::cmd_fit_bank(cfg, opts, data.string(), bank_dir.string());

  SUBCASE("knn") {
    const fs::path out = fresh_dir("te_knn");
    const std::string text = app::cmd_train_eval(
        cfg, opts, bank_dir.string(), data.string(), "knn", out.string());
    const json report = json::parse(text);
    CHECK(report["evaluation"]["method"] == "knn");
    CHECK(report["evaluation"].contains("overall_accuracy"));
    CHECK(report["evaluation"]["loss"].contains("resubstitution"));
    CHECK(fs::exists(out / "confusion.csv"));
    CHECK(fs::exists(out / "features.csv"));

    const std::string curve = slurp(out / "loss_curve.csv");
    CHECK(count_lines(curve) == 16);  // header + k=1..15
    CHECK(curve.rfind("k,resubstitution_loss,kfold_loss\n", 0) == 0);
  }

  SUBCASE("pca report carries eigenvalues and intervals") {
    const fs::path out = fresh_dir("te_pca");
    const std::string text = app::cmd_train_eval(
        cfg, opts, bank_dir.string(), data.string(), "pca", out.string());
    const json report = json::parse(text);
    CHECK(report["evaluation"]["eigenvalues"].size() == 2);
    CHECK(report["evaluation"]["class_intervals"].size() == 5);
  }

  SUBCASE("mlp_i2 reports overall accuracy") {
    const fs::path out = fresh_dir("te_mlp");
    const std::string text = app::cmd_train_eval(
        cfg, opts, bank_dir.string(), data.string(), "mlp_i2", out.string());
    const json report = json::parse(text);
    CHECK(report["evaluation"]["overall_accuracy"].get<double>() > 0.2);
  }

  SUBCASE("pv task supports residual features but has no i2") {
    auto pv = cfg;
    pv.task = bank::Task::Pv3;
    const fs::path pv_data = fresh_dir("te_pv_data");
    const fs::path pv_bank = fresh_dir("te_pv_bank");
    app::cmd_gen_data(pv, opts, pv_data.string());
    app::cmd_fit_bank(pv, opts, pv_data.string(), pv_bank.string());
    const fs::path out = fresh_dir("te_pv_out");
    const std::string text =
        app::cmd_train_eval(pv, opts, pv_bank.string(), pv_data.string(),
                            "mlp_i1", out.string());
    const json report = json::parse(text);
    CHECK(report["task"] == "pv_3class");
    CHECK(report["evaluation"]["overall_accuracy"].get<double>() > 0.5);
    CHECK_THROWS_AS(
        app::cmd_train_eval(pv, opts, pv_bank.string(), pv_data.string(),
                            "mlp_i2", fresh_dir("te_pv_bad").string()),
        ConfigError);
  }

  SUBCASE("unknown method is a configuration error") {
    CHECK_THROWS_AS(
        app::cmd_train_eval(cfg, opts, bank_dir.string(), data.string(),
                            "svm", fresh_dir("te_bad").string()),
        ConfigError);
  }
}

TEST_CASE("compare runs the four methods and is byte-deterministic") {
  const auto cfg = small_config();
  const app::RunOptions opts{true, true};
  const fs::path data = fresh_dir("cmp_data");
  const fs::path bank_dir = fresh_dir("cmp_bank");
  app::cmd_gen_data(cfg, opts, data.string());
  app::cmd_fit_bank(cfg, opts, data.string(), bank_dir.string());

  const fs::path out_a = fresh_dir("cmp_a");
  const std::string report_a = app::cmd_compare(
      cfg, opts, bank_dir.string(), data.string(), out_a.string());

  const json report = json::parse(report_a);
  REQUIRE(report["methods"].size() == 4);
  CHECK(report["methods"][0]["method"] == "mlp");
  CHECK(report["methods"][1]["method"] == "knn");
  CHECK(report["methods"][2]["method"] == "dt");
  CHECK(report["methods"][3]["method"] == "pca");
  CHECK(report.contains("feature_effect"));
  CHECK(report.contains("ordering"));
  CHECK(report["per_class_error_percent"].contains("mlp_i1"));
  CHECK(fs::exists(out_a / "accuracy.csv"));
  CHECK(fs::exists(out_a / "comparison.svg"));
  CHECK(fs::exists(out_a / "confusion_pca.csv"));

  // Full rerun of the pipeline produces byte-identical reports.
  const fs::path data2 = fresh_dir("cmp_data2");
  const fs::path bank2 = fresh_dir("cmp_bank2");
  const fs::path out_b = fresh_dir("cmp_b");
  app::cmd_gen_data(cfg, opts, data2.string());
  app::cmd_fit_bank(cfg, opts, data2.string(), bank2.string());
  const std::string report_b = app::cmd_compare(
      cfg, opts, bank2.string(), data2.string(), out_b.string());
  CHECK(report_a == report_b);
  CHECK(slurp(out_a / "accuracy.csv") == slurp(out_b / "accuracy.csv"));
  CHECK(slurp(out_a / "confusion_pca.csv") == slurp(out_b / "confusion_pca.csv"));
}

TEST_CASE("cli exit codes") {
  SUBCASE("--help exits 0") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("gen-data --help") == 0);
  }
  SUBCASE("usage errors exit 2") {
    CHECK(run_cli("") == 2);                    // missing subcommand
    CHECK(run_cli("frobnicate") == 2);          // unknown subcommand
    CHECK(run_cli("fit-bank") == 2);            // missing required --data
  }
  SUBCASE("unknown method exits 2") {
    const fs::path data = fresh_dir("cli_data");
    const fs::path bank_dir = fresh_dir("cli_bank");
    const auto cfg = small_config();
    const app::RunOptions opts{true, true};
    app::cmd_gen_data(cfg, opts, data.string());
    app::cmd_fit_bank(cfg, opts, data.string(), bank_dir.string());
    CHECK(run_cli("train-eval --bank " + bank_dir.string() + " --data " +
                  data.string() + " --method svm --out /tmp/epsdiag_it/x") ==
          2);
  }
  SUBCASE("runtime failures exit 1") {
    CHECK(run_cli("fit-bank --data /nonexistent-epsdiag --out "
                  "/tmp/epsdiag_it/y") == 1);
  }
  SUBCASE("config errors exit 2") {
    const fs::path bad = fresh_dir("cli_cfg") / "bad.ini";
    std::ofstream(bad) << "[simulate]\nwarp = 9\n";
    CHECK(run_cli("gen-data --config " + bad.string() +
                  " --out /tmp/epsdiag_it/z") == 2);
  }
}
