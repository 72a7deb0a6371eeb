// Acceptance suite: one pass/fail line per criterion, default configuration
// and scale. Exits nonzero when any criterion fails.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "epsdiag/classify.hpp"
#include "epsdiag/config.hpp"
#include "epsdiag/modelbank.hpp"
#include "epsdiag/pipeline.hpp"
#include "epsdiag/rng.hpp"
#include "epsdiag/telemetry.hpp"

using namespace epsdiag;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& clause, bool pass,
            const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL",
              criterion, clause.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

struct SeedArtifacts {
  std::vector<std::pair<faults::FaultClass, std::vector<sim::SystemSample>>>
      datasets;
  bank::ModelBank bank;
  cls::TaskDatasets features;
};

/// gen-data + fit-bank + feature assembly for one seed, all in memory.
SeedArtifacts build_seed(const app::RunConfig& cfg) {
  SeedArtifacts art;
  for (auto fault : bank::task_classes(cfg.task)) {
    auto scenario = cfg.scenario(
        fault,
        rng::derive(cfg.seed, "gen." + std::string(faults::to_token(fault))));
    art.datasets.emplace_back(fault, sim::simulate(scenario).samples);
  }
  bank::FitOptions fit;
  fit.hidden = cfg.hidden;
  fit.train_frac = cfg.train_frac;
  fit.seed = rng::derive(cfg.seed, "bank");
  fit.train = cfg.train;
  art.bank = bank::fit_bank(cfg.task, art.datasets, fit);

  std::vector<std::vector<double>> i1_rows, i2_rows, raw_rows;
  std::vector<faults::FaultClass> labels;
  for (const auto& [fault, run] : art.datasets) {
    std::vector<bank::RunningMoment> moments(art.bank.models.size());
    bank::RunningMoment observed;
    for (const auto& s : run) {
      const auto r = bank::residuals(art.bank, s);
      observed = bank::update_moment(observed, s.load_current_a);
      std::fill(moments.begin(), moments.end(), observed);
      i2_rows.push_back(
          bank::build_features(bank::FeatureKind::I2, r, &moments).values);
      i1_rows.push_back(r.values);
      double i_load = s.load_current_a;
      if (cfg.feature_quantum_i > 0.0) {
        i_load = std::round(i_load / cfg.feature_quantum_i) *
                 cfg.feature_quantum_i;
      }
      raw_rows.push_back({i_load, s.battery.soc});
      labels.push_back(fault);
    }
  }
  auto make = [&](const std::vector<std::vector<double>>& rows) {
    cls::LabeledDataset d;
    d.class_order = bank::task_classes(cfg.task);
    d.labels = labels;
    d.features.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows[0].size(); ++j)
        d.features(static_cast<Eigen::Index>(i),
                   static_cast<Eigen::Index>(j)) = rows[i][j];
    return d;
  };
  art.features.i1 = make(i1_rows);
  art.features.i2 = make(i2_rows);
  art.features.raw = make(raw_rows);
  return art;
}

struct MethodAcc {
  double overall = 0.0;
  std::map<faults::FaultClass, double> per_class;
};

MethodAcc evaluate(const std::vector<faults::FaultClass>& order,
                   const std::vector<faults::FaultClass>& truth,
                   const std::vector<faults::FaultClass>& pred) {
  const auto m = cls::confusion(order, truth, pred);
  MethodAcc acc;
  acc.overall = m.overall_accuracy();
  const auto pc = m.per_class_accuracy();
  for (std::size_t c = 0; c < order.size(); ++c) acc.per_class[order[c]] = pc[c];
  return acc;
}

struct SeedEval {
  MethodAcc mlp_i1, mlp_i2, knn, dt, pca;
};

SeedEval evaluate_seed(const app::RunConfig& cfg, const SeedArtifacts& art,
                       bool with_mlp) {
  cls::CompareOptions opt = cfg.compare_options();
  opt.seed = rng::derive(cfg.seed, "classify");

  SeedEval eval;
  auto [raw_train, raw_val] =
      cls::split(art.features.raw, opt.train_frac, opt.seed);

  {
    const auto knn = cls::knn_fit(raw_train, opt.knn_k, opt.knn_standardize);
    std::vector<faults::FaultClass> pred;
    for (int i = 0; i < raw_val.n(); ++i)
      pred.push_back(cls::knn_classify(
          knn, raw_val.features.row(i).transpose().eval()));
    eval.knn = evaluate(raw_val.class_order, raw_val.labels, pred);
  }
  {
    const auto tree = cls::id3_fit(raw_train, opt.dt);
    std::vector<faults::FaultClass> pred;
    for (int i = 0; i < raw_val.n(); ++i)
      pred.push_back(cls::dt_classify(
          tree, raw_val.features.row(i).transpose().eval()));
    eval.dt = evaluate(raw_val.class_order, raw_val.labels, pred);
  }
  {
    const auto pca = cls::pca_classifier_fit(raw_train, opt.pca_standardize,
                                             opt.pca_center);
    std::vector<faults::FaultClass> pred;
    for (int i = 0; i < raw_val.n(); ++i)
      pred.push_back(cls::pca_classify(
          pca, raw_val.features.row(i).transpose().eval()));
    eval.pca = evaluate(raw_val.class_order, raw_val.labels, pred);
  }
  if (with_mlp) {
    for (auto* view : {&art.features.i1, &art.features.i2}) {
      auto [train, val] = cls::split(*view, opt.train_frac, opt.seed);
      cls::MlpClassifierConfig mc = opt.mlp;
      mc.train.seed = rng::derive(opt.seed, view == &art.features.i1
                                                ? "compare.mlp_i1"
                                                : "compare.mlp_i2");
      const auto c = cls::MlpClassifier::fit(train, mc);
      const auto pred = c.classify_batch(val.features);
      (view == &art.features.i1 ? eval.mlp_i1 : eval.mlp_i2) =
          evaluate(val.class_order, val.labels, pred);
    }
  }
  return eval;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

char fmtbuf[512];
std::string fmt(const char* f, ...) {
  va_list args;
  va_start(args, f);
  std::vsnprintf(fmtbuf, sizeof(fmtbuf), f, args);
  va_end(args);
  return fmtbuf;
}

}  // namespace

int main() {
  const app::RunConfig cfg;  // documented defaults, seed 1
  const auto t_total = std::chrono::steady_clock::now();

  // ---- shared default-seed artifacts --------------------------------------
  auto t0 = std::chrono::steady_clock::now();
  SeedArtifacts art = build_seed(cfg);
  const double bank_time = elapsed_s(t0);

  // ---- criterion 1: regression fidelity -----------------------------------
  {
    const auto& healthy = art.bank.models.front();
    const double r = healthy.validation_stats.correlation_r.value_or(0.0);
    const bool pass = healthy.validation_mse <= 1e-4 &&
                      std::abs(healthy.validation_stats.mean) <= 1e-4 &&
                      r >= 0.999 && bank_time <= 60.0;
    report(1, "healthy model validation MSE <= 1e-4, |mean| <= 1e-4, R >= 0.999",
           pass,
           fmt("mse=%.3g mean=%.3g R=%.6f fit_time=%.1fs",
               healthy.validation_mse, healthy.validation_stats.mean, r,
               bank_time));
  }

  // ---- criterion 2: feature augmentation ----------------------------------
  t0 = std::chrono::steady_clock::now();
  SeedEval default_eval = evaluate_seed(cfg, art, true);
  const double classify_time = elapsed_s(t0);
  {
    const double gap_pp =
        100.0 * (default_eval.mlp_i2.overall - default_eval.mlp_i1.overall);
    const bool pass = gap_pp >= 10.0 && classify_time <= 120.0;
    report(2, "mlp(i2) exceeds mlp(i1) by >= 10 percentage points", pass,
           fmt("i1=%.4f i2=%.4f gap=%.1fpp time=%.1fs",
               default_eval.mlp_i1.overall, default_eval.mlp_i2.overall,
               gap_pp, classify_time));
  }

  // ---- criterion 3: method ordering over 10 documented seeds --------------
  {
    const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int passes = 0;
    std::string detail;
    for (std::uint64_t s : seeds) {
      SeedEval ev;
      if (s == cfg.seed) {
        ev = default_eval;
      } else {
        app::RunConfig c = cfg;
        c.seed = s;
        const SeedArtifacts a = build_seed(c);
        ev = evaluate_seed(c, a, true);
      }
      const bool ok = ev.mlp_i2.overall >= 0.99 && ev.pca.overall >= 0.99 &&
                      ev.dt.overall >= 0.95 &&
                      ev.knn.overall < ev.dt.overall;
      passes += ok;
      detail += ok ? '+' : '-';
    }
    report(3,
           "mlp_i2 >= 0.99, pca >= 0.99, dt >= 0.95, knn < dt on >= 8 of 10 "
           "seeds",
           passes >= 8, fmt("passes=%d/10 pattern=%s", passes, detail.c_str()));
  }

  // ---- criterion 4: KNN loss structure ------------------------------------
  {
    // k=1 exactness holds on duplicate-free data: rebuild the classifier
    // features at full sensor precision, where every (I_L, SOC) pair is
    // unique, and verify both the premise and the property.
    cls::LabeledDataset precise_raw = art.features.raw;
    {
      // recompute the raw view without register quantization
      int row = 0;
      for (const auto& [fault, run] : art.datasets) {
        for (const auto& s : run) {
          precise_raw.features(row, 0) = s.load_current_a;
          precise_raw.features(row, 1) = s.battery.soc;
          ++row;
        }
      }
    }
    std::set<std::pair<double, double>> seen;
    bool duplicate_free = true;
    for (int i = 0; i < precise_raw.n(); ++i) {
      if (!seen.emplace(precise_raw.features(i, 0),
                        precise_raw.features(i, 1))
               .second) {
        duplicate_free = false;
        break;
      }
    }
    const std::uint64_t knn_seed =
        rng::derive(rng::derive(cfg.seed, "classify"), "compare.knn");
    const auto exact_curve = cls::knn_loss_curve(precise_raw, {1}, cfg.folds,
                                                 knn_seed,
                                                 cfg.knn_standardize);
    report(4, "resubstitution loss at k=1 is exactly 0 on duplicate-free data",
           duplicate_free &&
               exact_curve.at(1).resubstitution_loss == 0.0,
           fmt("duplicate_free=%d resub1=%.6f", duplicate_free ? 1 : 0,
               exact_curve.at(1).resubstitution_loss));

    const auto curve = cls::knn_loss_curve(art.features.raw, {1, 3},
                                           cfg.folds, knn_seed,
                                           cfg.knn_standardize);
    const double resub3 = curve.at(3).resubstitution_loss;
    const double kf1 = curve.at(1).kfold_loss;
    const double kf3 = curve.at(3).kfold_loss;
    report(4, "k-fold loss at k=3 <= k-fold loss at k=1", kf3 <= kf1,
           fmt("kf3=%.4f kf1=%.4f", kf3, kf1));
    report(4, "resubstitution loss at k=3 within [0.02, 0.15]",
           resub3 >= 0.02 && resub3 <= 0.15, fmt("resub3=%.4f", resub3));
  }

  // ---- criterion 5: decision-tree losses ----------------------------------
  {
    const auto loss = cls::dt_loss(
        art.features.raw, cfg.dt, cfg.folds,
        rng::derive(rng::derive(cfg.seed, "classify"), "compare.dt"));
    report(5, "dt resubstitution loss <= k-fold loss",
           loss.resubstitution_loss <= loss.kfold_loss,
           fmt("resub=%.4f kfold=%.4f", loss.resubstitution_loss,
               loss.kfold_loss));
    report(5, "dt k-fold loss <= 0.10", loss.kfold_loss <= 0.10,
           fmt("kfold=%.4f", loss.kfold_loss));
  }

  // ---- criterion 6: battery-ground distinguishability ---------------------
  {
    const auto bg = faults::FaultClass::BatteryGround;
    bool pass = true;
    std::string detail;
    const std::vector<std::pair<std::string, const MethodAcc*>> methods = {
        {"mlp_i1", &default_eval.mlp_i1}, {"mlp_i2", &default_eval.mlp_i2},
        {"knn", &default_eval.knn},       {"dt", &default_eval.dt},
        {"pca", &default_eval.pca},
    };
    for (const auto& [name, acc] : methods) {
      const double bg_acc = acc->per_class.at(bg);
      pass = pass && bg_acc >= acc->overall;
      detail += fmt("%s=%.4f/%.4f ", name.c_str(), bg_acc, acc->overall);
    }
    report(6, "every method's battery-ground accuracy >= its overall accuracy",
           pass, detail);
  }

  // ---- criterion 7: numerical property suites ------------------------------
  {
    // Jacobian vs central finite differences, 20 seeded cases.
    bool jac_ok = true;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20 && jac_ok; ++seed) {
      const int n_out = seed % 3 == 0 ? 2 : 1;
      mlp::MlpNetwork net = mlp::make_network(2, 3, n_out, seed);
      rng::SplitMix64 stream(rng::derive(seed, "acceptance.batch"));
      Eigen::MatrixXd x(5, 2);
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 2; ++j) x(i, j) = stream.uniform(-1.0, 1.0);
      const Eigen::MatrixXd analytic = mlp::jacobian(net, x);
      const double h = 1e-6;
      const int p = net.parameter_count();
      for (int k = 0; k < p; ++k) {
        auto nudge = [&](double delta) {
          mlp::MlpNetwork m = net;
          Eigen::VectorXd theta(p);
          int pos = 0;
          for (int i = 0; i < m.w1.rows(); ++i)
            for (int j = 0; j < m.w1.cols(); ++j) theta(pos++) = m.w1(i, j);
          for (int i = 0; i < m.b1.size(); ++i) theta(pos++) = m.b1(i);
          for (int i = 0; i < m.w2.rows(); ++i)
            for (int j = 0; j < m.w2.cols(); ++j) theta(pos++) = m.w2(i, j);
          for (int i = 0; i < m.b2.size(); ++i) theta(pos++) = m.b2(i);
          theta(k) += delta;
          pos = 0;
          for (int i = 0; i < m.w1.rows(); ++i)
            for (int j = 0; j < m.w1.cols(); ++j) m.w1(i, j) = theta(pos++);
          for (int i = 0; i < m.b1.size(); ++i) m.b1(i) = theta(pos++);
          for (int i = 0; i < m.w2.rows(); ++i)
            for (int j = 0; j < m.w2.cols(); ++j) m.w2(i, j) = theta(pos++);
          for (int i = 0; i < m.b2.size(); ++i) m.b2(i) = theta(pos++);
          return mlp::forward_batch(m, x);
        };
        const Eigen::MatrixXd fd = -(nudge(h) - nudge(-h)) / (2.0 * h);
        for (int s = 0; s < 5; ++s) {
          for (int o = 0; o < n_out; ++o) {
            const double a = analytic(s * n_out + o, k);
            const double b = fd(s, o);
            const double mag = std::max(std::abs(a), std::abs(b));
            if (mag > 1e-8) worst = std::max(worst, std::abs(a - b) / mag);
          }
        }
      }
      jac_ok = worst <= 1e-5;
    }
    report(7, "analytic Jacobian within 1e-5 of finite differences (20 cases)",
           jac_ok, fmt("worst_rel=%.2e", worst));

    // LM accepted-step monotonicity on a fresh training run.
    {
      Eigen::MatrixXd x(100, 1), y(100, 1);
      x.col(0).setLinSpaced(100, -1.0, 1.0);
      for (int i = 0; i < 100; ++i) y(i, 0) = std::sin(2.5 * x(i, 0));
      mlp::TrainConfig tc;
      tc.max_epochs = 150;
      tc.seed = 4;
      auto [net, rep] =
          mlp::lm_train(mlp::make_network(1, 8, 1, tc.seed), x, y, tc);
      bool monotone = true;
      for (std::size_t i = 1; i < rep.mse_history.size(); ++i) {
        monotone = monotone && rep.mse_history[i] < rep.mse_history[i - 1];
      }
      report(7, "LM accepted-step MSE history strictly decreasing", monotone,
             fmt("accepted_steps=%zu final=%.3g", rep.mse_history.size() - 1,
                 rep.final_mse));
    }

    // PCA identities on the default raw training features.
    {
      cls::CompareOptions opt = cfg.compare_options();
      opt.seed = rng::derive(cfg.seed, "classify");
      auto [train, val] =
          cls::split(art.features.raw, opt.train_frac, opt.seed);
      const auto model = cls::pca_classifier_fit(train, opt.pca_standardize,
                                                 opt.pca_center);
      const Eigen::MatrixXd qtq = model.q.transpose() * model.q;
      const double ortho =
          (qtq - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff();

      Eigen::MatrixXd feats = train.features;
      if (model.standardized) {
        feats.rowwise() -= model.feature_mean.transpose();
        feats.array().rowwise() /= model.feature_sigma.transpose().array();
      }
      Eigen::MatrixXd centered = feats;
      centered.rowwise() -= model.mean.transpose();
      const Eigen::MatrixXd cov =
          centered.transpose() * centered /
          static_cast<double>(train.n() - 1);
      const double trace_err =
          std::abs(model.eigenvalues.sum() - cov.trace()) /
          std::max(1.0, std::abs(cov.trace()));

      const Eigen::VectorXd pc1 = centered * model.q.col(0);
      const double var1 =
          (pc1.array() - pc1.mean()).square().sum() / (train.n() - 1);
      bool var_max = true;
      rng::SplitMix64 dirs(rng::derive(7, "acceptance.dirs"));
      for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd w(2);
        w << dirs.gaussian(), dirs.gaussian();
        w.normalize();
        const Eigen::VectorXd proj = centered * w;
        const double var =
            (proj.array() - proj.mean()).square().sum() / (train.n() - 1);
        var_max = var_max && var1 >= var - 1e-12;
      }
      report(7,
             "PCA: Q^T Q = I within 1e-10, eigenvalue sum = trace within "
             "1e-8, first component maximizes variance",
             ortho <= 1e-10 && trace_err <= 1e-8 && var_max,
             fmt("ortho=%.2e trace_rel=%.2e var_max=%d", ortho, trace_err,
                 var_max ? 1 : 0));
    }

    // Fault-rate arithmetic and rate-table lookups.
    {
      const bool eq1 = faults::fault_rate(1e6, 1, 10) == 1e-7 &&
                       faults::fault_rate(2000.0, 3, 50) == 3.0e-5 &&
                       faults::fault_rate(1000.0, 0, 100) == 0.0;
      const auto& rates = faults::default_rates();
      const bool table = rates.at("battery").lambda_min == 200e-9 &&
                         rates.at("battery").lambda_max == 300e-9 &&
                         rates.at("analog_switch").lambda_min == 2000e-9 &&
                         rates.at("solar_array").lambda_max == 200e-9 &&
                         rates.size() == 9;
      report(7, "fault-rate arithmetic exact, rate table byte-exact",
             eq1 && table, fmt("eq1=%d table=%d", eq1 ? 1 : 0, table ? 1 : 0));
    }

    // Confusion-matrix identities on the default evaluation.
    {
      cls::CompareOptions opt = cfg.compare_options();
      opt.seed = rng::derive(cfg.seed, "classify");
      auto [train, val] =
          cls::split(art.features.raw, opt.train_frac, opt.seed);
      const auto tree = cls::id3_fit(train, opt.dt);
      std::vector<faults::FaultClass> pred;
      for (int i = 0; i < val.n(); ++i)
        pred.push_back(cls::dt_classify(
            tree, val.features.row(i).transpose().eval()));
      const auto m = cls::confusion(val.class_order, val.labels, pred);
      bool rows_ok = true;
      for (std::size_t c = 0; c < val.class_order.size(); ++c) {
        const auto expected = std::count(val.labels.begin(), val.labels.end(),
                                         val.class_order[c]);
        rows_ok = rows_ok &&
                  m.counts.row(static_cast<Eigen::Index>(c)).sum() == expected;
      }
      const double trace_acc =
          static_cast<double>(m.counts.diagonal().sum()) /
          static_cast<double>(m.total());
      report(7, "confusion row sums and trace identity hold to 1e-12",
             rows_ok && std::abs(trace_acc - m.overall_accuracy()) <= 1e-12,
             fmt("rows_ok=%d", rows_ok ? 1 : 0));
    }
  }

  // ---- criterion 8: end-to-end determinism --------------------------------
  {
    const fs::path root = fs::temp_directory_path() / "epsdiag_acceptance";
    fs::remove_all(root);
    const app::RunOptions opts{true, true};  // no timestamps, quiet
    std::string reports[2];
    double pipeline_s = 0.0;
    for (int run = 0; run < 2; ++run) {
      const fs::path base = root / ("run" + std::to_string(run));
      const auto t_run = std::chrono::steady_clock::now();
      app::cmd_gen_data(cfg, opts, (base / "data").string());
      app::cmd_fit_bank(cfg, opts, (base / "data").string(),
                        (base / "bank").string());
      reports[run] =
          app::cmd_compare(cfg, opts, (base / "bank").string(),
                           (base / "data").string(), (base / "cmp").string());
      pipeline_s = std::max(pipeline_s, elapsed_s(t_run));
    }
    bool files_equal = reports[0] == reports[1];
    for (const char* rel :
         {"data/telemetry_none.csv", "bank/bank.json", "cmp/accuracy.csv",
          "cmp/confusion_pca.csv"}) {
      files_equal = files_equal && slurp(root / "run0" / rel) ==
                                       slurp(root / "run1" / rel);
    }
    report(8, "two full pipelines are byte-identical, each <= 5 min",
           files_equal && pipeline_s <= 300.0,
           fmt("identical=%d pipeline_time=%.1fs", files_equal ? 1 : 0,
               pipeline_s));
    fs::remove_all(root);
  }

  std::printf("acceptance total: %.1fs, %d failing check(s)\n",
              elapsed_s(t_total), g_failures);
  return g_failures == 0 ? 0 : 1;
}
