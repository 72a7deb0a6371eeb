#include "epsdiag/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "epsdiag/errors.hpp"
#include "epsdiag/rng.hpp"
#include "epsdiag/telemetry.hpp"

namespace epsdiag::app {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("EPSDIAG_LOG");
    if (env == nullptr) return LogLevel::Error;
    const std::string v(env);
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    return LogLevel::Error;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::Info) std::cerr << "[info] " << msg << '\n';
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::Debug) std::cerr << "[debug] " << msg << '\n';
}

std::string telemetry_filename(faults::FaultClass f) {
  return "telemetry_" + std::string(faults::to_token(f)) + ".csv";
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

void ensure_out_dir(const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory '" + out_dir +
                             "': " + ec.message());
  }
}

ordered_json confusion_json(const cls::ConfusionMatrix& m) {
  ordered_json j;
  std::vector<std::string> classes;
  for (auto f : m.class_order) classes.emplace_back(faults::to_token(f));
  j["classes"] = classes;
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.counts.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.counts.cols(); ++c) {
      row.push_back(m.counts(r, c));
    }
    rows.push_back(std::move(row));
  }
  j["counts"] = std::move(rows);
  return j;
}

std::string confusion_csv(const cls::ConfusionMatrix& m) {
  std::ostringstream out;
  out << "true_class";
  for (auto f : m.class_order) out << ',' << faults::to_token(f);
  out << '\n';
  for (Eigen::Index r = 0; r < m.counts.rows(); ++r) {
    out << faults::to_token(m.class_order[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < m.counts.cols(); ++c) {
      out << ',' << m.counts(r, c);
    }
    out << '\n';
  }
  return out.str();
}

ordered_json method_json(const cls::MethodEval& eval) {
  ordered_json j;
  j["method"] = eval.method;
  j["overall_accuracy"] = eval.overall_accuracy;
  ordered_json per_class = ordered_json::object();
  for (std::size_t c = 0; c < eval.per_class_accuracy.size(); ++c) {
    per_class[std::string(faults::to_token(eval.matrix.class_order[c]))] =
        eval.per_class_accuracy[c];
  }
  j["per_class_accuracy"] = std::move(per_class);
  j["confusion"] = confusion_json(eval.matrix);
  if (eval.loss) {
    j["loss"] = {{"resubstitution", eval.loss->resubstitution_loss},
                 {"kfold", eval.loss->kfold_loss},
                 {"folds", eval.loss->folds}};
  }
  if (!eval.loss_curve.empty()) {
    ordered_json curve = ordered_json::array();
    for (const auto& [k, loss] : eval.loss_curve) {
      curve.push_back({{"k", k},
                       {"resubstitution", loss.resubstitution_loss},
                       {"kfold", loss.kfold_loss}});
    }
    j["loss_curve"] = std::move(curve);
  }
  if (!eval.eigenvalues.empty()) j["eigenvalues"] = eval.eigenvalues;
  if (!eval.intervals.empty()) {
    ordered_json intervals = ordered_json::array();
    for (const auto& iv : eval.intervals) {
      intervals.push_back({{"class", std::string(faults::to_token(iv.label))},
                           {"center", iv.center},
                           {"halfwidth", iv.halfwidth}});
    }
    j["class_intervals"] = std::move(intervals);
  }
  return j;
}

std::string loss_curve_csv(const std::map<int, cls::LossReport>& curve) {
  std::ostringstream out;
  out << "k,resubstitution_loss,kfold_loss\n";
  for (const auto& [k, loss] : curve) {
    out << k << ',' << io::fmt17(loss.resubstitution_loss) << ','
        << io::fmt17(loss.kfold_loss) << '\n';
  }
  return out.str();
}

/// Minimal static bar chart; no external plotting dependency.
std::string accuracy_svg(const std::vector<cls::MethodEval>& methods) {
  const int width = 480, height = 320;
  const int base = 280, left = 50;
  const int bar_w = 70, gap = 30;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\">\n";
  svg << "  <rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  svg << "  <line x1=\"" << left << "\" y1=\"" << base << "\" x2=\""
      << width - 20 << "\" y2=\"" << base << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const double acc = methods[i].overall_accuracy;
    const int h = static_cast<int>(acc * 240.0 + 0.5);
    const int x = left + 10 + static_cast<int>(i) * (bar_w + gap);
    svg << "  <rect x=\"" << x << "\" y=\"" << base - h << "\" width=\""
        << bar_w << "\" height=\"" << h << "\" fill=\"#4477aa\"/>\n";
    svg << "  <text x=\"" << x + bar_w / 2 << "\" y=\"" << base + 16
        << "\" font-size=\"12\" text-anchor=\"middle\">" << methods[i].method
        << "</text>\n";
    char pct[16];
    std::snprintf(pct, sizeof(pct), "%.1f%%", 100.0 * acc);
    svg << "  <text x=\"" << x + bar_w / 2 << "\" y=\"" << base - h - 6
        << "\" font-size=\"12\" text-anchor=\"middle\">" << pct << "</text>\n";
  }
  svg << "  <text x=\"" << left << "\" y=\"24\" font-size=\"14\">overall "
         "validation accuracy</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

void write_manifest(const RunConfig& config, const RunOptions& opts,
                    const std::string& command,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    const std::string& out_dir) {
  ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = command;
  j["config_hash"] = config.config_hash();
  j["seed"] = config.seed;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  if (!opts.no_timestamp && config.timestamps) {
    j["timestamp_utc"] = utc_timestamp();
  }
  write_text_file((fs::path(out_dir) / "manifest.json").string(),
                  j.dump(2) + "\n");
}

std::vector<std::string> cmd_gen_data(const RunConfig& config,
                                      const RunOptions& opts,
                                      const std::string& out_dir) {
  config.validate();
  ensure_out_dir(out_dir);

  std::vector<std::string> files;
  for (faults::FaultClass fault : bank::task_classes(config.task)) {
    const std::string token(faults::to_token(fault));
    sim::ScenarioConfig scenario = config.scenario(
        fault, rng::derive(config.seed, "gen." + token));
    const sim::SimulationResult result = sim::simulate(scenario);
    const std::string file = telemetry_filename(fault);
    io::write_telemetry_csv((fs::path(out_dir) / file).string(),
                            result.samples);
    files.push_back(file);
    log_info("gen-data: " + file + " (" +
             std::to_string(result.samples.size()) + " samples, " +
             std::to_string(result.clamps.total()) + " clamps)");
  }
  write_manifest(config, opts, "gen-data", {}, files, out_dir);
  return files;
}

bank::ModelBank cmd_fit_bank(const RunConfig& config, const RunOptions& opts,
                             const std::string& data_dir,
                             const std::string& out_dir) {
  config.validate();

  std::vector<std::pair<faults::FaultClass, std::vector<sim::SystemSample>>>
      datasets;
  std::vector<std::string> inputs;
  for (faults::FaultClass fault : bank::task_classes(config.task)) {
    const fs::path file = fs::path(data_dir) / telemetry_filename(fault);
    if (!fs::exists(file)) {
      throw std::runtime_error("fit-bank: missing class dataset " +
                               file.string());
    }
    datasets.emplace_back(fault, io::read_telemetry_csv(file.string()));
    inputs.push_back(file.string());
  }

  bank::FitOptions options;
  options.hidden = config.hidden;
  options.train_frac = config.train_frac;
  options.seed = rng::derive(config.seed, "bank");
  options.train = config.train;

  const bank::ModelBank fitted = bank::fit_bank(config.task, datasets, options);

  ensure_out_dir(out_dir);
  bank::save_bank(fitted, out_dir);

  ordered_json reports = ordered_json::object();
  std::vector<std::string> outputs = {"bank.json"};
  for (const auto& m : fitted.models) {
    const std::string token(faults::to_token(m.fault));
    outputs.push_back("model_" + token + ".mlp");
    ordered_json r;
    r["train_mse"] = m.train_mse;
    r["train_epochs"] = m.train_epochs;
    r["validation_mse"] = m.validation_mse;
    r["error_mean"] = m.validation_stats.mean;
    r["error_std"] = m.validation_stats.std;
    if (m.validation_stats.correlation_r) {
      r["correlation_r"] = *m.validation_stats.correlation_r;
    } else {
      r["correlation_r"] = nullptr;
    }
    r["rmse"] = m.validation_stats.rmse;
    reports[token] = std::move(r);
    log_info("fit-bank: " + token +
             " validation_mse=" + io::fmt17(m.validation_mse));
  }
  write_text_file((fs::path(out_dir) / "train_reports.json").string(),
                  reports.dump(2) + "\n");
  outputs.push_back("train_reports.json");
  write_manifest(config, opts, "fit-bank", inputs, outputs, out_dir);
  return fitted;
}

cls::TaskDatasets build_task_datasets(const RunConfig& config,
                                      const bank::ModelBank& bank,
                                      const std::string& data_dir) {
  const std::vector<faults::FaultClass>& classes =
      bank::task_classes(bank.task);
  const int n_models = static_cast<int>(bank.models.size());
  const int i1_width =
      n_models * (bank.task == bank::Task::System5 ? 1 : 2);

  std::vector<std::vector<double>> i1_rows, i2_rows, raw_rows;
  std::vector<faults::FaultClass> labels;

  for (faults::FaultClass fault : classes) {
    const fs::path file = fs::path(data_dir) / telemetry_filename(fault);
    if (!fs::exists(file)) {
      throw std::runtime_error("missing class dataset " + file.string());
    }
    const std::vector<sim::SystemSample> run =
        io::read_telemetry_csv(file.string());

    // The current moment accumulates from scenario start. One stream of
    // the observed load current feeds every model slot of the i2 vector:
    // model predictions carry no class information of their own, so the
    // output-current moment is the channel that augments the residuals.
    std::vector<bank::RunningMoment> moments(
        static_cast<std::size_t>(n_models));
    bank::RunningMoment observed_moment;
    for (const sim::SystemSample& s : run) {
      const bank::ResidualVector r = bank::residuals(bank, s);
      if (bank.task == bank::Task::System5) {
        observed_moment =
            bank::update_moment(observed_moment, s.load_current_a);
        std::fill(moments.begin(), moments.end(), observed_moment);
        const bank::FeatureVector i2 =
            bank::build_features(bank::FeatureKind::I2, r, &moments);
        i2_rows.push_back(i2.values);
      }
      const bank::FeatureVector i1 =
          bank::build_features(bank::FeatureKind::I1, r, nullptr);
      i1_rows.push_back(i1.values);
      // The alternative classifiers read the housekeeping data path, which
      // reports the load current at register resolution. The residual
      // path keeps the precision channel.
      double i_load = s.load_current_a;
      if (config.feature_quantum_i > 0.0) {
        i_load = std::round(i_load / config.feature_quantum_i) *
                 config.feature_quantum_i;
      }
      raw_rows.push_back({i_load, s.battery.soc});
      labels.push_back(fault);
    }
  }

  auto to_dataset = [&](const std::vector<std::vector<double>>& rows,
                        int width) {
    cls::LabeledDataset d;
    d.class_order = classes;
    d.labels = labels;
    d.features.resize(static_cast<Eigen::Index>(rows.size()), width);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (int j = 0; j < width; ++j) {
        d.features(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
      }
    }
    return d;
  };

  cls::TaskDatasets data;
  data.i1 = to_dataset(i1_rows, i1_width);
  data.raw = to_dataset(raw_rows, 2);
  if (bank.task == bank::Task::System5) {
    data.i2 = to_dataset(i2_rows, 2 * n_models);
  } else {
    data.i2 = data.i1;  // the PV task defines no moment-augmented features
  }
  return data;
}

namespace {

cls::MethodEval run_single_method(const RunConfig& config,
                                  const cls::TaskDatasets& data,
                                  const std::string& method) {
  const cls::CompareOptions options = [&] {
    cls::CompareOptions o = config.compare_options();
    o.seed = rng::derive(config.seed, "classify");
    return o;
  }();

  const cls::LabeledDataset& view =
      (method == "mlp_i1")   ? data.i1
      : (method == "mlp_i2") ? data.i2
                             : data.raw;
  auto [train, val] = cls::split(view, options.train_frac, options.seed);

  cls::MethodEval eval;
  std::vector<faults::FaultClass> predicted;
  predicted.reserve(static_cast<std::size_t>(val.n()));

  if (method == "mlp_i1" || method == "mlp_i2") {
    cls::MlpClassifierConfig cfg = options.mlp;
    cfg.train.seed = rng::derive(options.seed, "compare." + method);
    const cls::MlpClassifier c = cls::MlpClassifier::fit(train, cfg);
    predicted = c.classify_batch(val.features);
  } else if (method == "knn") {
    const cls::KnnModel model =
        cls::knn_fit(train, options.knn_k, options.knn_standardize);
    for (int i = 0; i < val.n(); ++i) {
      predicted.push_back(
          cls::knn_classify(model, val.features.row(i).transpose().eval()));
    }
  } else if (method == "dt") {
    const cls::DecisionTree tree = cls::id3_fit(train, options.dt);
    for (int i = 0; i < val.n(); ++i) {
      predicted.push_back(
          cls::dt_classify(tree, val.features.row(i).transpose().eval()));
    }
  } else if (method == "pca") {
    const cls::PcaModel model = cls::pca_classifier_fit(
        train, options.pca_standardize, options.pca_center);
    for (int i = 0; i < val.n(); ++i) {
      predicted.push_back(
          cls::pca_classify(model, val.features.row(i).transpose().eval()));
    }
    eval.eigenvalues.assign(
        model.eigenvalues.data(),
        model.eigenvalues.data() + model.eigenvalues.size());
    eval.intervals = model.intervals;
  } else {
    throw ConfigError("unknown method '" + method + "'");
  }

  eval.method = method;
  eval.matrix = cls::confusion(val.class_order, val.labels, predicted);
  eval.overall_accuracy = eval.matrix.overall_accuracy();
  eval.per_class_accuracy = eval.matrix.per_class_accuracy();

  if (method == "knn") {
    std::vector<int> ks;
    for (int k = 1; k <= options.knn_curve_k_max; ++k) ks.push_back(k);
    eval.loss_curve = cls::knn_loss_curve(
        data.raw, ks, options.folds, rng::derive(options.seed, "compare.knn"),
        options.knn_standardize);
    eval.loss = eval.loss_curve.at(options.knn_k);
  } else if (method == "dt") {
    eval.loss = cls::dt_loss(data.raw, options.dt, options.folds,
                             rng::derive(options.seed, "compare.dt"));
  }
  return eval;
}

}  // namespace

std::string cmd_train_eval(const RunConfig& config, const RunOptions& opts,
                           const std::string& bank_dir,
                           const std::string& data_dir,
                           const std::string& method,
                           const std::string& out_dir) {
  config.validate();
  static const std::vector<std::string> kMethods = {"mlp_i1", "mlp_i2", "knn",
                                                    "dt", "pca"};
  if (std::find(kMethods.begin(), kMethods.end(), method) == kMethods.end()) {
    throw ConfigError("unknown method token '" + method +
                      "' (expected mlp_i1|mlp_i2|knn|dt|pca)");
  }
  const bank::ModelBank loaded = bank::load_bank(bank_dir);
  if (loaded.task == bank::Task::Pv3 && method == "mlp_i2") {
    throw ConfigError("the PV task defines no i2 features");
  }
  const cls::TaskDatasets data = build_task_datasets(config, loaded, data_dir);
  const cls::MethodEval eval = run_single_method(config, data, method);

  ordered_json report;
  report["tool"] = kToolName;
  report["version"] = kToolVersion;
  report["command"] = "train-eval";
  report["task"] = bank::task_token(loaded.task);
  report["seed"] = config.seed;
  report["config_hash"] = config.config_hash();
  report["train_frac"] = config.classify_train_frac;
  report["evaluation"] = method_json(eval);

  ensure_out_dir(out_dir);
  std::vector<std::string> outputs = {"report.json", "confusion.csv",
                                      "features.csv"};
  const std::string json_text = report.dump(2) + "\n";
  write_text_file((fs::path(out_dir) / "report.json").string(), json_text);
  write_text_file((fs::path(out_dir) / "confusion.csv").string(),
                  confusion_csv(eval.matrix));
  {
    const cls::LabeledDataset& view = (method == "mlp_i1") ? data.i1
                                      : (method == "mlp_i2")
                                          ? data.i2
                                          : data.raw;
    const std::string kind =
        (method == "mlp_i2") ? "i2" : (method == "mlp_i1" ? "i1" : "raw");
    io::write_feature_csv((fs::path(out_dir) / "features.csv").string(), kind,
                          view.features, view.labels);
  }
  if (method == "knn") {
    write_text_file((fs::path(out_dir) / "loss_curve.csv").string(),
                    loss_curve_csv(eval.loss_curve));
    outputs.push_back("loss_curve.csv");
  }
  write_manifest(config, opts, "train-eval", {bank_dir, data_dir}, outputs,
                 out_dir);
  return json_text;
}

std::string cmd_compare(const RunConfig& config, const RunOptions& opts,
                        const std::string& bank_dir,
                        const std::string& data_dir,
                        const std::string& out_dir) {
  config.validate();
  const bank::ModelBank loaded = bank::load_bank(bank_dir);
  if (loaded.task != bank::Task::System5) {
    throw ConfigError("compare requires the system_5class task");
  }
  const cls::TaskDatasets data = build_task_datasets(config, loaded, data_dir);

  cls::CompareOptions options = config.compare_options();
  options.seed = rng::derive(config.seed, "classify");
  const cls::ComparisonReport comparison = cls::compare_methods(data, options);

  ordered_json report;
  report["tool"] = kToolName;
  report["version"] = kToolVersion;
  report["command"] = "compare";
  report["task"] = bank::task_token(loaded.task);
  report["seed"] = config.seed;
  report["config_hash"] = config.config_hash();
  report["config_echo"] = config.canonical_text();
  report["train_frac"] = config.classify_train_frac;

  ordered_json methods = ordered_json::array();
  for (const auto& m : comparison.methods) methods.push_back(method_json(m));
  report["methods"] = std::move(methods);

  // Table 6 analogue: per-class error percentages per method row.
  ordered_json per_class_errors = ordered_json::object();
  auto error_row = [](const cls::MethodEval& eval) {
    ordered_json row = ordered_json::object();
    for (std::size_t c = 0; c < eval.per_class_accuracy.size(); ++c) {
      row[std::string(faults::to_token(eval.matrix.class_order[c]))] =
          100.0 * (1.0 - eval.per_class_accuracy[c]);
    }
    return row;
  };
  per_class_errors["mlp_i1"] = error_row(comparison.mlp_i1);
  per_class_errors["mlp_i2"] = error_row(comparison.mlp_i2);
  for (const auto& m : comparison.methods) {
    if (m.method != "mlp") per_class_errors[m.method] = error_row(m);
  }
  report["per_class_error_percent"] = std::move(per_class_errors);

  report["feature_effect"] = {
      {"mlp_i1_accuracy", comparison.mlp_i1.overall_accuracy},
      {"mlp_i2_accuracy", comparison.mlp_i2.overall_accuracy},
      {"gap_percent_points",
       100.0 * (comparison.mlp_i2.overall_accuracy -
                comparison.mlp_i1.overall_accuracy)}};
  report["ordering"] = {
      {"expected", "mlp_i2 >= dt, pca >= dt, dt > knn"},
      {"ok", comparison.ordering_ok}};

  ensure_out_dir(out_dir);
  const std::string json_text = report.dump(2) + "\n";
  std::vector<std::string> outputs = {"report.json", "accuracy.csv"};
  write_text_file((fs::path(out_dir) / "report.json").string(), json_text);

  std::ostringstream plot;
  plot << "method,overall_accuracy\n";
  plot << "mlp_i1," << io::fmt17(comparison.mlp_i1.overall_accuracy) << '\n';
  for (const auto& m : comparison.methods) {
    plot << m.method << ',' << io::fmt17(m.overall_accuracy) << '\n';
  }
  write_text_file((fs::path(out_dir) / "accuracy.csv").string(), plot.str());

  for (const auto& m : comparison.methods) {
    const std::string file = "confusion_" + m.method + ".csv";
    write_text_file((fs::path(out_dir) / file).string(),
                    confusion_csv(m.matrix));
    outputs.push_back(file);
  }
  if (config.svg) {
    write_text_file((fs::path(out_dir) / "comparison.svg").string(),
                    accuracy_svg(comparison.methods));
    outputs.push_back("comparison.svg");
  }
  write_manifest(config, opts, "compare", {bank_dir, data_dir}, outputs,
                 out_dir);
  return json_text;
}

}  // namespace epsdiag::app
