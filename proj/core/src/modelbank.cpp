#include "epsdiag/modelbank.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "epsdiag/errors.hpp"
#include "epsdiag/rng.hpp"

namespace epsdiag::bank {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string task_token(Task t) {
  return t == Task::System5 ? "system_5class" : "pv_3class";
}

Task task_from_token(const std::string& token) {
  if (token == "system_5class" || token == "system") return Task::System5;
  if (token == "pv_3class" || token == "pv") return Task::Pv3;
  throw ConfigError("unknown task token '" + token + "'");
}

const std::vector<FaultClass>& task_classes(Task t) {
  return t == Task::System5 ? faults::system_task_classes()
                            : faults::pv_task_classes();
}

int ModelBank::model_index(FaultClass f) const {
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].fault == f) return static_cast<int>(i);
  }
  return -1;
}

Eigen::VectorXd ModelBank::predict(int model_idx, double irr_w_m2,
                                   double temp_c) const {
  const FittedModel& m = models.at(static_cast<std::size_t>(model_idx));
  Eigen::VectorXd x(2);
  x << irr_w_m2, temp_c;
  return m.output_norm.invert(
      mlp::forward(m.net, m.input_norm.apply(x)).eval());
}

namespace {

int output_width(Task task) { return task == Task::System5 ? 1 : 2; }

void fill_xy(Task task, const std::vector<sim::SystemSample>& data,
             Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
  const int n = static_cast<int>(data.size());
  x.resize(n, 2);
  y.resize(n, output_width(task));
  for (int i = 0; i < n; ++i) {
    x(i, 0) = data[i].env.irradiance_w_m2;
    x(i, 1) = data[i].env.temperature_c;
    if (task == Task::System5) {
      y(i, 0) = data[i].load_current_a;
    } else {
      y(i, 0) = data[i].pv.voltage_v;
      y(i, 1) = data[i].pv.current_a;
    }
  }
}

}  // namespace

ModelBank fit_bank(
    Task task,
    const std::vector<std::pair<FaultClass, std::vector<sim::SystemSample>>>&
        datasets,
    const FitOptions& options) {
  const std::vector<FaultClass>& classes = task_classes(task);

  std::set<FaultClass> seen;
  for (const auto& [fault, data] : datasets) {
    if (!seen.insert(fault).second) {
      throw ConfigError("fit_bank: duplicate dataset for class '" +
                        std::string(faults::to_token(fault)) + "'");
    }
    if (std::find(classes.begin(), classes.end(), fault) == classes.end()) {
      throw ConfigError("fit_bank: class '" +
                        std::string(faults::to_token(fault)) +
                        "' is not part of task " + task_token(task));
    }
    if (data.size() < 100) {
      throw ConfigError("fit_bank: dataset for '" +
                        std::string(faults::to_token(fault)) +
                        "' has fewer than 100 samples");
    }
  }

  ModelBank bank;
  bank.task = task;
  for (FaultClass fault : classes) {
    const auto it =
        std::find_if(datasets.begin(), datasets.end(),
                     [fault](const auto& d) { return d.first == fault; });
    if (it == datasets.end()) {
      throw ConfigError("fit_bank: missing dataset for class '" +
                        std::string(faults::to_token(fault)) + "'");
    }
    const std::string token(faults::to_token(fault));

    Eigen::MatrixXd x, y;
    fill_xy(task, it->second, x, y);
    const int n = static_cast<int>(x.rows());

    // Deterministic shuffled split; validation stats echo Fig 2.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng::SplitMix64 shuffle(rng::derive(options.seed, "bank.split." + token));
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle.next() %
                                     static_cast<std::uint64_t>(i + 1));
      std::swap(order[i], order[j]);
    }
    const int n_train = std::max(1, static_cast<int>(
                                        static_cast<double>(n) *
                                        options.train_frac));
    Eigen::MatrixXd x_train(n_train, x.cols()), y_train(n_train, y.cols());
    Eigen::MatrixXd x_val(n - n_train, x.cols()), y_val(n - n_train, y.cols());
    for (int i = 0; i < n_train; ++i) {
      x_train.row(i) = x.row(order[i]);
      y_train.row(i) = y.row(order[i]);
    }
    for (int i = n_train; i < n; ++i) {
      x_val.row(i - n_train) = x.row(order[i]);
      y_val.row(i - n_train) = y.row(order[i]);
    }

    FittedModel model;
    model.fault = fault;
    model.input_norm = mlp::fit_normalizer(x_train);
    model.output_norm = mlp::fit_normalizer(y_train);

    mlp::TrainConfig cfg = options.train;
    cfg.seed = rng::derive(options.seed, "bank.init." + token);
    mlp::MlpNetwork net = mlp::make_network(2, options.hidden,
                                            output_width(task), cfg.seed);
    auto [trained, report] =
        mlp::lm_train(std::move(net), model.input_norm.apply(x_train),
                      model.output_norm.apply(y_train), cfg);
    model.net = std::move(trained);
    model.train_mse = report.final_mse;
    model.train_epochs = report.epochs;

    if (x_val.rows() > 1) {
      const Eigen::MatrixXd y_val_n = model.output_norm.apply(y_val);
      const Eigen::MatrixXd pred =
          mlp::forward_batch(model.net, model.input_norm.apply(x_val));
      model.validation_mse = mlp::mse(y_val_n, pred);
      Eigen::Map<const Eigen::VectorXd> yf(y_val_n.data(), y_val_n.size());
      Eigen::Map<const Eigen::VectorXd> pf(pred.data(), pred.size());
      model.validation_stats = mlp::error_stats(yf, pf);
    } else {
      model.validation_mse = model.train_mse;
    }

    bank.models.push_back(std::move(model));
  }
  return bank;
}

ResidualVector residuals(const ModelBank& bank,
                         const Eigen::VectorXd& y_observed, double irr_w_m2,
                         double temp_c) {
  const int width = output_width(bank.task);
  if (y_observed.size() != width) {
    throw ShapeError("residuals: expected " + std::to_string(width) +
                     " observed outputs, got " +
                     std::to_string(y_observed.size()));
  }
  ResidualVector r;
  r.values.reserve(bank.models.size() * static_cast<std::size_t>(width));
  Eigen::VectorXd x(2);
  x << irr_w_m2, temp_c;
  for (std::size_t i = 0; i < bank.models.size(); ++i) {
    const FittedModel& m = bank.models[i];
    const Eigen::VectorXd xn = m.input_norm.apply(x);
    if (xn.cwiseAbs().maxCoeff() > 1.0 + 1e-9) r.extrapolated = true;
    const Eigen::VectorXd pred =
        m.output_norm.invert(mlp::forward(m.net, xn).eval());
    for (int k = 0; k < width; ++k) {
      r.values.push_back(y_observed(k) - pred(k));
    }
  }
  return r;
}

ResidualVector residuals(const ModelBank& bank, const sim::SystemSample& s) {
  Eigen::VectorXd y(output_width(bank.task));
  if (bank.task == Task::System5) {
    y << s.load_current_a;
  } else {
    y << s.pv.voltage_v, s.pv.current_a;
  }
  return residuals(bank, y, s.env.irradiance_w_m2, s.env.temperature_c);
}

RunningMoment update_moment(const RunningMoment& m, double value) {
  RunningMoment next;
  next.count = m.count + 1;
  next.mean = m.mean + (value - m.mean) / static_cast<double>(next.count);
  return next;
}

FeatureVector build_features(FeatureKind kind, const ResidualVector& r,
                             const std::vector<RunningMoment>* moments) {
  FeatureVector f;
  f.kind = kind;
  if (kind == FeatureKind::I1) {
    f.values = r.values;
    return f;
  }
  if (moments == nullptr) {
    throw ConfigError("build_features: i2 requires per-model moments");
  }
  if (moments->size() != r.values.size()) {
    throw ConfigError("build_features: need one moment per residual, got " +
                      std::to_string(moments->size()) + " for " +
                      std::to_string(r.values.size()) + " residuals");
  }
  f.values.reserve(2 * r.values.size());
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    f.values.push_back(r.values[i]);
    f.values.push_back((*moments)[i].mean);
  }
  return f;
}

namespace {

ordered_json normalizer_json(const mlp::Normalizer& n) {
  ordered_json j;
  j["scale"] = std::vector<double>(n.scale().data(),
                                   n.scale().data() + n.scale().size());
  j["offset"] = std::vector<double>(n.offset().data(),
                                    n.offset().data() + n.offset().size());
  return j;
}

mlp::Normalizer normalizer_from_json(const ordered_json& j) {
  const auto scale = j.at("scale").get<std::vector<double>>();
  const auto offset = j.at("offset").get<std::vector<double>>();
  Eigen::VectorXd s(scale.size()), o(offset.size());
  for (std::size_t i = 0; i < scale.size(); ++i) s(i) = scale[i];
  for (std::size_t i = 0; i < offset.size(); ++i) o(i) = offset[i];
  return mlp::Normalizer(std::move(s), std::move(o));
}

}  // namespace

void save_bank(const ModelBank& bank, const std::string& dir) {
  fs::create_directories(dir);
  ordered_json manifest;
  manifest["format"] = "epsdiag-bank-v1";
  manifest["task"] = task_token(bank.task);
  std::vector<std::string> class_tokens;
  for (const auto& m : bank.models) {
    class_tokens.emplace_back(faults::to_token(m.fault));
  }
  manifest["classes"] = class_tokens;

  ordered_json models = ordered_json::array();
  for (const auto& m : bank.models) {
    const std::string token(faults::to_token(m.fault));
    const std::string file = "model_" + token + ".mlp";
    mlp::save_mlp(m.net, (fs::path(dir) / file).string());

    ordered_json jm;
    jm["class"] = token;
    jm["file"] = file;
    jm["input_norm"] = normalizer_json(m.input_norm);
    jm["output_norm"] = normalizer_json(m.output_norm);
    jm["train_mse"] = m.train_mse;
    jm["train_epochs"] = m.train_epochs;
    jm["validation_mse"] = m.validation_mse;
    jm["validation_error_mean"] = m.validation_stats.mean;
    jm["validation_error_std"] = m.validation_stats.std;
    if (m.validation_stats.correlation_r) {
      jm["validation_r"] = *m.validation_stats.correlation_r;
    } else {
      jm["validation_r"] = nullptr;
    }
    jm["validation_rmse"] = m.validation_stats.rmse;
    models.push_back(std::move(jm));
  }
  manifest["models"] = std::move(models);

  std::ofstream out(fs::path(dir) / "bank.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write bank manifest in " + dir);
  out << manifest.dump(2) << '\n';
}

ModelBank load_bank(const std::string& dir) {
  const fs::path manifest_path = fs::path(dir) / "bank.json";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open bank manifest: " +
                             manifest_path.string());
  }
  ordered_json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path.string(), 1, e.what());
  }
  if (manifest.value("format", "") != "epsdiag-bank-v1") {
    throw FormatError(manifest_path.string(), 1,
                      "expected format 'epsdiag-bank-v1'");
  }

  ModelBank bank;
  bank.task = task_from_token(manifest.at("task").get<std::string>());
  for (const auto& jm : manifest.at("models")) {
    FittedModel m;
    const std::string token = jm.at("class").get<std::string>();
    const auto fault = faults::from_token(token);
    if (!fault) {
      throw FormatError(manifest_path.string(), 1,
                        "unknown class token '" + token + "'");
    }
    m.fault = *fault;
    m.net = mlp::load_mlp((fs::path(dir) / jm.at("file").get<std::string>())
                              .string());
    m.input_norm = normalizer_from_json(jm.at("input_norm"));
    m.output_norm = normalizer_from_json(jm.at("output_norm"));
    m.train_mse = jm.value("train_mse", 0.0);
    m.train_epochs = jm.value("train_epochs", 0);
    m.validation_mse = jm.value("validation_mse", 0.0);
    m.validation_stats.mean = jm.value("validation_error_mean", 0.0);
    m.validation_stats.std = jm.value("validation_error_std", 0.0);
    if (jm.contains("validation_r") && !jm.at("validation_r").is_null()) {
      m.validation_stats.correlation_r = jm.at("validation_r").get<double>();
    }
    m.validation_stats.rmse = jm.value("validation_rmse", 0.0);
    bank.models.push_back(std::move(m));
  }

  const auto& expected = task_classes(bank.task);
  if (bank.models.size() != expected.size()) {
    throw FormatError(manifest_path.string(), 1,
                      "bank does not cover every task class");
  }
  return bank;
}

}  // namespace epsdiag::bank
