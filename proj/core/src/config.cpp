#include "epsdiag/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "epsdiag/errors.hpp"
#include "epsdiag/rng.hpp"
#include "epsdiag/telemetry.hpp"

namespace epsdiag::app {

RunConfig::RunConfig() {
  train.max_epochs = 300;
  train.goal_mse = 1e-10;
}

sim::ScenarioConfig RunConfig::scenario(faults::FaultClass fault,
                                        std::uint64_t scenario_seed) const {
  sim::ScenarioConfig s;
  s.sample_count = sample_count;
  s.seed = scenario_seed;
  s.timestep_s = timestep_s;
  s.fault = fault;
  s.plant = plant;
  s.noise_sigma_frac = noise_sigma_frac;
  s.soc_noise_sigma = soc_noise_sigma;
  s.soc_quantum = soc_quantum;
  s.initial_soc = initial_soc;
  return s;
}

cls::CompareOptions RunConfig::compare_options() const {
  cls::CompareOptions o;
  o.train_frac = classify_train_frac;
  o.knn_k = knn_k;
  o.folds = folds;
  o.knn_curve_k_max = knn_curve_k_max;
  o.knn_standardize = knn_standardize;
  o.pca_standardize = pca_standardize;
  o.pca_center = pca_center;
  o.dt = dt;
  o.mlp.hidden = classifier_hidden;
  o.mlp.train.max_epochs = classifier_max_epochs;
  o.mlp.train.goal_mse = classifier_goal_mse;
  return o;
}

void RunConfig::validate() const {
  if (sample_count < 1) throw ConfigError("simulate.sample_count must be >= 1");
  if (!(timestep_s > 0.0)) throw ConfigError("simulate.timestep_s must be > 0");
  if (!(noise_sigma_frac >= 0.0))
    throw ConfigError("simulate.noise_sigma_frac must be >= 0");
  if (!(soc_noise_sigma >= 0.0))
    throw ConfigError("simulate.soc_noise_sigma must be >= 0");
  if (!(soc_quantum >= 0.0))
    throw ConfigError("simulate.soc_quantum must be >= 0");
  plant.validate();
  for (const auto& [name, band] : rates) {
    if (!(band.lambda_min >= 0.0) || band.lambda_max < band.lambda_min) {
      throw ConfigError("rates." + name + " must be a nonnegative band");
    }
  }
  if (hidden < 1) throw ConfigError("train.hidden must be >= 1");
  if (!(train_frac > 0.0 && train_frac < 1.0))
    throw ConfigError("train.train_frac must be in (0, 1)");
  train.validate();
  if (!(classify_train_frac > 0.0 && classify_train_frac < 1.0))
    throw ConfigError("classify.train_frac must be in (0, 1)");
  if (!(feature_quantum_i >= 0.0))
    throw ConfigError("classify.feature_quantum_i must be >= 0");
  if (knn_k < 1) throw ConfigError("classify.knn_k must be >= 1");
  if (folds < 2) throw ConfigError("classify.folds must be >= 2");
  if (knn_curve_k_max < 1)
    throw ConfigError("classify.knn_curve_k_max must be >= 1");
  if (dt.max_depth < 0) throw ConfigError("classify.dt_max_depth must be >= 0");
  if (dt.min_leaf < 1) throw ConfigError("classify.dt_min_leaf must be >= 1");
  if (classifier_hidden < 1)
    throw ConfigError("classify.mlp_hidden must be >= 1");
  if (classifier_max_epochs < 0)
    throw ConfigError("classify.mlp_max_epochs must be >= 0");
  if (!(classifier_goal_mse >= 0.0))
    throw ConfigError("classify.mlp_goal_mse must be >= 0");
}

namespace {

struct Entry {
  std::string section;
  std::string key;
  std::string value;
  int line;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<Entry> parse_ini(const std::string& text, const std::string& name) {
  std::vector<Entry> entries;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(name + ":" + std::to_string(line_no) +
                          ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(name + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    Entry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = line_no;
    if (e.key.empty()) {
      throw ConfigError(name + ":" + std::to_string(line_no) + ": empty key");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

double to_double(const Entry& e, const std::string& name) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(name + ":" + std::to_string(e.line) + ": key '" +
                      e.section + "." + e.key + "' expects a number, got '" +
                      e.value + "'");
  }
}

int to_int(const Entry& e, const std::string& name) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ConfigError(name + ":" + std::to_string(e.line) + ": key '" +
                      e.section + "." + e.key + "' expects an integer, got '" +
                      e.value + "'");
  }
}

std::uint64_t to_u64(const Entry& e, const std::string& name) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(name + ":" + std::to_string(e.line) + ": key '" +
                      e.section + "." + e.key +
                      "' expects a nonnegative integer, got '" + e.value +
                      "'");
  }
}

bool to_bool(const Entry& e, const std::string& name) {
  std::string v = e.value;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(name + ":" + std::to_string(e.line) + ": key '" +
                    e.section + "." + e.key + "' expects a boolean, got '" +
                    e.value + "'");
}

faults::RateBand to_band(const Entry& e, const std::string& name) {
  const auto comma = e.value.find(',');
  faults::RateBand band;
  try {
    if (comma == std::string::npos) {
      band.lambda_min = band.lambda_max = std::stod(trim(e.value));
    } else {
      band.lambda_min = std::stod(trim(e.value.substr(0, comma)));
      band.lambda_max = std::stod(trim(e.value.substr(comma + 1)));
    }
  } catch (const std::exception&) {
    throw ConfigError(name + ":" + std::to_string(e.line) + ": key 'rates." +
                      e.key + "' expects 'lambda' or 'lambda_min, lambda_max'");
  }
  return band;
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& name) {
  RunConfig cfg;
  const std::vector<Entry> entries = parse_ini(text, name);

  using Setter = std::function<void(RunConfig&, const Entry&)>;
  const std::map<std::string, Setter> setters = {
      {"simulate.task",
       [&](RunConfig& c, const Entry& e) {
         c.task = bank::task_from_token(e.value);
       }},
      {"simulate.sample_count",
       [&](RunConfig& c, const Entry& e) { c.sample_count = to_int(e, name); }},
      {"simulate.timestep_s",
       [&](RunConfig& c, const Entry& e) { c.timestep_s = to_double(e, name); }},
      {"simulate.seed",
       [&](RunConfig& c, const Entry& e) { c.seed = to_u64(e, name); }},
      {"simulate.noise_sigma_frac",
       [&](RunConfig& c, const Entry& e) {
         c.noise_sigma_frac = to_double(e, name);
       }},
      {"simulate.soc_noise_sigma",
       [&](RunConfig& c, const Entry& e) {
         c.soc_noise_sigma = to_double(e, name);
       }},
      {"simulate.soc_quantum",
       [&](RunConfig& c, const Entry& e) {
         c.soc_quantum = to_double(e, name);
       }},
      {"simulate.initial_soc",
       [&](RunConfig& c, const Entry& e) {
         c.initial_soc = to_double(e, name);
       }},

      {"faults.i_ref_a",
       [&](RunConfig& c, const Entry& e) { c.plant.i_ref_a = to_double(e, name); }},
      {"faults.v_ref_v",
       [&](RunConfig& c, const Entry& e) { c.plant.v_ref_v = to_double(e, name); }},
      {"faults.alpha_i_per_c",
       [&](RunConfig& c, const Entry& e) {
         c.plant.alpha_i_per_c = to_double(e, name);
       }},
      {"faults.alpha_v_per_c",
       [&](RunConfig& c, const Entry& e) {
         c.plant.alpha_v_per_c = to_double(e, name);
       }},
      {"faults.efficiency",
       [&](RunConfig& c, const Entry& e) {
         c.plant.efficiency = to_double(e, name);
       }},
      {"faults.k_reg",
       [&](RunConfig& c, const Entry& e) { c.plant.k_reg = to_double(e, name); }},
      {"faults.c_batt_ah",
       [&](RunConfig& c, const Entry& e) {
         c.plant.c_batt_ah = to_double(e, name);
       }},
      {"faults.load_beta",
       [&](RunConfig& c, const Entry& e) {
         c.plant.load_beta = to_double(e, name);
       }},
      {"faults.pv_open_fraction",
       [&](RunConfig& c, const Entry& e) {
         c.plant.pv_open_fraction = to_double(e, name);
       }},
      {"faults.line_line_v_fraction",
       [&](RunConfig& c, const Entry& e) {
         c.plant.line_line_v_fraction = to_double(e, name);
       }},
      {"faults.line_line_i_noise",
       [&](RunConfig& c, const Entry& e) {
         c.plant.line_line_i_noise = to_double(e, name);
       }},
      {"faults.mppt_scale",
       [&](RunConfig& c, const Entry& e) {
         c.plant.mppt_scale = to_double(e, name);
       }},
      {"faults.reg_open_scale",
       [&](RunConfig& c, const Entry& e) {
         c.plant.reg_open_scale = to_double(e, name);
       }},
      {"faults.leak_a",
       [&](RunConfig& c, const Entry& e) { c.plant.leak_a = to_double(e, name); }},
      {"faults.load_ripple_mppt_open_a",
       [&](RunConfig& c, const Entry& e) {
         c.plant.load_ripple_mppt_open_a = to_double(e, name);
       }},
      {"faults.load_ripple_reg_open_a",
       [&](RunConfig& c, const Entry& e) {
         c.plant.load_ripple_reg_open_a = to_double(e, name);
       }},
      {"faults.tier_none_a",
       [&](RunConfig& c, const Entry& e) {
         c.plant.tier_none_a = to_double(e, name);
       }},
      {"faults.tier_pv_line_line_a",
       [&](RunConfig& c, const Entry& e) {
         c.plant.tier_pv_line_line_a = to_double(e, name);
       }},
      {"faults.tier_pv_open_a",
       [&](RunConfig& c, const Entry& e) {
         c.plant.tier_pv_open_a = to_double(e, name);
       }},
      {"faults.tier_mppt_open_a",
       [&](RunConfig& c, const Entry& e) {
         c.plant.tier_mppt_open_a = to_double(e, name);
       }},
      {"faults.tier_reg_open_a",
       [&](RunConfig& c, const Entry& e) {
         c.plant.tier_reg_open_a = to_double(e, name);
       }},
      {"faults.tier_reg_short_a",
       [&](RunConfig& c, const Entry& e) {
         c.plant.tier_reg_short_a = to_double(e, name);
       }},
      {"faults.tier_battery_ground_a",
       [&](RunConfig& c, const Entry& e) {
         c.plant.tier_battery_ground_a = to_double(e, name);
       }},
      {"faults.initial_soc_none",
       [&](RunConfig& c, const Entry& e) {
         c.plant.initial_soc_none = to_double(e, name);
       }},
      {"faults.initial_soc_pv_line_line",
       [&](RunConfig& c, const Entry& e) {
         c.plant.initial_soc_pv_line_line = to_double(e, name);
       }},
      {"faults.initial_soc_pv_open",
       [&](RunConfig& c, const Entry& e) {
         c.plant.initial_soc_pv_open = to_double(e, name);
       }},
      {"faults.initial_soc_mppt_open",
       [&](RunConfig& c, const Entry& e) {
         c.plant.initial_soc_mppt_open = to_double(e, name);
       }},
      {"faults.initial_soc_reg_open",
       [&](RunConfig& c, const Entry& e) {
         c.plant.initial_soc_reg_open = to_double(e, name);
       }},
      {"faults.initial_soc_reg_short",
       [&](RunConfig& c, const Entry& e) {
         c.plant.initial_soc_reg_short = to_double(e, name);
       }},
      {"faults.initial_soc_battery_ground",
       [&](RunConfig& c, const Entry& e) {
         c.plant.initial_soc_battery_ground = to_double(e, name);
       }},

      {"train.hidden",
       [&](RunConfig& c, const Entry& e) { c.hidden = to_int(e, name); }},
      {"train.train_frac",
       [&](RunConfig& c, const Entry& e) { c.train_frac = to_double(e, name); }},
      {"train.max_epochs",
       [&](RunConfig& c, const Entry& e) {
         c.train.max_epochs = to_int(e, name);
       }},
      {"train.goal_mse",
       [&](RunConfig& c, const Entry& e) {
         c.train.goal_mse = to_double(e, name);
       }},
      {"train.mu_init",
       [&](RunConfig& c, const Entry& e) {
         c.train.mu_init = to_double(e, name);
       }},
      {"train.mu_inc",
       [&](RunConfig& c, const Entry& e) { c.train.mu_inc = to_double(e, name); }},
      {"train.mu_dec",
       [&](RunConfig& c, const Entry& e) { c.train.mu_dec = to_double(e, name); }},
      {"train.max_mu",
       [&](RunConfig& c, const Entry& e) { c.train.max_mu = to_double(e, name); }},

      {"classify.train_frac",
       [&](RunConfig& c, const Entry& e) {
         c.classify_train_frac = to_double(e, name);
       }},
      {"classify.feature_quantum_i",
       [&](RunConfig& c, const Entry& e) {
         c.feature_quantum_i = to_double(e, name);
       }},
      {"classify.knn_k",
       [&](RunConfig& c, const Entry& e) { c.knn_k = to_int(e, name); }},
      {"classify.folds",
       [&](RunConfig& c, const Entry& e) { c.folds = to_int(e, name); }},
      {"classify.knn_curve_k_max",
       [&](RunConfig& c, const Entry& e) {
         c.knn_curve_k_max = to_int(e, name);
       }},
      {"classify.knn_standardize",
       [&](RunConfig& c, const Entry& e) {
         c.knn_standardize = to_bool(e, name);
       }},
      {"classify.pca_standardize",
       [&](RunConfig& c, const Entry& e) {
         c.pca_standardize = to_bool(e, name);
       }},
      {"classify.pca_center",
       [&](RunConfig& c, const Entry& e) { c.pca_center = to_bool(e, name); }},
      {"classify.dt_max_depth",
       [&](RunConfig& c, const Entry& e) { c.dt.max_depth = to_int(e, name); }},
      {"classify.dt_min_leaf",
       [&](RunConfig& c, const Entry& e) { c.dt.min_leaf = to_int(e, name); }},
      {"classify.mlp_hidden",
       [&](RunConfig& c, const Entry& e) {
         c.classifier_hidden = to_int(e, name);
       }},
      {"classify.mlp_max_epochs",
       [&](RunConfig& c, const Entry& e) {
         c.classifier_max_epochs = to_int(e, name);
       }},
      {"classify.mlp_goal_mse",
       [&](RunConfig& c, const Entry& e) {
         c.classifier_goal_mse = to_double(e, name);
       }},

      {"report.timestamps",
       [&](RunConfig& c, const Entry& e) { c.timestamps = to_bool(e, name); }},
      {"report.svg",
       [&](RunConfig& c, const Entry& e) { c.svg = to_bool(e, name); }},
  };

  for (const Entry& e : entries) {
    if (e.section == "rates") {
      if (faults::default_rates().count(e.key) == 0) {
        throw ConfigError(name + ":" + std::to_string(e.line) +
                          ": unknown component 'rates." + e.key + "'");
      }
      cfg.rates[e.key] = to_band(e, name);
      continue;
    }
    const std::string full = e.section + "." + e.key;
    const auto it = setters.find(full);
    if (it == setters.end()) {
      throw ConfigError(name + ":" + std::to_string(e.line) +
                        ": unknown key '" + full + "'");
    }
    it->second(cfg, e);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), path);
}

std::string RunConfig::canonical_text() const {
  std::ostringstream out;
  const auto d = [](double v) { return io::fmt17(v); };
  out << "[simulate]\n"
      << "task = " << bank::task_token(task) << '\n'
      << "sample_count = " << sample_count << '\n'
      << "timestep_s = " << d(timestep_s) << '\n'
      << "seed = " << seed << '\n'
      << "noise_sigma_frac = " << d(noise_sigma_frac) << '\n'
      << "soc_noise_sigma = " << d(soc_noise_sigma) << '\n'
      << "soc_quantum = " << d(soc_quantum) << '\n';
  if (initial_soc) out << "initial_soc = " << d(*initial_soc) << '\n';
  out << "[faults]\n"
      << "i_ref_a = " << d(plant.i_ref_a) << '\n'
      << "v_ref_v = " << d(plant.v_ref_v) << '\n'
      << "alpha_i_per_c = " << d(plant.alpha_i_per_c) << '\n'
      << "alpha_v_per_c = " << d(plant.alpha_v_per_c) << '\n'
      << "efficiency = " << d(plant.efficiency) << '\n'
      << "k_reg = " << d(plant.k_reg) << '\n'
      << "c_batt_ah = " << d(plant.c_batt_ah) << '\n'
      << "load_beta = " << d(plant.load_beta) << '\n'
      << "pv_open_fraction = " << d(plant.pv_open_fraction) << '\n'
      << "line_line_v_fraction = " << d(plant.line_line_v_fraction) << '\n'
      << "line_line_i_noise = " << d(plant.line_line_i_noise) << '\n'
      << "mppt_scale = " << d(plant.mppt_scale) << '\n'
      << "reg_open_scale = " << d(plant.reg_open_scale) << '\n'
      << "leak_a = " << d(plant.leak_a) << '\n'
      << "load_ripple_mppt_open_a = " << d(plant.load_ripple_mppt_open_a)
      << '\n'
      << "load_ripple_reg_open_a = " << d(plant.load_ripple_reg_open_a) << '\n'
      << "tier_none_a = " << d(plant.tier_none_a) << '\n'
      << "tier_pv_line_line_a = " << d(plant.tier_pv_line_line_a) << '\n'
      << "tier_pv_open_a = " << d(plant.tier_pv_open_a) << '\n'
      << "tier_mppt_open_a = " << d(plant.tier_mppt_open_a) << '\n'
      << "tier_reg_open_a = " << d(plant.tier_reg_open_a) << '\n'
      << "tier_reg_short_a = " << d(plant.tier_reg_short_a) << '\n'
      << "tier_battery_ground_a = " << d(plant.tier_battery_ground_a) << '\n'
      << "initial_soc_none = " << d(plant.initial_soc_none) << '\n'
      << "initial_soc_pv_line_line = " << d(plant.initial_soc_pv_line_line)
      << '\n'
      << "initial_soc_pv_open = " << d(plant.initial_soc_pv_open) << '\n'
      << "initial_soc_mppt_open = " << d(plant.initial_soc_mppt_open) << '\n'
      << "initial_soc_reg_open = " << d(plant.initial_soc_reg_open) << '\n'
      << "initial_soc_reg_short = " << d(plant.initial_soc_reg_short) << '\n'
      << "initial_soc_battery_ground = "
      << d(plant.initial_soc_battery_ground) << '\n';
  out << "[rates]\n";
  for (const auto& [k, band] : rates) {
    out << k << " = " << d(band.lambda_min) << ", " << d(band.lambda_max)
        << '\n';
  }
  out << "[train]\n"
      << "hidden = " << hidden << '\n'
      << "train_frac = " << d(train_frac) << '\n'
      << "max_epochs = " << train.max_epochs << '\n'
      << "goal_mse = " << d(train.goal_mse) << '\n'
      << "mu_init = " << d(train.mu_init) << '\n'
      << "mu_inc = " << d(train.mu_inc) << '\n'
      << "mu_dec = " << d(train.mu_dec) << '\n'
      << "max_mu = " << d(train.max_mu) << '\n';
  out << "[classify]\n"
      << "train_frac = " << d(classify_train_frac) << '\n'
      << "feature_quantum_i = " << d(feature_quantum_i) << '\n'
      << "knn_k = " << knn_k << '\n'
      << "folds = " << folds << '\n'
      << "knn_curve_k_max = " << knn_curve_k_max << '\n'
      << "knn_standardize = " << (knn_standardize ? "true" : "false") << '\n'
      << "pca_standardize = " << (pca_standardize ? "true" : "false") << '\n'
      << "pca_center = " << (pca_center ? "true" : "false") << '\n'
      << "dt_max_depth = " << dt.max_depth << '\n'
      << "dt_min_leaf = " << dt.min_leaf << '\n'
      << "mlp_hidden = " << classifier_hidden << '\n'
      << "mlp_max_epochs = " << classifier_max_epochs << '\n'
      << "mlp_goal_mse = " << d(classifier_goal_mse) << '\n';
  out << "[report]\n"
      << "timestamps = " << (timestamps ? "true" : "false") << '\n'
      << "svg = " << (svg ? "true" : "false") << '\n';
  return out.str();
}

std::string RunConfig::config_hash() const {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    rng::fnv1a(canonical_text())));
  return std::string("fnv1a:") + buf;
}

}  // namespace epsdiag::app
