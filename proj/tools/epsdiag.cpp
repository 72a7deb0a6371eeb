// epsdiag: batch front door for the EPS fault-diagnosis toolkit.
// Subcommands: gen-data, fit-bank, train-eval, compare.
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "epsdiag/errors.hpp"
#include "epsdiag/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  bool no_timestamp = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "INI configuration file");
  cmd->add_option("--seed", args.seed, "global seed (overrides the config)");
  cmd->add_option("--out", args.out_dir, "output directory")
      ->capture_default_str();
  cmd->add_flag("--no-timestamp", args.no_timestamp,
                "omit timestamps from outputs (golden-test mode)");
  cmd->add_flag("--quiet", args.quiet,
                "stdout carries only machine-readable results");
}

epsdiag::app::RunConfig make_config(const CommonArgs& args) {
  epsdiag::app::RunConfig cfg;
  if (!args.config_path.empty()) {
    cfg = epsdiag::app::load_config_file(args.config_path);
  }
  if (args.seed) cfg.seed = *args.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"epsdiag: satellite electrical power system fault diagnosis "
               "toolkit"};
  app.require_subcommand(1);

  CommonArgs gen_args;
  CLI::App* gen = app.add_subcommand(
      "gen-data", "simulate telemetry for every class of the task");
  add_common(gen, gen_args);

  CommonArgs fit_args;
  std::string fit_data_dir;
  CLI::App* fit = app.add_subcommand(
      "fit-bank", "train the regression model bank from telemetry");
  add_common(fit, fit_args);
  fit->add_option("--data", fit_data_dir, "gen-data output directory")
      ->required();

  CommonArgs eval_args;
  std::string eval_bank_dir, eval_data_dir, eval_method;
  CLI::App* eval = app.add_subcommand(
      "train-eval", "train and evaluate one classification method");
  add_common(eval, eval_args);
  eval->add_option("--bank", eval_bank_dir, "fit-bank output directory")
      ->required();
  eval->add_option("--data", eval_data_dir, "gen-data output directory")
      ->required();
  eval->add_option("--method", eval_method,
                   "one of: mlp_i1, mlp_i2, knn, dt, pca")
      ->required();

  CommonArgs cmp_args;
  std::string cmp_bank_dir, cmp_data_dir;
  CLI::App* cmp = app.add_subcommand(
      "compare", "run all four classifiers under one seed");
  add_common(cmp, cmp_args);
  cmp->add_option("--bank", cmp_bank_dir, "fit-bank output directory")
      ->required();
  cmp->add_option("--data", cmp_data_dir, "gen-data output directory")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    using namespace epsdiag::app;
    if (gen->parsed()) {
      const RunConfig cfg = make_config(gen_args);
      const RunOptions opts{gen_args.no_timestamp, gen_args.quiet};
      const auto files = cmd_gen_data(cfg, opts, gen_args.out_dir);
      if (!gen_args.quiet) {
        std::cout << "wrote " << files.size() << " telemetry files to "
                  << gen_args.out_dir << '\n';
      }
    } else if (fit->parsed()) {
      const RunConfig cfg = make_config(fit_args);
      const RunOptions opts{fit_args.no_timestamp, fit_args.quiet};
      const auto bank = cmd_fit_bank(cfg, opts, fit_data_dir, fit_args.out_dir);
      if (!fit_args.quiet) {
        std::cout << "fitted " << bank.models.size() << " models into "
                  << fit_args.out_dir << '\n';
      }
    } else if (eval->parsed()) {
      const RunConfig cfg = make_config(eval_args);
      const RunOptions opts{eval_args.no_timestamp, eval_args.quiet};
      const std::string report =
          cmd_train_eval(cfg, opts, eval_bank_dir, eval_data_dir, eval_method,
                         eval_args.out_dir);
      if (eval_args.quiet) {
        std::cout << report;
      } else {
        std::cout << "train-eval " << eval_method << " report in "
                  << eval_args.out_dir << '\n';
      }
    } else if (cmp->parsed()) {
      const RunConfig cfg = make_config(cmp_args);
      const RunOptions opts{cmp_args.no_timestamp, cmp_args.quiet};
      const std::string report =
          cmd_compare(cfg, opts, cmp_bank_dir, cmp_data_dir, cmp_args.out_dir);
      if (cmp_args.quiet) {
        std::cout << report;
      } else {
        std::cout << "compare report in " << cmp_args.out_dir << '\n';
      }
    }
  } catch (const epsdiag::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
