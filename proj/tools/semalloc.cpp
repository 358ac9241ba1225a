#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "semalloc/commands.hpp"

namespace cli = semalloc::cli;

int main(int argc, char** argv) {
  CLI::App app{"Semantic-aware power allocation for multi-stream transmission"};
  app.set_version_flag("--version", std::string(cli::kToolVersion));
  app.require_subcommand(1);

  std::string config;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON config (default: bundled configs/default.json)");
  };

  auto* alloc = app.add_subcommand("allocate", "Allocate power for one channel realization");
  cli::AllocateArgs aargs;
  std::string gains;
  std::string csv;
  add_config(alloc);
  alloc->add_option("--pbar", aargs.p_bar, "Perception constraint P_bar")->required();
  alloc->add_option("--method", aargs.method, "unaware|proportional|bisection|all")
      ->capture_default_str();
  auto* seed_opt = alloc->add_option("--seed", aargs.seed, "Seed for the Rayleigh draw");
  alloc->add_option("--fixed-gains", gains, "Small-scale gains \"g1,g2\" instead of a draw")
      ->excludes(seed_opt);
  alloc->add_option("--out", csv, "Also write the allocation as CSV to this file");

  auto* exp = app.add_subcommand("experiment", "Run experiment blocks and write CSV files");
  cli::ExperimentArgs eargs;
  std::string name;
  std::string out_dir = "results";
  std::uint64_t exp_seed = 0;
  add_config(exp);
  exp->add_option("--name", name, "Experiment to run (default: all)");
  exp->add_option("--out", out_dir, "Output directory")->capture_default_str();
  auto* exp_seed_opt = exp->add_option("--seed", exp_seed, "Override every experiment seed");

  auto* val = app.add_subcommand("validate", "Run the built-in oracle suites");
  cli::ValidateArgs vargs;
  std::string suite;
  add_config(val);
  val->add_option("--suite", suite, "info|link|lambertw|perception|linksim");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  if (!config.empty()) {
    aargs.config = eargs.config = vargs.config = config;
  }
  if (alloc->parsed()) {
    try {
      if (!gains.empty()) aargs.fixed_gains = cli::parse_gain_list(gains);
    } catch (const cli::UsageError& e) {
      std::cerr << "usage error: " << e.what() << "\n";
      return cli::kExitUsage;
    }
    if (!csv.empty()) aargs.csv = csv;
    return cli::cmd_allocate(aargs, std::cout, std::cerr);
  }
  if (exp->parsed()) {
    if (!name.empty()) eargs.name = name;
    eargs.out_dir = out_dir;
    if (*exp_seed_opt) eargs.seed = exp_seed;
    return cli::cmd_experiment(eargs, std::cout, std::cerr);
  }
  if (!suite.empty()) vargs.suite = suite;
  return cli::cmd_validate(vargs, std::cout, std::cerr);
}
