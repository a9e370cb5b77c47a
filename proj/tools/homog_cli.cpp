#include "homog/cli/run.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
  CLI::App app{"Periodic homogenization toolkit"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "Run an experiment configuration");
  std::string config, only;
  homog::RunOptions opt;
  run->add_option("config", config, "TOML configuration file")->required();
  run->add_flag("--strict", opt.strict, "Exit with status 1 when any check fails");
  run->add_option("--jobs", opt.jobs, "Worker threads for independent epsilon rows")->check(CLI::PositiveNumber);
  run->add_option("--out", opt.out, homog::cat("Output directory (overrides ", homog::output_dir_env, " and the config)"));
  run->add_option("--only", only, "Run a single stage: cell, tails, spectrum or expansion");
  CLI11_PARSE(app, argc, argv);

  opt.echo = &std::cout;
  try {
    if (!only.empty()) opt.only = homog::parse_stage(only);
  } catch (const homog::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return homog::run_config_file(config, opt);
}
