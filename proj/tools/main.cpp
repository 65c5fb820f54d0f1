#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "causalrd/cli.hpp"

int main(int argc, char** argv) {
  namespace cli = causalrd::cli;
  CLI::App app{"causal rate-distortion solver"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "execute a run configuration");
  std::string config_path;
  std::string mode, out, units;
  std::uint64_t seed = 0;
  bool check = false;
  run->add_option("config", config_path, "JSON run configuration")->required();
  auto* mode_opt = run->add_option("--mode", mode, "override the configured mode")
                       ->check(CLI::IsMember({"solve_s", "target_d", "curve", "horizon_sweep", "verify"}));
  auto* out_opt = run->add_option("--out", out, "override the output path");
  auto* units_opt =
      run->add_option("--units", units, "rate units")->check(CLI::IsMember({"nats", "bits"}));
  auto* seed_opt = run->add_option("--seed", seed, "seed for randomized checks");
  run->add_flag("--check", check, "run the invariant checks");

  CLI11_PARSE(app, argc, argv);

  cli::Overrides overrides;
  if (*mode_opt) overrides.mode = cli::parse_mode(mode);
  if (*out_opt) overrides.out = out;
  if (*units_opt) overrides.units = cli::parse_units(units);
  if (*seed_opt) overrides.seed = seed;
  overrides.check = check;
  return cli::run(config_path, overrides, std::cerr);
}
