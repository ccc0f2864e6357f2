#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

#include "subrad/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Subradiant state preparation with a dispersive cavity field"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir = ".";
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  bool force = false;
  std::string axis;
  std::vector<double> grid;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "seed for sampled thermal mixtures");
  };
  CLI::App* protocol = app.add_subcommand("protocol", "run the preparation protocol and write report.json");
  add_common(protocol);
  protocol->add_flag("--force", force, "run even when the validity parameter exceeds 0.3");
  CLI::App* sweep = app.add_subcommand("sweep", "scan one parameter and write sweep.csv");
  add_common(sweep);
  sweep->add_option("--axis", axis, "N, delta_ratio or mean_n")->check(CLI::IsMember({"N", "delta_ratio", "mean_n"}));
  sweep->add_option("--grid", grid, "grid values")->delimiter(',');
  CLI::App* spectrum = app.add_subcommand("spectrum", "diagonalize one excitation block");
  add_common(spectrum);
  CLI::App* evolve = app.add_subcommand("evolve", "free evolution of the initial state");
  add_common(evolve);

  CLI11_PARSE(app, argc, argv);

  subrad::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = subrad::load_config(config_path);
    if (seed) cfg.protocol.seed = *seed;
    if (force) cfg.allow_invalid = true;
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return subrad::cli::kExitError;
  }

  std::optional<subrad::SweepSpec> sweep_override;
  if (!axis.empty() || !grid.empty()) {
    if (axis.empty() || grid.empty()) {
      std::cerr << "error: --axis and --grid go together\n";
      return subrad::cli::kExitError;
    }
    sweep_override = subrad::SweepSpec{axis, grid};
  }

  subrad::cli::CommandContext ctx;
  ctx.out_dir = out_dir;
  ctx.jobs = jobs;
  return subrad::cli::run_command(app.get_subcommands().front()->get_name(), cfg, ctx, sweep_override);
}
