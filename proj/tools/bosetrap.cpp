#include "bosetrap/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  using namespace bosetrap;
  CLI::App app{"Trapped bosons by stochastic variational diagonalisation"};
  app.set_version_flag("--version", std::string(cli::version));
  app.require_subcommand(1);

  cli::Options opt;
  std::string config_path, out_dir, checkpoint;
  int jobs = 0;
  std::uint64_t seed = 0;
  auto common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", config_path, "run configuration (JSON)");
    if (config_required) c->required();
    c->check(CLI::ExistingFile);
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "override the random seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--quiet", opt.quiet, "suppress progress output");
  };

  auto* tune = app.add_subcommand("tune", "scattering length, effective range and bound states of the Gaussian well");
  common(tune, true);
  tune->add_flag("--sweep", opt.sweep, "forward-solve the nine tabulated depths");

  auto* solve = app.add_subcommand("solve", "grow and optimise the basis");
  common(solve, true);
  solve->add_option("--resume", checkpoint, "continue from a checkpoint")->check(CLI::ExistingFile);

  auto* spectrum = app.add_subcommand("spectrum", "spectrum of a solved checkpoint");
  common(spectrum, true);
  spectrum->add_option("--checkpoint", checkpoint, "checkpoint file (default: <out>/checkpoint.json)");

  auto* obs = app.add_subcommand("observables", "condensate fraction and central density around the BEC state");
  common(obs, true);
  obs->add_option("--checkpoint", checkpoint, "checkpoint file (default: <out>/checkpoint.json)");

  auto* repro = app.add_subcommand("repro", "regenerate the reference tables and figure data");
  common(repro, false);
  std::string which;
  cli::ReproContext ctx;
  repro->add_option("which", which, "table1 | table2 | fig_e | fig_cf | fig_states")
      ->required()
      ->check(CLI::IsMember({"table1", "table2", "fig_e", "fig_cf", "fig_states"}));
  repro->add_option("--rows", ctx.rows, "number of tabulated scattering lengths to use")->check(CLI::Range(1, 9));
  repro->add_flag("--full", ctx.full_basis, "table2: also run the full correlated basis");
  repro->add_flag("--attractive", ctx.attractive, "table1: also run the attractive Gaussian column");

  CLI11_PARSE(app, argc, argv);

  if (!config_path.empty()) opt.config_path = config_path;
  if (!out_dir.empty()) opt.out = out_dir;
  if (jobs > 0) opt.jobs = jobs;
  if (seed) opt.seed = seed;
  if (!checkpoint.empty()) opt.checkpoint = checkpoint;

  try {
    if (*tune) return cli::cmd_tune(opt);
    if (*solve) return cli::cmd_solve(opt);
    if (*spectrum) return cli::cmd_spectrum(opt);
    if (*obs) return cli::cmd_observables(opt);
    if (*repro) return cli::cmd_repro(which, opt, ctx);
  } catch (const config::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return cli::failure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::failure;
  }
  return cli::failure;
}
