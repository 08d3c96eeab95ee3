// delaysindy: simulate, embed, train, sweep and evaluate delay SINDy autoencoders.

#include <iostream>

#include "cli.hpp"
#include "dsae/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Delay-embedding SINDy autoencoders"};
  app.set_config("--config", "", "sectioned key=value file; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough();

  cli::RunConfig sim_cfg, embed_cfg, train_cfg, sweep_cfg, eval_cfg;
  cli::SweepSpec sweep_spec;
  auto* sim = app.add_subcommand("simulate", "integrate a builtin system and write its trajectory and measurement");
  cli::add_run_options(*sim, sim_cfg, "simulate");
  auto* embed = app.add_subcommand("embed", "build the Hankel matrix and SVD diagnostics");
  cli::add_run_options(*embed, embed_cfg, "embed");
  auto* train = app.add_subcommand("train", "train a delay SINDy autoencoder");
  cli::add_run_options(*train, train_cfg, "train");
  auto* sweep = app.add_subcommand("sweep", "train a grid of configurations in parallel");
  cli::add_run_options(*sweep, sweep_cfg, "sweep");
  sweep->add_option("--grid", sweep_spec.grid, "key=v1,v2,... (repeatable)");
  sweep->add_option("--seeds", sweep_spec.seeds, "seeds per grid cell");
  sweep->add_option("--workers", sweep_spec.workers, "parallel workers (capped by DSAE_MAX_WORKERS)");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a series");
  cli::add_run_options(*eval, eval_cfg, "eval");

  for (auto* sub : {sim, embed, train, sweep, eval}) sub->configurable();
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) return cli::cmd_simulate(sim_cfg);
    if (embed->parsed()) return cli::cmd_embed(embed_cfg);
    if (train->parsed()) return cli::cmd_train(train_cfg);
    if (sweep->parsed()) return cli::cmd_sweep(sweep_cfg, sweep_spec);
    if (eval->parsed()) return cli::cmd_eval(eval_cfg);
  } catch (const dsae::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const dsae::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const dsae::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
