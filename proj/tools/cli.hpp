#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dsae/delaymodel.hpp"
#include "dsae/evaluate.hpp"

namespace cli {

// Every setting of a simulate / embed / train / eval run. Unused fields are
// ignored by commands that do not need them.
struct RunConfig {
  // data source: a builtin system or a CSV file
  std::string system;
  std::vector<double> params;  // empty selects the system defaults
  std::vector<double> x0;      // empty selects the system defaults
  double dt = 0.001;
  std::size_t steps = 10000;
  std::size_t burn_in = 1000;
  std::size_t component = 1;   // measured coordinate, 1-based
  double noise = 0.0;
  std::string input;
  std::size_t column = 1;      // data column of the input CSV, 1-based after the time column

  // embedding and model
  std::string n = "128";        // integer or "auto"
  std::string p = "10";         // integer or "none"
  bool smooth = false;
  std::size_t m = 3;
  std::vector<std::size_t> hidden = {32, 32, 32};
  std::string activation = "sigmoid";
  int degree = 2;
  bool trig = false;
  bool constant = true;
  // loss weights; negative selects the data-scaled default
  double lambda1 = -1.0;
  double lambda2 = -1.0;
  double lambda3 = 1.0;
  double lambda4 = 1e-2;
  double lambda5 = 1e-5;

  // training
  std::size_t epochs = 200;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::size_t refit_period = 20;
  double threshold = 0.1;
  double ridge = 1e-6;
  std::size_t rollout_steps = 0;
  std::string mode = "random";
  double sigma = 20.0;
  std::size_t pretrain_epochs = 0;
  double grad_clip = 10.0;
  double lambda_sup = 1.0;
  bool refit = true;
  bool refit_revive = true;

  // evaluation
  std::size_t horizon = 0;
  std::size_t long_steps = 10000;
  std::string checkpoint;

  std::uint64_t seed = 0;
  std::string out = "out";
  bool plot = false;
};

// Registers the options of `command` ("simulate", "embed", "train", "sweep", "eval").
void add_run_options(CLI::App& app, RunConfig& cfg, const std::string& command);

// Sectioned key=value text that `--config` reads back to the same run.
std::string manifest_text(const std::string& command, const RunConfig& cfg);

// Applies `--key value` overrides to a copy of `base`.
RunConfig with_overrides(const RunConfig& base, const std::string& command,
                         const std::vector<std::pair<std::string, std::string>>& overrides);

int cmd_simulate(const RunConfig& cfg);
int cmd_embed(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);

struct TrainOutcome {
  dsae::TrainReport report;
  dsae::EvalMetrics metrics;
  std::size_t active_terms = 0;
};
// Runs a full training job into cfg.out. `quiet` suppresses stdout.
TrainOutcome run_train(const RunConfig& cfg, bool quiet);
int cmd_train(const RunConfig& cfg);

struct SweepSpec {
  std::vector<std::string> grid;  // "key=v1,v2,..."
  std::size_t seeds = 1;
  std::size_t workers = 1;
};
int cmd_sweep(const RunConfig& base, const SweepSpec& spec);

}  // namespace cli
