#include <sstream>
#include <type_traits>

#include "cli.hpp"
#include "dsae/io.hpp"

namespace cli {

namespace {

bool uses(const std::string& command, std::initializer_list<const char*> commands) {
  for (const char* c : commands)
    if (command == c) return true;
  return false;
}

// Calls v(name, field, description) for every option of `command`.
template <class Visitor>
void visit_options(Visitor&& v, RunConfig& cfg, const std::string& command) {
  if (uses(command, {"simulate", "embed", "train", "sweep", "eval"})) {
    v("system", cfg.system, "builtin system: lorenz, rossler, lotka_volterra");
    v("params", cfg.params, "system parameters (comma separated)");
    v("x0", cfg.x0, "initial state (comma separated)");
    v("dt", cfg.dt, "sample interval");
    v("steps", cfg.steps, "number of samples");
    v("burn-in", cfg.burn_in, "integration steps discarded before sampling");
    v("component", cfg.component, "measured state coordinate (1-based)");
    v("noise", cfg.noise, "standard deviation of additive measurement noise");
    if (command != "simulate") {
      v("input", cfg.input, "measurement or trajectory CSV (first column is time)");
      v("column", cfg.column, "data column of --input (1-based, after time)");
    }
  }
  if (uses(command, {"embed", "train", "sweep"})) {
    v("n", cfg.n, "number of delays, or auto");
    v("p", cfg.p, "SVD rank, or none");
    v("smooth", cfg.smooth, "smooth before differencing");
  }
  if (uses(command, {"train", "sweep"})) {
    v("m", cfg.m, "latent dimension");
    v("hidden", cfg.hidden, "hidden layer widths (comma separated)");
    v("activation", cfg.activation, "sigmoid, tanh or elu");
    v("degree", cfg.degree, "polynomial degree of the SINDy library");
    v("trig", cfg.trig, "add sin and cos terms");
    v("constant", cfg.constant, "include the constant term");
    v("lambda1", cfg.lambda1, "weight of the hdot loss (negative: data-scaled default)");
    v("lambda2", cfg.lambda2, "weight of the zdot loss (negative: data-scaled default)");
    v("lambda3", cfg.lambda3, "weight of the z1 loss");
    v("lambda4", cfg.lambda4, "weight of the consistency loss");
    v("lambda5", cfg.lambda5, "weight of the L1 penalty");
    v("epochs", cfg.epochs, "training epochs");
    v("batch-size", cfg.batch_size, "minibatch size");
    v("lr", cfg.learning_rate, "Adam learning rate");
    v("refit-period", cfg.refit_period, "epochs between STLSQ refits");
    v("threshold", cfg.threshold, "STLSQ threshold");
    v("ridge", cfg.ridge, "STLSQ ridge");
    v("rollout-steps", cfg.rollout_steps, "consistency rollout length (0: n - 1)");
    v("mode", cfg.mode, "supervised, known_equation, perturbed or random");
    v("sigma", cfg.sigma, "perturbation standard deviation");
    v("pretrain-epochs", cfg.pretrain_epochs, "epochs fitting the networks to the SVD modes");
    v("grad-clip", cfg.grad_clip, "global gradient norm clip (0 disables)");
    v("lambda-sup", cfg.lambda_sup, "weight of the supervised loss");
    v("refit", cfg.refit, "run periodic STLSQ refits");
    v("refit-revive", cfg.refit_revive, "let refits reactivate pruned library terms");
  }
  if (uses(command, {"train", "sweep", "eval"})) {
    v("horizon", cfg.horizon, "forecast horizon in samples (0: n - 1)");
    v("long-steps", cfg.long_steps, "length of the long latent rollout");
    v("plot", cfg.plot, "write SVG plots");
  }
  if (command == "eval") v("checkpoint", cfg.checkpoint, "checkpoint directory");
  v("seed", cfg.seed, "random seed");
  v("out", cfg.out, "output directory");
}

std::string format_value(const std::string& s) { return '"' + s + '"'; }
std::string format_value(bool b) { return b ? "true" : "false"; }
std::string format_value(double d) { return dsae::io::format_double(d); }
template <class T>
std::enable_if_t<std::is_integral_v<T>, std::string> format_value(T v) {
  return std::to_string(v);
}
template <class T>
std::string format_value(const std::vector<T>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_value(v[i]);
  return s + "]";
}

}  // namespace

void add_run_options(CLI::App& app, RunConfig& cfg, const std::string& command) {
  visit_options(
      [&app](const char* name, auto& field, const char* desc) {
        auto* opt = app.add_option(std::string("--") + name, field, desc);
        using F = std::decay_t<decltype(field)>;
        if constexpr (!std::is_same_v<F, std::string> && !std::is_arithmetic_v<F>) opt->delimiter(',');
      },
      cfg, command);
}

std::string manifest_text(const std::string& command, const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::ostringstream s;
  s << "[" << command << "]\n";
  visit_options(
      [&s](const char* name, auto& field, const char*) {
        using F = std::decay_t<decltype(field)>;
        if constexpr (!std::is_same_v<F, std::string> && !std::is_arithmetic_v<F>)
          if (field.empty()) return;
        s << name << "=" << format_value(field) << "\n";
      },
      copy, command);
  return s.str();
}

RunConfig with_overrides(const RunConfig& base, const std::string& command,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg = base;
  CLI::App app;
  add_run_options(app, cfg, command);
  std::vector<std::string> args;
  for (const auto& [k, v] : overrides) {
    args.push_back("--" + k);
    args.push_back(v);
  }
  std::reverse(args.begin(), args.end());
  app.parse(args);
  return cfg;
}

}  // namespace cli
