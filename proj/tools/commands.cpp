#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "dsae/checkpoint.hpp"
#include "dsae/dynsys.hpp"
#include "dsae/hankel.hpp"
#include "dsae/io.hpp"
#include "dsae/svg.hpp"

namespace cli {

using namespace dsae;
namespace fs = std::filesystem;

namespace {

struct Source {
  MeasurementSeries series;
  std::optional<Matrix> full_state;  // measured coordinate first
  std::optional<SystemDef> system;
  std::vector<std::size_t> order;    // full_state column k is state coordinate order[k]
};

std::vector<std::size_t> measured_first(std::size_t dim, std::size_t component) {
  std::vector<std::size_t> order{component};
  for (std::size_t k = 0; k < dim; ++k)
    if (k != component) order.push_back(k);
  return order;
}

Source load_source(const RunConfig& cfg) {
  if (!cfg.system.empty() && !cfg.input.empty()) throw InvalidArgument("give either --system or --input, not both");
  if (cfg.system.empty() && cfg.input.empty()) throw InvalidArgument("one of --system or --input is required");
  Source src;
  if (!cfg.system.empty()) {
    const Vector params = cfg.params.empty() ? default_params(cfg.system) : Vector(cfg.params);
    SystemDef sys = builtin_system(cfg.system, params);
    const Vector x0 = cfg.x0.empty() ? default_initial_state(cfg.system) : Vector(cfg.x0);
    if (cfg.component < 1 || cfg.component > sys.dim)
      throw InvalidArgument("--component must be in [1, " + std::to_string(sys.dim) + "]");
    const Trajectory tr = simulate(sys, x0, cfg.dt, cfg.steps, cfg.burn_in);
    src.series = add_noise(measure(tr, cfg.component - 1), cfg.noise, cfg.seed);
    src.order = measured_first(sys.dim, cfg.component - 1);
    Matrix full(tr.size(), sys.dim);
    for (std::size_t i = 0; i < tr.size(); ++i)
      for (std::size_t k = 0; k < sys.dim; ++k) full(i, k) = tr.states(i, src.order[k]);
    src.full_state = std::move(full);
    src.system = std::move(sys);
    return src;
  }
  const io::CsvTable t = io::read_csv(cfg.input);
  const std::size_t data_cols = t.values.cols() == 0 ? 0 : t.values.cols() - 1;
  if (cfg.column < 1 || cfg.column > data_cols)
    throw InvalidArgument(cfg.input + ": --column must be in [1, " + std::to_string(data_cols) + "]");
  src.series = add_noise(io::read_series(cfg.input, cfg.column), cfg.noise, cfg.seed);
  if (data_cols > 1) {
    src.order = measured_first(data_cols, cfg.column - 1);
    Matrix full(t.values.rows(), data_cols);
    for (std::size_t i = 0; i < t.values.rows(); ++i)
      for (std::size_t k = 0; k < data_cols; ++k) full(i, k) = t.values(i, 1 + src.order[k]);
    src.full_state = std::move(full);
  }
  return src;
}

std::size_t parse_count(const std::string& s, const char* what) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || s[0] == '-')
    throw InvalidArgument(std::string("--") + what + " must be a positive integer, got '" + s + "'");
  return v;
}

std::size_t resolve_n(const RunConfig& cfg, const MeasurementSeries& ys) {
  if (cfg.n == "auto") return suggest_delay_window(ys).n;
  return parse_count(cfg.n, "n");
}

std::optional<std::size_t> resolve_p(const RunConfig& cfg) {
  if (cfg.p == "none") return std::nullopt;
  return parse_count(cfg.p, "p");
}

void say(bool quiet, const std::string& s) {
  if (!quiet) std::cout << s << std::flush;
}

// Right-hand side of the source system in working coordinates
// w = (P x - mean e1) / scale, written in the model library.
SindyModel true_model(const Source& src, const FeatureLibrary& lib, const Standardization& st) {
  if (!src.system) throw InvalidArgument("this mode needs the true equations; use --system");
  const SystemDef& sys = *src.system;
  if (sys.dim != lib.dim)
    throw InvalidArgument("latent dimension m=" + std::to_string(lib.dim) + " differs from the " + sys.name +
                          " state dimension " + std::to_string(sys.dim));
  const std::vector<std::size_t> order = src.order;
  auto f = [&sys, &st, order](std::span<const double> w, std::span<double> out) {
    Vector x(w.size()), dx(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) x[order[k]] = st.scale * w[k] + (k == 0 ? st.mean : 0.0);
    sys.rhs(x, sys.params, dx);
    for (std::size_t k = 0; k < w.size(); ++k) out[k] = dx[order[k]] / st.scale;
  };
  return express_in_library(lib, f);
}

std::string equations_text(const DelayModel& model, const Standardization& st) {
  std::ostringstream s;
  s << "# working coordinates (z1 is the standardized measurement)\n"
    << format_equations(model.sindy, default_var_names(model.latent_dim()), 3) << "\n";
  if (model.sindy.library.trig) {
    s << "# measurement units: not available for trigonometric libraries\n";
  } else {
    s << "# measurement units (z1 in units of y, mean " << io::format_double(st.mean) << ", scale "
      << io::format_double(st.scale) << ")\n"
      << format_equations(descale_model(model.sindy, st), default_var_names(model.latent_dim()), 3) << "\n";
  }
  return s.str();
}

void write_coefficient_traces(const fs::path& path, const DelayModel& model, const TrainReport& report) {
  const FeatureLibrary& lib = model.sindy.library;
  const std::size_t m = model.latent_dim(), r = lib.size();
  const auto names = lib.term_names(default_var_names(m));
  std::vector<std::string> header{"epoch"};
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t k = 0; k < m; ++k) header.push_back("dz" + std::to_string(k + 1) + ":" + names[i]);
  Matrix v(report.epochs.size(), 1 + r * m);
  for (std::size_t e = 0; e < report.epochs.size(); ++e) {
    v(e, 0) = static_cast<double>(report.epochs[e].epoch);
    std::copy(report.epochs[e].xi.begin(), report.epochs[e].xi.end(), v.row(e).begin() + 1);
  }
  io::write_csv(path, header, v);
}

void write_plots(const fs::path& dir, const DelayModel& model, const TrainingData& data, const TrainReport& report,
                 const EvalMetrics& metrics) {
  fs::create_directories(dir);
  // loss traces
  std::vector<svg::Series> losses;
  const char* names[] = {"recon", "hdot", "zdot", "z1", "cons"};
  for (int k = 0; k < 5; ++k) {
    svg::Series s{names[k], {}, {}};
    for (const EpochRecord& r : report.epochs) {
      const LossBreakdown& l = r.losses;
      const double vals[] = {l.recon, l.hdot, l.zdot, l.z1, l.cons};
      s.x.push_back(static_cast<double>(r.epoch));
      s.y.push_back(vals[k]);
    }
    losses.push_back(std::move(s));
  }
  svg::write_line_plot(dir / "loss.svg", losses, {"Losses", "epoch", "loss", true});
  // coefficient traces for the entries active at the end
  std::vector<svg::Series> coefs;
  const std::size_t m = model.latent_dim();
  const auto terms = model.sindy.library.term_names(default_var_names(m));
  for (std::size_t i = 0; i < model.sindy.mask.size(); ++i) {
    if (!model.sindy.mask[i]) continue;
    svg::Series s{"dz" + std::to_string(i % m + 1) + ": " + terms[i / m], {}, {}};
    for (const EpochRecord& r : report.epochs) {
      s.x.push_back(static_cast<double>(r.epoch));
      s.y.push_back(r.xi[i]);
    }
    coefs.push_back(std::move(s));
  }
  svg::write_line_plot(dir / "coefficients.svg", coefs, {"Coefficients", "epoch", "value", false});
  // latent rollout against the embedding
  if (m >= 2) {
    const Matrix& R = metrics.rollout;
    svg::Series roll{"latent rollout z1-z2", R.col(0), R.col(1)};
    Matrix modes(data.columns(), 2);
    for (std::size_t i = 0; i < data.columns(); ++i) {
      modes(i, 0) = data.inputs(i, 0);
      modes(i, 1) = data.inputs(i, std::min<std::size_t>(1, data.inputs.cols() - 1));
    }
    svg::write_line_plot(dir / "attractor_latent.svg", {roll}, {"Latent rollout", "z1", "z2", false});
    svg::write_line_plot(dir / "attractor_embedding.svg", {{"embedding modes", modes.col(0), modes.col(1)}},
                         {"Embedding", "mode 1", "mode 2", false});
    io::write_csv(dir / "embedding_modes.csv", {"v1", "v2"}, modes);
  }
  io::write_csv(dir / "rollout.csv", default_var_names(m), metrics.rollout);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

int cmd_simulate(const RunConfig& cfg) {
  if (cfg.system.empty()) throw InvalidArgument("--system is required");
  if (cfg.steps < 1) throw InvalidArgument("--steps must be >= 1");
  const Source src = load_source(cfg);
  const fs::path out = cfg.out;
  fs::create_directories(out);
  Trajectory tr;
  tr.times = src.series.times;
  tr.states = Matrix(src.full_state->rows(), src.full_state->cols());
  for (std::size_t i = 0; i < tr.states.rows(); ++i)
    for (std::size_t k = 0; k < tr.states.cols(); ++k) tr.states(i, src.order[k]) = (*src.full_state)(i, k);
  io::write_trajectory(out / "trajectory.csv", tr);
  io::write_series(out / "measurement.csv", src.series);
  io::write_text(out / "manifest.ini", manifest_text("simulate", cfg));
  std::cout << "wrote " << tr.size() << " samples of " << cfg.system << " to " << out.string() << "\n";
  return 0;
}

int cmd_embed(const RunConfig& cfg) {
  const Source src = load_source(cfg);
  const Standardization st = Standardization::fit(src.series.values);
  const MeasurementSeries ys = standardize(src.series, st);
  const std::size_t n = resolve_n(cfg, ys);
  const auto p = resolve_p(cfg);
  const HankelEmbedding e = build_hankel(ys, n, {cfg.smooth});
  const fs::path out = cfg.out;
  save_embedding(out / "embedding", e);
  const std::size_t full = std::min<std::size_t>({e.n, e.q, 20});
  const SvdBasis spectrum = truncated_svd(e, std::min(full, p.value_or(full)));
  std::ostringstream d;
  std::optional<DelayWindow> w;
  if (ys.size() >= 256) w = suggest_delay_window(ys);
  d << "samples = " << ys.size() << "\n"
    << "tau = " << io::format_double(e.tau) << "\n"
    << "n = " << e.n << "\n"
    << "q = " << e.q << "\n"
    << "window = " << io::format_double(e.tau * static_cast<double>(e.n)) << "\n";
  if (w) {
    d << "suggested_n = " << w->n << "\n";
    d << "autocorr_zero_lag = " << (w->autocorr_zero_lag ? std::to_string(*w->autocorr_zero_lag) : "none") << "\n";
  }
  d << "standardize_mean = " << io::format_double(st.mean) << "\n"
    << "standardize_scale = " << io::format_double(st.scale) << "\n";
  const double total = frobenius_sq(e.H);
  double acc = 0.0;
  Matrix spec(spectrum.spectrum.size(), 3);
  for (std::size_t k = 0; k < spectrum.spectrum.size(); ++k) {
    acc += spectrum.spectrum[k] * spectrum.spectrum[k];
    spec(k, 0) = static_cast<double>(k + 1);
    spec(k, 1) = spectrum.spectrum[k];
    spec(k, 2) = acc / total;
    if (k < 20) d << "variance_captured[p=" << k + 1 << "] = " << io::format_double(acc / total) << "\n";
  }
  if (p) {
    const SvdBasis basis = truncated_svd(e, *p);
    save_basis(out / "basis", basis);
    d << "p = " << *p << "\nvariance_captured = " << io::format_double(basis.variance_captured) << "\n";
  }
  io::write_csv(out / "spectrum.csv", {"k", "singular_value", "variance_captured"}, spec);
  io::write_text(out / "diagnostics.txt", d.str());
  io::write_text(out / "manifest.ini", manifest_text("embed", cfg));
  std::cout << d.str();
  return 0;
}

TrainOutcome run_train(const RunConfig& cfg, bool quiet) {
  const Source src = load_source(cfg);
  const Standardization st = Standardization::fit(src.series.values);
  const MeasurementSeries ys = standardize(src.series, st);
  const std::size_t n = resolve_n(cfg, ys);
  const HankelEmbedding e = build_hankel(ys, n, {cfg.smooth});

  AssembleOptions ao;
  ao.svd_rank = resolve_p(cfg);
  ao.latent_dim = cfg.m;
  ao.hidden = cfg.hidden;
  ao.activation = parse_activation(cfg.activation);
  ao.library = {cfg.degree, cfg.trig, cfg.constant};
  ao.weights = LossWeights::defaults_for(e);
  if (cfg.lambda1 >= 0.0) ao.weights.lambda1 = cfg.lambda1;
  if (cfg.lambda2 >= 0.0) ao.weights.lambda2 = cfg.lambda2;
  ao.weights.lambda3 = cfg.lambda3;
  ao.weights.lambda4 = cfg.lambda4;
  ao.weights.lambda5 = cfg.lambda5;
  ao.seed = cfg.seed;
  std::vector<std::string> warnings;
  DelayModel model = assemble_model(e, ao, &warnings);
  if (!quiet)
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  const InitMode mode = parse_init_mode(cfg.mode);
  std::optional<SindyModel> truth;
  if (mode == InitMode::KnownEquation || mode == InitMode::Perturbed)
    truth = true_model(src, model.sindy.library, st);
  initialize_xi(model, mode, truth ? &truth->Xi : nullptr, cfg.sigma, cfg.seed);

  std::optional<Matrix> targets;
  if (mode == InitMode::Supervised) {
    if (!src.full_state) throw InvalidArgument("supervised mode needs the full state (--system or a trajectory CSV)");
    if (src.full_state->cols() != cfg.m)
      throw InvalidArgument("supervised mode needs m equal to the state dimension " +
                            std::to_string(src.full_state->cols()));
    Matrix t(e.q, cfg.m);
    for (std::size_t i = 0; i < e.q; ++i)
      for (std::size_t k = 0; k < cfg.m; ++k)
        t(i, k) = ((*src.full_state)(i, k) - (k == 0 ? st.mean : 0.0)) / st.scale;
    targets = std::move(t);
  }
  const TrainingData data = prepare_data(model, e, targets ? &*targets : nullptr);

  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.learning_rate = cfg.learning_rate;
  tc.refit_period = cfg.refit_period;
  tc.stlsq_threshold = cfg.threshold;
  tc.stlsq_ridge = cfg.ridge;
  tc.rollout_steps = cfg.rollout_steps;
  tc.init_mode = mode;
  tc.perturb_sigma = cfg.sigma;
  tc.pretrain_epochs = cfg.pretrain_epochs;
  tc.grad_clip = cfg.grad_clip;
  tc.lambda_sup = cfg.lambda_sup;
  tc.refit = cfg.refit;
  tc.refit_revive = cfg.refit_revive;
  tc.seed = cfg.seed;
  say(quiet, "training " + std::to_string(cfg.epochs) + " epochs (" + to_string(mode) + ", n=" + std::to_string(n) +
                 ", q=" + std::to_string(e.q) + ")\n");

  TrainOutcome out;
  out.report = train(model, data, tc);
  out.active_terms = model.sindy.active_terms();

  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  io::write_text(dir / "manifest.ini", manifest_text("train", cfg));
  save_checkpoint(dir / "checkpoint", model, st);
  write_train_report(dir / "train_report.csv", out.report);
  write_coefficient_traces(dir / "coefficients.csv", model, out.report);
  io::write_text(dir / "equations.txt", equations_text(model, st));
  if (out.report.pretrain)
    io::write_text(dir / "pretrain.txt",
                   "encoder_nmse = " + io::format_double(out.report.pretrain->encoder_nmse) +
                       "\ndecoder_relative_error = " + io::format_double(out.report.pretrain->decoder_relative_error) +
                       "\n");

  EvalOptions eo;
  eo.horizon = cfg.horizon;
  eo.long_steps = cfg.long_steps;
  out.metrics = evaluate(model, data, ys, eo);
  io::write_text(dir / "metrics.txt", format_metrics(out.metrics));
  if (cfg.plot) write_plots(dir / "plots", model, data, out.report, out.metrics);
  if (!out.report.epochs.empty()) {
    const LossBreakdown& l = out.report.epochs.back().losses;
    std::ostringstream s;
    s << "final epoch " << out.report.epochs.back().epoch << ": recon " << l.recon << ", z1 " << l.z1 << ", total "
      << l.total << ", active terms " << out.active_terms << "\n"
      << equations_text(model, st);
    say(quiet, s.str());
  }
  if (out.report.diverged) say(quiet, "training stopped: " + out.report.message + "\n");
  return out;
}

int cmd_train(const RunConfig& cfg) {
  const TrainOutcome out = run_train(cfg, false);
  if (out.report.diverged) {
    std::cerr << "error: " << out.report.message << "\n";
    return 3;
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) throw InvalidArgument("--checkpoint is required");
  const Checkpoint cp = load_checkpoint(cfg.checkpoint);
  const DelayModel& model = cp.model;
  const Source src = load_source(cfg);
  const MeasurementSeries ys = standardize(src.series, cp.standardization);
  if (std::abs(ys.dt() - model.tau) > 1e-9 * model.tau)
    throw InvalidArgument("data sample interval " + io::format_double(ys.dt()) + " differs from the model tau " +
                          io::format_double(model.tau));
  const HankelEmbedding e = build_hankel(ys, model.delays);
  const TrainingData data = prepare_data(model, e);
  EvalOptions eo;
  eo.horizon = cfg.horizon;
  eo.long_steps = cfg.long_steps;
  const EvalMetrics m = evaluate(model, data, ys, eo);
  const fs::path out = cfg.out;
  fs::create_directories(out);
  io::write_text(out / "metrics.txt", format_metrics(m));

  // Forecast from the first delay window against the data.
  const std::size_t h = m.horizon;
  Matrix X(1, model.input_dim());
  {
    Vector first(ys.values.begin(), ys.values.begin() + static_cast<std::ptrdiff_t>(model.delays));
    const Vector x = model.basis ? project(first, *model.basis) : first;
    std::copy(x.begin(), x.end(), X.row(0).begin());
  }
  const Matrix z0 = forward(model.encoder, X);
  Matrix cmp(h + 1, 3);
  cmp(0, 0) = ys.times[0];
  cmp(0, 1) = src.series.values[0];
  cmp(0, 2) = cp.standardization.inverse(z0(0, 0));
  try {
    const Matrix roll = rollout_latent(model.sindy, z0.row(0), h, model.tau);
    for (std::size_t j = 1; j <= h; ++j) {
      cmp(j, 0) = ys.times[j];
      cmp(j, 1) = src.series.values[j];
      cmp(j, 2) = cp.standardization.inverse(roll(j - 1, 0));
    }
  } catch (const IntegrationDiverged&) {
    for (std::size_t j = 1; j <= h; ++j) {
      cmp(j, 0) = ys.times[j];
      cmp(j, 1) = src.series.values[j];
      cmp(j, 2) = std::nan("");
    }
  }
  io::write_csv(out / "comparison.csv", {"t", "y", "prediction"}, cmp);
  svg::write_line_plot(out / "comparison.svg", {{"data", cmp.col(0), cmp.col(1)}, {"model", cmp.col(0), cmp.col(2)}},
                       {"Forecast from the first delay window", "t", "y", false});
  if (cfg.plot) io::write_csv(out / "rollout.csv", default_var_names(model.latent_dim()), m.rollout);
  io::write_text(out / "manifest.ini", manifest_text("eval", cfg));
  std::cout << format_metrics(m);
  return 0;
}

int cmd_sweep(const RunConfig& base, const SweepSpec& spec) {
  if (spec.grid.empty()) throw InvalidArgument("sweep needs at least one --grid key=v1,v2,...");
  if (spec.seeds < 1) throw InvalidArgument("--seeds must be >= 1");
  if (spec.workers < 1) throw InvalidArgument("--workers must be >= 1");
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const std::string& g : spec.grid) {
    const auto eq = g.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("--grid entries look like key=v1,v2; got '" + g + "'");
    std::vector<std::string> values;
    std::stringstream vs(g.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) values.push_back(v);
    if (values.empty()) throw InvalidArgument("--grid '" + g + "' has no values");
    axes.emplace_back(g.substr(0, eq), std::move(values));
  }

  struct Job {
    std::vector<std::pair<std::string, std::string>> overrides;
    RunConfig cfg;
    std::string hash;
    std::string status = "ok";
    std::string message;
    LossBreakdown losses;
    std::size_t active = 0;
    double prediction = 0.0;
  };
  std::vector<Job> jobs;
  std::vector<std::size_t> idx(axes.size(), 0);
  const fs::path out = base.out;
  while (true) {
    for (std::size_t s = 0; s < spec.seeds; ++s) {
      Job job;
      for (std::size_t a = 0; a < axes.size(); ++a) job.overrides.emplace_back(axes[a].first, axes[a].second[idx[a]]);
      auto ov = job.overrides;
      ov.emplace_back("seed", std::to_string(base.seed + s));
      try {
        job.cfg = with_overrides(base, "train", ov);
      } catch (const CLI::ParseError& e) {
        throw InvalidArgument(std::string("bad --grid value: ") + e.what());
      }
      job.cfg.out = "";
      job.hash = hex(fnv1a(manifest_text("train", job.cfg)));
      job.cfg.out = (out / "cells" / job.hash).string();
      jobs.push_back(std::move(job));
    }
    std::size_t a = 0;
    while (a < axes.size() && ++idx[a] == axes[a].second.size()) idx[a++] = 0;
    if (a == axes.size()) break;
  }

  std::size_t workers = spec.workers;
  if (const char* cap = std::getenv("DSAE_MAX_WORKERS")) {
    const long c = std::atol(cap);
    if (c >= 1) workers = std::min<std::size_t>(workers, static_cast<std::size_t>(c));
  }
  workers = std::min(workers, jobs.size());
  std::cout << "sweep: " << jobs.size() << " runs on " << workers << " workers\n" << std::flush;

  std::atomic<std::size_t> next{0};
  std::mutex log;
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      Job& job = jobs[j];
      try {
        const TrainOutcome r = run_train(job.cfg, true);
        if (!r.report.epochs.empty()) job.losses = r.report.epochs.back().losses;
        job.active = r.active_terms;
        job.prediction = r.metrics.relative_prediction_error();
        if (r.report.diverged) {
          job.status = "failed";
          job.message = r.report.message;
        }
      } catch (const std::exception& e) {
        job.status = "failed";
        job.message = e.what();
      }
      std::lock_guard<std::mutex> lock(log);
      std::cout << "  " << job.hash << " " << job.status << "\n" << std::flush;
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<const Job*> rows;
  for (const Job& j : jobs) rows.push_back(&j);
  std::sort(rows.begin(), rows.end(), [](const Job* a, const Job* b) {
    const bool fa = a->status != "ok", fb = b->status != "ok";
    if (fa != fb) return fb;
    if (!fa) {
      if (a->active != b->active) return a->active < b->active;
      if (a->prediction != b->prediction) return a->prediction < b->prediction;
    }
    if (a->hash != b->hash) return a->hash < b->hash;
    return a->cfg.seed < b->cfg.seed;
  });
  auto clean = [](std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
  };
  std::ostringstream csv;
  csv << "rank,config_hash,status";
  for (const auto& ax : axes) csv << ',' << ax.first;
  csv << ",seed,recon,z1,cons,total,active_terms,prediction_error,message\n";
  std::size_t rank = 1;
  for (const Job* j : rows) {
    csv << rank++ << ',' << j->hash << ',' << j->status;
    for (const auto& ov : j->overrides) csv << ',' << clean(ov.second);
    csv << ',' << j->cfg.seed << ',' << io::format_double(j->losses.recon) << ',' << io::format_double(j->losses.z1)
        << ',' << io::format_double(j->losses.cons) << ',' << io::format_double(j->losses.total) << ',' << j->active
        << ',' << io::format_double(j->prediction) << ',' << clean(j->message) << '\n';
  }
  io::write_text(out / "leaderboard.csv", csv.str());
  std::ostringstream man;
  man << manifest_text("sweep", base) << "seeds=" << spec.seeds << "\nworkers=" << spec.workers << "\ngrid=[";
  for (std::size_t g = 0; g < spec.grid.size(); ++g) man << (g ? "," : "") << '"' << spec.grid[g] << '"';
  man << "]\n";
  io::write_text(out / "manifest.ini", man.str());
  std::cout << "wrote " << (out / "leaderboard.csv").string() << "\n";
  return 0;
}

}  // namespace cli
