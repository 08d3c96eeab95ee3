#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "dsae/delaymodel.hpp"
#include "dsae/io.hpp"

namespace dsae {

void TrainConfig::validate(std::size_t delays) const {
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning rate must be positive");
  if (refit_period < 1) throw InvalidArgument("refit period must be >= 1");
  if (!(stlsq_threshold >= 0.0)) throw InvalidArgument("STLSQ threshold must be nonnegative");
  if (!(stlsq_ridge >= 0.0)) throw InvalidArgument("STLSQ ridge must be nonnegative");
  if (delays < 2) throw InvalidArgument("the embedding needs at least 2 delays");
  if (rollout_steps > delays - 1)
    throw InvalidArgument("rollout steps " + std::to_string(rollout_steps) + " exceed n - 1 = " +
                          std::to_string(delays - 1));
  if (!(perturb_sigma >= 0.0)) throw InvalidArgument("perturbation sigma must be nonnegative");
  if (!(grad_clip >= 0.0)) throw InvalidArgument("gradient clip must be nonnegative");
  if (!(lambda_sup >= 0.0)) throw InvalidArgument("supervised weight must be nonnegative");
}

std::size_t TrainConfig::effective_rollout(std::size_t delays) const {
  return rollout_steps == 0 ? delays - 1 : rollout_steps;
}

std::pair<Matrix, Matrix> encode_all(const DelayModel& model, const TrainingData& data) {
  return forward_with_tangent(model.encoder, data.inputs, data.input_rates);
}

void refit_sindy(DelayModel& model, const TrainingData& data, const StlsqOptions& opts, bool keep_mask) {
  auto [Z, Zdot] = encode_all(model, data);
  const Matrix Theta = evaluate_library(model.sindy.library, Z);
  StlsqResult res = stlsq(Theta, Zdot, opts, keep_mask ? &model.sindy.mask : nullptr);
  model.sindy.Xi = std::move(res.Xi);
  model.sindy.mask = std::move(res.mask);
  model.sindy.apply_mask();
}

Matrix svd_mode_targets(const DelayModel& model, const TrainingData& data) {
  const std::size_t m = model.latent_dim();
  if (!model.basis) throw InvalidArgument("svd_mode_targets: the model has no SVD basis");
  if (model.basis->rank() < m)
    throw InvalidArgument("svd_mode_targets: p=" + std::to_string(model.basis->rank()) + " is below m=" +
                          std::to_string(m));
  const std::size_t q = data.columns();
  Matrix v = data.inputs.col_slice(0, m);
  double h0 = 0.0, t0 = 0.0;
  for (std::size_t i = 0; i < q; ++i) {
    h0 += data.delays(i, 0) * data.delays(i, 0);
    t0 += v(i, 0) * v(i, 0);
  }
  const double f = t0 > 0.0 ? std::sqrt(h0 / t0) : 1.0;
  for (double& x : v.flat()) x *= f;
  return v;
}

namespace {

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), src.cols());
  for (std::size_t b = 0; b < idx.size(); ++b) std::copy_n(src.row(idx[b]).begin(), src.cols(), out.row(b).begin());
  return out;
}

// One Adam pass of mean squared error regression of `net` from `in` to `target`.
void fit_epoch(Network& net, AdamState& adam, const Matrix& in, const Matrix& target, std::vector<std::size_t>& order,
               std::size_t batch, std::mt19937_64& rng) {
  std::shuffle(order.begin(), order.end(), rng);
  Vector grad(net.params.size());
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t count = std::min(batch, order.size() - start);
    std::span<const std::size_t> idx(order.data() + start, count);
    const Matrix X = gather_rows(in, idx);
    const Matrix T = gather_rows(target, idx);
    ForwardCache cache;
    const Matrix Y = forward(net, X, &cache);
    Matrix G(count, Y.cols());
    const double scale = 2.0 / static_cast<double>(count * Y.cols());
    for (std::size_t i = 0; i < Y.size(); ++i) G.data()[i] = scale * (Y.data()[i] - T.data()[i]);
    std::fill(grad.begin(), grad.end(), 0.0);
    backward(net, cache, G, nullptr, grad);
    adam_update(net.params, grad, adam);
  }
}

double sq_diff(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return s;
}

}  // namespace

PretrainReport pretrain_to_svd_modes(DelayModel& model, const TrainingData& data, const PretrainOptions& opts) {
  const Matrix targets = svd_mode_targets(model, data);
  if (opts.batch_size < 1) throw InvalidArgument("pretrain: batch size must be >= 1");
  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(data.columns());
  std::iota(order.begin(), order.end(), std::size_t{0});
  AdamState enc = AdamState::for_size(model.encoder.params.size(), opts.learning_rate);
  AdamState dec = AdamState::for_size(model.decoder.params.size(), opts.learning_rate);
  for (std::size_t e = 0; e < opts.epochs; ++e) {
    fit_epoch(model.encoder, enc, data.inputs, targets, order, opts.batch_size, rng);
    fit_epoch(model.decoder, dec, targets, data.inputs, order, opts.batch_size, rng);
  }
  PretrainReport rep;
  rep.encoder_nmse = sq_diff(forward(model.encoder, data.inputs), targets) / frobenius_sq(targets);
  const double resid = std::accumulate(data.recon_residual.begin(), data.recon_residual.end(), 0.0);
  rep.decoder_relative_error =
      (resid + sq_diff(forward(model.decoder, targets), data.inputs)) / frobenius_sq(data.delays);
  return rep;
}

namespace {

void accumulate(LossBreakdown& acc, const LossBreakdown& b, double w) {
  acc.recon += w * b.recon;
  acc.hdot += w * b.hdot;
  acc.zdot += w * b.zdot;
  acc.z1 += w * b.z1;
  acc.cons += w * b.cons;
  acc.supervised += w * b.supervised;
  acc.diverged_rollouts += b.diverged_rollouts;
}

bool finite_losses(const LossBreakdown& b) {
  return std::isfinite(b.total) && std::isfinite(b.supervised);
}

}  // namespace

TrainReport train(DelayModel& model, const TrainingData& data, const TrainConfig& config) {
  model.validate();
  config.validate(data.delay_count());
  if (data.inputs.cols() != model.input_dim()) throw InvalidArgument("train: data does not match the model");
  TrainReport report;

  if (config.pretrain_epochs > 0) {
    PretrainOptions po;
    po.epochs = config.pretrain_epochs;
    po.batch_size = config.batch_size;
    po.learning_rate = config.learning_rate;
    po.seed = config.seed ^ 0x5eedULL;
    report.pretrain = pretrain_to_svd_modes(model, data, po);
  }

  LossOptions lo;
  lo.rollout_steps = config.effective_rollout(data.delay_count());
  lo.compute_cons = true;
  lo.lambda_sup = (config.init_mode == InitMode::Supervised && data.full_state) ? config.lambda_sup : 0.0;

  AdamState enc = AdamState::for_size(model.encoder.params.size(), config.learning_rate);
  AdamState dec = AdamState::for_size(model.decoder.params.size(), config.learning_rate);
  AdamState xi = AdamState::for_size(model.sindy.Xi.size(), config.learning_rate);
  model.sindy.apply_mask();

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.columns());
  std::iota(order.begin(), order.end(), std::size_t{0});
  StlsqOptions so;
  so.threshold = config.stlsq_threshold;
  so.ridge = config.stlsq_ridge;

  DelayModel last_good = model;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown acc;
    bool failed = false;
    std::string why;
    try {
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t count = std::min(config.batch_size, order.size() - start);
        std::span<const std::size_t> idx(order.data() + start, count);
        ModelGradients g = ModelGradients::zeros_like(model);
        const LossBreakdown b = compute_losses(model, data, idx, lo, &g);
        if (!finite_losses(b)) {
          failed = true;
          why = "non-finite loss at epoch " + std::to_string(epoch);
          break;
        }
        accumulate(acc, b, static_cast<double>(count) / static_cast<double>(order.size()));
        const double norm = g.norm();
        if (!std::isfinite(norm)) {
          failed = true;
          why = "non-finite gradient at epoch " + std::to_string(epoch);
          break;
        }
        if (config.grad_clip > 0.0 && norm > config.grad_clip) g.scale(config.grad_clip / norm);
        adam_update(model.encoder.params, g.encoder, enc);
        adam_update(model.decoder.params, g.decoder, dec);
        if (!model.xi_frozen) {
          adam_update(model.sindy.Xi.flat(), g.xi, xi);
          model.sindy.apply_mask();
        }
      }
    } catch (const NumericError& e) {
      failed = true;
      why = std::string("epoch ") + std::to_string(epoch) + ": " + e.what();
    }
    if (failed) {
      model = last_good;
      report.diverged = true;
      report.message = why + "; kept the model from epoch " + std::to_string(epoch - 1);
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    if (config.refit && !model.xi_frozen && epoch % config.refit_period == 0) {
      refit_sindy(model, data, so, !config.refit_revive);
      xi.reset();
      rec.refit = true;
    }
    for (std::size_t i = 0; i < model.sindy.mask.size(); ++i)
      if (model.sindy.mask[i]) acc.reg += std::abs(model.sindy.Xi.data()[i]);
    acc.total = LossBreakdown::combine(acc, model.weights);
    rec.losses = acc;
    rec.active_terms = model.sindy.active_terms();
    rec.xi.assign(model.sindy.Xi.flat().begin(), model.sindy.Xi.flat().end());
    report.epochs.push_back(std::move(rec));
    last_good = model;
  }
  return report;
}

void write_train_report(const std::filesystem::path& path, const TrainReport& report) {
  std::ostringstream out;
  out << "epoch,recon,hdot,zdot,z1,cons,reg,total,active_terms\n";
  for (const EpochRecord& r : report.epochs) {
    const LossBreakdown& l = r.losses;
    out << r.epoch;
    for (double v : {l.recon, l.hdot, l.zdot, l.z1, l.cons, l.reg, l.total}) out << ',' << io::format_double(v);
    out << ',' << r.active_terms << '\n';
  }
  io::write_text(path, out.str());
}

}  // namespace dsae
