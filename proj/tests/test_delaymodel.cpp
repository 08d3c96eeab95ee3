#include <cmath>
#include <numeric>

#include "doctest.h"
#include "dsae/delaymodel.hpp"
#include "dsae/dynsys.hpp"
#include "dsae/hankel.hpp"

using namespace dsae;

namespace {

HankelEmbedding lorenz_embedding(std::size_t n, std::size_t samples, double dt) {
  const SystemDef sys = builtin_system("lorenz", default_params("lorenz"));
  const Trajectory tr = simulate(sys, default_initial_state("lorenz"), dt, samples, 1000);
  MeasurementSeries y = measure(tr, 0);
  for (double& v : y.values) v /= 8.0;
  return build_hankel(y, n);
}

DelayModel toy_model(const HankelEmbedding& e, std::optional<std::size_t> p, Activation act) {
  AssembleOptions o;
  o.svd_rank = p;
  o.latent_dim = 2;
  o.hidden = {8};
  o.activation = act;
  o.seed = 3;
  o.weights = {0.3, 0.2, 1.0, 0.5, 1e-3};
  DelayModel m = assemble_model(e, o);
  initialize_xi(m, InitMode::Random, nullptr, 0.0, 11);
  for (double& x : m.sindy.Xi.flat()) x *= 5.0;
  return m;
}

double total_of(const DelayModel& m, const TrainingData& d, std::span<const std::size_t> cols,
                const LossOptions& lo) {
  const LossBreakdown b = compute_losses(m, d, cols, lo);
  return b.total + lo.lambda_sup * b.supervised;
}

// Max relative error between analytic and central-difference gradients.
double gradient_error(DelayModel m, const TrainingData& d, std::span<const std::size_t> cols,
                      const LossOptions& lo) {
  ModelGradients g = ModelGradients::zeros_like(m);
  compute_losses(m, d, cols, lo, &g);
  double scale = 0.0;
  for (const Vector* v : {&g.encoder, &g.decoder, &g.xi})
    for (double x : *v) scale = std::max(scale, std::abs(x));
  double worst = 0.0;
  auto check = [&](std::span<double> params, const Vector& grad, const std::vector<bool>* mask = nullptr) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (mask && !(*mask)[i]) continue;
      const double h = 1e-5 * std::max(1.0, std::abs(params[i]));
      const double keep = params[i];
      params[i] = keep + h;
      const double up = total_of(m, d, cols, lo);
      params[i] = keep - h;
      const double down = total_of(m, d, cols, lo);
      params[i] = keep;
      const double fd = (up - down) / (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-3 * scale});
      worst = std::max(worst, std::abs(fd - grad[i]) / denom);
    }
  };
  check(m.encoder.params, g.encoder);
  check(m.decoder.params, g.decoder);
  check(m.sindy.Xi.flat(), g.xi, &m.sindy.mask);
  return worst;
}

}  // namespace

TEST_CASE("loss gradient matches finite differences with the SVD basis") {
  const HankelEmbedding e = lorenz_embedding(8, 400, 0.01);
  for (Activation act : {Activation::Sigmoid, Activation::Tanh, Activation::Elu}) {
    CAPTURE(to_string(act));
    const DelayModel m = toy_model(e, 6, act);
    const TrainingData d = prepare_data(m, e);
    std::vector<std::size_t> cols = {0, 17, 101, 250, 333};
    LossOptions lo;
    lo.rollout_steps = 4;
    CHECK(gradient_error(m, d, cols, lo) < 1e-4);
  }
}

TEST_CASE("loss gradient includes supervision and masking") {
  const HankelEmbedding e = lorenz_embedding(8, 300, 0.01);
  DelayModel m = toy_model(e, std::nullopt, Activation::Tanh);
  m.sindy.mask[0] = false;
  m.sindy.mask[5] = false;
  m.sindy.apply_mask();
  Matrix full(e.q, 2);
  for (std::size_t i = 0; i < e.q; ++i) {
    full(i, 0) = e.H(0, i);
    full(i, 1) = e.H(3, i) - e.H(0, i);
  }
  const TrainingData d = prepare_data(m, e, &full);
  std::vector<std::size_t> cols = {1, 2, 50, 200};
  LossOptions lo;
  lo.rollout_steps = 7;
  lo.lambda_sup = 0.7;
  CHECK(gradient_error(m, d, cols, lo) < 1e-4);
  ModelGradients g = ModelGradients::zeros_like(m);
  compute_losses(m, d, cols, lo, &g);
  CHECK(g.xi[0] == 0.0);
  CHECK(g.xi[5] == 0.0);
}
