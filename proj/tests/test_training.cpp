#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dsae/checkpoint.hpp"
#include "dsae/delaymodel.hpp"
#include "dsae/evaluate.hpp"

using namespace dsae;

namespace {

// Small standardized Lorenz problem; everything here trains in well under a second.
struct Problem {
  Trajectory traj;
  Standardization st;
  MeasurementSeries series;
  HankelEmbedding emb;
  Matrix full;
};

Problem lorenz_problem(std::size_t n = 16, std::size_t samples = 300) {
  Problem p;
  const SystemDef sys = builtin_system("lorenz", default_params("lorenz"));
  p.traj = simulate(sys, default_initial_state("lorenz"), 0.005, samples, 200);
  const MeasurementSeries y = measure(p.traj, 0);
  p.st = Standardization::fit(y.values);
  p.series = standardize(y, p.st);
  p.emb = build_hankel(p.series, n);
  p.full = Matrix(p.emb.q, 3);
  for (std::size_t i = 0; i < p.emb.q; ++i)
    for (std::size_t k = 0; k < 3; ++k) p.full(i, k) = (p.traj.states(i, k) - (k == 0 ? p.st.mean : 0.0)) / p.st.scale;
  return p;
}

DelayModel small_model(const Problem& p, std::uint64_t seed = 1) {
  AssembleOptions o;
  o.svd_rank = 6;
  o.latent_dim = 3;
  o.hidden = {8};
  o.seed = seed;
  o.weights = LossWeights::defaults_for(p.emb);
  return assemble_model(p.emb, o);
}

SindyModel working_truth(const DelayModel& m, const Standardization& st) {
  const Vector off{-st.mean / st.scale, 0.0, 0.0};
  return change_coordinates(lorenz_model(m.sindy.library, 10, 28, 8.0 / 3.0), 1.0 / st.scale, off);
}

TrainConfig quick_config(InitMode mode, std::size_t epochs = 3) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 64;
  c.rollout_steps = 4;
  c.init_mode = mode;
  c.refit_period = 2;
  c.seed = 3;
  return c;
}

bool same(const Vector& a, const Vector& b) { return a == b; }

Vector flat(const Matrix& m) { return Vector(m.flat().begin(), m.flat().end()); }

}  // namespace

TEST_CASE("rollout of a linear model matches the RK4 amplification factor") {
  const FeatureLibrary lib = build_library(1, 1, false);
  SindyModel m = SindyModel::zeros(lib);
  m.Xi(1, 0) = -2.0;
  m.mask_from_coefficients();
  const double h = 0.05, a = -2.0 * h;
  const double g = 1 + a + a * a / 2 + a * a * a / 6 + a * a * a * a / 24;
  const Matrix r = rollout_latent(m, std::vector<double>{3.0}, 10, h);
  CHECK(r.rows() == 10);
  for (std::size_t j = 0; j < 10; ++j) CHECK(r(j, 0) == doctest::Approx(3.0 * std::pow(g, j + 1)).epsilon(1e-14));
  const Matrix still = rollout_latent(SindyModel::zeros(lib), std::vector<double>{1.5}, 4, h);
  for (std::size_t j = 0; j < 4; ++j) CHECK(still(j, 0) == 1.5);
}

TEST_CASE("rollout of the lorenz model matches simulate") {
  const SindyModel m = lorenz_model(build_library(3, 2, false), 10, 28, 8.0 / 3.0);
  const SystemDef sys = builtin_system("lorenz", std::vector<double>{10, 28, 8.0 / 3.0});
  const Vector z0{-8, 7, 27};
  const Matrix r = rollout_latent(m, z0, 1000, 0.001);
  const Trajectory t = simulate(sys, z0, 0.001, 1001, 0);
  for (std::size_t j = 0; j < 1000; ++j)
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(r(j, k) - t.states(j + 1, k)) < 1e-10);
}

TEST_CASE("rollout divergence names the step") {
  const FeatureLibrary lib = build_library(1, 2, false);
  SindyModel m = SindyModel::zeros(lib);
  m.Xi(2, 0) = 1.0;  // z' = z^2 blows up at t = 1 from z0 = 1
  m.mask_from_coefficients();
  try {
    rollout_latent(m, std::vector<double>{1.0}, 200, 0.01);
    FAIL("expected divergence");
  } catch (const IntegrationDiverged& e) {
    CHECK(e.step() > 90);
    CHECK(e.step() <= 101);
  }
  CHECK_THROWS_AS(rollout_latent(m, std::vector<double>{1.0, 2.0}, 3, 0.01), InvalidArgument);
}

TEST_CASE("consistency and z1 losses agree with a direct computation") {
  const Problem p = lorenz_problem();
  DelayModel m = small_model(p);
  m.sindy = working_truth(m, p.st);
  const TrainingData d = prepare_data(m, p.emb);
  std::vector<std::size_t> cols{0, 17, 101, 240};
  LossOptions lo;
  lo.rollout_steps = 5;
  const LossBreakdown b = compute_losses(m, d, cols, lo);
  const auto [Z, Zd] = encode_all(m, d);
  double cons = 0.0, z1 = 0.0;
  for (std::size_t i : cols) {
    const Matrix r = rollout_latent(m.sindy, Z.row(i), 5, d.tau);
    for (std::size_t j = 1; j <= 5; ++j) cons += std::pow(d.delays(i, j) - r(j - 1, 0), 2);
    z1 += std::pow(d.delays(i, 0) - Z(i, 0), 2);
  }
  CHECK(b.cons == doctest::Approx(cons / 20.0).epsilon(1e-12));
  CHECK(b.z1 == doctest::Approx(z1 / 4.0).epsilon(1e-12));
  CHECK(b.diverged_rollouts == 0);
  CHECK(b.total == doctest::Approx(LossBreakdown::combine(b, m.weights)).epsilon(1e-14));
  lo.rollout_steps = p.emb.n;
  CHECK_THROWS_AS(compute_losses(m, d, cols, lo), InvalidArgument);
}

TEST_CASE("known equation keeps Xi bitwise fixed") {
  const Problem p = lorenz_problem();
  DelayModel m = small_model(p);
  const SindyModel truth = working_truth(m, p.st);
  initialize_xi(m, InitMode::KnownEquation, &truth.Xi, 0.0, 0);
  CHECK(m.xi_frozen);
  const Vector before = flat(m.sindy.Xi);
  const Vector enc_before = m.encoder.params;
  const TrainingData d = prepare_data(m, p.emb);
  const TrainReport r = train(m, d, quick_config(InitMode::KnownEquation, 4));
  CHECK_FALSE(r.diverged);
  CHECK(r.epochs.size() == 4);
  CHECK(same(flat(m.sindy.Xi), before));
  CHECK_FALSE(same(m.encoder.params, enc_before));
  CHECK(format_equations(m.sindy, default_var_names(3), 4) == format_equations(truth, default_var_names(3), 4));
  CHECK_THROWS_AS(initialize_xi(m, InitMode::Perturbed, nullptr, 1.0, 0), InvalidArgument);
}

TEST_CASE("masked coefficients stay zero between refits") {
  const Problem p = lorenz_problem();
  DelayModel m = small_model(p);
  initialize_xi(m, InitMode::Random, nullptr, 0.0, 4);
  for (std::size_t i = 0; i < m.sindy.mask.size(); i += 3) m.sindy.mask[i] = false;
  m.sindy.apply_mask();
  const std::vector<bool> mask = m.sindy.mask;
  const TrainingData d = prepare_data(m, p.emb);
  TrainConfig c = quick_config(InitMode::Random, 3);
  c.refit = false;
  const TrainReport r = train(m, d, c);
  CHECK(m.sindy.mask == mask);
  for (const EpochRecord& e : r.epochs)
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (!mask[i]) CHECK(e.xi[i] == 0.0);
}

TEST_CASE("refits without revival only shrink the active set") {
  const Problem p = lorenz_problem();
  DelayModel m = small_model(p);
  initialize_xi(m, InitMode::Random, nullptr, 0.0, 4);
  const TrainingData d = prepare_data(m, p.emb);
  refit_sindy(m, d, StlsqOptions{0.05, 1e-6, 20, false});
  const std::vector<bool> first = m.sindy.mask;
  refit_sindy(m, d, StlsqOptions{0.5, 1e-6, 20, false}, true);
  for (std::size_t i = 0; i < first.size(); ++i)
    if (!first[i]) CHECK_FALSE(m.sindy.mask[i]);
  for (std::size_t i = 0; i < first.size(); ++i)
    if (!m.sindy.mask[i]) CHECK(m.sindy.Xi.data()[i] == 0.0);
}

TEST_CASE("training is deterministic in the seed") {
  const Problem p = lorenz_problem();
  auto run = [&](std::uint64_t seed) {
    DelayModel m = small_model(p, seed);
    initialize_xi(m, InitMode::Supervised, nullptr, 0.0, seed);
    const TrainingData d = prepare_data(m, p.emb, &p.full);
    TrainConfig c = quick_config(InitMode::Supervised, 3);
    c.seed = seed;
    c.pretrain_epochs = 2;
    const TrainReport r = train(m, d, c);
    CHECK(r.pretrain.has_value());
    CHECK(r.epochs.back().losses.supervised > 0.0);
    return std::make_pair(m.encoder.params, flat(m.sindy.Xi));
  };
  const auto a = run(5), b = run(5), c = run(6);
  CHECK(a == b);
  CHECK(a.first != c.first);
}

TEST_CASE("pretraining") {
  const Problem p = lorenz_problem();
  DelayModel m = small_model(p);
  const TrainingData d = prepare_data(m, p.emb);
  const Matrix t = svd_mode_targets(m, d);
  CHECK(t.rows() == d.columns());
  CHECK(t.cols() == 3);
  double th = 0.0, hh = 0.0;
  for (std::size_t i = 0; i < d.columns(); ++i) {
    th += t(i, 0) * t(i, 0);
    hh += d.delays(i, 0) * d.delays(i, 0);
  }
  CHECK(th == doctest::Approx(hh).epsilon(1e-10));

  const Vector enc = m.encoder.params, dec = m.decoder.params;
  PretrainOptions none;
  none.epochs = 0;
  pretrain_to_svd_modes(m, d, none);
  CHECK(m.encoder.params == enc);
  CHECK(m.decoder.params == dec);

  PretrainOptions some;
  some.epochs = 30;
  some.batch_size = 32;
  some.learning_rate = 1e-2;
  const PretrainReport a = pretrain_to_svd_modes(m, d, some);
  const PretrainReport b = pretrain_to_svd_modes(m, d, some);
  CHECK(b.encoder_nmse < 0.5);
  CHECK(b.encoder_nmse <= a.encoder_nmse * 1.05);
}

TEST_CASE("training configuration checks") {
  TrainConfig c;
  CHECK(c.effective_rollout(16) == 15);
  c.rollout_steps = 16;
  CHECK_THROWS_AS(c.validate(16), InvalidArgument);
  c.rollout_steps = 4;
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(16), InvalidArgument);
  CHECK(parse_init_mode("known_equation") == InitMode::KnownEquation);
  CHECK(to_string(InitMode::Perturbed) == "perturbed");
  CHECK_THROWS_AS(parse_init_mode("oracle"), InvalidArgument);
}

TEST_CASE("loss report and checkpoint round trip") {
  const Problem p = lorenz_problem();
  DelayModel m = small_model(p);
  initialize_xi(m, InitMode::Random, nullptr, 0.0, 2);
  const TrainingData d = prepare_data(m, p.emb);
  const TrainReport r = train(m, d, quick_config(InitMode::Random, 2));
  const auto dir = std::filesystem::temp_directory_path() / "dsae_test_training";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_train_report(dir / "train_report.csv", r);
  std::ifstream in(dir / "train_report.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,recon,hdot,zdot,z1,cons,reg,total,active_terms");

  save_checkpoint(dir / "ckpt", m, p.st);
  const Checkpoint back = load_checkpoint(dir / "ckpt");
  CHECK(back.model.encoder.params == m.encoder.params);
  CHECK(back.model.decoder.params == m.decoder.params);
  CHECK(flat(back.model.sindy.Xi) == flat(m.sindy.Xi));
  CHECK(back.model.sindy.mask == m.sindy.mask);
  CHECK(flat(back.model.basis->U) == flat(m.basis->U));
  CHECK(back.model.tau == m.tau);
  CHECK(back.standardization.mean == p.st.mean);
  std::vector<std::size_t> cols{3, 50};
  LossOptions lo;
  lo.rollout_steps = 3;
  CHECK(compute_losses(back.model, d, cols, lo).total == compute_losses(m, d, cols, lo).total);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), IoError);
  std::filesystem::remove_all(dir);
}
