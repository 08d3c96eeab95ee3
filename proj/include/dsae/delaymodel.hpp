#pragma once

// Delay SINDy autoencoder: encoder phi, decoder psi, a SINDy layer
// z' = Theta(z) Xi, and an optional SVD pre-projection of the delay vectors.
//
// Per column h_i of the Hankel matrix, with x_i = U_p^T h_i (or h_i without a
// basis) and z_i = phi(x_i), the losses are
//
//   recon  mean over entries of (h_i - lift(psi(z_i)))^2
//   hdot   mean over entries of (hdot_i - lift(J_psi(z_i) Theta(z_i) Xi))^2
//   zdot   mean over entries of (J_phi(x_i) xdot_i - Theta(z_i) Xi)^2
//   z1     mean of (h_i[0] - z_i[0])^2
//   cons   mean over j = 1..n_cons of (h_i[j] - zhat_i(j tau)[0])^2, zhat an
//          RK4 rollout of the SINDy model started at z_i
//   reg    sum of |Xi| over active entries
//
//   total = recon + l1 hdot + l2 zdot + l3 z1 + l4 cons + l5 reg
//
// Because U_p has orthonormal columns, ||h - U_p o||^2 splits into the fixed
// residual ||h - U_p x||^2 plus ||x - o||^2; the losses use that split.

#include <optional>
#include <string>
#include <vector>

#include "dsae/hankel.hpp"
#include "dsae/neural.hpp"
#include "dsae/sindy.hpp"

namespace dsae {

struct LossWeights {
  double lambda1 = 1e-4;  // hdot
  double lambda2 = 1e-4;  // zdot
  double lambda3 = 1.0;   // z1
  double lambda4 = 1e-2;  // cons
  double lambda5 = 1e-5;  // reg

  void validate() const;
  // Derivative weights scaled by mean(h^2) / mean(hdot^2) so that the
  // derivative losses start on the reconstruction scale.
  static LossWeights defaults_for(const HankelEmbedding& embedding);
};

struct LossBreakdown {
  double recon = 0.0;
  double hdot = 0.0;
  double zdot = 0.0;
  double z1 = 0.0;
  double cons = 0.0;
  double reg = 0.0;
  double total = 0.0;
  // Full-state supervision (not part of total).
  double supervised = 0.0;
  std::size_t diverged_rollouts = 0;

  static double combine(const LossBreakdown& b, const LossWeights& w);
};

struct LibrarySpec {
  int max_degree = 2;
  bool trig = false;
  bool include_constant = true;
};

struct DelayModel {
  Network encoder;
  Network decoder;
  SindyModel sindy;
  std::optional<SvdBasis> basis;
  LossWeights weights;
  bool xi_frozen = false;
  std::size_t delays = 0;  // n
  double tau = 0.0;

  std::size_t latent_dim() const noexcept { return encoder.output_dim(); }
  std::size_t input_dim() const noexcept { return encoder.input_dim(); }
  void validate() const;
};

struct AssembleOptions {
  std::optional<std::size_t> svd_rank;  // p; none feeds raw delay vectors
  std::size_t latent_dim = 3;            // m
  std::vector<std::size_t> hidden = {64, 64, 64};
  Activation activation = Activation::Sigmoid;
  LibrarySpec library;
  LossWeights weights;
  std::uint64_t seed = 0;
};

// Builds networks, the optional SVD basis and a zero Xi. Warnings (such as
// n <= 2m) are appended to `warnings` when provided.
DelayModel assemble_model(const HankelEmbedding& embedding, const AssembleOptions& opts,
                          std::vector<std::string>* warnings = nullptr);

// Embedding data arranged for the loss computation.
struct TrainingData {
  Matrix inputs;          // q x d_in
  Matrix input_rates;     // q x d_in
  Matrix delays;          // q x n, row i is h_i
  Vector recon_residual;  // ||h_i - U_p U_p^T h_i||^2
  Vector rate_residual;   // same for hdot_i
  std::optional<Matrix> full_state;  // q x m supervision targets
  double tau = 0.0;

  std::size_t columns() const noexcept { return inputs.rows(); }
  std::size_t delay_count() const noexcept { return delays.cols(); }
};

TrainingData prepare_data(const DelayModel& model, const HankelEmbedding& embedding,
                          const Matrix* full_state = nullptr);

struct ModelGradients {
  Vector encoder;
  Vector decoder;
  Vector xi;

  static ModelGradients zeros_like(const DelayModel& model);
  double norm() const;
  void scale(double s);
};

struct LossOptions {
  std::size_t rollout_steps = 1;  // n_cons
  double lambda_sup = 0.0;        // weight of the supervised term in the objective
  bool compute_cons = true;       // skip the rollout when false (cons reported as 0)
};

// Reported in place of each rollout step after a diverged state.
inline constexpr double kDivergedStepPenalty = 100.0;

// Losses over the given columns. When `grad` is non-null, the gradient of
// total + lambda_sup * supervised is accumulated into it.
LossBreakdown compute_losses(const DelayModel& model, const TrainingData& data,
                             std::span<const std::size_t> columns, const LossOptions& opts,
                             ModelGradients* grad = nullptr);

// RK4 rollout of z' = Theta(z) Xi; row j is the state after j + 1 steps.
// Throws IntegrationDiverged past kDivergenceLimit.
Matrix rollout_latent(const SindyModel& sindy, std::span<const double> z0, std::size_t steps, double dt);

enum class InitMode { Supervised, KnownEquation, Perturbed, Random };
InitMode parse_init_mode(const std::string& name);
std::string to_string(InitMode mode);

// known_equation: Xi = true_xi, frozen. perturbed: Xi ~ N(true_xi, sigma).
// random / supervised: Xi ~ N(0, 0.1). All but known_equation stay trainable.
void initialize_xi(DelayModel& model, InitMode mode, const Matrix* true_xi, double sigma, std::uint64_t seed);

// Latent targets for pretraining: the first m right singular vectors scaled
// by their singular values, rescaled by one common factor so the first target
// has the RMS of h_i[0].
Matrix svd_mode_targets(const DelayModel& model, const TrainingData& data);

struct PretrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct PretrainReport {
  double encoder_nmse = 0.0;  // ||phi(x) - v||^2 / ||v||^2
  double decoder_relative_error = 0.0;  // ||lift(psi(v)) - h||^2 / ||h||^2
};

// Fits phi to map x_i to the dominant SVD modes and psi to map them back.
PretrainReport pretrain_to_svd_modes(DelayModel& model, const TrainingData& data, const PretrainOptions& opts);

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::size_t refit_period = 20;  // epochs between STLSQ refits
  double stlsq_threshold = 0.1;
  double stlsq_ridge = 1e-6;
  std::size_t rollout_steps = 0;  // 0 selects n - 1
  InitMode init_mode = InitMode::Random;
  double perturb_sigma = 20.0;
  std::size_t pretrain_epochs = 0;
  double grad_clip = 10.0;  // global norm, 0 disables
  double lambda_sup = 1.0;
  bool refit = true;
  // Let refits revive terms pruned by earlier refits; when false the active
  // set only shrinks.
  bool refit_revive = true;
  std::uint64_t seed = 0;

  void validate(std::size_t delays) const;
  std::size_t effective_rollout(std::size_t delays) const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown losses;
  std::size_t active_terms = 0;
  bool refit = false;
  Vector xi;  // Xi snapshot (row-major r x m) after the epoch
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::optional<PretrainReport> pretrain;
  bool diverged = false;  // non-finite loss; model holds the last finite epoch
  std::string message;
};

// Minibatch Adam on the combined loss with periodic STLSQ refits of Xi.
TrainReport train(DelayModel& model, const TrainingData& data, const TrainConfig& config);

// Re-estimates Xi and its mask by STLSQ on (phi(x), J_phi xdot) over all columns.
// With `keep_mask` the regression starts from the current mask instead of the
// full library.
void refit_sindy(DelayModel& model, const TrainingData& data, const StlsqOptions& opts, bool keep_mask = false);

// Latent states and their chain-rule rates for every column.
std::pair<Matrix, Matrix> encode_all(const DelayModel& model, const TrainingData& data);

// Loss CSV: epoch, recon, hdot, zdot, z1, cons, reg, total, active_terms.
void write_train_report(const std::filesystem::path& path, const TrainReport& report);

}  // namespace dsae
