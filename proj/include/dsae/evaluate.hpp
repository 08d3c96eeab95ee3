#pragma once

// Post-training diagnostics: reconstruction quality, short-horizon forecast
// error against the measured series, and long-rollout shape statistics.

#include <optional>
#include <span>

#include "dsae/delaymodel.hpp"

namespace dsae {

struct EvalOptions {
  std::size_t horizon = 0;       // forecast steps of tau; 0 selects n - 1
  std::size_t windows = 32;      // forecast start points spread over the series
  std::size_t long_steps = 10000;
  double bound_factor = 10.0;    // rollout is bounded if max|z| <= factor * max|encoded z|
  std::optional<std::size_t> period_steps;  // return window for the orbit metric
};

struct EvalMetrics {
  double recon_mse = 0.0;
  double z1_mse = 0.0;
  std::size_t active_terms = 0;
  std::size_t horizon = 0;
  double prediction_mse = 0.0;   // mean of (y(t_s + j tau) - z1(j tau))^2, j = 1..horizon
  double signal_variance = 0.0;  // variance of the series
  bool bounded = false;
  std::optional<std::size_t> diverged_at;
  double max_abs_latent = 0.0;   // over the long rollout
  double max_abs_encoded = 0.0;  // over the encoded training data
  std::size_t sign_changes = 0;  // mean-centered z2 over the long rollout
  double kurtosis_z3 = 0.0;      // NaN when m < 3
  double orbit_return = 0.0;     // min distance back to z(0) / bounding-box diagonal
  Matrix rollout;                // long rollout, starting with the initial state

  double relative_prediction_error() const { return prediction_mse / signal_variance; }
};

// `series` must be in the model's working coordinates and sampled at the
// model's tau.
EvalMetrics evaluate(const DelayModel& model, const TrainingData& data, const MeasurementSeries& series,
                     const EvalOptions& opts = {});

// Number of sign changes of x - mean(x) (or of x itself when not centered).
std::size_t count_sign_changes(std::span<const double> x, bool centered = true);
// Fourth central moment over the squared variance; 3 for a Gaussian.
double kurtosis(std::span<const double> x);
// Mean spacing of upward mean crossings, in samples; nullopt with fewer than two.
std::optional<double> estimate_period(std::span<const double> x);

std::string format_metrics(const EvalMetrics& m);

}  // namespace dsae
