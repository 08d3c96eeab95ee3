#include "dsae/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dsae/io.hpp"

namespace dsae {

namespace {

double mean(std::span<const double> x) {
  return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  const double mu = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - mu) * (v - mu);
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

}  // namespace

std::size_t count_sign_changes(std::span<const double> x, bool centered) {
  const double mu = centered ? mean(x) : 0.0;
  std::size_t count = 0;
  int prev = 0;
  for (double v : x) {
    const int s = (v - mu > 0.0) - (v - mu < 0.0);
    if (s == 0) continue;
    if (prev != 0 && s != prev) ++count;
    prev = s;
  }
  return count;
}

double kurtosis(std::span<const double> x) {
  const double mu = mean(x);
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = (v - mu) * (v - mu);
    m2 += d;
    m4 += d * d;
  }
  if (m2 == 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(x.size());
  m2 /= n;
  m4 /= n;
  return m4 / (m2 * m2);
}

std::optional<double> estimate_period(std::span<const double> x) {
  const double mu = mean(x);
  std::vector<std::size_t> ups;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i - 1] - mu < 0.0 && x[i] - mu >= 0.0) ups.push_back(i);
  if (ups.size() < 2) return std::nullopt;
  return static_cast<double>(ups.back() - ups.front()) / static_cast<double>(ups.size() - 1);
}

EvalMetrics evaluate(const DelayModel& model, const TrainingData& data, const MeasurementSeries& series,
                     const EvalOptions& opts) {
  const std::size_t n = model.delays, m = model.latent_dim();
  EvalMetrics out;
  out.horizon = opts.horizon == 0 ? n - 1 : opts.horizon;
  if (opts.windows < 1) throw InvalidArgument("evaluate: windows must be >= 1");

  std::vector<std::size_t> all(data.columns());
  std::iota(all.begin(), all.end(), std::size_t{0});
  LossOptions lo;
  lo.compute_cons = false;
  const LossBreakdown lb = compute_losses(model, data, all, lo);
  out.recon_mse = lb.recon;
  out.z1_mse = lb.z1;
  out.active_terms = model.sindy.active_terms();

  const auto [Z, Zd] = encode_all(model, data);
  for (double v : Z.flat()) out.max_abs_encoded = std::max(out.max_abs_encoded, std::abs(v));

  // Short-horizon forecasts from delay windows of the series.
  const std::vector<double>& y = series.values;
  out.signal_variance = variance(y);
  if (y.size() < std::max(n, out.horizon + 1) + 1)
    throw InvalidArgument("evaluate: series of " + std::to_string(y.size()) + " samples is too short for n=" +
                          std::to_string(n) + " and horizon " + std::to_string(out.horizon));
  const std::size_t last_start = y.size() - std::max(n, out.horizon + 1);
  const std::size_t windows = std::min(opts.windows, last_start + 1);
  Matrix H(windows, n);
  std::vector<std::size_t> starts(windows);
  for (std::size_t w = 0; w < windows; ++w) {
    starts[w] = windows == 1 ? 0 : w * last_start / (windows - 1);
    std::copy_n(y.begin() + static_cast<std::ptrdiff_t>(starts[w]), n, H.row(w).begin());
  }
  const Matrix X = model.basis ? project(H.transpose(), *model.basis).transpose() : H;
  const Matrix Z0 = forward(model.encoder, X);
  double err = 0.0;
  std::size_t count = 0;
  for (std::size_t w = 0; w < windows; ++w) {
    Matrix roll;
    try {
      roll = rollout_latent(model.sindy, Z0.row(w), out.horizon, model.tau);
    } catch (const IntegrationDiverged&) {
      err = std::numeric_limits<double>::infinity();
      break;
    }
    for (std::size_t j = 1; j <= out.horizon; ++j) {
      const double e = y[starts[w] + j] - roll(j - 1, 0);
      err += e * e;
      ++count;
    }
  }
  out.prediction_mse = count > 0 && std::isfinite(err) ? err / static_cast<double>(count) : err;

  // Long rollout from the first encoded column.
  const std::size_t L = opts.long_steps;
  Matrix traj(L + 1, m);
  std::copy_n(Z.row(0).begin(), m, traj.row(0).begin());
  std::size_t valid = L;
  try {
    const Matrix r = rollout_latent(model.sindy, Z.row(0), L, model.tau);
    std::copy(r.flat().begin(), r.flat().end(), traj.row(1).begin());
  } catch (const IntegrationDiverged& e) {
    valid = e.step() == 0 ? 0 : e.step() - 1;
    out.diverged_at = e.step();
    const Matrix r = valid > 0 ? rollout_latent(model.sindy, Z.row(0), valid, model.tau) : Matrix(0, m);
    std::copy(r.flat().begin(), r.flat().end(), traj.row(1).begin());
  }
  out.rollout = traj.row_slice(0, valid + 1);
  for (double v : out.rollout.flat()) out.max_abs_latent = std::max(out.max_abs_latent, std::abs(v));
  out.bounded = !out.diverged_at && out.max_abs_latent <= opts.bound_factor * out.max_abs_encoded;
  if (m >= 2) out.sign_changes = count_sign_changes(out.rollout.col(1), true);
  out.kurtosis_z3 = m >= 3 ? kurtosis(out.rollout.col(2)) : std::numeric_limits<double>::quiet_NaN();

  // Closed-orbit metric: after leaving the start's neighbourhood, closest return
  // within the period window.
  const Matrix& R = out.rollout;
  double diag = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const Vector c = R.col(k);
    const auto [lo_it, hi_it] = std::minmax_element(c.begin(), c.end());
    diag += (*hi_it - *lo_it) * (*hi_it - *lo_it);
  }
  diag = std::sqrt(diag);
  std::size_t window = R.rows() - 1;
  if (opts.period_steps) window = std::min(window, *opts.period_steps);
  auto dist = [&](std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += (R(j, k) - R(0, k)) * (R(j, k) - R(0, k));
    return std::sqrt(s);
  };
  std::size_t j = 1;
  while (j <= window && dist(j) < 0.25 * diag) ++j;
  double best = std::numeric_limits<double>::infinity();
  for (; j <= window; ++j) best = std::min(best, dist(j));
  out.orbit_return = diag > 0.0 ? best / diag : std::numeric_limits<double>::infinity();
  return out;
}

std::string format_metrics(const EvalMetrics& m) {
  std::ostringstream s;
  s << "recon_mse = " << io::format_double(m.recon_mse) << '\n'
    << "z1_mse = " << io::format_double(m.z1_mse) << '\n'
    << "active_terms = " << m.active_terms << '\n'
    << "horizon = " << m.horizon << '\n'
    << "prediction_mse = " << io::format_double(m.prediction_mse) << '\n'
    << "signal_variance = " << io::format_double(m.signal_variance) << '\n'
    << "relative_prediction_error = " << io::format_double(m.relative_prediction_error()) << '\n'
    << "bounded = " << (m.bounded ? "true" : "false") << '\n'
    << "diverged_at = " << (m.diverged_at ? std::to_string(*m.diverged_at) : std::string("none")) << '\n'
    << "max_abs_latent = " << io::format_double(m.max_abs_latent) << '\n'
    << "max_abs_encoded = " << io::format_double(m.max_abs_encoded) << '\n'
    << "sign_changes_z2 = " << m.sign_changes << '\n'
    << "kurtosis_z3 = " << io::format_double(m.kurtosis_z3) << '\n'
    << "orbit_return = " << io::format_double(m.orbit_return) << '\n';
  return s.str();
}

}  // namespace dsae
