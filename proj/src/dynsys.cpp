#include "dsae/dynsys.hpp"

#include <algorithm>
#include <limits>
#include <random>

namespace dsae {

Vector SystemDef::operator()(std::span<const double> x) const {
  if (x.size() != dim) throw InvalidArgument("SystemDef: state dimension mismatch");
  Vector out(dim);
  rhs(x, params, out);
  return out;
}

double uniform_spacing(std::span<const double> times) {
  if (times.size() < 2) throw InvalidArgument("time grid needs at least two samples");
  const double dt = times[1] - times[0];
  if (!(dt > 0.0)) throw InvalidArgument("time grid must be strictly increasing");
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double step = times[i] - times[i - 1];
    // Each grid value carries rounding of order eps * |t|.
    const double tol = 1e-12 * dt + 8.0 * std::numeric_limits<double>::epsilon() *
                                        std::max(std::abs(times[i]), std::abs(times[0]));
    if (std::abs(step - dt) > tol)
      throw InvalidArgument("non-uniform sampling at index " + std::to_string(i));
  }
  return dt;
}

double Trajectory::dt() const { return uniform_spacing(times); }
double MeasurementSeries::dt() const { return uniform_spacing(times); }

namespace {

void lorenz(std::span<const double> x, std::span<const double> mu, std::span<double> out) {
  const double sigma = mu[0], rho = mu[1], beta = mu[2];
  out[0] = sigma * (x[1] - x[0]);
  out[1] = x[0] * (rho - x[2]) - x[1];
  out[2] = x[0] * x[1] - beta * x[2];
}

void rossler(std::span<const double> x, std::span<const double> mu, std::span<double> out) {
  const double a = mu[0], b = mu[1];
  out[0] = -x[1] - x[2];
  out[1] = x[0] + a * x[1];
  out[2] = a + x[2] * (x[0] - b);
}

void lotka_volterra(std::span<const double> x, std::span<const double> mu, std::span<double> out) {
  const double a = mu[0], b = mu[1], c = mu[2], d = mu[3];
  out[0] = a * x[0] + b * x[0] * x[1];
  out[1] = c * x[1] + d * x[0] * x[1];
}

struct Builtin {
  const char* name;
  std::size_t dim;
  std::size_t n_params;
  void (*fn)(std::span<const double>, std::span<const double>, std::span<double>);
};

constexpr Builtin kBuiltins[] = {
    {"lorenz", 3, 3, lorenz},
    {"rossler", 3, 2, rossler},
    {"lotka_volterra", 2, 4, lotka_volterra},
};

const Builtin& find_builtin(const std::string& name) {
  for (const auto& b : kBuiltins)
    if (name == b.name) return b;
  throw InvalidArgument("unknown system '" + name + "' (expected lorenz, rossler, lotka_volterra)");
}

}  // namespace

SystemDef builtin_system(const std::string& name, std::span<const double> params) {
  const Builtin& b = find_builtin(name);
  if (params.size() != b.n_params)
    throw InvalidArgument("system '" + name + "' expects " + std::to_string(b.n_params) +
                          " parameters, got " + std::to_string(params.size()));
  return SystemDef{name, b.dim, Vector(params.begin(), params.end()), b.fn};
}

Vector default_params(const std::string& name) {
  if (name == "lorenz") return {10.0, 28.0, 8.0 / 3.0};
  if (name == "rossler") return {0.2, 5.7};
  if (name == "lotka_volterra") return {1.0, -0.1, -1.5, 0.075};
  find_builtin(name);
  return {};
}

Vector default_initial_state(const std::string& name) {
  if (name == "lorenz") return {-8.0, 8.0, 27.0};
  if (name == "rossler") return {1.0, 1.0, 0.0};
  if (name == "lotka_volterra") return {10.0, 5.0};
  find_builtin(name);
  return {};
}

Vector rk4_step(const DerivativeFn& f, std::span<const double> state, double dt,
                std::size_t step_index) {
  if (!(dt > 0.0)) throw InvalidArgument("rk4_step: dt must be positive");
  Vector out(state.begin(), state.end());
  rk4_step_inplace(f, std::span<double>(out), dt, step_index);
  return out;
}

Trajectory integrate(const DerivativeFn& f, std::span<const double> x0, double dt,
                     std::size_t steps, std::size_t burn_in) {
  if (!(dt > 0.0)) throw InvalidArgument("simulate: dt must be positive");
  if (steps == 0) throw InvalidArgument("simulate: steps must be positive");
  const std::size_t dim = x0.size();
  Trajectory traj;
  traj.times.resize(steps);
  traj.states = Matrix(steps, dim);
  Vector x(x0.begin(), x0.end());
  std::size_t step = 0;
  auto advance = [&] {
    rk4_step_inplace(f, std::span<double>(x), dt, step);
    ++step;
    for (double v : x)
      if (std::abs(v) > kDivergenceLimit)
        throw IntegrationDiverged(step, "state exceeded divergence limit");
  };
  for (std::size_t i = 0; i < burn_in; ++i) advance();
  for (std::size_t i = 0; i < steps; ++i) {
    if (i > 0) advance();
    traj.times[i] = static_cast<double>(i) * dt;
    std::copy(x.begin(), x.end(), traj.states.row(i).begin());
  }
  return traj;
}

Trajectory simulate(const SystemDef& sys, std::span<const double> x0, double dt, std::size_t steps,
                    std::size_t burn_in) {
  if (x0.size() != sys.dim)
    throw InvalidArgument("simulate: initial state has dimension " + std::to_string(x0.size()) +
                          ", system '" + sys.name + "' has " + std::to_string(sys.dim));
  const DerivativeFn f = [&sys](std::span<const double> x, std::span<double> out) {
    sys.rhs(x, sys.params, out);
  };
  return integrate(f, x0, dt, steps, burn_in);
}

MeasurementSeries measure(const Trajectory& traj, std::size_t component) {
  if (component >= traj.states.cols())
    throw InvalidArgument("measure: component " + std::to_string(component) +
                          " out of range for dimension " + std::to_string(traj.states.cols()));
  return MeasurementSeries{traj.times, traj.states.col(component), component};
}

MeasurementSeries add_noise(const MeasurementSeries& series, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw InvalidArgument("add_noise: sigma must be nonnegative");
  MeasurementSeries out = series;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : out.values) v += noise(rng);
  return out;
}

}  // namespace dsae
