#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsae/error.hpp"
#include "dsae/matrix.hpp"

namespace dsae {

// Right-hand side x' = f(x; mu). Writes dim() values into `out`.
using SystemRhs =
    std::function<void(std::span<const double> x, std::span<const double> mu, std::span<double> out)>;

struct SystemDef {
  std::string name;
  std::size_t dim = 0;
  Vector params;
  SystemRhs rhs;

  Vector operator()(std::span<const double> x) const;
};

// Uniformly sampled states; row i is x(times[i]).
struct Trajectory {
  Vector times;
  Matrix states;

  std::size_t size() const noexcept { return times.size(); }
  double dt() const;
};

struct MeasurementSeries {
  Vector times;
  Vector values;
  std::optional<std::size_t> source_component;

  std::size_t size() const noexcept { return values.size(); }
  double dt() const;
};

// Throws InvalidArgument if `times` is not uniformly spaced (1e-12 relative) or not increasing.
double uniform_spacing(std::span<const double> times);

// lorenz (sigma, rho, beta), rossler (a, b), lotka_volterra (a, b, c, d).
SystemDef builtin_system(const std::string& name, std::span<const double> params);
// Default parameters per builtin system.
Vector default_params(const std::string& name);
Vector default_initial_state(const std::string& name);

inline constexpr double kDivergenceLimit = 1e6;

// Classical 4-stage Runge-Kutta step. `f(state, out)` evaluates the derivative.
// Throws IntegrationDiverged (tagged with `step_index`) on a non-finite stage.
template <class F>
void rk4_step_inplace(F&& f, std::span<double> state, double dt, std::size_t step_index = 0) {
  const std::size_t n = state.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  auto check = [&](const std::vector<double>& k) {
    for (double v : k)
      if (!std::isfinite(v)) throw IntegrationDiverged(step_index, "rk4: non-finite stage");
  };
  f(std::span<const double>(state.data(), n), std::span<double>(k1));
  check(k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * dt * k1[i];
  f(std::span<const double>(tmp), std::span<double>(k2));
  check(k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * dt * k2[i];
  f(std::span<const double>(tmp), std::span<double>(k3));
  check(k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + dt * k3[i];
  f(std::span<const double>(tmp), std::span<double>(k4));
  check(k4);
  for (std::size_t i = 0; i < n; ++i)
    state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

using DerivativeFn = std::function<void(std::span<const double>, std::span<double>)>;

Vector rk4_step(const DerivativeFn& f, std::span<const double> state, double dt,
                std::size_t step_index = 0);

// Integrates `steps + burn_in - 1` RK4 steps from x0 and keeps the last `steps` samples.
// Row 0 of the result is the state after `burn_in` steps; times start at 0.
Trajectory simulate(const SystemDef& sys, std::span<const double> x0, double dt, std::size_t steps,
                    std::size_t burn_in);
// Same contract for an arbitrary derivative function of dimension x0.size().
Trajectory integrate(const DerivativeFn& f, std::span<const double> x0, double dt,
                     std::size_t steps, std::size_t burn_in = 0);

MeasurementSeries measure(const Trajectory& traj, std::size_t component);
MeasurementSeries add_noise(const MeasurementSeries& series, double sigma, std::uint64_t seed);

}  // namespace dsae
