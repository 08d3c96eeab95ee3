#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "dsae/dynsys.hpp"
#include "dsae/io.hpp"

using namespace dsae;

TEST_CASE("builtin right-hand sides") {
  const auto lorenz = builtin_system("lorenz", std::vector<double>{10, 28, 8.0 / 3.0});
  const Vector d = lorenz(std::vector<double>{1, 1, 1});
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 26.0);
  CHECK(d[2] == doctest::Approx(1.0 - 8.0 / 3.0).epsilon(1e-15));
  CHECK(lorenz(std::vector<double>{0, 0, 0}) == Vector{0, 0, 0});
  const auto lv = builtin_system("lotka_volterra", std::vector<double>{1.0, -0.1, -1.5, 0.075});
  CHECK(lv(std::vector<double>{0, 0}) == Vector{0, 0});
  // Coexistence fixed point (c/-d, a/-b) = (20, 10).
  const Vector f = lv(std::vector<double>{20, 10});
  CHECK(std::abs(f[0]) < 1e-12);
  CHECK(std::abs(f[1]) < 1e-12);
  const auto ross = builtin_system("rossler", default_params("rossler"));
  CHECK(ross.dim == 3);
  CHECK_THROWS_AS(builtin_system("duffing", std::vector<double>{}), InvalidArgument);
  CHECK_THROWS_AS(builtin_system("lorenz", std::vector<double>{1, 2}), InvalidArgument);
  CHECK_THROWS_AS(builtin_system("lotka_volterra", std::vector<double>{1, 2, 3}), InvalidArgument);
}

TEST_CASE("rk4 step on linear and constant dynamics") {
  const DerivativeFn decay = [](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; };
  const Vector x = rk4_step(decay, std::vector<double>{1.0}, 0.1);
  CHECK(std::abs(x[0] - std::exp(-0.1)) < 1e-7);
  CHECK(std::abs(x[0] - 0.9048375) < 1e-7);
  const DerivativeFn still = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  CHECK(rk4_step(still, std::vector<double>{3.25}, 7.0)[0] == 3.25);
}

TEST_CASE("rk4 global error is fourth order") {
  const DerivativeFn decay = [](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; };
  auto max_err = [&](double dt) {
    const auto steps = static_cast<std::size_t>(std::lround(1.0 / dt)) + 1;
    const Trajectory t = integrate(decay, std::vector<double>{1.0}, dt, steps);
    double e = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) e = std::max(e, std::abs(t.states(i, 0) - std::exp(-t.times[i])));
    return e;
  };
  const double ratio = max_err(0.01) / max_err(0.005);
  CHECK(std::log2(ratio) >= 3.8);
  CHECK(std::log2(ratio) <= 4.2);
  CHECK(ratio == doctest::Approx(16.0).epsilon(0.1));
}

TEST_CASE("rk4 reports the diverging step") {
  const DerivativeFn blow = [](std::span<const double> x, std::span<double> out) { out[0] = x[0] * x[0]; };
  try {
    integrate(blow, std::vector<double>{1.0}, 0.1, 100);
    FAIL("expected divergence");
  } catch (const IntegrationDiverged& e) {
    CHECK(e.step() > 0);
    CHECK(e.step() < 100);
  }
}

TEST_CASE("simulate shape and burn-in contract") {
  const auto sys = builtin_system("lorenz", default_params("lorenz"));
  const Vector x0{-8, 8, 27};
  const Trajectory one = simulate(sys, x0, 0.001, 1, 0);
  REQUIRE(one.size() == 1);
  CHECK(one.states.row(0)[0] == -8.0);
  CHECK(one.states.row(0)[2] == 27.0);
  const Trajectory t = simulate(sys, x0, 0.001, 10, 1000);
  CHECK(t.size() == 10);
  CHECK(t.states.rows() == 10);
  CHECK(t.times[0] == 0.0);
  CHECK(t.dt() == doctest::Approx(0.001));
  const Trajectory long_run = simulate(sys, x0, 0.001, 1001, 0);
  for (std::size_t k = 0; k < 3; ++k) CHECK(long_run.states(1000, k) == t.states(0, k));
  CHECK_THROWS_AS(simulate(sys, Vector{1, 2}, 0.001, 10, 0), InvalidArgument);
  // Determinism.
  CHECK(simulate(sys, x0, 0.001, 50, 10).states == simulate(sys, x0, 0.001, 50, 10).states);
}

TEST_CASE("lorenz stays on its attractor") {
  const auto sys = builtin_system("lorenz", default_params("lorenz"));
  const Trajectory t = simulate(sys, default_initial_state("lorenz"), 0.001, 100000, 1000);
  double top = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) top = std::max(top, std::abs(t.states(i, 2)));
  CHECK(top < 60.0);
}

TEST_CASE("measurement and noise") {
  const auto sys = builtin_system("lorenz", default_params("lorenz"));
  const Trajectory t = simulate(sys, default_initial_state("lorenz"), 0.001, 100000, 0);
  const MeasurementSeries y = measure(t, 0);
  CHECK(y.source_component == 0u);
  CHECK(y.values[123] == t.states(123, 0));
  CHECK_THROWS_AS(measure(t, 3), InvalidArgument);
  CHECK(add_noise(y, 0.0, 5).values == y.values);
  const MeasurementSeries a = add_noise(y, 0.1, 9), b = add_noise(y, 0.1, 9);
  CHECK(a.values == b.values);
  double mean = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) mean += a.values[i] - y.values[i];
  mean /= static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) sq += std::pow(a.values[i] - y.values[i] - mean, 2);
  const double sd = std::sqrt(sq / static_cast<double>(y.size() - 1));
  CHECK(sd >= 0.098);
  CHECK(sd <= 0.102);
}

TEST_CASE("spacing validation") {
  CHECK(uniform_spacing(std::vector<double>{0.0, 0.5, 1.0}) == 0.5);
  CHECK_THROWS_AS(uniform_spacing(std::vector<double>{0.0, 0.5, 1.1}), InvalidArgument);
  CHECK_THROWS_AS(uniform_spacing(std::vector<double>{1.0, 0.5}), InvalidArgument);
}

TEST_CASE("trajectory CSV round trip is exact") {
  const auto sys = builtin_system("rossler", default_params("rossler"));
  const Trajectory t = simulate(sys, default_initial_state("rossler"), 0.01, 200, 0);
  const auto dir = std::filesystem::temp_directory_path() / "dsae_test_dynsys";
  io::write_trajectory(dir / "traj.csv", t);
  const Trajectory back = io::read_trajectory(dir / "traj.csv");
  CHECK(back.states == t.states);
  CHECK(back.times == t.times);
  const MeasurementSeries y = measure(t, 2);
  io::write_series(dir / "y.csv", y);
  CHECK(io::read_series(dir / "y.csv").values == y.values);
  CHECK(io::read_series(dir / "traj.csv", 3).values == y.values);
  CHECK(io::read_text(dir / "y.csv").rfind("t,y\n", 0) == 0);
  CHECK_THROWS_AS(io::read_csv(dir / "missing.csv"), IoError);
  std::filesystem::remove_all(dir);
}
