#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "dsae/dynsys.hpp"
#include "dsae/hankel.hpp"

using namespace dsae;

namespace {

MeasurementSeries series_of(std::vector<double> values, double dt = 1.0) {
  MeasurementSeries s;
  for (std::size_t i = 0; i < values.size(); ++i) s.times.push_back(dt * static_cast<double>(i));
  s.values = std::move(values);
  return s;
}

MeasurementSeries lorenz_x1(double dt, std::size_t samples) {
  const auto sys = builtin_system("lorenz", default_params("lorenz"));
  return measure(simulate(sys, default_initial_state("lorenz"), dt, samples, 1000), 0);
}

}  // namespace

TEST_CASE("hankel layout on a short ramp") {
  const HankelEmbedding e = build_hankel(series_of({1, 2, 3, 4, 5}), 3);
  CHECK(e.n == 3);
  CHECK(e.q == 3);
  CHECK(e.H == Matrix{{1, 2, 3}, {2, 3, 4}, {3, 4, 5}});
  CHECK(e.H(2, 0) == e.H(1, 1));
  CHECK(e.H(1, 1) == e.H(0, 2));
  for (double v : e.Hdot.flat()) CHECK(v == 1.0);
  CHECK_THROWS_AS(build_hankel(series_of({1, 2, 3, 4}), 3), InvalidArgument);
  CHECK_THROWS_AS(build_hankel(series_of({1, 2, 3, 4, 5}), 1), InvalidArgument);
}

TEST_CASE("anti-diagonals are constant and the first row is the series") {
  const MeasurementSeries y = lorenz_x1(0.1 / 128, 3000);
  const HankelEmbedding e = build_hankel(y, 128);
  CHECK(e.q == y.size() - 127);
  for (std::size_t i = 1; i < e.n; ++i)
    for (std::size_t j = 0; j + 1 < e.q; ++j) REQUIRE(e.H(i, j) == e.H(i - 1, j + 1));
  for (std::size_t j = 0; j < e.q; ++j) REQUIRE(e.H(0, j) == y.values[j]);
}

TEST_CASE("derivative estimates") {
  std::vector<double> c(50, 4.5), ramp(50), quad(50), s(2000);
  for (std::size_t i = 0; i < 50; ++i) {
    ramp[i] = 0.3 * static_cast<double>(i) - 2.0;
    quad[i] = std::pow(0.1 * static_cast<double>(i), 2);
  }
  const HankelEmbedding ce = build_hankel(series_of(c, 0.1), 5);
  const HankelEmbedding re = build_hankel(series_of(ramp, 0.1), 5);
  for (double v : ce.Hdot.flat()) CHECK(std::abs(v) <= 1e-12);
  for (double v : re.Hdot.flat()) CHECK(std::abs(v - 3.0) <= 1e-12);
  const HankelEmbedding qe = build_hankel(series_of(quad, 0.1), 5);
  for (std::size_t i = 0; i < qe.n; ++i)
    for (std::size_t j = 0; j < qe.q; ++j) CHECK(qe.Hdot(i, j) == doctest::Approx(2 * 0.1 * (i + j) * 1.0).epsilon(1e-9));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sin(0.01 * static_cast<double>(i));
  const HankelEmbedding se = build_hankel(series_of(s, 0.01), 10);
  double err = 0.0;
  for (std::size_t i = 0; i < se.n; ++i)
    for (std::size_t j = 0; j < se.q; ++j) err = std::max(err, std::abs(se.Hdot(i, j) - std::cos(0.01 * (i + j))));
  CHECK(err < 1e-4);
  HankelEmbedding tiny;
  tiny.H = Matrix(2, 2);
  tiny.n = 2;
  tiny.q = 2;
  tiny.tau = 1.0;
  CHECK_THROWS_AS(estimate_derivatives(tiny), InvalidArgument);
  // Smoothing leaves linear data alone away from the ends.
  const HankelEmbedding sm = build_hankel(series_of(ramp, 0.1), 5, {true});
  CHECK(sm.Hdot(2, 10) == doctest::Approx(3.0));
}

TEST_CASE("svd on small exact cases") {
  const SvdBasis id = truncated_svd(Matrix::identity(3), 2);
  CHECK(id.S[0] == doctest::Approx(1.0));
  CHECK(id.S[1] == doctest::Approx(1.0));
  CHECK(id.variance_captured == doctest::Approx(2.0 / 3.0));
  Matrix r1(4, 6);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) r1(i, j) = (i + 1.0) * (j - 2.5);
  const SvdBasis b = truncated_svd(r1, 1);
  CHECK(std::abs(b.variance_captured - 1.0) < 1e-12);
  CHECK(b.U(3, 0) > 0.0);  // largest entry positive
  CHECK_THROWS_AS(truncated_svd(r1, 2), InvalidArgument);
  CHECK_THROWS_AS(truncated_svd(r1, 0), InvalidArgument);
  CHECK_THROWS_AS(truncated_svd(r1, 5), InvalidArgument);
}

TEST_CASE("svd of the Lorenz Hankel matrix against an independent eigen-solver") {
  const HankelEmbedding e = build_hankel(lorenz_x1(0.1 / 128, 10000), 128);
  const SvdBasis b = truncated_svd(e, 10);

  Eigen::MatrixXd H(e.n, e.q);
  for (std::size_t i = 0; i < e.n; ++i)
    for (std::size_t j = 0; j < e.q; ++j) H(i, j) = e.H(i, j);
  const Eigen::BDCSVD<Eigen::MatrixXd> ref(H);
  const Eigen::VectorXd ev = ref.singularValues().array().square();
  const double total = ev.sum();
  for (std::size_t k = 0; k < 10; ++k) CHECK(b.S[k] == doctest::Approx(ref.singularValues()(k)).epsilon(1e-6));
  CHECK(b.spectrum.size() == 128);
  CHECK(b.variance_captured == doctest::Approx(ev.head(10).sum() / total).epsilon(1e-12));
  const double top3 = ev.head(3).sum() / total;
  CHECK(top3 > 0.9);
  CHECK(truncated_svd(e, 3).variance_captured == doctest::Approx(top3).epsilon(1e-12));

  // Orthonormal factors and the reconstruction identity.
  const Matrix utu = matmul_tn(b.U, b.U), vtv = matmul_tn(b.V, b.V);
  CHECK(max_abs_diff(utu, Matrix::identity(10)) < 1e-10);
  CHECK(max_abs_diff(vtv, Matrix::identity(10)) < 1e-10);
  Matrix us = b.U;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t k = 0; k < 10; ++k) us(i, k) *= b.S[k];
  const Matrix rec = matmul_nt(us, b.V);
  double err = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) err += std::pow(rec.data()[i] - e.H.data()[i], 2);
  CHECK(std::abs(err / frobenius_sq(e.H) - (1.0 - b.variance_captured)) < 1e-8);

  // Error is nonincreasing in p.
  double prev = 1.0;
  for (std::size_t p = 1; p <= 10; ++p) {
    const double miss = 1.0 - truncated_svd(e, p).variance_captured;
    CHECK(miss <= prev + 1e-15);
    prev = miss;
  }
}

TEST_CASE("projection and lift") {
  const HankelEmbedding e = build_hankel(lorenz_x1(0.001, 2000), 32);
  const SvdBasis b = truncated_svd(e, 5);
  const Vector u0 = b.U.col(0);
  const Vector x = project(u0, b);
  CHECK(x[0] == doctest::Approx(1.0));
  for (std::size_t k = 1; k < 5; ++k) CHECK(std::abs(x[k]) < 1e-12);
  const Vector coeff{0.3, -1.0, 2.0, 0.0, 0.5};
  const Vector h = lift(coeff, b);
  const Vector back = lift(project(h, b), b);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(std::abs(back[i] - h[i]) < 1e-10);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    Vector r(32);
    for (double& v : r) v = g(rng);
    CHECK(norm2(project(r, b)) <= norm2(r) + 1e-12);
  }
  CHECK_THROWS_AS(project(Vector(31), b), InvalidArgument);
}

TEST_CASE("delay window suggestion") {
  std::vector<double> v(400);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.05 * static_cast<double>(i));
  CHECK(suggest_delay_window(series_of(v, 0.001)).n == 100);
  CHECK(suggest_delay_window(series_of(v, 0.0008)).n == 125);
  CHECK(suggest_delay_window(series_of(v, 0.1)).n == 8);
  const DelayWindow w = suggest_delay_window(series_of(v, 0.001));
  REQUIRE(w.autocorr_zero_lag.has_value());
  CHECK(*w.autocorr_zero_lag == doctest::Approx(31.4).epsilon(0.1));
  CHECK_THROWS_AS(suggest_delay_window(series_of(std::vector<double>(255, 1.0), 0.01)), InvalidArgument);
}

TEST_CASE("embedding and basis files round trip") {
  const HankelEmbedding e = build_hankel(lorenz_x1(0.001, 500), 16);
  const SvdBasis b = truncated_svd(e, 4);
  const auto dir = std::filesystem::temp_directory_path() / "dsae_test_hankel";
  save_embedding(dir / "e", e);
  save_basis(dir / "b", b);
  const HankelEmbedding e2 = load_embedding(dir / "e");
  const SvdBasis b2 = load_basis(dir / "b");
  CHECK(e2.H == e.H);
  CHECK(e2.Hdot == e.Hdot);
  CHECK(e2.tau == e.tau);
  CHECK(b2.U == b.U);
  CHECK(b2.S == b.S);
  CHECK(b2.variance_captured == b.variance_captured);
  std::filesystem::remove_all(dir);
}
