#include <random>
#include <vector>

#include "doctest.h"
#include "dsae/kernels.hpp"
#include "dsae/matrix.hpp"

using namespace dsae;
namespace k = dsae::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("scalar kernels compute textbook products") {
  const k::KernelTable& s = k::scalar_table();
  const double a[] = {1, 2, 3, 4, 5, 6};  // 2x3
  const double b[] = {1, 0, 1, 0, 1, 0};  // 2x3
  CHECK(s.dot(a, b, 3) == 4.0);
  double c[4];
  s.gemm_nt(2, 2, 3, a, b, c);
  CHECK(c[0] == 4.0);
  CHECK(c[1] == 2.0);
  CHECK(c[2] == 10.0);
  CHECK(c[3] == 5.0);
  double y[3] = {1, 1, 1};
  s.axpy(2.0, a, y, 3);
  CHECK(y[2] == 7.0);
}

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  const k::KernelTable* v = k::avx2_table();
  if (v == nullptr || !k::cpu_has_avx2()) {
    MESSAGE("no AVX2 on this machine; equivalence not exercised");
    return;
  }
  const k::KernelTable& s = k::scalar_table();
  std::mt19937_64 rng(42);
  // Odd sizes exercise the remainder loops.
  for (std::size_t m : {1u, 3u, 4u, 7u, 16u, 33u}) {
    for (std::size_t n : {1u, 2u, 5u, 8u, 13u}) {
      for (std::size_t kk : {1u, 3u, 4u, 9u, 64u, 101u}) {
        CAPTURE(m);
        CAPTURE(n);
        CAPTURE(kk);
        const auto a = random_vec(m * kk, rng);
        const auto b = random_vec(n * kk, rng);
        std::vector<double> c1(m * n), c2(m * n);
        s.gemm_nt(m, n, kk, a.data(), b.data(), c1.data());
        v->gemm_nt(m, n, kk, a.data(), b.data(), c2.data());
        CHECK(max_diff(c1, c2) < 1e-12);

        const auto bn = random_vec(kk * n, rng);
        std::vector<double> d1 = random_vec(m * n, rng), d2 = d1;
        s.gemm_nn_acc(m, n, kk, a.data(), bn.data(), d1.data());
        v->gemm_nn_acc(m, n, kk, a.data(), bn.data(), d2.data());
        CHECK(max_diff(d1, d2) < 1e-12);

        const auto at = random_vec(kk * m, rng);
        std::vector<double> e1 = random_vec(m * n, rng), e2 = e1;
        s.gemm_tn_acc(m, n, kk, at.data(), bn.data(), e1.data());
        v->gemm_tn_acc(m, n, kk, at.data(), bn.data(), e2.data());
        CHECK(max_diff(e1, e2) < 1e-12);
      }
    }
  }
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 257u}) {
    const auto a = random_vec(n, rng), b = random_vec(n, rng);
    CHECK(std::abs(s.dot(a.data(), b.data(), n) - v->dot(a.data(), b.data(), n)) < 1e-12);
    std::vector<double> y1 = b, y2 = b;
    s.axpy(0.37, a.data(), y1.data(), n);
    v->axpy(0.37, a.data(), y2.data(), n);
    // FMA rounds once, the reference twice.
    CHECK(max_diff(y1, y2) < 1e-15);
  }
}

TEST_CASE("matrix helpers") {
  const Matrix a{{1, 2}, {3, 4}, {5, 6}};
  const Matrix b{{1, 0}, {0, 1}};
  CHECK(matmul(a, b) == a);
  CHECK(matmul_nt(a, b) == a);
  const Matrix ata = matmul_tn(a, a);
  CHECK(ata(0, 0) == 35.0);
  CHECK(ata(0, 1) == 44.0);
  CHECK(ata(1, 1) == 56.0);
  CHECK(a.transpose().transpose() == a);
  CHECK(matvec(a, std::vector<double>{1, 1}) == std::vector<double>{3, 7, 11});
  CHECK(matvec_t(a, std::vector<double>{1, 1, 1}) == std::vector<double>{9, 12});
  CHECK(frobenius_sq(b) == 2.0);
  CHECK(a.col_slice(1, 1).col(0) == std::vector<double>{2, 4, 6});
  CHECK(a.row_slice(1, 2)(0, 0) == 3.0);
}

TEST_CASE("dispatch reports an ISA") {
  const auto name = k::isa_name(k::active().isa);
  CHECK((name == "scalar" || name == "avx2"));
}
