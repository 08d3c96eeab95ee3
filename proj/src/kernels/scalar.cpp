#include "dsae/kernels.hpp"

namespace dsae::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot_scalar(ai, b + j * k, k);
  }
}

void gemm_nn_acc_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a,
                        const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      axpy_scalar(a[i * k + p], b + p * n, ci, n);
    }
  }
}

void gemm_tn_acc_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a,
                        const double* b, double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) axpy_scalar(ap[i], bp, c + i * n, n);
  }
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{Isa::Scalar,        dot_scalar,        axpy_scalar, gemm_nt_scalar,
                                 gemm_nn_acc_scalar, gemm_tn_acc_scalar};
  return table;
}

}  // namespace dsae::kernels
