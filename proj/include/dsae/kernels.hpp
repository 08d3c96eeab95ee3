#pragma once

// Dense double-precision inner loops used by the network engine, the Hankel
// Gram products and the regression code.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2+FMA variant compiled with function-level target attributes. The
// variant is picked once at first use from the CPU feature bits; setting
// DSAE_SIMD=scalar in the environment forces the reference path.
//
// All matrices are row-major and densely packed (leading dimension = cols).

#include <cstddef>
#include <string_view>

namespace dsae::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // C(MxN) = A(MxK) * B(NxK)^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
  // C(MxN) += A(MxK) * B(KxN)
  void (*gemm_nn_acc)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                      const double* b, double* c);
  // C(MxN) += A(KxM)^T * B(KxN)
  void (*gemm_tn_acc)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                      const double* b, double* c);
};

const KernelTable& scalar_table() noexcept;
// Null when the build target has no AVX2 variant.
const KernelTable* avx2_table() noexcept;
bool cpu_has_avx2() noexcept;

// Table selected for this process.
const KernelTable& active() noexcept;
std::string_view isa_name(Isa isa) noexcept;

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c) {
  active().gemm_nt(m, n, k, a, b, c);
}
inline void gemm_nn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a,
                        const double* b, double* c) {
  active().gemm_nn_acc(m, n, k, a, b, c);
}
inline void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a,
                        const double* b, double* c) {
  active().gemm_tn_acc(m, n, k, a, b, c);
}

}  // namespace dsae::kernels
