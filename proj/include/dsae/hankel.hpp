#pragma once

#include <filesystem>
#include <optional>

#include "dsae/dynsys.hpp"
#include "dsae/matrix.hpp"

namespace dsae {

// Delay embedding of a scalar series. Column j holds y(t_j), ..., y(t_{j+n-1}),
// so H(i, j) == H(i - 1, j + 1) everywhere.
struct HankelEmbedding {
  Matrix H;     // n x q
  Matrix Hdot;  // n x q, time derivative of every entry
  double tau = 0.0;
  std::size_t n = 0;
  std::size_t q = 0;
};

struct DerivativeOptions {
  // 5-point moving average along time before differencing.
  bool smooth = false;
};

HankelEmbedding build_hankel(const MeasurementSeries& series, std::size_t n,
                             DerivativeOptions opts = {});

// Second-order finite differences along the column (time) index. Interior
// columns use the centered stencil, the two end columns one-sided stencils.
Matrix estimate_derivatives(const HankelEmbedding& embedding, DerivativeOptions opts = {});

// Rank-p factors H ~ U_p diag(S_p) V_p^T.
struct SvdBasis {
  Matrix U;  // n x p
  Vector S;  // p, nonincreasing, positive
  Matrix V;  // q x p
  double variance_captured = 0.0;
  Vector spectrum;  // every singular value of H, nonincreasing

  std::size_t rank() const noexcept { return S.size(); }
  std::size_t dim() const noexcept { return U.rows(); }
};

// QR of the tall orientation, then one-sided Jacobi, so small singular values
// keep their relative accuracy. The largest-magnitude entry of every U column
// is made positive.
SvdBasis truncated_svd(const Matrix& H, std::size_t p);
inline SvdBasis truncated_svd(const HankelEmbedding& e, std::size_t p) { return truncated_svd(e.H, p); }

// U_p^T h for an n-vector, or column-wise for an n x k matrix.
Vector project(std::span<const double> h, const SvdBasis& basis);
Matrix project(const Matrix& h, const SvdBasis& basis);
// U_p x, the adjoint of project.
Vector lift(std::span<const double> x, const SvdBasis& basis);
Matrix lift(const Matrix& x, const SvdBasis& basis);

struct DelayWindow {
  std::size_t n = 0;
  double tau = 0.0;
  // First lag where the sample autocorrelation crosses zero, if it does.
  std::optional<std::size_t> autocorr_zero_lag;
};

// Window with n * tau close to 0.1 time units, n clamped to [8, 512].
DelayWindow suggest_delay_window(const MeasurementSeries& series);

void save_embedding(const std::filesystem::path& dir, const HankelEmbedding& e);
HankelEmbedding load_embedding(const std::filesystem::path& dir);
void save_basis(const std::filesystem::path& dir, const SvdBasis& b);
SvdBasis load_basis(const std::filesystem::path& dir);

}  // namespace dsae
