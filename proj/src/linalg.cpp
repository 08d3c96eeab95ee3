#include "dsae/linalg.hpp"
#include "dsae/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dsae::linalg {

SymmetricEigen symmetric_eigen(Matrix a, double tol, int max_sweeps) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw InvalidArgument("symmetric_eigen: matrix must be square");
  Matrix v = Matrix::identity(n);
  const double scale = std::sqrt(frobenius_sq(a));
  for (double x : a.flat())
    if (!std::isfinite(x)) throw NumericError("symmetric_eigen: non-finite input");

  bool converged = scale == 0.0 || n < 2;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
    if (off <= tol * scale) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= tol * scale * 1e-3) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
    if (off > tol * scale) throw NumericError("symmetric_eigen: Jacobi sweeps did not converge");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

std::optional<Matrix> cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw InvalidArgument("cholesky: matrix must be square");
  Matrix l(n, n);
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 1e-13 * max_diag) || !std::isfinite(d)) return std::nullopt;
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

Vector cholesky_solve(const Matrix& l, std::span<const double> b) {
  const std::size_t n = l.rows();
  Vector y(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) y[i] -= l(i, k) * y[k];
    y[i] /= l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) y[i] -= l(k, i) * y[k];
    y[i] /= l(i, i);
  }
  return y;
}

Vector pinv_solve_symmetric(const Matrix& a, std::span<const double> b, double rcond) {
  const SymmetricEigen eig = symmetric_eigen(a);
  const std::size_t n = a.rows();
  const double cutoff = rcond * std::max(0.0, eig.values.empty() ? 0.0 : eig.values.front());
  Vector x(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (eig.values[k] <= cutoff) continue;
    double proj = 0.0;
    for (std::size_t i = 0; i < n; ++i) proj += eig.vectors(i, k) * b[i];
    proj /= eig.values[k];
    for (std::size_t i = 0; i < n; ++i) x[i] += proj * eig.vectors(i, k);
  }
  return x;
}

ThinSvd thin_svd(const Matrix& a, std::size_t u_cols, double tol, int max_sweeps) {
  const std::size_t m = a.rows(), k = a.cols();
  if (m < k) throw InvalidArgument("thin_svd: matrix must have at least as many rows as columns");
  if (u_cols > k) throw InvalidArgument("thin_svd: at most " + std::to_string(k) + " left vectors");

  // Householder QR, row-major friendly: reflector j is stored in column j of
  // `refl` (rows j..m-1) and applied with row-wise axpy updates.
  Matrix w = a;
  Matrix refl(m, k);
  Vector beta(k, 0.0), tmp(k);
  for (std::size_t j = 0; j < k; ++j) {
    double norm = 0.0;
    for (std::size_t r = j; r < m; ++r) norm += w(r, j) * w(r, j);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double alpha = w(j, j) > 0.0 ? -norm : norm;
    double vnorm = 0.0;
    for (std::size_t r = j; r < m; ++r) {
      refl(r, j) = w(r, j) - (r == j ? alpha : 0.0);
      vnorm += refl(r, j) * refl(r, j);
    }
    if (vnorm == 0.0) continue;
    beta[j] = 2.0 / vnorm;
    const std::size_t width = k - j;
    std::fill(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(width), 0.0);
    for (std::size_t r = j; r < m; ++r) kernels::axpy(refl(r, j), &w(r, j), tmp.data(), width);
    for (std::size_t r = j; r < m; ++r) kernels::axpy(-beta[j] * refl(r, j), tmp.data(), &w(r, j), width);
  }

  // One-sided Jacobi on R: rows of G = R^T are the columns of R.
  Matrix g(k, k), vt = Matrix::identity(k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) g(j, i) = w(i, j);
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        double* gi = &g(i, 0);
        double* gj = &g(j, 0);
        const double al = kernels::dot(gi, gi, k), be = kernels::dot(gj, gj, k), ga = kernels::dot(gi, gj, k);
        if (al == 0.0 || be == 0.0 || std::abs(ga) <= tol * std::sqrt(al * be)) continue;
        converged = false;
        const double zeta = (be - al) / (2.0 * ga);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
        for (Matrix* mat : {&g, &vt}) {
          double* x = &(*mat)(i, 0);
          double* y = &(*mat)(j, 0);
          for (std::size_t r = 0; r < k; ++r) {
            const double xi = x[r], yj = y[r];
            x[r] = c * xi - s * yj;
            y[r] = s * xi + c * yj;
          }
        }
      }
    }
  }
  if (!converged) throw NumericError("thin_svd: Jacobi sweeps did not converge");

  std::vector<std::size_t> order(k);
  Vector sv(k);
  for (std::size_t i = 0; i < k; ++i) {
    order[i] = i;
    sv[i] = std::sqrt(kernels::dot(&g(i, 0), &g(i, 0), k));
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sv[x] > sv[y]; });

  ThinSvd out;
  out.S.resize(k);
  out.V = Matrix(k, k);
  for (std::size_t c = 0; c < k; ++c) {
    out.S[c] = sv[order[c]];
    for (std::size_t r = 0; r < k; ++r) out.V(r, c) = vt(order[c], r);
  }
  // U = Q [R-left vectors; 0], applying the reflectors in reverse.
  out.U = Matrix(m, u_cols);
  for (std::size_t c = 0; c < u_cols; ++c) {
    const double s = sv[order[c]];
    if (s == 0.0) continue;
    for (std::size_t r = 0; r < k; ++r) out.U(r, c) = g(order[c], r) / s;
  }
  for (std::size_t j = k; j-- > 0;) {
    if (beta[j] == 0.0 || u_cols == 0) continue;
    std::fill(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(u_cols), 0.0);
    for (std::size_t r = j; r < m; ++r) kernels::axpy(refl(r, j), &out.U(r, 0), tmp.data(), u_cols);
    for (std::size_t r = j; r < m; ++r) kernels::axpy(-beta[j] * refl(r, j), tmp.data(), &out.U(r, 0), u_cols);
  }
  return out;
}

}  // namespace dsae::linalg
