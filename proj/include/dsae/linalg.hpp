#pragma once

#include <optional>

#include "dsae/matrix.hpp"

namespace dsae::linalg {

struct SymmetricEigen {
  Vector values;  // nonincreasing
  Matrix vectors; // column k pairs with values[k]
};

// Cyclic Jacobi rotations until every off-diagonal entry is below
// `tol * ||A||_F`. Throws NumericError when `max_sweeps` is exhausted.
SymmetricEigen symmetric_eigen(Matrix a, double tol = 1e-12, int max_sweeps = 100);

// Thin SVD A = U diag(S) V^T of a tall matrix (rows >= cols) by Householder QR
// followed by one-sided Jacobi on the triangular factor, which keeps small
// singular values accurate relative to the largest. S is nonincreasing; U
// holds only the first `u_cols` left vectors, V all of them.
struct ThinSvd {
  Vector S;
  Matrix U;  // rows x u_cols
  Matrix V;  // cols x cols
};
ThinSvd thin_svd(const Matrix& a, std::size_t u_cols, double tol = 1e-14, int max_sweeps = 60);

// In-place Cholesky factorization A = L L^T; returns nullopt when A is not
// numerically positive definite.
std::optional<Matrix> cholesky(const Matrix& a);
Vector cholesky_solve(const Matrix& l, std::span<const double> b);

// Minimum-norm solution of (A) x = b for symmetric positive semidefinite A,
// discarding eigenvalues below rcond * max eigenvalue.
Vector pinv_solve_symmetric(const Matrix& a, std::span<const double> b, double rcond = 1e-12);

}  // namespace dsae::linalg
