#pragma once

#include <optional>

#include "cmech/matrix.hpp"

namespace cmech::kernels {

// Symmetric eigendecomposition result. Eigenvalues are sorted descending,
// eigenvectors are the matching orthonormal columns of `vectors`. Each
// eigenvector's largest-magnitude entry is made nonnegative so the
// decomposition is reproducible.
struct EigSym {
  Vector values;
  Matrix vectors;
};

// Thin SVD a = u * diag(s) * vᵀ with s sorted descending.
struct Svd {
  Matrix u;
  Vector s;
  Matrix v;
};

// The unqualified kernels are OpenMP-threaded. Every output element is
// accumulated in the same order as in the serial reference versions below,
// so the two produce bitwise-identical results; the unit tests rely on that.

Matrix matmul(const Matrix& a, const Matrix& b);     // a · b
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // aᵀ · b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a · bᵀ
Vector matvec(const Matrix& a, const Vector& x);
Vector matvec_t(const Matrix& a, const Vector& x);   // aᵀ · x

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Converges to
// machine precision; rotation order is fixed, so the output is deterministic
// for a given input.
EigSym jacobi_eigh(Matrix a, int max_sweeps = 50);

// One-sided Jacobi SVD (columns of the taller side are orthogonalized by
// plane rotations). Accurate for small singular values; used for
// pseudoinverses and row-space bases.
Svd jacobi_svd(const Matrix& a, int max_sweeps = 60);

// Lower-triangular Cholesky factor (l·lᵀ = a), or nullopt when `a` is not
// positive definite.
std::optional<Matrix> cholesky(const Matrix& a);

namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
EigSym jacobi_eigh(Matrix a, int max_sweeps = 50);
}  // namespace serial

}  // namespace cmech::kernels
