#pragma once

#include "cmech/kernels.hpp"
#include "cmech/matrix.hpp"

namespace cmech {

// Numerical cutoffs used throughout rank decisions and Loewner-order checks.
// All comparisons are relative to the largest eigenvalue/singular value of
// the matrix at hand.
struct Tolerances {
  double rank_rtol = 1e-9;
  double psd_rtol = 1e-9;

  void validate() const;
};

// Square matrix stored exactly symmetric; the constructor averages the input
// with its transpose.
class SymMatrix {
 public:
  explicit SymMatrix(const Matrix& a);

  std::size_t dim() const { return mat_.rows(); }
  const Matrix& mat() const { return mat_; }

 private:
  Matrix mat_;
};

using EigenDecomposition = kernels::EigSym;

// Eigendecomposition with eigenvalues sorted descending. Throws InvalidInput
// on non-finite entries.
EigenDecomposition sym_eig(const SymMatrix& x);
EigenDecomposition sym_eig(const Matrix& x);

// Symmetric PSD square root. Eigenvalues in [-psd_rtol * lambda_max, 0) are
// clamped to zero; anything lower throws NotPsd.
Matrix psd_sqrt(const Matrix& x, const Tolerances& tol = {});

// Inverse of the symmetric PSD square root, with eigenvalues below the rank
// cutoff treated as zero (pseudo-inverse square root).
Matrix psd_inv_sqrt(const Matrix& x, const Tolerances& tol = {});

// Eigenvalue rectification |X| = V diag(|lambda|) Vᵀ. Identity on the PSD cone.
Matrix psd_abs(const Matrix& x);

// Moore-Penrose pseudoinverse. Singular values below rank_rtol * s_max are
// treated as zero.
Matrix pinv(const Matrix& a, const Tolerances& tol = {});

// Loewner-order test X ⪯ Y: true iff
// lambda_min(Y - X) >= -psd_rtol * max(1, lambda_max(Y - X)).
bool loewner_leq(const Matrix& x, const Matrix& y, const Tolerances& tol = {});
bool loewner_leq(const SymMatrix& x, const SymMatrix& y,
                 const Tolerances& tol = {});

// Orthonormal rows spanning rowspace(b1) ∩ rowspace(b2); a 0-row matrix when
// the intersection is trivial. Implemented by eigendecomposing the symmetric
// projector product P1 P2 + P2 P1 and keeping the eigenvalue-2 eigenspace.
Matrix rowspace_intersection(const Matrix& b1, const Matrix& b2,
                             const Tolerances& tol = {});

// Orthonormal rows spanning rowspace(b) (helper shared with the row-space
// intersection; exposed because standardization and workloads reuse it).
Matrix orthonormal_rowspace_basis(const Matrix& b, const Tolerances& tol = {});

}  // namespace cmech
