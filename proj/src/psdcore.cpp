#include "cmech/psdcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "cmech/errors.hpp"

namespace cmech {

void Tolerances::validate() const {
  const bool ok = rank_rtol > 0.0 && rank_rtol < 1.0 && psd_rtol > 0.0 &&
                  psd_rtol < 1.0;
  if (!ok) throw InvalidInput("tolerances must lie strictly in (0, 1)");
}

SymMatrix::SymMatrix(const Matrix& a) : mat_(symmetrize(a)) {
  if (!all_finite(mat_)) throw InvalidInput("SymMatrix: non-finite entries");
}

EigenDecomposition sym_eig(const SymMatrix& x) {
  return kernels::jacobi_eigh(x.mat());
}

EigenDecomposition sym_eig(const Matrix& x) {
  return sym_eig(SymMatrix(x));
}

namespace {

// V f(lambda) Vᵀ for an elementwise eigenvalue map.
template <typename F>
Matrix eigen_map(const EigenDecomposition& eig, F&& f) {
  const std::size_t n = eig.values.size();
  Matrix scaled(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double fi = f(eig.values[i]);
    for (std::size_t j = 0; j < n; ++j)
      scaled(j, i) = eig.vectors(j, i) * fi;
  }
  return symmetrize(kernels::matmul_nt(scaled, eig.vectors));
}

}  // namespace

Matrix psd_sqrt(const Matrix& x, const Tolerances& tol) {
  tol.validate();
  const auto eig = sym_eig(x);
  if (eig.values.empty()) return Matrix(0, 0);
  const double lmax = eig.values.front();
  const double floor = -tol.psd_rtol * std::max(lmax, 0.0);
  for (double v : eig.values) {
    if (v < floor) throw NotPsd("psd_sqrt: eigenvalue below tolerance");
  }
  return eigen_map(eig, [](double v) { return v > 0.0 ? std::sqrt(v) : 0.0; });
}

Matrix psd_inv_sqrt(const Matrix& x, const Tolerances& tol) {
  tol.validate();
  const auto eig = sym_eig(x);
  if (eig.values.empty()) return Matrix(0, 0);
  const double lmax = eig.values.front();
  const double floor = -tol.psd_rtol * std::max(lmax, 0.0);
  const double cutoff = tol.rank_rtol * std::max(lmax, 0.0);
  for (double v : eig.values) {
    if (v < floor) throw NotPsd("psd_inv_sqrt: eigenvalue below tolerance");
  }
  return eigen_map(eig, [cutoff](double v) {
    return v > cutoff ? 1.0 / std::sqrt(v) : 0.0;
  });
}

Matrix psd_abs(const Matrix& x) {
  const auto eig = sym_eig(x);
  if (eig.values.empty()) return Matrix(0, 0);
  return eigen_map(eig, [](double v) { return std::abs(v); });
}

Matrix pinv(const Matrix& a, const Tolerances& tol) {
  tol.validate();
  if (!all_finite(a)) throw InvalidInput("pinv: non-finite entries");
  if (a.rows() == 0 || a.cols() == 0) return Matrix(a.cols(), a.rows());
  const auto svd = kernels::jacobi_svd(a);
  const double smax = svd.s.empty() ? 0.0 : svd.s.front();
  const double cutoff = tol.rank_rtol * smax;
  // pinv = v diag(1/s) uᵀ over the retained singular values
  Matrix v_scaled = svd.v;
  for (std::size_t j = 0; j < svd.s.size(); ++j) {
    const double inv = svd.s[j] > cutoff ? 1.0 / svd.s[j] : 0.0;
    for (std::size_t i = 0; i < v_scaled.rows(); ++i) v_scaled(i, j) *= inv;
  }
  return kernels::matmul_nt(v_scaled, svd.u);
}

bool loewner_leq(const Matrix& x, const Matrix& y, const Tolerances& tol) {
  tol.validate();
  if (x.rows() != y.rows() || x.cols() != y.cols() || x.rows() != x.cols()) {
    throw InvalidInput("loewner_leq: dimension mismatch");
  }
  if (x.rows() == 0) return true;
  const auto eig = sym_eig(symmetrize(y - x));
  const double lmax = eig.values.front();
  const double lmin = eig.values.back();
  return lmin >= -tol.psd_rtol * std::max(1.0, lmax);
}

bool loewner_leq(const SymMatrix& x, const SymMatrix& y, const Tolerances& tol) {
  return loewner_leq(x.mat(), y.mat(), tol);
}

Matrix orthonormal_rowspace_basis(const Matrix& b, const Tolerances& tol) {
  tol.validate();
  if (!all_finite(b)) throw InvalidInput("rowspace basis: non-finite entries");
  if (b.rows() == 0 || b.cols() == 0) return Matrix(0, b.cols());
  // Left singular vectors of bᵀ span the row space of b.
  const auto svd = kernels::jacobi_svd(transpose(b));
  const double smax = svd.s.empty() ? 0.0 : svd.s.front();
  const double cutoff = tol.rank_rtol * smax;
  std::size_t rank = 0;
  while (rank < svd.s.size() && svd.s[rank] > cutoff && svd.s[rank] > 0.0) ++rank;
  Matrix basis(rank, b.cols());
  for (std::size_t r = 0; r < rank; ++r)
    for (std::size_t j = 0; j < b.cols(); ++j) basis(r, j) = svd.u(j, r);
  return basis;
}

Matrix rowspace_intersection(const Matrix& b1, const Matrix& b2,
                             const Tolerances& tol) {
  tol.validate();
  if (b1.cols() != b2.cols()) {
    throw InvalidInput("rowspace_intersection: column count mismatch");
  }
  const std::size_t d = b1.cols();
  const Matrix q1 = orthonormal_rowspace_basis(b1, tol);
  const Matrix q2 = orthonormal_rowspace_basis(b2, tol);
  if (q1.rows() == 0 || q2.rows() == 0) return Matrix(0, d);

  const Matrix p1 = kernels::matmul_tn(q1, q1);
  const Matrix p2 = kernels::matmul_tn(q2, q2);
  // P1 P2 + P2 P1 is symmetric with eigenvalue 2 exactly on the intersection.
  const Matrix prod = kernels::matmul(p1, p2);
  const Matrix m = prod + transpose(prod);
  const auto eig = sym_eig(m);

  std::size_t count = 0;
  while (count < eig.values.size() &&
         eig.values[count] >= 2.0 * (1.0 - tol.rank_rtol)) {
    ++count;
  }
  Matrix rows(count, d);
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t j = 0; j < d; ++j) rows(r, j) = eig.vectors(j, r);
  return rows;
}

}  // namespace cmech
