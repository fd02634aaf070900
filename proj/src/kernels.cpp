#include "cmech/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>

#include "cmech/errors.hpp"

namespace cmech::kernels {

namespace {

// Minimum amount of work before a loop is farmed out to OpenMP; below this
// the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 24;
constexpr std::size_t kParallelDim = 320;

void require_inner(const std::size_t a, const std::size_t b, const char* what) {
  if (a != b) throw InvalidInput(std::string("dimension mismatch in ") + what);
}

double offdiag_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) s += 2.0 * a(i, j) * a(i, j);
  return std::sqrt(s);
}

struct PlaneRotation {
  std::size_t p;
  std::size_t q;
  double c;
  double s;
};

// Row phase of one rotation: mixes rows p and q in place.
inline void row_rotation(Matrix& a, std::size_t n, const PlaneRotation& r) {
  double* row_p = a.row_ptr(r.p);
  double* row_q = a.row_ptr(r.q);
  for (std::size_t j = 0; j < n; ++j) {
    const double ap = row_p[j];
    const double aq = row_q[j];
    row_p[j] = r.c * ap - r.s * aq;
    row_q[j] = r.s * ap + r.c * aq;
  }
}

// Column phase for one row: applies every rotation of the batch (they touch
// disjoint column pairs) to row i of the work matrix and the basis.
inline void column_rotations(Matrix& a, Matrix& v, std::size_t i,
                             const std::vector<PlaneRotation>& batch) {
  double* row = a.row_ptr(i);
  double* vrow = v.row_ptr(i);
  for (const auto& r : batch) {
    const double aip = row[r.p];
    const double aiq = row[r.q];
    row[r.p] = r.c * aip - r.s * aiq;
    row[r.q] = r.s * aip + r.c * aiq;
    const double vip = vrow[r.p];
    const double viq = vrow[r.q];
    vrow[r.p] = r.c * vip - r.s * viq;
    vrow[r.q] = r.s * vip + r.c * viq;
  }
}

// Tournament-ordered two-sided Jacobi. Each round rotates a batch of
// disjoint index pairs; the row phase touches disjoint row pairs and the
// column phase disjoint column pairs, so every matrix element is written by
// exactly one rotation per phase. The parallel and serial versions are
// therefore bitwise-identical.
template <bool Parallel>
EigSym jacobi_eigh_impl(Matrix a, int max_sweeps) {
  if (a.rows() != a.cols()) throw InvalidInput("jacobi_eigh needs a square matrix");
  if (!all_finite(a)) throw InvalidInput("jacobi_eigh: non-finite entries");
  const std::size_t n = a.rows();
  Matrix v = Matrix::identity(n);
  const double scale = frobenius_norm(a);
  const double stop = 1e-14 * scale;
  // entries below this can stay: their total off-diagonal mass is ~stop
  const double skip = n > 0 ? stop / static_cast<double>(n) : 0.0;

  // round-robin schedule; slot n is the bye when n is odd
  const std::size_t slots = n % 2 == 0 ? n : n + 1;
  std::vector<std::size_t> seat(slots);
  std::iota(seat.begin(), seat.end(), std::size_t{0});
  std::vector<PlaneRotation> batch;
  batch.reserve(slots / 2);

  for (int sweep = 0; sweep < max_sweeps && n > 1; ++sweep) {
    if (offdiag_norm(a) <= stop) break;
    bool rotated = false;
    for (std::size_t round = 0; round + 1 < slots; ++round) {
      batch.clear();
      for (std::size_t i = 0; i < slots / 2; ++i) {
        std::size_t p = seat[i];
        std::size_t q = seat[slots - 1 - i];
        if (p >= n || q >= n) continue;  // bye
        if (p > q) std::swap(p, q);
        const double apq = a(p, q);
        if (std::abs(apq) <= skip) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        batch.push_back(PlaneRotation{p, q, c, t * c});
      }
      if (!batch.empty()) {
        rotated = true;
        if (Parallel && n >= kParallelDim) {
          const long long nb = static_cast<long long>(batch.size());
#pragma omp parallel for schedule(static)
          for (long long bi = 0; bi < nb; ++bi) {
            row_rotation(a, n, batch[static_cast<std::size_t>(bi)]);
          }
          const long long ln = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
          for (long long li = 0; li < ln; ++li) {
            column_rotations(a, v, static_cast<std::size_t>(li), batch);
          }
        } else {
          for (const auto& r : batch) row_rotation(a, n, r);
          for (std::size_t i = 0; i < n; ++i) column_rotations(a, v, i, batch);
        }
      }
      // advance the round-robin: seat 0 stays, the rest rotate
      const std::size_t last = seat[slots - 1];
      for (std::size_t i = slots - 1; i > 1; --i) seat[i] = seat[i - 1];
      seat[1] = last;
    }
    if (!rotated) break;
  }

  // Sort descending; stable so degenerate eigenvalues keep their sweep order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&a](std::size_t i, std::size_t j) {
    return a(i, i) > a(j, j);
  });

  EigSym out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.values[k] = a(src, src);
    std::size_t arg = 0;
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = std::abs(v(i, src));
      if (m > best) {
        best = m;
        arg = i;
      }
    }
    const double sign = v(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = sign * v(i, src);
  }
  return out;
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  const std::size_t work = a.rows() * a.cols() * b.cols();
  if (work < kParallelWork) return serial::matmul(a, b);
  require_inner(a.cols(), b.rows(), "matmul");
  Matrix out(a.rows(), b.cols());
  const long long rows = static_cast<long long>(a.rows());
#pragma omp parallel for schedule(static)
  for (long long li = 0; li < rows; ++li) {
    const auto i = static_cast<std::size_t>(li);
    double* out_row = out.row_ptr(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* b_row = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  const std::size_t work = a.cols() * a.rows() * b.cols();
  if (work < kParallelWork) return serial::matmul_tn(a, b);
  require_inner(a.rows(), b.rows(), "matmul_tn");
  Matrix out(a.cols(), b.cols());
  const long long rows = static_cast<long long>(a.cols());
#pragma omp parallel for schedule(static)
  for (long long li = 0; li < rows; ++li) {
    const auto i = static_cast<std::size_t>(li);
    double* out_row = out.row_ptr(i);
    for (std::size_t k = 0; k < a.rows(); ++k) {
      const double aki = a(k, i);
      const double* b_row = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  const std::size_t work = a.rows() * a.cols() * b.rows();
  if (work < kParallelWork) return serial::matmul_nt(a, b);
  require_inner(a.cols(), b.cols(), "matmul_nt");
  Matrix out(a.rows(), b.rows());
  const long long rows = static_cast<long long>(a.rows());
#pragma omp parallel for schedule(static)
  for (long long li = 0; li < rows; ++li) {
    const auto i = static_cast<std::size_t>(li);
    const double* a_row = a.row_ptr(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* b_row = b.row_ptr(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a_row[k] * b_row[k];
      out(i, j) = s;
    }
  }
  return out;
}

Vector matvec(const Matrix& a, const Vector& x) {
  require_inner(a.cols(), x.size(), "matvec");
  Vector out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* a_row = a.row_ptr(i);
    double s = 0.0;
    for (std::size_t k = 0; k < a.cols(); ++k) s += a_row[k] * x[k];
    out[i] = s;
  }
  return out;
}

Vector matvec_t(const Matrix& a, const Vector& x) {
  require_inner(a.rows(), x.size(), "matvec_t");
  Vector out(a.cols(), 0.0);
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* a_row = a.row_ptr(k);
    const double xk = x[k];
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += xk * a_row[j];
  }
  return out;
}

EigSym jacobi_eigh(Matrix a, int max_sweeps) {
  return jacobi_eigh_impl<true>(std::move(a), max_sweeps);
}

Svd jacobi_svd(const Matrix& a, int max_sweeps) {
  if (!all_finite(a)) throw InvalidInput("jacobi_svd: non-finite entries");
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n) {
    Svd t = jacobi_svd(transpose(a), max_sweeps);
    return Svd{std::move(t.v), std::move(t.s), std::move(t.u)};
  }
  const std::size_t k = n;
  Matrix w = a;  // columns get orthogonalized in place
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < max_sweeps && k > 1; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p);
          const double wq = w(i, q);
          alpha += wp * wp;
          beta += wq * wq;
          gamma += wp * wq;
        }
        const double limit = 1e-14 * std::sqrt(alpha * beta);
        if (std::abs(gamma) <= limit || gamma == 0.0) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        double t;
        if (std::abs(zeta) > 1e150) {
          t = 0.5 / zeta;
        } else {
          t = 1.0 / (std::abs(zeta) + std::sqrt(zeta * zeta + 1.0));
          if (zeta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p);
          const double wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p);
          const double vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  Vector s(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < m; ++i) norm += w(i, j) * w(i, j);
    s[j] = std::sqrt(norm);
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&s](std::size_t i, std::size_t j) { return s[i] > s[j]; });

  Svd out;
  out.u = Matrix(m, k);
  out.v = Matrix(n, k);
  out.s.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = order[j];
    out.s[j] = s[src];
    const double inv = s[src] > 0.0 ? 1.0 / s[src] : 0.0;
    std::size_t arg = 0;
    double best = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double mag = std::abs(w(i, src));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    const double sign = (s[src] > 0.0 && w(arg, src) < 0.0) ? -1.0 : 1.0;
    for (std::size_t i = 0; i < m; ++i) out.u(i, j) = sign * w(i, src) * inv;
    for (std::size_t i = 0; i < n; ++i) out.v(i, j) = sign * v(i, src);
  }
  return out;
}

std::optional<Matrix> cholesky(const Matrix& a) {
  if (a.rows() != a.cols()) return std::nullopt;
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a(i, j);
      for (std::size_t c = 0; c < j; ++c) sum -= l(i, c) * l(j, c);
      if (i == j) {
        if (!(sum > 0.0) || !std::isfinite(sum)) return std::nullopt;
        l(i, i) = std::sqrt(sum);
      } else {
        l(i, j) = sum / l(j, j);
      }
    }
  }
  return l;
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  require_inner(a.cols(), b.rows(), "matmul");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out_row = out.row_ptr(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* b_row = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require_inner(a.rows(), b.rows(), "matmul_tn");
  Matrix out(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) {
    double* out_row = out.row_ptr(i);
    for (std::size_t k = 0; k < a.rows(); ++k) {
      const double aki = a(k, i);
      const double* b_row = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require_inner(a.cols(), b.cols(), "matmul_nt");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* a_row = a.row_ptr(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* b_row = b.row_ptr(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a_row[k] * b_row[k];
      out(i, j) = s;
    }
  }
  return out;
}

EigSym jacobi_eigh(Matrix a, int max_sweeps) {
  return jacobi_eigh_impl<false>(std::move(a), max_sweeps);
}

}  // namespace serial

}  // namespace cmech::kernels
