#include "cmech/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>

#include "cmech/errors.hpp"
#include "cmech/rng.hpp"

namespace cmech {

DataVector::DataVector(std::vector<std::int64_t> c) : counts(std::move(c)) {
  for (std::int64_t v : counts) {
    if (v < 0) throw InvalidInput("data vector counts must be nonnegative");
  }
}

Vector DataVector::as_double() const {
  Vector v(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    v[i] = static_cast<double>(counts[i]);
  return v;
}

std::int64_t DataVector::total() const {
  std::int64_t t = 0;
  for (std::int64_t v : counts) t += v;
  return t;
}

Covariance::Covariance(Kind kind, Matrix dense)
    : kind_(kind), dense_(std::move(dense)) {
  if (!all_finite(dense_)) throw InvalidInput("covariance: non-finite entries");
  auto l = kernels::cholesky(dense_);
  if (!l) throw SingularCovariance("covariance is not positive definite");
  chol_ = std::move(*l);
}

Covariance Covariance::scalar(std::size_t dim, double sigma2) {
  Matrix m(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) m(i, i) = sigma2;
  return Covariance(Kind::Scalar, std::move(m));
}

Covariance Covariance::diagonal(Vector d) {
  return Covariance(Kind::Diagonal, Matrix::diagonal(d));
}

Covariance Covariance::full(Matrix m) {
  if (m.rows() != m.cols()) throw InvalidInput("covariance must be square");
  return Covariance(Kind::Full, symmetrize(m));
}

Covariance Covariance::identity(std::size_t dim) {
  return scalar(dim, 1.0);
}

namespace {

// Solves L y = rhs then Lᵀ x = y, column by column.
Matrix cholesky_solve(const Matrix& l, Matrix rhs) {
  const std::size_t n = l.rows();
  for (std::size_t col = 0; col < rhs.cols(); ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = rhs(i, col);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * rhs(k, col);
      rhs(i, col) = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = rhs(ii, col);
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * rhs(k, col);
      rhs(ii, col) = s / l(ii, ii);
    }
  }
  return rhs;
}

}  // namespace

Matrix Covariance::solve(const Matrix& rhs) const {
  if (rhs.rows() != dim()) throw InvalidInput("covariance solve: shape mismatch");
  return cholesky_solve(chol_, rhs);
}

Vector Covariance::solve(const Vector& rhs) const {
  Matrix m = solve(Matrix::column_vector(rhs));
  Vector out(rhs.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) out[i] = m(i, 0);
  return out;
}

Matrix Covariance::inverse() const { return solve(Matrix::identity(dim())); }

LinearGaussianMechanism::LinearGaussianMechanism(Matrix query_matrix,
                                                 Covariance covariance)
    : query(std::move(query_matrix)), noise(std::move(covariance)) {
  if (!all_finite(query)) throw InvalidInput("query matrix: non-finite entries");
  if (query.cols() == 0) throw InvalidInput("domain size must be at least 1");
  if (noise.dim() != query.rows()) {
    throw InvalidInput("covariance dimension must match the query row count");
  }
}

LinearGaussianMechanism LinearGaussianMechanism::empty(std::size_t domain_size) {
  return LinearGaussianMechanism(Matrix(0, domain_size),
                                 Covariance::identity(0));
}

Matrix privacy_cost_matrix(const LinearGaussianMechanism& m) {
  if (m.is_empty()) return Matrix(m.domain_size(), m.domain_size());
  const Matrix sigma_inv_b = m.noise.solve(m.query);
  return symmetrize(kernels::matmul_tn(m.query, sigma_inv_b));
}

Vector personalized_rho(const LinearGaussianMechanism& m) {
  const Vector diag = privacy_cost_matrix(m).diag();
  Vector out(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) out[i] = diag[i] / 2.0;
  return out;
}

double zcdp_rho(const LinearGaussianMechanism& m) {
  const Vector per = personalized_rho(m);
  double best = 0.0;
  for (double v : per) best = std::max(best, v);
  return best;
}

PrivacyAccount account(const LinearGaussianMechanism& m) {
  PrivacyAccount a;
  a.per_record_rho = personalized_rho(m);
  a.rho = 0.0;
  for (double v : a.per_record_rho) a.rho = std::max(a.rho, v);
  return a;
}

double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double approx_dp_delta(double c_max, double epsilon) {
  if (c_max < 0.0 || epsilon < 0.0) {
    throw InvalidInput("approx_dp_delta: c_max and epsilon must be nonnegative");
  }
  if (c_max == 0.0) return 0.0;
  const double root = std::sqrt(c_max);
  const double a = std_normal_cdf(root / 2.0 - epsilon / root);
  const double b = std_normal_cdf(-root / 2.0 - epsilon / root);
  const double delta = a - std::exp(epsilon) * b;
  return std::clamp(delta, 0.0, 1.0);
}

LinearGaussianMechanism standardize(const LinearGaussianMechanism& m,
                                    const Tolerances& tol) {
  tol.validate();
  const Matrix cost = privacy_cost_matrix(m);
  const auto eig = sym_eig(cost);
  const double lmax = eig.values.empty() ? 0.0 : std::max(eig.values.front(), 0.0);
  const double cutoff = tol.rank_rtol * lmax;
  std::size_t rank = 0;
  while (rank < eig.values.size() && eig.values[rank] > cutoff) ++rank;
  if (rank == 0) return LinearGaussianMechanism::empty(m.domain_size());
  Matrix b(rank, m.domain_size());
  for (std::size_t r = 0; r < rank; ++r) {
    const double s = std::sqrt(eig.values[r]);
    for (std::size_t j = 0; j < m.domain_size(); ++j)
      b(r, j) = s * eig.vectors(j, r);
  }
  return LinearGaussianMechanism(std::move(b), Covariance::identity(rank));
}

bool is_answerable(const LinearGaussianMechanism& b,
                   const LinearGaussianMechanism& a, const Tolerances& tol) {
  if (a.domain_size() != b.domain_size()) {
    throw InvalidInput("is_answerable: mechanisms over different domains");
  }
  return loewner_leq(privacy_cost_matrix(b), privacy_cost_matrix(a), tol);
}

bool is_equivalent(const LinearGaussianMechanism& a,
                   const LinearGaussianMechanism& b, const Tolerances& tol) {
  if (a.domain_size() != b.domain_size()) {
    throw InvalidInput("is_equivalent: mechanisms over different domains");
  }
  return loewner_leq(privacy_cost_matrix(a), privacy_cost_matrix(b), tol) &&
         loewner_leq(privacy_cost_matrix(b), privacy_cost_matrix(a), tol);
}

Vector run(const LinearGaussianMechanism& m, const DataVector& x,
           std::uint64_t seed) {
  if (x.size() != m.domain_size()) {
    throw InvalidInput("run: data vector length mismatch");
  }
  Vector out = kernels::matvec(m.query, x.as_double());
  Rng rng(seed);
  const Vector z = rng.gaussian_vector(m.rows());
  const Matrix& l = m.noise.factor();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k <= i; ++k) s += l(i, k) * z[k];
    out[i] += s;
  }
  return out;
}

LinearGaussianMechanism stack(const LinearGaussianMechanism& a,
                              const LinearGaussianMechanism& b) {
  if (a.domain_size() != b.domain_size()) {
    throw InvalidInput("stack: mechanisms over different domains");
  }
  return LinearGaussianMechanism(
      vstack(a.query, b.query),
      Covariance::full(block_diag(a.noise.dense(), b.noise.dense())));
}

}  // namespace cmech
