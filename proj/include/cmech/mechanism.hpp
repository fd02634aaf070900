#pragma once

#include <cstdint>
#include <vector>

#include "cmech/matrix.hpp"
#include "cmech/psdcore.hpp"

namespace cmech {

// Histogram of record counts over the categorical domain.
struct DataVector {
  std::vector<std::int64_t> counts;

  DataVector() = default;
  explicit DataVector(std::vector<std::int64_t> c);

  std::size_t size() const { return counts.size(); }
  Vector as_double() const;
  std::int64_t total() const;
};

// SPD noise covariance. The Cholesky factor is computed once at construction
// (this both validates positive definiteness and serves sampling and
// inverse products). The representation kind is kept for serialization.
class Covariance {
 public:
  enum class Kind { Scalar, Diagonal, Full };

  static Covariance scalar(std::size_t dim, double sigma2);
  static Covariance diagonal(Vector d);
  static Covariance full(Matrix m);
  static Covariance identity(std::size_t dim);

  std::size_t dim() const { return dense_.rows(); }
  Kind kind() const { return kind_; }
  const Matrix& dense() const { return dense_; }
  const Matrix& factor() const { return chol_; }  // lower L, LLᵀ = Σ

  // Σ⁻¹ rhs via the Cholesky factor.
  Matrix solve(const Matrix& rhs) const;
  Vector solve(const Vector& rhs) const;
  Matrix inverse() const;

 private:
  Covariance(Kind kind, Matrix dense);

  Kind kind_;
  Matrix dense_;
  Matrix chol_;
};

// M(x) = Bx + N(0, Σ). A 0-row query matrix is the empty mechanism, a
// first-class value used for trivial common/residual mechanisms.
struct LinearGaussianMechanism {
  Matrix query;      // m x d
  Covariance noise;  // m x m

  LinearGaussianMechanism(Matrix query_matrix, Covariance covariance);

  static LinearGaussianMechanism empty(std::size_t domain_size);

  std::size_t rows() const { return query.rows(); }
  std::size_t domain_size() const { return query.cols(); }
  bool is_empty() const { return query.rows() == 0; }
};

// Privacy accounting summary (zCDP plus the (epsilon, delta) curve hooks).
struct PrivacyAccount {
  double rho = 0.0;
  Vector per_record_rho;
};

// BᵀΣ⁻¹B, symmetrized. This matrix is the currency of answerability,
// equivalence and accounting.
Matrix privacy_cost_matrix(const LinearGaussianMechanism& m);

double zcdp_rho(const LinearGaussianMechanism& m);
Vector personalized_rho(const LinearGaussianMechanism& m);
PrivacyAccount account(const LinearGaussianMechanism& m);

// delta(epsilon) for a mechanism whose largest privacy-cost diagonal is
// c_max. Returns 0 when c_max == 0.
double approx_dp_delta(double c_max, double epsilon);

// Standard normal CDF (erf-based, ~1e-15 accurate).
double std_normal_cdf(double x);

// Rewrites m into an equivalent mechanism with identity covariance and
// linearly independent rows (rows are sqrt(lambda_i) v_iᵀ of the privacy
// cost matrix). A zero cost matrix yields the empty mechanism.
LinearGaussianMechanism standardize(const LinearGaussianMechanism& m,
                                    const Tolerances& tol = {});

// b is answerable from a iff cost(b) ⪯ cost(a) in the Loewner order.
bool is_answerable(const LinearGaussianMechanism& b,
                   const LinearGaussianMechanism& a,
                   const Tolerances& tol = {});

bool is_equivalent(const LinearGaussianMechanism& a,
                   const LinearGaussianMechanism& b,
                   const Tolerances& tol = {});

// One noisy release: Bx + L z with z standard normal from the seeded
// generator. Deterministic for a fixed seed.
Vector run(const LinearGaussianMechanism& m, const DataVector& x,
           std::uint64_t seed);

// (m_a, m_b) as a single mechanism: stacked queries, block-diagonal noise.
LinearGaussianMechanism stack(const LinearGaussianMechanism& a,
                              const LinearGaussianMechanism& b);

}  // namespace cmech
