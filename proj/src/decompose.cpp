#include "cmech/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "cmech/rng.hpp"

namespace cmech {

void SolverConfig::validate() const {
  const bool ok = max_iters >= 1 && max_projection_iters >= 1 &&
                  trace_tol > 0.0 && violation_tol > 0.0 &&
                  projection_tol > 0.0 && initial_step > 0.0;
  if (!ok) throw InvalidInput("solver config: tolerances and iteration counts must be positive");
}

namespace {

using kernels::matmul;
using kernels::matmul_nt;
using kernels::matmul_tn;

Matrix gram(const Matrix& a) { return symmetrize(matmul_nt(a, a)); }

double max_eigenvalue(const Matrix& s) {
  const auto eig = kernels::jacobi_eigh(s);
  return eig.values.empty() ? 0.0 : eig.values.front();
}

double min_eigenvalue(const Matrix& s) {
  const auto eig = kernels::jacobi_eigh(s);
  return eig.values.empty() ? 0.0 : eig.values.back();
}

// Frobenius projection onto the cone {S : S ⪰ G}.
Matrix project_dominating_cone(const Matrix& s, const Matrix& g) {
  const auto eig = kernels::jacobi_eigh(symmetrize(s - g));
  const std::size_t n = eig.values.size();
  Matrix scaled(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const double lambda = std::max(eig.values[j], 0.0);
    for (std::size_t i = 0; i < n; ++i)
      scaled(i, j) = eig.vectors(i, j) * lambda;
  }
  return g + symmetrize(matmul_nt(scaled, eig.vectors));
}

// Dykstra's alternating projections onto the intersection of the cones
// {S ⪰ G_i}. Returns the Frobenius projection of s0 onto the intersection.
Matrix dykstra_project(const Matrix& s0, const std::vector<Matrix>& gs,
                       const SolverConfig& cfg) {
  Matrix x = symmetrize(s0);
  std::vector<Matrix> increments(gs.size(), Matrix(x.rows(), x.cols()));
  const double scale = std::max(1.0, frobenius_norm(x));
  for (int cycle = 0; cycle < cfg.max_projection_iters; ++cycle) {
    double change = 0.0;
    for (std::size_t i = 0; i < gs.size(); ++i) {
      const Matrix shifted = x + increments[i];
      Matrix y = project_dominating_cone(shifted, gs[i]);
      increments[i] = shifted - y;
      change += frobenius_norm(y - x);
      x = std::move(y);
    }
    if (change <= cfg.projection_tol * scale) break;
  }
  return x;
}

double worst_violation(const Matrix& sigma, const std::vector<Matrix>& gs) {
  double worst = 0.0;
  for (const Matrix& g : gs) {
    worst = std::max(worst, -min_eigenvalue(symmetrize(sigma - g)));
  }
  return worst;
}

// min trace(Σ) s.t. Σ ⪰ G_i for all i: projected trace descent with Dykstra
// projections back onto the feasible intersection. Starts from the
// Loewner-dominating multiple of the identity.
Matrix solve_min_trace(const std::vector<Matrix>& gs, const SolverConfig& cfg) {
  const std::size_t m = gs.front().rows();
  double scale = 0.0;
  for (const Matrix& g : gs) scale = std::max(scale, max_eigenvalue(g));
  if (scale <= 0.0) return Matrix(m, m);

  Matrix sigma = scale * Matrix::identity(m);
  double best_trace = sigma.trace();
  double step = cfg.initial_step * scale;
  const double step_floor = 1e-13 * scale;
  int small_improvements = 0;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    Matrix candidate = dykstra_project(sigma - step * Matrix::identity(m), gs, cfg);
    const double candidate_trace = candidate.trace();
    if (candidate_trace < best_trace - 1e-15 * std::max(1.0, best_trace)) {
      const double improvement = best_trace - candidate_trace;
      sigma = std::move(candidate);
      best_trace = candidate_trace;
      if (improvement < cfg.trace_tol * std::max(1.0, best_trace)) {
        if (++small_improvements >= 3) break;
      } else {
        small_improvements = 0;
      }
      step = std::min(step * 1.1, scale);
    } else {
      step *= 0.5;
      if (step < step_floor) break;
    }
  }

  // Lift to exact feasibility; the shift is far below the trace tolerance.
  const double lift = worst_violation(sigma, gs);
  if (lift > 0.0) sigma = sigma + lift * Matrix::identity(m);

  const double residual_violation = worst_violation(sigma, gs);
  if (residual_violation > cfg.violation_tol * std::max(1.0, scale)) {
    throw SolverFailed("common-covariance solver did not reach feasibility",
                       sigma, residual_violation);
  }
  return sigma;
}

LinearGaussianMechanism assemble_common(const Matrix& bstar, Matrix sigma,
                                        std::size_t domain) {
  if (bstar.rows() == 0) return LinearGaussianMechanism::empty(domain);
  return LinearGaussianMechanism(bstar, Covariance::full(std::move(sigma)));
}

}  // namespace

LinearGaussianMechanism common_mechanism(const LinearGaussianMechanism& m1,
                                         const LinearGaussianMechanism& m2,
                                         const Tolerances& tol) {
  if (m1.domain_size() != m2.domain_size()) {
    throw InvalidInput("common_mechanism: mechanisms over different domains");
  }
  const std::size_t d = m1.domain_size();
  const LinearGaussianMechanism s1 = standardize(m1, tol);
  const LinearGaussianMechanism s2 = standardize(m2, tol);
  if (s1.is_empty() || s2.is_empty()) return LinearGaussianMechanism::empty(d);

  const Matrix bstar = rowspace_intersection(s1.query, s2.query, tol);
  if (bstar.rows() == 0) return LinearGaussianMechanism::empty(d);

  const Matrix a1 = matmul(bstar, pinv(s1.query, tol));
  const Matrix a2 = matmul(bstar, pinv(s2.query, tol));
  const Matrix g1 = gram(a1);
  const Matrix g2 = gram(a2);
  const Matrix sigma = 0.5 * (g1 + g2) + 0.5 * psd_abs(g2 - g1);
  return assemble_common(bstar, sigma, d);
}

LinearGaussianMechanism common_mechanism_multi(
    const std::vector<LinearGaussianMechanism>& mechs, const SolverConfig& cfg,
    const Tolerances& tol) {
  cfg.validate();
  if (mechs.empty()) throw InvalidInput("common_mechanism_multi: no mechanisms");
  const std::size_t d = mechs.front().domain_size();
  for (const auto& m : mechs) {
    if (m.domain_size() != d) {
      throw InvalidInput("common_mechanism_multi: mechanisms over different domains");
    }
  }
  if (mechs.size() == 1) return standardize(mechs.front(), tol);

  std::vector<LinearGaussianMechanism> standardized;
  standardized.reserve(mechs.size());
  for (const auto& m : mechs) {
    standardized.push_back(standardize(m, tol));
    if (standardized.back().is_empty()) return LinearGaussianMechanism::empty(d);
  }

  Matrix bstar = orthonormal_rowspace_basis(standardized.front().query, tol);
  for (std::size_t i = 1; i < standardized.size() && bstar.rows() > 0; ++i) {
    bstar = rowspace_intersection(bstar, standardized[i].query, tol);
  }
  if (bstar.rows() == 0) return LinearGaussianMechanism::empty(d);

  std::vector<Matrix> gs;
  gs.reserve(standardized.size());
  for (const auto& s : standardized) {
    gs.push_back(gram(matmul(bstar, pinv(s.query, tol))));
  }
  Matrix sigma = solve_min_trace(gs, cfg);
  return assemble_common(bstar, std::move(sigma), d);
}

LinearGaussianMechanism residual_mechanism(const LinearGaussianMechanism& target,
                                           const LinearGaussianMechanism& common,
                                           const Tolerances& tol) {
  tol.validate();
  if (target.domain_size() != common.domain_size()) {
    throw InvalidInput("residual_mechanism: mechanisms over different domains");
  }
  if (!is_answerable(common, target, tol)) {
    throw NotCommon("residual_mechanism: common mechanism is not answerable from the target");
  }
  const Matrix cost_target = privacy_cost_matrix(target);
  const Matrix x = symmetrize(cost_target - privacy_cost_matrix(common));
  const auto eig = kernels::jacobi_eigh(x);

  // Rank decisions are taken relative to the target's cost scale so that a
  // vanishing difference collapses to the empty mechanism.
  const double scale = std::max(max_eigenvalue(cost_target), 0.0);
  const double cutoff = tol.rank_rtol * scale;
  std::size_t rank = 0;
  while (rank < eig.values.size() && eig.values[rank] > cutoff) ++rank;
  if (rank == 0) return LinearGaussianMechanism::empty(target.domain_size());

  Matrix b(rank, target.domain_size());
  for (std::size_t r = 0; r < rank; ++r) {
    const double s = std::sqrt(eig.values[r]);
    for (std::size_t j = 0; j < target.domain_size(); ++j)
      b(r, j) = s * eig.vectors(j, r);
  }
  return LinearGaussianMechanism(std::move(b), Covariance::identity(rank));
}

ReconMatrices recon_matrices(const LinearGaussianMechanism& target,
                             const LinearGaussianMechanism& common,
                             const LinearGaussianMechanism& residual,
                             const Tolerances& tol) {
  const std::size_t d = target.domain_size();
  if (common.domain_size() != d || residual.domain_size() != d) {
    throw InvalidInput("recon_matrices: mechanisms over different domains");
  }
  const Matrix sqrt_sigma = psd_sqrt(target.noise.dense(), tol);
  const Matrix inv_sqrt_sigma = psd_inv_sqrt(target.noise.dense(), tol);
  const Matrix w = matmul_tn(target.query, inv_sqrt_sigma);  // Bᵀ Σ^{-1/2}
  const Matrix w_pinv = pinv(w, tol);
  const Matrix head = matmul(sqrt_sigma, w_pinv);

  ReconMatrices rm;
  rm.a_common = matmul(head, transpose(common.noise.solve(common.query)));
  rm.a_residual = matmul(head, transpose(residual.noise.solve(residual.query)));
  return rm;
}

Matrix topup_covariance(const LinearGaussianMechanism& target,
                        const LinearGaussianMechanism& common,
                        const LinearGaussianMechanism& residual,
                        const ReconMatrices& rm) {
  Matrix t = target.noise.dense();
  if (rm.a_common.cols() > 0) {
    t = t - matmul_nt(matmul(rm.a_common, common.noise.dense()), rm.a_common);
  }
  if (rm.a_residual.cols() > 0) {
    t = t - matmul_nt(matmul(rm.a_residual, residual.noise.dense()), rm.a_residual);
  }
  return symmetrize(t);
}

Vector recreate(const Vector& o_common, const Vector& o_residual,
                const LinearGaussianMechanism& target,
                const LinearGaussianMechanism& common,
                const LinearGaussianMechanism& residual, std::uint64_t seed,
                bool with_topup, const Tolerances& tol) {
  if (o_common.size() != common.rows() || o_residual.size() != residual.rows()) {
    throw InvalidInput("recreate: output vector length mismatch");
  }
  const ReconMatrices rm = recon_matrices(target, common, residual, tol);
  Vector out = kernels::matvec(rm.a_common, o_common);
  const Vector from_residual = kernels::matvec(rm.a_residual, o_residual);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += from_residual[i];

  if (with_topup) {
    const Matrix t = topup_covariance(target, common, residual, rm);
    const auto eig = kernels::jacobi_eigh(t);
    const double scale = std::max(1.0, frobenius_norm(target.noise.dense()));
    for (double v : eig.values) {
      if (v < -1e-6 * scale) {
        throw InternalInconsistency("recreate: top-up covariance is not PSD");
      }
    }
    Rng rng(seed);
    const Vector z = rng.gaussian_vector(eig.values.size());
    for (std::size_t j = 0; j < eig.values.size(); ++j) {
      const double s = std::sqrt(std::max(eig.values[j], 0.0));
      if (s == 0.0) continue;
      const double amount = s * z[j];
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += amount * eig.vectors(i, j);
    }
  }
  return out;
}

Decomposition decompose(const std::vector<LinearGaussianMechanism>& mechs,
                        const SolverConfig& cfg, const Tolerances& tol) {
  if (mechs.size() < 2) throw InvalidInput("decompose: need at least two mechanisms");
  Decomposition dec{
      mechs.size() == 2 ? common_mechanism(mechs[0], mechs[1], tol)
                        : common_mechanism_multi(mechs, cfg, tol),
      {},
      {}};
  for (const auto& m : mechs) {
    dec.residuals.push_back(residual_mechanism(m, dec.common, tol));
    dec.recon.push_back(recon_matrices(m, dec.common, dec.residuals.back(), tol));
  }
  return dec;
}

}  // namespace cmech
