#pragma once

#include <cstdint>
#include <vector>

#include "cmech/errors.hpp"
#include "cmech/matrix.hpp"
#include "cmech/mechanism.hpp"
#include "cmech/psdcore.hpp"

namespace cmech {

// Configuration of the iterative covariance solver used when three or more
// mechanisms share a common part (the two-mechanism case has a closed form).
struct SolverConfig {
  int max_iters = 4000;          // outer trace-descent steps
  int max_projection_iters = 4000;  // Dykstra cycles per projection
  double trace_tol = 1e-8;       // relative trace decrease at convergence
  double violation_tol = 1e-6;   // allowed relative constraint violation
  double projection_tol = 1e-11; // Dykstra fixed-point tolerance (relative)
  double initial_step = 0.5;     // first step length, relative to the scale

  void validate() const;
};

// Reconstruction matrices: target output = a_common * o_common +
// a_residual * o_residual (+ top-up noise).
struct ReconMatrices {
  Matrix a_common;
  Matrix a_residual;
};

struct Decomposition {
  LinearGaussianMechanism common;
  std::vector<LinearGaussianMechanism> residuals;  // one per target
  std::vector<ReconMatrices> recon;                // one per target
};

// Maximally common mechanism of two mechanisms (closed form): standardize
// both, intersect row spaces, and combine the pulled-back covariances with
// the eigenvalue-rectified midpoint formula.
LinearGaussianMechanism common_mechanism(const LinearGaussianMechanism& m1,
                                         const LinearGaussianMechanism& m2,
                                         const Tolerances& tol = {});

// Maximally common mechanism of k >= 1 mechanisms. k == 1 returns the
// standardized input; k >= 2 computes the common row-space basis and then
// minimizes trace(Σ) subject to Σ ⪰ A_i A_iᵀ for every i with a projected
// descent scheme (Dykstra projections onto each constraint cone interleaved
// with trace-descent steps). Throws SolverFailed on non-convergence.
LinearGaussianMechanism common_mechanism_multi(
    const std::vector<LinearGaussianMechanism>& mechs,
    const SolverConfig& cfg = {}, const Tolerances& tol = {});

// Residual of `target` given `common`: the standardized mechanism of
// cost(target) - cost(common). Throws NotCommon when `common` is not
// answerable from `target`. Returns the empty mechanism when nothing remains.
LinearGaussianMechanism residual_mechanism(const LinearGaussianMechanism& target,
                                           const LinearGaussianMechanism& common,
                                           const Tolerances& tol = {});

// A* and A' of the recreation step for the (target, common, residual) triple.
ReconMatrices recon_matrices(const LinearGaussianMechanism& target,
                             const LinearGaussianMechanism& common,
                             const LinearGaussianMechanism& residual,
                             const Tolerances& tol = {});

// Covariance of the top-up noise: Σ_target - A* Σ_c A*ᵀ - A' Σ_r A'ᵀ.
Matrix topup_covariance(const LinearGaussianMechanism& target,
                        const LinearGaussianMechanism& common,
                        const LinearGaussianMechanism& residual,
                        const ReconMatrices& rm);

// Combines a common-mechanism output and a residual output into a draw from
// the target mechanism. Top-up noise makes the output exactly distributed as
// the target; disabling it gives the equivalent lower-noise estimate.
Vector recreate(const Vector& o_common, const Vector& o_residual,
                const LinearGaussianMechanism& target,
                const LinearGaussianMechanism& common,
                const LinearGaussianMechanism& residual, std::uint64_t seed,
                bool with_topup = true, const Tolerances& tol = {});

// Full decomposition of a set of mechanisms into common + per-target
// residuals + reconstruction matrices.
Decomposition decompose(const std::vector<LinearGaussianMechanism>& mechs,
                        const SolverConfig& cfg = {},
                        const Tolerances& tol = {});

// Non-convergence report; carries the best iterate and its violation.
struct SolverFailed : Error {
  SolverFailed(const std::string& what, Matrix best, double violation)
      : Error(what), best_iterate(std::move(best)), violation(violation) {}
  Matrix best_iterate;
  double violation;
};

}  // namespace cmech
