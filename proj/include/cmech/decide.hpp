#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "cmech/matrix.hpp"
#include "cmech/mechanism.hpp"
#include "cmech/simplex.hpp"

namespace cmech {

// Decision policy for nested analyses: at least fraction `x` of the primary
// queries must reach signal-to-noise ratio `y`.
struct SnrPolicy {
  double x = 0.5;
  double y = 5.0;

  void validate() const;
};

// 3-sigma confidence bounds for the primary queries plus SNR bounds under
// each candidate mechanism's noise level.
struct SnrReport {
  Vector lower;  // L_i
  Vector upper;  // U_i
  Vector snr_lower_primary;
  Vector snr_upper_primary;
  Vector snr_lower_secondary;
  Vector snr_upper_secondary;
};

enum class Choice { Primary, Secondary, Stop };

// A with b1 = A b2 when the primary analysis is nested in the secondary;
// nullopt otherwise (NotNested is a value, not a failure).
std::optional<Matrix> nesting_map(const Matrix& b1, const Matrix& b2,
                                  const Tolerances& tol = {});

// The four nested-analysis bound vectors from the common mechanism's output.
// `a_nest` must come from nesting_map(B1, B2). Throws NotAnswerable when the
// primary queries are not answerable from the common mechanism.
SnrReport snr_bounds(const Vector& o_common,
                     const LinearGaussianMechanism& common,
                     const LinearGaussianMechanism& primary,
                     const LinearGaussianMechanism& secondary,
                     const Matrix& a_nest, const Tolerances& tol = {});

// Secondary when enough secondary SNR lower bounds clear the policy; Stop
// when even the primary upper bounds cannot; Primary otherwise. Boundary
// comparisons are inclusive.
Choice choose_nested(const SnrReport& report, const SnrPolicy& policy);

// One candidate dataset consistent with the common mechanism's output:
// solves min cᵀ B1 x  s.t.  ||Σ*^{-1/2}(B* x - o*)||_1 <= budget, x >= 0 as
// a linear program. Infeasible is a value (the output is inconsistent with
// every nonnegative dataset).
struct CandidateResult {
  LpResult::Status status = LpResult::Status::Optimal;
  Vector x;
};

CandidateResult candidate_dataset(const Vector& o_common,
                                  const LinearGaussianMechanism& common,
                                  const Matrix& b1, const Vector& c,
                                  const Tolerances& tol = {},
                                  double l1_budget = 2.0);

// Per-query spread statistics of B1 x̂ over `num_probes` random probe
// directions (uniform on the unit sphere, seeded).
struct SpreadStats {
  LpResult::Status status = LpResult::Status::Optimal;
  Vector min;
  Vector max;
  Vector variance;
  std::size_t probes = 0;
};

SpreadStats snr_spread(const Vector& o_common,
                       const LinearGaussianMechanism& common, const Matrix& b1,
                       std::size_t num_probes, std::uint64_t seed,
                       const Tolerances& tol = {}, double l1_budget = 2.0);

// Threshold baseline: bucketization index in {1,2,3,4} from a noisy total.
struct DhcConfig {
  double gamma = 0.1;
  std::array<double, 3> thetas{};

  void validate() const;
};

int dhc_select(double noisy_total, const DhcConfig& cfg);

}  // namespace cmech
