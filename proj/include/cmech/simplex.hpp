#pragma once

#include "cmech/matrix.hpp"

namespace cmech {

// Dense two-phase simplex with Bland's rule (anti-cycling), for
//   min cᵀx  s.t.  A x <= b,  x >= 0.
// Right-hand sides may be negative; phase one drives artificial variables
// out of the basis. Deterministic: pivots are chosen by smallest index.
struct LpResult {
  enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };
  Status status = Status::Optimal;
  Vector x;
  double objective = 0.0;
};

LpResult solve_lp(const Matrix& a, const Vector& b, const Vector& c,
                  int max_pivots = 50000);

}  // namespace cmech
