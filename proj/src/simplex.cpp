#include "cmech/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "cmech/errors.hpp"

namespace cmech {

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

struct Tableau {
  std::vector<Vector> rows;   // m x total_cols, B⁻¹[A | I_s | I_a]
  Vector rhs;                 // m, kept nonnegative
  std::vector<std::size_t> basis;
  Vector reduced;             // reduced cost per column
  double pivot_eps;

  void pivot(std::size_t row, std::size_t col) {
    const double p = rows[row][col];
    for (double& v : rows[row]) v /= p;
    rhs[row] /= p;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i == row) continue;
      const double f = rows[i][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < rows[i].size(); ++j)
        rows[i][j] -= f * rows[row][j];
      rows[i][col] = 0.0;
      rhs[i] -= f * rhs[row];
      if (rhs[i] < 0.0 && rhs[i] > -pivot_eps) rhs[i] = 0.0;
    }
    const double rf = reduced[col];
    if (rf != 0.0) {
      for (std::size_t j = 0; j < reduced.size(); ++j)
        reduced[j] -= rf * rows[row][j];
      reduced[col] = 0.0;
    }
    basis[row] = col;
  }

  void recompute_reduced(const Vector& cost) {
    reduced = cost;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double cb = cost[basis[i]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j < reduced.size(); ++j)
        reduced[j] -= cb * rows[i][j];
    }
  }

  // Bland's rule: smallest-index entering column with a negative reduced
  // cost; leaving row by minimum ratio, ties broken by the smallest basis
  // index. Returns Optimal/Unbounded/IterationLimit.
  LpResult::Status run(int& budget, std::size_t allowed_cols) {
    while (budget-- > 0) {
      std::size_t enter = kNone;
      for (std::size_t j = 0; j < allowed_cols; ++j) {
        if (reduced[j] < -pivot_eps) {
          enter = j;
          break;
        }
      }
      if (enter == kNone) return LpResult::Status::Optimal;
      std::size_t leave = kNone;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double a = rows[i][enter];
        if (a > pivot_eps) {
          const double ratio = rhs[i] / a;
          if (ratio < best_ratio - 1e-12 ||
              (ratio <= best_ratio + 1e-12 &&
               (leave == kNone || basis[i] < basis[leave]))) {
            best_ratio = ratio;
            leave = i;
          }
        }
      }
      if (leave == kNone) return LpResult::Status::Unbounded;
      pivot(leave, enter);
    }
    return LpResult::Status::IterationLimit;
  }
};

}  // namespace

LpResult solve_lp(const Matrix& a, const Vector& b, const Vector& c,
                  int max_pivots) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (b.size() != m || c.size() != n) {
    throw InvalidInput("solve_lp: inconsistent dimensions");
  }
  if (!all_finite(a) || !all_finite(b) || !all_finite(c)) {
    throw InvalidInput("solve_lp: non-finite entries");
  }

  double scale = 1.0;
  scale = std::max(scale, max_abs(a));
  for (double v : b) scale = std::max(scale, std::abs(v));

  Tableau t;
  t.pivot_eps = 1e-9 * scale;

  // Columns: n structural, m slacks, then artificials for negated rows.
  std::vector<std::size_t> artificial_rows;
  for (std::size_t i = 0; i < m; ++i)
    if (b[i] < 0.0) artificial_rows.push_back(i);
  const std::size_t art0 = n + m;
  const std::size_t total = art0 + artificial_rows.size();

  t.rows.assign(m, Vector(total, 0.0));
  t.rhs.resize(m);
  t.basis.resize(m);
  std::size_t art_index = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double flip = b[i] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) t.rows[i][j] = flip * a(i, j);
    t.rows[i][n + i] = flip;
    t.rhs[i] = flip * b[i];
    if (b[i] < 0.0) {
      t.rows[i][art0 + art_index] = 1.0;
      t.basis[i] = art0 + art_index;
      ++art_index;
    } else {
      t.basis[i] = n + i;
    }
  }

  int budget = max_pivots;

  if (!artificial_rows.empty()) {
    Vector phase1_cost(total, 0.0);
    for (std::size_t j = art0; j < total; ++j) phase1_cost[j] = 1.0;
    t.recompute_reduced(phase1_cost);
    const auto status = t.run(budget, total);
    if (status == LpResult::Status::IterationLimit) {
      return {LpResult::Status::IterationLimit, {}, 0.0};
    }
    double infeasibility = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      if (t.basis[i] >= art0) infeasibility += t.rhs[i];
    if (infeasibility > 1e-7 * std::max(1.0, scale)) {
      return {LpResult::Status::Infeasible, {}, 0.0};
    }
    // Pivot leftover zero-level artificials out where possible.
    for (std::size_t i = 0; i < m; ++i) {
      if (t.basis[i] < art0) continue;
      for (std::size_t j = 0; j < art0; ++j) {
        if (std::abs(t.rows[i][j]) > t.pivot_eps) {
          t.pivot(i, j);
          break;
        }
      }
    }
  }

  Vector phase2_cost(total, 0.0);
  for (std::size_t j = 0; j < n; ++j) phase2_cost[j] = c[j];
  t.recompute_reduced(phase2_cost);
  // Artificial columns are barred from re-entering.
  const auto status = t.run(budget, art0);
  if (status != LpResult::Status::Optimal) return {status, {}, 0.0};

  LpResult out;
  out.status = LpResult::Status::Optimal;
  out.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (t.basis[i] < n) out.x[t.basis[i]] = t.rhs[i];
  out.objective = dot(out.x, c);
  return out;
}

}  // namespace cmech
