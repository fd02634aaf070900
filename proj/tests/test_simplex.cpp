#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cmech/errors.hpp"
#include "cmech/simplex.hpp"

using namespace cmech;

TEST_CASE("basic bounded minimum") {
  // min -x - y  s.t. x + y <= 4, x <= 3, y <= 2 → x=3, y=1 (objective -4)
  const Matrix a = Matrix::from_rows({{1, 1}, {1, 0}, {0, 1}});
  const LpResult r = solve_lp(a, {4, 3, 2}, {-1, -1});
  REQUIRE(r.status == LpResult::Status::Optimal);
  CHECK(r.objective == doctest::Approx(-4.0).epsilon(1e-9));
  CHECK(r.x[0] + r.x[1] == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("negative right-hand sides need phase one") {
  // min x + y  s.t. -x - y <= -3 (i.e. x + y >= 3) → objective 3
  const Matrix a = Matrix::from_rows({{-1, -1}});
  const LpResult r = solve_lp(a, {-3}, {1, 1});
  REQUIRE(r.status == LpResult::Status::Optimal);
  CHECK(r.objective == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("infeasible systems are reported as such") {
  // x <= 1 and x >= 3 simultaneously
  const Matrix a = Matrix::from_rows({{1}, {-1}});
  const LpResult r = solve_lp(a, {1, -3}, {1});
  CHECK(r.status == LpResult::Status::Infeasible);
}

TEST_CASE("unbounded directions are detected") {
  // min -x with only x >= 1
  const Matrix a = Matrix::from_rows({{-1}});
  const LpResult r = solve_lp(a, {-1}, {-1});
  CHECK(r.status == LpResult::Status::Unbounded);
}

TEST_CASE("degenerate constraints do not cycle") {
  // multiple redundant constraints through the same vertex
  const Matrix a = Matrix::from_rows({{1, 1}, {2, 2}, {1, 1}, {1, 0}});
  const LpResult r = solve_lp(a, {2, 4, 2, 1}, {-1, -2});
  REQUIRE(r.status == LpResult::Status::Optimal);
  CHECK(r.objective == doctest::Approx(-4.0).epsilon(1e-9));
}

TEST_CASE("dimension mismatches are rejected") {
  CHECK_THROWS_AS(solve_lp(Matrix::identity(2), {1.0}, {1.0, 1.0}), InvalidInput);
}
