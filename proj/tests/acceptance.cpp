// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failures. Each criterion pins its tolerances in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cmech/decide.hpp"
#include "cmech/decompose.hpp"
#include "cmech/experiment.hpp"
#include "cmech/psdcore.hpp"
#include "cmech/rng.hpp"
#include "cmech/workloads.hpp"

using namespace cmech;
namespace k = cmech::kernels;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

LinearGaussianMechanism att1_mech() {
  return LinearGaussianMechanism(
      Matrix::from_rows({{1, 1, 1, 0, 0, 0, 0, 0, 0},
                         {0, 0, 0, 1, 1, 1, 0, 0, 0},
                         {0, 0, 0, 0, 0, 0, 1, 1, 1}}),
      Covariance::identity(3));
}

LinearGaussianMechanism att2_mech() {
  return LinearGaussianMechanism(
      Matrix::from_rows({{1, 0, 0, 1, 0, 0, 1, 0, 0},
                         {0, 1, 0, 0, 1, 0, 0, 1, 0},
                         {0, 0, 1, 0, 0, 1, 0, 0, 1}}),
      Covariance::identity(3));
}

LinearGaussianMechanism random_mechanism(std::mt19937_64& gen, std::size_t d,
                                         std::size_t max_rows) {
  std::normal_distribution<double> nd;
  const std::size_t m = 1 + gen() % max_rows;
  Matrix b(m, d);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) b(i, j) = nd(gen);
  Matrix noise(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) noise(i, j) = nd(gen);
  Matrix cov = k::matmul_nt(noise, noise);
  for (std::size_t i = 0; i < m; ++i) cov(i, i) += 0.3;
  return LinearGaussianMechanism(std::move(b), Covariance::full(std::move(cov)));
}

std::pair<LinearGaussianMechanism, LinearGaussianMechanism> random_pair(
    std::mt19937_64& gen, std::size_t d) {
  auto m1 = random_mechanism(gen, d, d);
  auto m2 = random_mechanism(gen, d, d);
  Matrix b2 = m2.query;
  for (std::size_t j = 0; j < d; ++j) b2(0, j) = m1.query(0, j);
  return {std::move(m1), LinearGaussianMechanism(std::move(b2), m2.noise)};
}

Matrix one_way_marginals(const Domain& domain) {
  std::vector<std::vector<std::size_t>> subsets;
  for (std::size_t a = 0; a < domain.attributes(); ++a) subsets.push_back({a});
  return marginal_matrix(domain, subsets);
}

Matrix two_way_marginals(const Domain& domain) {
  std::vector<std::vector<std::size_t>> subsets;
  for (std::size_t a = 0; a < domain.attributes(); ++a)
    for (std::size_t b = a + 1; b < domain.attributes(); ++b)
      subsets.push_back({a, b});
  return marginal_matrix(domain, subsets);
}

// 1. Worked-example fidelity: the one-way-marginal pair over the 3x3 domain.
Outcome criterion_marginal_example() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const auto m1 = att1_mech();
  const auto m2 = att2_mech();
  const auto common = common_mechanism(m1, m2);
  const Matrix expected_common(9, 9, 1.0 / 3.0);
  const double common_err =
      frobenius_norm(privacy_cost_matrix(common) - expected_common);
  out.require(common_err <= 1e-9,
              "common cost vs (1/3)*ones: " + fmt(common_err));

  for (const auto* target : {&m1, &m2}) {
    const auto residual = residual_mechanism(*target, common);
    const Matrix expected_residual =
        privacy_cost_matrix(*target) - expected_common;
    const double res_err =
        frobenius_norm(privacy_cost_matrix(residual) - expected_residual);
    out.require(res_err <= 1e-9, "residual cost error: " + fmt(res_err));
  }

  const auto residual1 = residual_mechanism(m1, common);
  const auto rm = recon_matrices(m1, common, residual1);
  const Matrix mean = k::matmul(rm.a_common, common.query) +
                      k::matmul(rm.a_residual, residual1.query);
  const double mean_err = frobenius_norm(mean - m1.query);
  out.require(mean_err <= 1e-8, "reconstruction identity: " + fmt(mean_err));

  const double elapsed = seconds_since(t0);
  out.require(elapsed < 1.0, "runtime " + fmt(elapsed) + "s exceeds 1s");
  out.note("runtime " + fmt(elapsed) + "s");
  return out;
}

// 2. The two-mechanism answerability example over a 2-cell domain.
Outcome criterion_answer_example() {
  Outcome out;
  const LinearGaussianMechanism ma(Matrix::from_rows({{1, 1}, {1, 0}, {0, 1}}),
                                   Covariance::scalar(3, 2.0));
  const LinearGaussianMechanism mb(
      Matrix::identity(2),
      Covariance::full(Matrix::from_rows({{4.0 / 3.0, -2.0 / 3.0},
                                          {-2.0 / 3.0, 4.0 / 3.0}})));
  const Matrix expected = Matrix::from_rows({{1.0, 0.5}, {0.5, 1.0}});
  const double err_a = frobenius_norm(privacy_cost_matrix(ma) - expected);
  const double err_b = frobenius_norm(privacy_cost_matrix(mb) - expected);
  out.require(err_a <= 1e-9, "cost(M_a) error " + fmt(err_a));
  out.require(err_b <= 1e-9, "cost(M_b) error " + fmt(err_b));
  out.require(is_answerable(ma, mb), "M_a not answerable from M_b");
  out.require(is_answerable(mb, ma), "M_b not answerable from M_a");
  const double rho = zcdp_rho(ma);
  out.require(std::abs(rho - 0.5) <= 1e-9, "rho " + fmt(rho) + " != 0.5");
  return out;
}

// 3. Sum query vs sum-plus-identity: the common part is the sum at variance 1.5.
Outcome criterion_common_example() {
  Outcome out;
  const LinearGaussianMechanism m1(Matrix(1, 3, 1.0), Covariance::scalar(1, 1.0));
  const LinearGaussianMechanism m2(
      Matrix::from_rows({{1, 1, 1}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}),
      Covariance::scalar(4, 2.0));
  const auto common = common_mechanism(m1, m2);
  const Matrix expected(3, 3, 1.0 / 1.5);
  const double err = frobenius_norm(privacy_cost_matrix(common) - expected);
  out.require(err <= 1e-9, "common cost error " + fmt(err));
  const LinearGaussianMechanism m4(Matrix(1, 3, 1.0), Covariance::scalar(1, 1.5));
  out.require(is_equivalent(common, m4), "common not equivalent to the sum at 1.5");
  return out;
}

// 4. Privacy-budget savings on the three nested workloads.
Outcome criterion_plb_saved() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const double rho = 0.125;

  const Domain hisp = Domain::of(std::vector<std::size_t>(7, 2));
  const Matrix one_way = one_way_marginals(hisp);
  const double marginal_pct =
      plb_saved_percent(mechanism_at_rho(one_way, rho),
                        mechanism_at_rho(two_way_marginals(hisp), rho));
  out.require(std::abs(marginal_pct - 75.0) <= 0.5,
              "1-way vs 2-way: " + fmt(marginal_pct) + "% (want 75 +- 0.5)");

  const double identity_pct = plb_saved_percent(
      mechanism_at_rho(one_way, rho),
      mechanism_at_rho(Matrix::identity(hisp.size()), rho));
  out.require(std::abs(identity_pct - 6.25) <= 0.5,
              "1-way vs identity: " + fmt(identity_pct) + "% (want 6.25 +- 0.5)");

  const Domain brazil = Domain::of({101, 2});
  const double brazil_pct =
      plb_saved_percent(mechanism_at_rho(one_way_marginals(brazil), rho),
                        mechanism_at_rho(two_way_marginals(brazil), rho));
  out.require(std::abs(brazil_pct - 50.5) <= 1.0,
              "age-gender 1-way vs 2-way: " + fmt(brazil_pct) +
                  "% (want 50.5 +- 1.0; equal-rho scaling sigma^2 = "
                  "c_max(B^T B)/(2 rho) assumed)");

  // invariance across the budget grid
  for (double r : {1.0 / 32.0, 0.5, 2.0}) {
    const double again =
        plb_saved_percent(mechanism_at_rho(one_way, r),
                          mechanism_at_rho(two_way_marginals(hisp), r));
    out.require(std::abs(again - marginal_pct) <= 1e-6,
                "plb varies with rho: " + fmt(again));
  }

  out.note("values " + fmt(marginal_pct) + "%, " + fmt(identity_pct) + "%, " +
           fmt(brazil_pct) + "%; runtime " + fmt(seconds_since(t0)) + "s");
  return out;
}

// 5. Equivalence property suite on 100 random pairs.
Outcome criterion_equivalence_suite() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(20240);
  const Tolerances tol;
  int nontrivial = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 3 + gen() % 10;  // d <= 12
    auto [m1, m2] = random_pair(gen, d);
    const auto common = common_mechanism(m1, m2, tol);
    out.require(is_answerable(common, m1, tol),
                "trial " + std::to_string(trial) + ": common not answerable from m1");
    out.require(is_answerable(common, m2, tol),
                "trial " + std::to_string(trial) + ": common not answerable from m2");
    if (common.is_empty()) continue;
    ++nontrivial;
    for (const auto* target : {&m1, &m2}) {
      const auto residual = residual_mechanism(*target, common, tol);
      const Matrix cost_target = privacy_cost_matrix(*target);
      const double rel =
          frobenius_norm(privacy_cost_matrix(common) +
                         privacy_cost_matrix(residual) - cost_target) /
          std::max(1e-300, frobenius_norm(cost_target));
      out.require(rel <= 1e-7,
                  "trial " + std::to_string(trial) + ": cost identity " + fmt(rel));
      const auto stacked =
          residual.is_empty() ? common : stack(common, residual);
      out.require(is_equivalent(stacked, *target, tol),
                  "trial " + std::to_string(trial) + ": stacked not equivalent");
    }
    if (!out.pass) break;
  }
  const double elapsed = seconds_since(t0);
  out.require(elapsed < 60.0, "runtime " + fmt(elapsed) + "s exceeds 60s");
  out.note(std::to_string(nontrivial) + " nontrivial commons; runtime " +
           fmt(elapsed) + "s");
  return out;
}

// 6. Distributional equivalence of recreation for the marginal pair.
Outcome criterion_distributional() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const auto m1 = att1_mech();
  const auto common = common_mechanism(m1, att2_mech());
  const auto residual = residual_mechanism(m1, common);
  const auto rm = recon_matrices(m1, common, residual);
  const Matrix topup = topup_covariance(m1, common, residual, rm);
  const auto topup_eig = k::jacobi_eigh(topup);
  Matrix topup_factor(3, 3);
  for (std::size_t j = 0; j < 3; ++j) {
    const double s = std::sqrt(std::max(topup_eig.values[j], 0.0));
    for (std::size_t i = 0; i < 3; ++i)
      topup_factor(i, j) = s * topup_eig.vectors(i, j);
  }

  const DataVector x(std::vector<std::int64_t>{5, 9, 2, 7, 4, 6, 1, 8, 3});
  const Vector bx = k::matvec(m1.query, x.as_double());
  const std::size_t n = 100000;

  std::vector<Vector> direct(n), rec(n);
  const long long nll = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < nll; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    direct[idx] = run(m1, x, Rng::keyed(111, idx).next_u64());
    const Vector oc = run(common, x, Rng::keyed(222, idx).next_u64());
    const Vector orr = run(residual, x, Rng::keyed(333, idx).next_u64());
    Vector r = k::matvec(rm.a_common, oc);
    const Vector rr = k::matvec(rm.a_residual, orr);
    Rng rng = Rng::keyed(444, idx);
    const Vector z = rng.gaussian_vector(3);
    const Vector tz = k::matvec(topup_factor, z);
    for (std::size_t j = 0; j < 3; ++j) r[j] += rr[j] + tz[j];
    rec[idx] = std::move(r);
  }

  Vector mean_direct(3, 0.0), mean_rec(3, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      mean_direct[j] += direct[i][j];
      mean_rec[j] += rec[i][j];
    }
  for (std::size_t j = 0; j < 3; ++j) {
    mean_direct[j] /= static_cast<double>(n);
    mean_rec[j] /= static_cast<double>(n);
  }
  Matrix cov_rec(3, 3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b)
        cov_rec(a, b) += (rec[i][a] - mean_rec[a]) * (rec[i][b] - mean_rec[b]);
  cov_rec = (1.0 / static_cast<double>(n - 1)) * cov_rec;

  // both estimators target B1 x with per-coordinate variance 1
  const double combined_se = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t j = 0; j < 3; ++j) {
    out.require(std::abs(mean_direct[j] - mean_rec[j]) <= 4.0 * combined_se,
                "mean gap " + fmt(std::abs(mean_direct[j] - mean_rec[j])));
    out.require(std::abs(mean_rec[j] - bx[j]) <= 4.0 * combined_se,
                "recreated mean off truth by " + fmt(std::abs(mean_rec[j] - bx[j])));
  }
  const double cov_err = frobenius_norm(cov_rec - m1.noise.dense()) /
                         frobenius_norm(m1.noise.dense());
  out.require(cov_err <= 0.05, "covariance error " + fmt(cov_err));

  const double elapsed = seconds_since(t0);
  out.require(elapsed < 60.0, "runtime " + fmt(elapsed) + "s exceeds 60s");
  out.note("cov rel err " + fmt(cov_err) + "; runtime " + fmt(elapsed) + "s");
  return out;
}

// 7. The numerical covariance solver against the closed form, plus the
//    census bucketization chain.
Outcome criterion_multi_solver() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(555);
  const Tolerances tol;
  const SolverConfig cfg;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 3 + gen() % 8;  // d <= 10
    auto [m1, m2] = random_pair(gen, d);
    const auto closed = common_mechanism(m1, m2, tol);
    const auto multi = common_mechanism_multi({m1, m2}, cfg, tol);
    out.require(closed.is_empty() == multi.is_empty(), "emptiness mismatch");
    if (closed.is_empty()) continue;
    const double tc = closed.noise.dense().trace();
    const double rel = std::abs(multi.noise.dense().trace() - tc) /
                       std::max(1.0, tc);
    worst = std::max(worst, rel);
    out.require(rel <= 1e-5,
                "trial " + std::to_string(trial) + ": trace gap " + fmt(rel));
    if (!out.pass) break;
  }

  // census chain at a small budget
  const double rho = 1.0 / 32.0;
  std::vector<LinearGaussianMechanism> mechs;
  for (const auto& b : {Bucketization::total(), Bucketization::age4(),
                        Bucketization::age9(), Bucketization::age23()}) {
    mechs.push_back(mechanism_at_rho(bucketization_matrix(b), rho));
  }
  const auto cm1234 = common_mechanism_multi(mechs, cfg, tol);
  const auto cm234 =
      common_mechanism_multi({mechs[1], mechs[2], mechs[3]}, cfg, tol);
  const auto cm34 = common_mechanism(mechs[2], mechs[3], tol);
  out.require(is_answerable(cm1234, cm234, tol),
              "chain: CM1234 not answerable from CM234");
  out.require(is_answerable(cm234, cm34, tol),
              "chain: CM234 not answerable from CM34");
  for (std::size_t i = 0; i < mechs.size(); ++i) {
    out.require(is_answerable(cm1234, mechs[i], tol),
                "chain: CM1234 not answerable from mechanism " + std::to_string(i));
  }

  const double elapsed = seconds_since(t0);
  out.require(elapsed < 120.0, "runtime " + fmt(elapsed) + "s exceeds 120s");
  out.note("worst k=2 trace gap " + fmt(worst) + "; runtime " + fmt(elapsed) + "s");
  return out;
}

// 8. The (epsilon, delta) accounting curve.
Outcome criterion_accounting() {
  Outcome out;
  const double expected = std_normal_cdf(0.5) - std_normal_cdf(-0.5);
  const double at_zero = approx_dp_delta(1.0, 0.0);
  out.require(std::abs(at_zero - expected) <= 1e-9,
              "delta(0) " + fmt(at_zero) + " vs erf-based " + fmt(expected));
  double prev = 1.0;
  bool strictly_dropping_somewhere = false;
  for (double eps = 0.0; eps <= 6.0; eps += 0.05) {
    const double d = approx_dp_delta(1.0, eps);
    out.require(d <= prev + 1e-15, "delta increased at eps " + fmt(eps));
    out.require(d >= 0.0 && d < 1.0, "delta out of range at eps " + fmt(eps));
    if (d < prev - 1e-12) strictly_dropping_somewhere = true;
    prev = d;
  }
  out.require(strictly_dropping_somewhere, "curve is flat");
  out.note("delta(0) = " + fmt(at_zero));
  return out;
}

// 9. Decision-layer properties: policy monotonicity, the feasibility rate of
//    the candidate-dataset constraint, and bimodal-corpus selection accuracy.
Outcome criterion_decision_layer() {
  Outcome out;
  // (a) 20x20 policy grid monotonicity on random SNR reports
  std::mt19937_64 gen(777);
  std::uniform_real_distribution<double> ud(0.0, 12.0);
  const auto rank = [](Choice c) {
    return c == Choice::Secondary ? 2 : (c == Choice::Primary ? 1 : 0);
  };
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 1 + gen() % 8;
    SnrReport r;
    r.snr_lower_secondary.resize(n);
    r.snr_upper_primary.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      r.snr_lower_secondary[i] = ud(gen);
      r.snr_upper_primary[i] = r.snr_lower_secondary[i] + ud(gen);
    }
    for (int xi = 1; xi <= 20; ++xi) {
      const double x = xi / 20.0;
      int prev_rank = 3;
      for (int yi = 1; yi <= 20; ++yi) {
        const double y = 0.6 * yi;
        const int now = rank(choose_nested(r, SnrPolicy{x, y}));
        out.require(now <= prev_rank,
                    "monotonicity violated at x=" + fmt(x) + " y=" + fmt(y));
        prev_rank = now;
      }
    }
    // componentwise increase of the secondary lower bounds never moves the
    // decision away from Secondary
    SnrReport lifted = r;
    for (auto& v : lifted.snr_lower_secondary) v += 1.5;
    for (int xi = 1; xi <= 20; ++xi) {
      for (int yi = 1; yi <= 20; ++yi) {
        const SnrPolicy p{xi / 20.0, 0.6 * yi};
        out.require(rank(choose_nested(lifted, p)) >= rank(choose_nested(r, p)),
                    "lifting secondary bounds moved the decision away");
      }
    }
    if (!out.pass) break;
  }

  // (b) feasibility of the true data under the 1-D whitened L1 constraint
  const LinearGaussianMechanism common(Matrix(1, 4, 1.0),
                                       Covariance::scalar(1, 9.0));
  const Matrix whiten = psd_inv_sqrt(common.noise.dense());
  const DataVector x(std::vector<std::int64_t>{13, 2, 44, 8});
  const Vector bx = k::matvec(common.query, x.as_double());
  const std::size_t draws = 40000;
  std::size_t feasible = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const Vector o = run(common, x, Rng::keyed(888, i).next_u64());
    double l1 = 0.0;
    for (std::size_t r = 0; r < 1; ++r) l1 += std::abs(whiten(0, 0) * (bx[r] - o[r]));
    if (l1 <= 2.0) ++feasible;
  }
  const double rate = static_cast<double>(feasible) / static_cast<double>(draws);
  const double expected_rate = 2.0 * std_normal_cdf(2.0) - 1.0;  // ~0.9545
  out.require(std::abs(rate - expected_rate) <= 0.01,
              "feasibility rate " + fmt(rate) + " vs " + fmt(expected_rate));

  // (c) bimodal corpus: clearly sparse vs clearly dense blocks
  ExperimentConfig cfg;
  cfg.family = Family::MarginalPair;
  cfg.domain_cards = std::vector<std::size_t>(7, 2);
  cfg.rho_grid = {0.5};
  cfg.x_grid = {0.5};
  cfg.y_grid = {5.0};
  cfg.strategies = {Strategy::Common};
  cfg.blocks = 1000;
  cfg.distribution.type = SizeDistribution::Type::Bimodal;
  cfg.distribution.low_total = 2.0;
  cfg.distribution.high_total = 2000.0;
  cfg.distribution.p_high = 0.5;
  cfg.seed = 31337;
  const ExperimentReport rep = run_experiment(cfg);
  const double acc = rep.rows.front().acc;
  out.require(acc >= 99.0, "bimodal accuracy " + fmt(acc) + "% < 99%");
  out.note("feasibility " + fmt(rate) + ", bimodal acc " + fmt(acc) + "%");
  return out;
}

// 10. Reproducibility scope note.
Outcome criterion_scope_note() {
  Outcome out;
  out.note(
      "documented: accuracy/%M columns of the published per-dataset tables and "
      "the tuned-threshold comparison depend on non-shipped census extracts "
      "and non-public threshold parameters; they are covered by the "
      "property-based decision-layer criterion instead");
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"worked marginal example fidelity", criterion_marginal_example},
      {"two-mechanism answerability example", criterion_answer_example},
      {"maximally common sum example", criterion_common_example},
      {"privacy budget saved on nested workloads", criterion_plb_saved},
      {"equivalence property suite (100 random pairs)", criterion_equivalence_suite},
      {"distributional equivalence of recreation", criterion_distributional},
      {"numerical covariance solver and census chain", criterion_multi_solver},
      {"approximate-DP accounting curve", criterion_accounting},
      {"decision-layer properties", criterion_decision_layer},
      {"non-reproducible table columns are documented", criterion_scope_note},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.note(std::string("exception: ") + e.what());
    }
    if (!out.pass) ++failures;
    std::printf("CRITERION %2zu %s - %s%s%s\n", i + 1,
                out.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                out.detail.empty() ? "" : ": ", out.detail.c_str());
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures;
}
