#include "cmech/decide.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "cmech/errors.hpp"
#include "cmech/rng.hpp"

namespace cmech {

void SnrPolicy::validate() const {
  if (!(x > 0.0 && x <= 1.0)) throw InvalidInput("policy: x must lie in (0, 1]");
  if (!(y > 0.0)) throw InvalidInput("policy: y must be positive");
}

void DhcConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidInput("dhc: gamma must lie in (0, 1)");
  }
  if (!(thetas[0] < thetas[1] && thetas[1] < thetas[2])) {
    throw InvalidInput("dhc: thresholds must be strictly increasing");
  }
}

std::optional<Matrix> nesting_map(const Matrix& b1, const Matrix& b2,
                                  const Tolerances& tol) {
  if (b1.cols() != b2.cols()) {
    throw InvalidInput("nesting_map: column count mismatch");
  }
  const Matrix a = kernels::matmul(b1, pinv(b2, tol));
  const double err = frobenius_norm(kernels::matmul(a, b2) - b1);
  if (err <= 1e-8 * frobenius_norm(b1)) return a;
  return std::nullopt;
}

SnrReport snr_bounds(const Vector& o_common,
                     const LinearGaussianMechanism& common,
                     const LinearGaussianMechanism& primary,
                     const LinearGaussianMechanism& secondary,
                     const Matrix& a_nest, const Tolerances& tol) {
  if (o_common.size() != common.rows()) {
    throw InvalidInput("snr_bounds: common output length mismatch");
  }
  if (a_nest.rows() != primary.rows() || a_nest.cols() != secondary.rows()) {
    throw InvalidInput("snr_bounds: nesting map has the wrong shape");
  }
  const Matrix& b1 = primary.query;
  // A* with B1 = A* B*; fails when the common mechanism cannot answer B1.
  const Matrix a_star = kernels::matmul(b1, pinv(common.query, tol));
  const double err = frobenius_norm(kernels::matmul(a_star, common.query) - b1);
  if (err > 1e-8 * std::max(1.0, frobenius_norm(b1))) {
    throw NotAnswerable("snr_bounds: primary queries not answerable from the common mechanism");
  }

  const std::size_t n = b1.rows();
  const Vector mean = kernels::matvec(a_star, o_common);
  const Matrix common_var = kernels::matmul_nt(
      kernels::matmul(a_star, common.noise.dense()), a_star);
  const Matrix secondary_var = kernels::matmul_nt(
      kernels::matmul(a_nest, secondary.noise.dense()), a_nest);

  SnrReport r;
  r.lower.resize(n);
  r.upper.resize(n);
  r.snr_lower_primary.resize(n);
  r.snr_upper_primary.resize(n);
  r.snr_lower_secondary.resize(n);
  r.snr_upper_secondary.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double half_width = 3.0 * std::sqrt(std::max(common_var(i, i), 0.0));
    r.lower[i] = mean[i] - half_width;
    r.upper[i] = mean[i] + half_width;
    const double sd1 = std::sqrt(primary.noise.dense()(i, i));
    const double sd2 = std::sqrt(std::max(secondary_var(i, i), 0.0));
    r.snr_lower_primary[i] = r.lower[i] / sd1;
    r.snr_upper_primary[i] = r.upper[i] / sd1;
    r.snr_lower_secondary[i] = r.lower[i] / sd2;
    r.snr_upper_secondary[i] = r.upper[i] / sd2;
  }
  return r;
}

namespace {

double fraction_at_least(const Vector& values, double threshold) {
  if (values.empty()) return 0.0;
  std::size_t hits = 0;
  for (double v : values)
    if (v >= threshold) ++hits;
  return static_cast<double>(hits) / static_cast<double>(values.size());
}

}  // namespace

Choice choose_nested(const SnrReport& report, const SnrPolicy& policy) {
  policy.validate();
  if (fraction_at_least(report.snr_lower_secondary, policy.y) >= policy.x) {
    return Choice::Secondary;
  }
  if (fraction_at_least(report.snr_upper_primary, policy.y) < policy.x) {
    return Choice::Stop;
  }
  return Choice::Primary;
}

CandidateResult candidate_dataset(const Vector& o_common,
                                  const LinearGaussianMechanism& common,
                                  const Matrix& b1, const Vector& c,
                                  const Tolerances& tol, double l1_budget) {
  if (common.is_empty()) {
    throw InvalidInput("candidate_dataset: common mechanism is empty");
  }
  if (o_common.size() != common.rows()) {
    throw InvalidInput("candidate_dataset: output length mismatch");
  }
  if (c.size() != b1.rows()) {
    throw InvalidInput("candidate_dataset: direction length mismatch");
  }
  if (b1.cols() != common.domain_size()) {
    throw InvalidInput("candidate_dataset: domain mismatch");
  }

  const std::size_t d = common.domain_size();
  const std::size_t mc = common.rows();
  const Matrix whiten = psd_inv_sqrt(common.noise.dense(), tol);  // Σ*^{-1/2}
  const Matrix wb = kernels::matmul(whiten, common.query);
  const Vector wo = kernels::matvec(whiten, o_common);

  // Variables z = (x̂, t); the L1 constraint splits into
  //   (WB) x̂ - t <= Wo*,  -(WB) x̂ - t <= -Wo*,  sum(t) <= budget.
  const std::size_t nvars = d + mc;
  Matrix a(2 * mc + 1, nvars);
  Vector b(2 * mc + 1);
  for (std::size_t i = 0; i < mc; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      a(i, j) = wb(i, j);
      a(mc + i, j) = -wb(i, j);
    }
    a(i, d + i) = -1.0;
    a(mc + i, d + i) = -1.0;
    b[i] = wo[i];
    b[mc + i] = -wo[i];
  }
  for (std::size_t i = 0; i < mc; ++i) a(2 * mc, d + i) = 1.0;
  b[2 * mc] = l1_budget;

  Vector cost(nvars, 0.0);
  const Vector objective_row = kernels::matvec_t(b1, c);  // B1ᵀ c
  for (std::size_t j = 0; j < d; ++j) cost[j] = objective_row[j];

  const LpResult lp = solve_lp(a, b, cost);
  CandidateResult out;
  out.status = lp.status;
  if (lp.status == LpResult::Status::Optimal) {
    out.x.assign(lp.x.begin(), lp.x.begin() + static_cast<std::ptrdiff_t>(d));
  }
  return out;
}

SpreadStats snr_spread(const Vector& o_common,
                       const LinearGaussianMechanism& common, const Matrix& b1,
                       std::size_t num_probes, std::uint64_t seed,
                       const Tolerances& tol, double l1_budget) {
  SpreadStats stats;
  const std::size_t n = b1.rows();
  if (num_probes == 0) return stats;

  std::vector<Vector> answers(num_probes);
  for (std::size_t p = 0; p < num_probes; ++p) {
    Rng rng = Rng::keyed(seed, p);
    Vector c = rng.gaussian_vector(n);
    const double norm = norm2(c);
    if (norm > 0.0) c = (1.0 / norm) * c;
    const CandidateResult cand =
        candidate_dataset(o_common, common, b1, c, tol, l1_budget);
    if (cand.status != LpResult::Status::Optimal) {
      stats.status = cand.status;
      return stats;  // feasibility does not depend on c; no point continuing
    }
    answers[p] = kernels::matvec(b1, cand.x);
  }

  stats.probes = num_probes;
  stats.min.assign(n, 0.0);
  stats.max.assign(n, 0.0);
  stats.variance.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double lo = answers[0][i], hi = answers[0][i], sum = 0.0;
    for (std::size_t p = 0; p < num_probes; ++p) {
      lo = std::min(lo, answers[p][i]);
      hi = std::max(hi, answers[p][i]);
      sum += answers[p][i];
    }
    const double mean = sum / static_cast<double>(num_probes);
    double var = 0.0;
    for (std::size_t p = 0; p < num_probes; ++p) {
      const double dev = answers[p][i] - mean;
      var += dev * dev;
    }
    stats.min[i] = lo;
    stats.max[i] = hi;
    stats.variance[i] = var / static_cast<double>(num_probes);
  }
  return stats;
}

int dhc_select(double noisy_total, const DhcConfig& cfg) {
  cfg.validate();
  if (noisy_total < cfg.thetas[0]) return 1;
  if (noisy_total < cfg.thetas[1]) return 2;
  if (noisy_total < cfg.thetas[2]) return 3;
  return 4;
}

}  // namespace cmech
