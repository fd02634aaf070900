#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmech/decide.hpp"
#include "cmech/decompose.hpp"
#include "cmech/mechanism.hpp"
#include "cmech/workloads.hpp"

namespace cmech {

// Workload families of the evaluation harness. The binary families choose
// between 1-way marginals (primary) and a finer secondary mechanism over a
// caller-supplied domain; the census chain chooses among the four age
// bucketizations over the gender-age domain.
enum class Family { MarginalPair, IdentityPair, CensusChain };

enum class Strategy { Common, Alternate, Dhc };

struct ExperimentConfig {
  Family family = Family::MarginalPair;
  std::vector<std::size_t> domain_cards;  // binary families only
  std::vector<double> rho_grid{0.5};
  std::vector<double> x_grid{0.5};
  std::vector<double> y_grid{5.0};
  std::vector<Strategy> strategies{Strategy::Common};

  std::size_t blocks = 100;
  SizeDistribution distribution;
  std::vector<std::string> csv_corpus;  // overrides synthetic blocks

  std::optional<DhcConfig> dhc;
  std::uint64_t seed = 1;
  SolverConfig solver;
  Tolerances tol;

  void validate() const;
};

struct BlockOutcome {
  std::size_t block = 0;
  int chosen = 0;  // 1-based mechanism index
  int oracle = 0;
};

struct ExperimentRow {
  double rho = 0.0;
  double x = 0.0;
  double y = 0.0;
  Strategy strategy = Strategy::Common;
  std::vector<double> pct_mech;  // oracle shares, sums to 100
  double acc = 0.0;              // % of blocks where chosen == oracle
  double plb_saved = 0.0;        // % of budget the alternate approach wastes
  std::size_t blocks = 0;
  std::vector<BlockOutcome> outcomes;
};

struct ExperimentReport {
  Family family = Family::MarginalPair;
  std::uint64_t seed = 0;
  std::vector<ExperimentRow> rows;
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);

// Standalone zCDP cost of the common mechanism itself; the budget a
// traditional pre-allocation approach would spend to match its estimation
// quality. Returns 100 * rho_est / rho.
double plb_saved_percent(const LinearGaussianMechanism& m1,
                         const LinearGaussianMechanism& m2,
                         const Tolerances& tol = {});

std::string family_name(Family f);
std::string strategy_name(Strategy s);
Family family_from_name(const std::string& name);
Strategy strategy_from_name(const std::string& name);

// Equal-budget covariance: sigma^2 = c_max(BᵀB) / (2 rho).
LinearGaussianMechanism mechanism_at_rho(const Matrix& query, double rho);

}  // namespace cmech
