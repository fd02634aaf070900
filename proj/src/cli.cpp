#include "cmech/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "cmech/decide.hpp"
#include "cmech/decompose.hpp"
#include "cmech/errors.hpp"
#include "cmech/experiment.hpp"
#include "cmech/rng.hpp"
#include "cmech/serialize.hpp"

namespace cmech {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitSolver = 3;
constexpr int kExitStop = 4;

struct GlobalOpts {
  std::uint64_t seed = 1;
  Tolerances tol;
  std::string out;
  std::string format = "json";
};

void emit(const GlobalOpts& g, const json& j) {
  if (g.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json_file(g.out, j);
  }
}

void emit_text(const GlobalOpts& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(g.out);
    if (!f) throw InvalidInput("cannot open output file: " + g.out);
    f << text;
  }
}

int cmd_decompose(const GlobalOpts& g, const std::vector<std::string>& specs) {
  std::vector<LinearGaussianMechanism> mechs;
  for (const auto& path : specs) mechs.push_back(load_mechanism_file(path));
  const Decomposition dec = decompose(mechs, SolverConfig{}, g.tol);
  json j = decomposition_to_json(dec, mechs, g.tol);
  j["seed"] = g.seed;
  emit(g, j);
  return kExitOk;
}

int cmd_account(const GlobalOpts& g, const std::string& spec,
                std::vector<double> epsilons) {
  const LinearGaussianMechanism m = load_mechanism_file(spec);
  if (epsilons.empty()) epsilons = {0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0};
  const json j = account_to_json(m, epsilons);
  if (g.format == "csv") {
    std::ostringstream csv;
    csv << "epsilon,delta\n";
    for (const auto& p : j["epsilon_delta"]) {
      csv << p["epsilon"].get<double>() << ',' << p["delta"].get<double>() << '\n';
    }
    emit_text(g, csv.str());
  } else {
    emit(g, j);
  }
  return kExitOk;
}

// Spread-based decision for non-nested pairs: a mechanism is viable when at
// least fraction x of its primary queries have a candidate-dataset spread of
// at least y times its own noise level.
bool spread_viable(const SpreadStats& stats,
                   const LinearGaussianMechanism& mech, const SnrPolicy& policy) {
  if (stats.probes == 0 || stats.min.empty()) return false;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < stats.min.size(); ++i) {
    const double range = stats.max[i] - stats.min[i];
    if (range >= policy.y * std::sqrt(mech.noise.dense()(i, i))) ++hits;
  }
  return static_cast<double>(hits) >=
         policy.x * static_cast<double>(stats.min.size());
}

int cmd_adaptive(const GlobalOpts& g, const std::string& spec1,
                 const std::string& spec2, const std::string& data_path,
                 const SnrPolicy& policy, const std::string& mode,
                 std::size_t probes) {
  Domain domain;
  const LinearGaussianMechanism m1 = load_mechanism_file(spec1, &domain);
  const LinearGaussianMechanism m2 = load_mechanism_file(spec2);
  if (m1.domain_size() != m2.domain_size()) {
    throw InvalidInput("adaptive: mechanism specs disagree on the domain size");
  }
  const DataVector data = ingest_histogram_file(data_path, domain);
  policy.validate();

  const LinearGaussianMechanism common = common_mechanism(m1, m2, g.tol);
  const LinearGaussianMechanism r1 = residual_mechanism(m1, common, g.tol);
  const LinearGaussianMechanism r2 = residual_mechanism(m2, common, g.tol);
  const Vector o_common = run(common, data, Rng::keyed(g.seed, 0).next_u64());

  const auto a_nest = nesting_map(m1.query, m2.query, g.tol);
  std::string resolved_mode = mode;
  if (resolved_mode == "auto") resolved_mode = a_nest ? "nested" : "general";

  Choice decision;
  if (resolved_mode == "nested") {
    if (!a_nest) throw InvalidInput("adaptive: analyses are not nested");
    decision = choose_nested(
        snr_bounds(o_common, common, m1, m2, *a_nest, g.tol), policy);
  } else if (resolved_mode == "general") {
    const SpreadStats s1 = snr_spread(o_common, common, m1.query, probes,
                                      Rng::keyed(g.seed, 1).next_u64(), g.tol);
    const SpreadStats s2 = snr_spread(o_common, common, m2.query, probes,
                                      Rng::keyed(g.seed, 2).next_u64(), g.tol);
    if (spread_viable(s2, m2, policy)) {
      decision = Choice::Secondary;
    } else if (spread_viable(s1, m1, policy)) {
      decision = Choice::Primary;
    } else {
      decision = Choice::Stop;
    }
  } else {
    throw InvalidInput("adaptive: mode must be nested, general, or auto");
  }

  json j;
  j["seed"] = g.seed;
  j["mode"] = resolved_mode;
  j["policy"] = {{"x", policy.x}, {"y", policy.y}};
  j["o_common"] = o_common;
  const double rho_common = zcdp_rho(common);
  j["rho_common"] = rho_common;

  if (decision == Choice::Stop) {
    j["decision"] = "stop";
    j["rho_spent"] = rho_common;
    emit(g, j);
    return kExitStop;
  }

  const bool secondary = decision == Choice::Secondary;
  const LinearGaussianMechanism& target = secondary ? m2 : m1;
  const LinearGaussianMechanism& residual = secondary ? r2 : r1;
  const Vector o_residual =
      run(residual, data, Rng::keyed(g.seed, 3).next_u64());
  const Vector final_answer =
      recreate(o_common, o_residual, target, common, residual,
               Rng::keyed(g.seed, 4).next_u64(), true, g.tol);

  const double rho_residual = zcdp_rho(residual);
  const double rho_target = zcdp_rho(target);
  j["decision"] = secondary ? "secondary" : "primary";
  j["o_residual"] = o_residual;
  j["final_answer"] = final_answer;
  j["rho_residual"] = rho_residual;
  j["rho_target"] = rho_target;
  j["rho_spent"] = rho_common + rho_residual;
  j["zero_waste_rel_err"] =
      std::abs(rho_common + rho_residual - rho_target) /
      std::max(1e-300, rho_target);
  emit(g, j);
  return kExitOk;
}

ExperimentConfig experiment_config_from_json(const json& j,
                                             const GlobalOpts& g) {
  ExperimentConfig cfg;
  cfg.tol = g.tol;
  cfg.seed = j.value("seed", g.seed);
  cfg.family = family_from_name(j.value("family", "marginal_pair"));
  if (j.contains("domain")) {
    for (const auto& c : j["domain"])
      cfg.domain_cards.push_back(c.get<std::size_t>());
  }
  if (j.contains("rho")) cfg.rho_grid = j["rho"].get<std::vector<double>>();
  if (j.contains("policy")) {
    const json& p = j["policy"];
    if (p.contains("x")) {
      cfg.x_grid = p["x"].is_array() ? p["x"].get<std::vector<double>>()
                                     : std::vector<double>{p["x"].get<double>()};
    }
    if (p.contains("y")) {
      cfg.y_grid = p["y"].is_array() ? p["y"].get<std::vector<double>>()
                                     : std::vector<double>{p["y"].get<double>()};
    }
  }
  if (j.contains("strategies")) {
    cfg.strategies.clear();
    for (const auto& s : j["strategies"])
      cfg.strategies.push_back(strategy_from_name(s.get<std::string>()));
  }
  if (j.contains("corpus")) {
    const json& c = j["corpus"];
    if (c.contains("csv")) {
      cfg.csv_corpus = c["csv"].get<std::vector<std::string>>();
    } else {
      cfg.blocks = c.value("blocks", cfg.blocks);
      if (c.contains("distribution")) {
        const json& d = c["distribution"];
        const std::string type = d.value("type", "loguniform");
        if (type == "loguniform") {
          cfg.distribution.type = SizeDistribution::Type::LogUniform;
          cfg.distribution.min_total = d.value("min_total", 10.0);
          cfg.distribution.max_total = d.value("max_total", 10000.0);
        } else if (type == "bimodal") {
          cfg.distribution.type = SizeDistribution::Type::Bimodal;
          cfg.distribution.low_total = d.value("low_total", 10.0);
          cfg.distribution.high_total = d.value("high_total", 10000.0);
          cfg.distribution.p_high = d.value("p_high", 0.5);
        } else if (type == "fixed") {
          cfg.distribution.type = SizeDistribution::Type::Fixed;
          cfg.distribution.fixed_total = d.value("total", 1000.0);
        } else {
          throw InvalidInput("unknown size distribution '" + type + "'");
        }
      }
    }
  }
  if (j.contains("dhc")) {
    DhcConfig dhc;
    dhc.gamma = j["dhc"].value("gamma", 0.1);
    const auto thetas = j["dhc"]["thetas"].get<std::vector<double>>();
    if (thetas.size() != 3) throw InvalidInput("dhc needs exactly three thetas");
    dhc.thetas = {thetas[0], thetas[1], thetas[2]};
    cfg.dhc = dhc;
  }
  return cfg;
}

json report_to_json(const ExperimentReport& report) {
  json j;
  j["family"] = family_name(report.family);
  j["seed"] = report.seed;
  j["plb_saved_note"] =
      "plb_saved is the standalone zCDP cost of the common mechanism itself, "
      "as a percentage of the total budget";
  json rows = json::array();
  for (const auto& row : report.rows) {
    json r;
    r["rho"] = row.rho;
    r["x"] = row.x;
    r["y"] = row.y;
    r["strategy"] = strategy_name(row.strategy);
    r["pct_mech"] = row.pct_mech;
    r["acc"] = row.acc;
    r["plb_saved"] = row.plb_saved;
    r["blocks"] = row.blocks;
    json outcomes = json::array();
    for (const auto& o : row.outcomes) {
      outcomes.push_back({{"block", o.block}, {"chosen", o.chosen}, {"oracle", o.oracle}});
    }
    r["outcomes"] = std::move(outcomes);
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j;
}

std::string report_to_csv(const ExperimentReport& report) {
  std::ostringstream csv;
  csv << "family,rho,x,y,strategy";
  const std::size_t num_mechs = report.rows.empty() ? 0 : report.rows.front().pct_mech.size();
  for (std::size_t i = 0; i < num_mechs; ++i) csv << ",pct_m" << (i + 1);
  csv << ",acc,plb_saved,blocks,seed\n";
  for (const auto& row : report.rows) {
    csv << family_name(report.family) << ',' << row.rho << ',' << row.x << ','
        << row.y << ',' << strategy_name(row.strategy);
    for (double p : row.pct_mech) csv << ',' << p;
    csv << ',' << row.acc << ',' << row.plb_saved << ',' << row.blocks << ','
        << report.seed << '\n';
  }
  return csv.str();
}

int cmd_experiment(const GlobalOpts& g, const std::string& config_path) {
  const json config = load_json_file(config_path);
  const ExperimentConfig cfg = experiment_config_from_json(config, g);
  const ExperimentReport report = run_experiment(cfg);
  if (g.format == "csv") {
    emit_text(g, report_to_csv(report));
  } else {
    emit(g, report_to_json(report));
  }
  return kExitOk;
}

int cmd_plb_saved(const GlobalOpts& g, const std::string& spec1,
                  const std::string& spec2) {
  const LinearGaussianMechanism m1 = load_mechanism_file(spec1);
  const LinearGaussianMechanism m2 = load_mechanism_file(spec2);
  const double pct = plb_saved_percent(m1, m2, g.tol);
  if (g.format == "csv") {
    std::ostringstream csv;
    csv << "plb_saved_percent\n" << pct << '\n';
    emit_text(g, csv.str());
  } else {
    json j;
    j["plb_saved_percent"] = pct;
    j["note"] =
        "standalone zCDP cost of the common mechanism as a percentage of the "
        "shared target budget";
    emit(g, j);
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Common-mechanism decomposition for linear Gaussian mechanisms"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "Seed for every random draw");
  app.add_option("--tol-rank", g.tol.rank_rtol, "Relative rank cutoff");
  app.add_option("--tol-psd", g.tol.psd_rtol, "Relative PSD allowance");
  app.add_option("--out", g.out, "Output path (stdout when omitted)");
  app.add_option("--format", g.format, "Output format")
      ->check(CLI::IsMember({"json", "csv"}));

  auto* decompose_cmd = app.add_subcommand(
      "decompose", "Common and residual mechanisms for two or more specs");
  std::vector<std::string> spec_paths;
  decompose_cmd->add_option("specs", spec_paths, "Mechanism spec files")
      ->required()
      ->expected(2, -1);

  auto* account_cmd =
      app.add_subcommand("account", "Privacy accounting for one spec");
  std::string account_spec;
  std::vector<double> epsilons;
  account_cmd->add_option("spec", account_spec, "Mechanism spec file")->required();
  account_cmd->add_option("--epsilon", epsilons, "Epsilon grid for the delta curve");

  auto* adaptive_cmd = app.add_subcommand(
      "adaptive", "Run common mechanism, decide, then the chosen residual");
  std::string a_spec1, a_spec2, a_data, a_mode = "auto";
  SnrPolicy policy;
  std::size_t probes = 30;
  adaptive_cmd->add_option("spec1", a_spec1, "Primary mechanism spec")->required();
  adaptive_cmd->add_option("spec2", a_spec2, "Secondary mechanism spec")->required();
  adaptive_cmd->add_option("--data", a_data, "Histogram CSV")->required();
  adaptive_cmd->add_option("--x", policy.x, "Required fraction of queries");
  adaptive_cmd->add_option("--y", policy.y, "Required SNR threshold");
  adaptive_cmd->add_option("--mode", a_mode, "nested, general, or auto")
      ->check(CLI::IsMember({"nested", "general", "auto"}));
  adaptive_cmd->add_option("--probes", probes, "Probe count for the general mode");

  auto* experiment_cmd =
      app.add_subcommand("experiment", "Run the evaluation harness");
  std::string experiment_config;
  experiment_cmd->add_option("config", experiment_config, "Experiment config JSON")
      ->required();

  auto* plb_cmd = app.add_subcommand(
      "plb-saved", "Privacy budget saved by the common mechanism");
  std::string p_spec1, p_spec2;
  plb_cmd->add_option("spec1", p_spec1, "First mechanism spec")->required();
  plb_cmd->add_option("spec2", p_spec2, "Second mechanism spec")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (decompose_cmd->parsed()) return cmd_decompose(g, spec_paths);
    if (account_cmd->parsed()) return cmd_account(g, account_spec, epsilons);
    if (adaptive_cmd->parsed()) {
      return cmd_adaptive(g, a_spec1, a_spec2, a_data, policy, a_mode, probes);
    }
    if (experiment_cmd->parsed()) return cmd_experiment(g, experiment_config);
    if (plb_cmd->parsed()) return cmd_plb_saved(g, p_spec1, p_spec2);
  } catch (const SolverFailed& e) {
    std::cerr << "solver failure: " << e.what()
              << " (violation " << e.violation << ")\n";
    return kExitSolver;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const InvalidInput& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const SingularCovariance& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitInput;
}

}  // namespace cmech
