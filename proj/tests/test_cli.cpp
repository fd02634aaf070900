#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "cmech/cli.hpp"
#include "cmech/serialize.hpp"

using namespace cmech;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cmech_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path);
  f << contents;
}

// The 3x3 one-way-marginal pair with unit noise.
json att1_spec() {
  return json{{"domain", {3, 3}},
              {"queries", {{"type", "marginals"}, {"subsets", {{0}}}}},
              {"noise", {{"sigma2", 1.0}}}};
}

json att2_spec() {
  return json{{"domain", {3, 3}},
              {"queries", {{"type", "marginals"}, {"subsets", {{1}}}}},
              {"noise", {{"sigma2", 1.0}}}};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cmech");
  return run_cli(args);
}

}  // namespace

TEST_CASE("decompose writes the total-query common with its verification block") {
  TempDir tmp;
  write_json_file(tmp.file("m1.json"), att1_spec());
  write_json_file(tmp.file("m2.json"), att2_spec());
  const std::string out = tmp.file("dec.json");
  REQUIRE(cli({"--out", out, "decompose", tmp.file("m1.json"),
               tmp.file("m2.json")}) == 0);

  const json dec = load_json_file(out);
  CHECK(dec["common"]["rows"] == 1);
  const Matrix cost_query = matrix_from_json(dec["common"]["query"]);
  const Matrix sigma = matrix_from_json(dec["common"]["covariance"]);
  // cost matrix = (1/3) * ones(9)
  const Matrix cost = kernels::matmul_tn(
      cost_query, Covariance::full(sigma).solve(cost_query));
  CHECK(frobenius_norm(cost - Matrix(9, 9, 1.0 / 3.0)) <= 1e-8);
  for (const auto& v : dec["verification"]) {
    CHECK(v["cost_identity_rel_err"].get<double>() <= 1e-7);
    CHECK(v["common_answerable_from_target"].get<bool>());
    CHECK(v["recreate_mean_identity_err"].get<double>() <= 1e-8);
  }
}

TEST_CASE("decompose of identical specs leaves empty residuals") {
  TempDir tmp;
  write_json_file(tmp.file("m.json"), att1_spec());
  const std::string out = tmp.file("dec.json");
  REQUIRE(cli({"--out", out, "decompose", tmp.file("m.json"),
               tmp.file("m.json")}) == 0);
  const json dec = load_json_file(out);
  for (const auto& r : dec["residuals"]) CHECK(r["rows"] == 0);
}

TEST_CASE("decompose of disjoint specs leaves an empty common") {
  TempDir tmp;
  const json s1{{"domain", {2}},
                {"queries", {{"type", "matrix"}, {"rows", {{1.0, 0.0}}}}},
                {"noise", {{"sigma2", 1.0}}}};
  const json s2{{"domain", {2}},
                {"queries", {{"type", "matrix"}, {"rows", {{0.0, 1.0}}}}},
                {"noise", {{"sigma2", 1.0}}}};
  write_json_file(tmp.file("s1.json"), s1);
  write_json_file(tmp.file("s2.json"), s2);
  const std::string out = tmp.file("dec.json");
  REQUIRE(cli({"--out", out, "decompose", tmp.file("s1.json"),
               tmp.file("s2.json")}) == 0);
  const json dec = load_json_file(out);
  CHECK(dec["common"]["rows"] == 0);
  CHECK(dec["residuals"][0]["rows"] == 1);
}

TEST_CASE("account reports rho and the delta curve") {
  TempDir tmp;
  write_json_file(tmp.file("m.json"), att1_spec());
  const std::string out = tmp.file("acc.json");
  REQUIRE(cli({"--out", out, "account", tmp.file("m.json"), "--epsilon", "0",
               "--epsilon", "1"}) == 0);
  const json acc = load_json_file(out);
  CHECK(acc["rho"].get<double>() == doctest::Approx(0.5).epsilon(1e-9));
  REQUIRE(acc["per_record_rho"].size() == 9);
  const double delta0 = acc["epsilon_delta"][0]["delta"].get<double>();
  const double expected = std_normal_cdf(0.5) - std_normal_cdf(-0.5);
  CHECK(delta0 == doctest::Approx(expected).epsilon(1e-9));
  CHECK(acc["epsilon_delta"][1]["delta"].get<double>() < delta0);
}

TEST_CASE("bad spec files exit with code 2") {
  TempDir tmp;
  write_file(tmp.file("bad.json"), "{ not json");
  CHECK(cli({"account", tmp.file("bad.json")}) == 2);
  write_json_file(tmp.file("nonoise.json"),
                  json{{"domain", {2}}, {"queries", {{"type", "identity"}}}});
  CHECK(cli({"account", tmp.file("nonoise.json")}) == 2);
  CHECK(cli({"account", tmp.file("missing.json")}) == 2);
}

TEST_CASE("adaptive runs the general path on the marginal pair") {
  TempDir tmp;
  write_json_file(tmp.file("m1.json"), att1_spec());
  write_json_file(tmp.file("m2.json"), att2_spec());
  std::string csv = "cell_index,count\n";
  for (int i = 0; i < 9; ++i) csv += std::to_string(i) + ",400\n";
  write_file(tmp.file("dense.csv"), csv);

  const std::string out = tmp.file("run.json");
  REQUIRE(cli({"--seed", "7", "--out", out, "adaptive", tmp.file("m1.json"),
               tmp.file("m2.json"), "--data", tmp.file("dense.csv"), "--x",
               "0.5", "--y", "5"}) == 0);
  const json t = load_json_file(out);
  CHECK(t["mode"] == "general");
  CHECK(t["decision"] == "secondary");
  CHECK(t["rho_common"].get<double>() > 0.0);
  // zero-waste: the budget spent equals the chosen target's budget
  CHECK(t["zero_waste_rel_err"].get<double>() <= 1e-7);
  CHECK(t["rho_spent"].get<double>() ==
        doctest::Approx(t["rho_target"].get<double>()).epsilon(1e-7));

  // replaying the same seed reproduces the transcript bit for bit
  const std::string out2 = tmp.file("run2.json");
  REQUIRE(cli({"--seed", "7", "--out", out2, "adaptive", tmp.file("m1.json"),
               tmp.file("m2.json"), "--data", tmp.file("dense.csv"), "--x",
               "0.5", "--y", "5"}) == 0);
  std::ifstream f1(out), f2(out2);
  const std::string s1((std::istreambuf_iterator<char>(f1)),
                       std::istreambuf_iterator<char>());
  const std::string s2((std::istreambuf_iterator<char>(f2)),
                       std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}

TEST_CASE("adaptive on a nested pair uses the SNR bounds") {
  TempDir tmp;
  const json total{{"domain", {3, 3}},
                   {"queries", {{"type", "total"}}},
                   {"noise", {{"sigma2", 3.0}}}};
  write_json_file(tmp.file("total.json"), total);
  write_json_file(tmp.file("m2.json"), att2_spec());
  std::string csv = "cell_index,count\n";
  for (int i = 0; i < 9; ++i) csv += std::to_string(i) + ",500\n";
  write_file(tmp.file("dense.csv"), csv);

  const std::string out = tmp.file("run.json");
  REQUIRE(cli({"--seed", "3", "--out", out, "adaptive", tmp.file("total.json"),
               tmp.file("m2.json"), "--data", tmp.file("dense.csv")}) == 0);
  const json t = load_json_file(out);
  CHECK(t["mode"] == "nested");
  CHECK(t["decision"] == "secondary");
}

TEST_CASE("adaptive stops on hopeless data and exits with code 4") {
  TempDir tmp;
  write_json_file(tmp.file("m1.json"), att1_spec());
  write_json_file(tmp.file("m2.json"), att2_spec());
  write_file(tmp.file("zero.csv"), "cell_index,count\n");
  const std::string out = tmp.file("run.json");
  const int code =
      cli({"--seed", "5", "--out", out, "adaptive", tmp.file("m1.json"),
           tmp.file("m2.json"), "--data", tmp.file("zero.csv"), "--y", "50"});
  const json t = load_json_file(out);
  if (code == 4) {
    CHECK(t["decision"] == "stop");
    CHECK(t["rho_spent"].get<double>() ==
          doctest::Approx(t["rho_common"].get<double>()).epsilon(1e-9));
  } else {
    // with all-zero data the decision may legitimately stay primary
    REQUIRE(code == 0);
    CHECK(t["decision"] == "primary");
  }
  CHECK(t["rho_spent"].get<double>() <= 0.5 + 1e-9);
}

TEST_CASE("plb-saved endpoints: identical and disjoint mechanisms") {
  TempDir tmp;
  write_json_file(tmp.file("m1.json"), att1_spec());
  const std::string out = tmp.file("plb.json");
  REQUIRE(cli({"--out", out, "plb-saved", tmp.file("m1.json"),
               tmp.file("m1.json")}) == 0);
  CHECK(load_json_file(out)["plb_saved_percent"].get<double>() ==
        doctest::Approx(100.0).epsilon(1e-6));

  const json s1{{"domain", {2}},
                {"queries", {{"type", "matrix"}, {"rows", {{1.0, 0.0}}}}},
                {"noise", {{"target_rho", 0.25}}}};
  const json s2{{"domain", {2}},
                {"queries", {{"type", "matrix"}, {"rows", {{0.0, 1.0}}}}},
                {"noise", {{"target_rho", 0.25}}}};
  write_json_file(tmp.file("s1.json"), s1);
  write_json_file(tmp.file("s2.json"), s2);
  REQUIRE(cli({"--out", out, "plb-saved", tmp.file("s1.json"),
               tmp.file("s2.json")}) == 0);
  CHECK(load_json_file(out)["plb_saved_percent"].get<double>() ==
        doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("experiment smoke run is deterministic and internally consistent") {
  TempDir tmp;
  const json config{
      {"family", "marginal_pair"},
      {"domain", {2, 2, 2}},
      {"rho", {0.5}},
      {"policy", {{"x", 0.5}, {"y", 5.0}}},
      {"strategies", {"common", "alternate"}},
      {"corpus",
       {{"blocks", 60},
        {"distribution",
         {{"type", "loguniform"}, {"min_total", 5.0}, {"max_total", 2000.0}}}}},
      {"seed", 99}};
  write_json_file(tmp.file("config.json"), config);
  const std::string out = tmp.file("report.json");
  REQUIRE(cli({"--out", out, "experiment", tmp.file("config.json")}) == 0);
  const json report = load_json_file(out);
  REQUIRE(report["rows"].size() == 2);
  for (const auto& row : report["rows"]) {
    double pct_sum = 0.0;
    for (const auto& p : row["pct_mech"]) pct_sum += p.get<double>();
    CHECK(pct_sum == doctest::Approx(100.0).epsilon(1e-4));
    const double acc = row["acc"].get<double>();
    CHECK(acc >= 0.0);
    CHECK(acc <= 100.0);
    CHECK(row["blocks"] == 60);
    CHECK(row["plb_saved"].get<double>() > 0.0);
  }

  const std::string out2 = tmp.file("report2.json");
  REQUIRE(cli({"--out", out2, "experiment", tmp.file("config.json")}) == 0);
  std::ifstream f1(out), f2(out2);
  const std::string s1((std::istreambuf_iterator<char>(f1)),
                       std::istreambuf_iterator<char>());
  const std::string s2((std::istreambuf_iterator<char>(f2)),
                       std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}

TEST_CASE("census-chain experiment runs all three strategies") {
  TempDir tmp;
  const json config{
      {"family", "census_chain"},
      {"rho", {0.03125}},
      {"policy", {{"x", 0.5}, {"y", 20.0}}},
      {"strategies", {"common", "alternate", "dhc"}},
      {"dhc", {{"gamma", 0.1}, {"thetas", {50.0, 500.0, 5000.0}}}},
      {"corpus",
       {{"blocks", 40},
        {"distribution",
         {{"type", "loguniform"}, {"min_total", 20.0}, {"max_total", 200000.0}}}}},
      {"seed", 2718}};
  write_json_file(tmp.file("config.json"), config);
  const std::string out = tmp.file("report.json");
  REQUIRE(cli({"--out", out, "experiment", tmp.file("config.json")}) == 0);
  const json report = load_json_file(out);
  REQUIRE(report["rows"].size() == 3);
  for (const auto& row : report["rows"]) {
    REQUIRE(row["pct_mech"].size() == 4);
    double pct_sum = 0.0;
    for (const auto& p : row["pct_mech"]) pct_sum += p.get<double>();
    CHECK(pct_sum == doctest::Approx(100.0).epsilon(1e-4));
    for (const auto& o : row["outcomes"]) {
      const int chosen = o["chosen"].get<int>();
      CHECK(chosen >= 1);
      CHECK(chosen <= 4);
    }
  }
  // the common and alternate strategies share the estimator distribution, so
  // both report the budget the alternate would have to spend on estimation
  const double plb_common = report["rows"][0]["plb_saved"].get<double>();
  const double plb_alt = report["rows"][1]["plb_saved"].get<double>();
  CHECK(plb_common > 0.0);
  CHECK(plb_common == doctest::Approx(plb_alt).epsilon(0.2));
  CHECK(report["rows"][2]["plb_saved"].get<double>() == 0.0);

  // identical outcomes under a replay
  const std::string out2 = tmp.file("report2.json");
  REQUIRE(cli({"--out", out2, "experiment", tmp.file("config.json")}) == 0);
  CHECK(load_json_file(out2) == report);
}

TEST_CASE("csv corpora and the all-zero degenerate corpus") {
  TempDir tmp;
  // all-zero blocks: the oracle picks the primary mechanism every time
  const json zero_config{
      {"family", "identity_pair"},
      {"domain", {2, 2}},
      {"rho", {0.5}},
      {"policy", {{"x", 0.5}, {"y", 5.0}}},
      {"corpus",
       {{"blocks", 30}, {"distribution", {{"type", "fixed"}, {"total", 0.0}}}}},
      {"seed", 8}};
  write_json_file(tmp.file("zero.json"), zero_config);
  const std::string out = tmp.file("zero_report.json");
  REQUIRE(cli({"--out", out, "experiment", tmp.file("zero.json")}) == 0);
  const json zero_report = load_json_file(out);
  CHECK(zero_report["rows"][0]["pct_mech"][0].get<double>() ==
        doctest::Approx(100.0));

  // explicit CSV corpus: one sparse and one dense block
  write_file(tmp.file("sparse.csv"), "cell_index,count\n0,1\n");
  std::string dense = "cell_index,count\n";
  for (int i = 0; i < 4; ++i) dense += std::to_string(i) + ",5000\n";
  write_file(tmp.file("dense.csv"), dense);
  const json csv_config{
      {"family", "identity_pair"},
      {"domain", {2, 2}},
      {"rho", {0.5}},
      {"policy", {{"x", 0.5}, {"y", 5.0}}},
      {"corpus", {{"csv", {tmp.file("sparse.csv"), tmp.file("dense.csv")}}}},
      {"seed", 8}};
  write_json_file(tmp.file("csv.json"), csv_config);
  const std::string out2 = tmp.file("csv_report.json");
  REQUIRE(cli({"--out", out2, "experiment", tmp.file("csv.json")}) == 0);
  const json csv_report = load_json_file(out2);
  CHECK(csv_report["rows"][0]["blocks"] == 2);
  const auto& outcomes = csv_report["rows"][0]["outcomes"];
  CHECK(outcomes[0]["oracle"] == 1);  // sparse block wants the marginals
  CHECK(outcomes[1]["oracle"] == 2);  // dense block affords the identity
}

TEST_CASE("dhc strategy outside the census family is a config error") {
  TempDir tmp;
  const json config{{"family", "marginal_pair"},
                    {"domain", {2, 2}},
                    {"strategies", {"dhc"}},
                    {"dhc", {{"gamma", 0.1}, {"thetas", {1.0, 2.0, 3.0}}}},
                    {"corpus", {{"blocks", 5}}}};
  write_json_file(tmp.file("config.json"), config);
  CHECK(cli({"experiment", tmp.file("config.json")}) == 2);
}

TEST_CASE("experiment csv output mirrors the aggregate rows") {
  TempDir tmp;
  const json config{
      {"family", "identity_pair"},
      {"domain", {2, 2}},
      {"rho", {0.5}},
      {"policy", {{"x", 0.5}, {"y", 3.0}}},
      {"corpus",
       {{"blocks", 20},
        {"distribution", {{"type", "fixed"}, {"total", 500.0}}}}},
      {"seed", 4}};
  write_json_file(tmp.file("config.json"), config);
  const std::string out = tmp.file("report.csv");
  REQUIRE(cli({"--out", out, "--format", "csv", "experiment",
               tmp.file("config.json")}) == 0);
  std::ifstream f(out);
  std::string header;
  std::getline(f, header);
  CHECK(header == "family,rho,x,y,strategy,pct_m1,pct_m2,acc,plb_saved,blocks,seed");
  std::string row;
  REQUIRE(std::getline(f, row));
  CHECK(row.find("identity_pair") == 0);
}

TEST_CASE("the installed binary parses arguments and runs end to end") {
  TempDir tmp;
  write_json_file(tmp.file("m.json"), att1_spec());
  const std::string out = tmp.file("acc.json");
  const std::string cmd = std::string(CMECH_CLI_PATH) +
                          " --tol-rank 1e-8 --tol-psd 1e-8 --out " + out +
                          " account " + tmp.file("m.json");
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(load_json_file(out)["rho"].get<double>() ==
        doctest::Approx(0.5).epsilon(1e-9));
  // unknown subcommands are input errors
  const std::string bad = std::string(CMECH_CLI_PATH) + " frobnicate 2>/dev/null";
  CHECK(std::system(bad.c_str()) != 0);
}
