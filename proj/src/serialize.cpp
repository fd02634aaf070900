#include "cmech/serialize.hpp"

#include <cmath>
#include <fstream>

#include "cmech/errors.hpp"

namespace cmech {

json to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw InvalidInput("matrix JSON must be an array of rows");
  std::vector<Vector> rows;
  rows.reserve(j.size());
  for (const auto& row : j) {
    if (!row.is_array()) throw InvalidInput("matrix JSON rows must be arrays");
    rows.emplace_back();
    rows.back().reserve(row.size());
    for (const auto& v : row) rows.back().push_back(v.get<double>());
  }
  return Matrix::from_rows(rows);
}

Domain domain_from_spec(const json& spec) {
  if (!spec.contains("domain") || !spec["domain"].is_array()) {
    throw InvalidInput("mechanism spec: missing domain cardinalities");
  }
  std::vector<std::size_t> cards;
  for (const auto& c : spec["domain"]) {
    const auto v = c.get<std::int64_t>();
    if (v < 1) throw InvalidInput("mechanism spec: cardinalities must be >= 1");
    cards.push_back(static_cast<std::size_t>(v));
  }
  return Domain::of(std::move(cards));
}

Matrix query_matrix_from_spec(const json& spec, const Domain& domain) {
  if (!spec.contains("queries")) throw InvalidInput("mechanism spec: missing queries");
  const json& q = spec["queries"];
  const std::string type = q.value("type", "");
  const std::size_t d = domain.size();
  if (type == "identity") return Matrix::identity(d);
  if (type == "total") return Matrix(1, d, 1.0);
  if (type == "marginals") {
    if (!q.contains("subsets")) throw InvalidInput("marginals query needs subsets");
    std::vector<std::vector<std::size_t>> subsets;
    for (const auto& subset : q["subsets"]) {
      subsets.emplace_back();
      for (const auto& a : subset) {
        const auto v = a.get<std::int64_t>();
        if (v < 0) throw InvalidInput("marginals: negative attribute index");
        subsets.back().push_back(static_cast<std::size_t>(v));
      }
    }
    return marginal_matrix(domain, subsets);
  }
  if (type == "matrix") {
    if (!q.contains("rows")) throw InvalidInput("matrix query needs rows");
    Matrix b = matrix_from_json(q["rows"]);
    if (b.cols() != d) throw InvalidInput("matrix query width must equal the domain size");
    return b;
  }
  throw InvalidInput("unknown query type '" + type + "'");
}

namespace {

double cost_diag_max(const Matrix& b) {
  double best = 0.0;
  for (std::size_t j = 0; j < b.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < b.rows(); ++i) s += b(i, j) * b(i, j);
    best = std::max(best, s);
  }
  return best;
}

}  // namespace

LinearGaussianMechanism mechanism_from_spec(const json& spec) {
  const Domain domain = domain_from_spec(spec);
  Matrix b = query_matrix_from_spec(spec, domain);
  if (!spec.contains("noise")) throw InvalidInput("mechanism spec: missing noise");
  const json& n = spec["noise"];
  const std::size_t m = b.rows();

  if (n.contains("sigma2")) {
    const double s = n["sigma2"].get<double>();
    if (!(s > 0.0)) throw InvalidInput("noise: sigma2 must be positive");
    return LinearGaussianMechanism(std::move(b), Covariance::scalar(m, s));
  }
  if (n.contains("diag")) {
    Vector diag;
    for (const auto& v : n["diag"]) diag.push_back(v.get<double>());
    if (diag.size() != m) throw InvalidInput("noise: diag length must match query rows");
    return LinearGaussianMechanism(std::move(b), Covariance::diagonal(diag));
  }
  if (n.contains("full")) {
    Matrix full = matrix_from_json(n["full"]);
    if (full.rows() != m) throw InvalidInput("noise: full covariance must match query rows");
    return LinearGaussianMechanism(std::move(b), Covariance::full(std::move(full)));
  }
  if (n.contains("target_rho")) {
    const double rho = n["target_rho"].get<double>();
    if (!(rho > 0.0)) throw InvalidInput("noise: target_rho must be positive");
    const double cmax = cost_diag_max(b);
    if (!(cmax > 0.0)) throw InvalidInput("noise: target_rho needs a nonzero query matrix");
    const double sigma2 = cmax / (2.0 * rho);
    return LinearGaussianMechanism(std::move(b), Covariance::scalar(m, sigma2));
  }
  throw InvalidInput("noise must provide sigma2, diag, full, or target_rho");
}

LinearGaussianMechanism load_mechanism_file(const std::string& path,
                                            Domain* domain_out) {
  const json spec = load_json_file(path);
  if (domain_out) *domain_out = domain_from_spec(spec);
  return mechanism_from_spec(spec);
}

json mechanism_to_json(const LinearGaussianMechanism& m) {
  json j;
  j["rows"] = m.rows();
  j["domain_size"] = m.domain_size();
  j["query"] = to_json(m.query);
  j["covariance"] = to_json(m.noise.dense());
  return j;
}

json decomposition_to_json(const Decomposition& dec,
                           const std::vector<LinearGaussianMechanism>& targets,
                           const Tolerances& tol) {
  json j;
  j["common"] = mechanism_to_json(dec.common);
  j["residuals"] = json::array();
  j["recon"] = json::array();
  json verification = json::array();
  const Matrix cost_common = privacy_cost_matrix(dec.common);

  for (std::size_t i = 0; i < targets.size(); ++i) {
    j["residuals"].push_back(mechanism_to_json(dec.residuals[i]));
    json recon;
    recon["a_common"] = to_json(dec.recon[i].a_common);
    recon["a_residual"] = to_json(dec.recon[i].a_residual);
    j["recon"].push_back(std::move(recon));

    const Matrix cost_target = privacy_cost_matrix(targets[i]);
    const Matrix cost_residual = privacy_cost_matrix(dec.residuals[i]);
    const double denom = std::max(1e-300, frobenius_norm(cost_target));
    json v;
    v["cost_identity_rel_err"] =
        frobenius_norm(cost_common + cost_residual - cost_target) / denom;
    v["common_answerable_from_target"] =
        is_answerable(dec.common, targets[i], tol);
    Matrix mean = kernels::matmul(dec.recon[i].a_common, dec.common.query);
    if (!dec.residuals[i].is_empty()) {
      mean = mean +
             kernels::matmul(dec.recon[i].a_residual, dec.residuals[i].query);
    }
    v["recreate_mean_identity_err"] =
        frobenius_norm(mean - targets[i].query);
    verification.push_back(std::move(v));
  }
  j["verification"] = std::move(verification);
  return j;
}

json account_to_json(const LinearGaussianMechanism& m,
                     const std::vector<double>& epsilons) {
  const PrivacyAccount acc = account(m);
  json j;
  j["rho"] = acc.rho;
  j["per_record_rho"] = acc.per_record_rho;
  json curve = json::array();
  for (double eps : epsilons) {
    json point;
    point["epsilon"] = eps;
    point["delta"] = approx_dp_delta(2.0 * acc.rho, eps);
    curve.push_back(std::move(point));
  }
  j["epsilon_delta"] = std::move(curve);
  return j;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InvalidInput("JSON parse error in " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open output file: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace cmech
