#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "cmech/decompose.hpp"
#include "cmech/mechanism.hpp"
#include "cmech/workloads.hpp"

namespace cmech {

using nlohmann::json;

json to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);

// Mechanism spec document:
//   {
//     "domain": [cardinalities...],
//     "queries": {"type":"identity"} | {"type":"total"}
//              | {"type":"marginals","subsets":[[attr,...],...]}
//              | {"type":"matrix","rows":[[...],...]},
//     "noise":  {"sigma2": s} | {"diag":[...]} | {"full":[[...]]}
//              | {"target_rho": rho}
//   }
// With "target_rho", the covariance is sigma^2 I with
// sigma^2 = c_max(BᵀB) / (2 rho).
Domain domain_from_spec(const json& spec);
Matrix query_matrix_from_spec(const json& spec, const Domain& domain);
LinearGaussianMechanism mechanism_from_spec(const json& spec);
LinearGaussianMechanism load_mechanism_file(const std::string& path,
                                            Domain* domain_out = nullptr);

json mechanism_to_json(const LinearGaussianMechanism& m);

// Decomposition plus a verification block (constraint residuals, the
// cost-matrix identity error per target, and the recreation mean identity).
json decomposition_to_json(const Decomposition& dec,
                           const std::vector<LinearGaussianMechanism>& targets,
                           const Tolerances& tol = {});

json account_to_json(const LinearGaussianMechanism& m,
                     const std::vector<double>& epsilons);

json load_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

}  // namespace cmech
