#pragma once

// JSON form of the problem specs. The flat experiment config is parsed into
// this same JSON tree before the specs are built (see config.hpp).

#include <string_view>
#include <vector>

#include <json.hpp>

#include "vflow/flows.hpp"
#include "vflow/operators.hpp"
#include "vflow/schedules.hpp"
#include "vflow/space.hpp"

namespace vflow {

using Json = nlohmann::json;

Json to_json(const Vector& v);
Json to_json(const ConvexSet& set);
Json to_json(const Operator& op);
Json to_json(const Contraction& f);
Json to_json(const Problem& p);
Json to_json(const ThetaSchedule& s);
Json to_json(const SolverConfig& cfg);
Json to_json(const Perturbation& h);

/// Accepts a number or a string such as "pi/2", "-3*pi/4", "1e-9".
double number_from_json(const Json& j, std::string_view what);
/// Elements of an array, or of an object keyed "0", "1", ... in key order.
std::vector<Json> json_list(const Json& j, std::string_view what);

/// Accepts an array of numbers; a bare number is a 1-vector.
Vector vector_from_json(const Json& j, int dim, std::string_view what);

ConvexSet set_from_json(const Json& j, int dim);
Operator operator_from_json(const Json& j, int dim);
Contraction contraction_from_json(const Json& j, int dim);
/// Keys: dim, set (default whole space), operator, contraction.
Problem problem_from_json(const Json& j);
ThetaSchedule schedule_from_json(const Json& j);
SolverConfig solver_from_json(const Json& j);
Perturbation perturbation_from_json(const Json& j, int dim);

}  // namespace vflow
