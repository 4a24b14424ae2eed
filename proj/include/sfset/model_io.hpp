#pragma once

#include <string>
#include <variant>

#include <json.hpp>
#include "sfset/model.hpp"

namespace sfs {

using Json = nlohmann::json;

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json to_json(const PsrModel& model);
PsrModel psr_from_json(const Json& j);

Json to_json(const MdpSpec& spec);
Json to_json(const PomdpSpec& spec);
MdpSpec mdp_from_json(const Json& j);
PomdpSpec pomdp_from_json(const Json& j);

/// Accepts a PSR model file, or an MDP/POMDP spec file which is embedded.
PsrModel load_model(const std::string& path);
void save_json(const Json& j, const std::string& path);
Json load_json(const std::string& path);

}  // namespace sfs
