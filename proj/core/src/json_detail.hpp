#pragma once

// Internal helpers shared between the serialization TUs. Not installed;
// public headers stay free of vendored types.

#include <string>

#include <json.hpp>

#include "twinsim/stochastic_dag.hpp"

namespace twinsim::sdag {

DurationDist dist_from_json_obj(const nlohmann::ordered_json& j, const std::string& ctx);

}  // namespace twinsim::sdag
