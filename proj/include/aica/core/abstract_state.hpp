#pragma once

#include "json.hpp"

#include <set>
#include <string>

namespace aica {

/// Finite set of boolean flags that hold in a state; absent flags are false.
using AbstractState = std::set<std::string>;

/// "{a,b,c}" with flags in lexicographic order.
std::string to_string(const AbstractState& s);

inline nlohmann::json state_to_json(const AbstractState& s) { return nlohmann::json(s); }
inline AbstractState state_from_json(const nlohmann::json& j) { return j.get<AbstractState>(); }

} // namespace aica
