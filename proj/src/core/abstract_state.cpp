#include "aica/core/abstract_state.hpp"

namespace aica {

std::string to_string(const AbstractState& s)
{
    std::string out = "{";
    for (const auto& f : s) {
        if (out.size() > 1)
            out += ',';
        out += f;
    }
    return out + "}";
}

} // namespace aica
