#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace aica::cli {

/// Exit codes: 0 success, 1 divergence or invalid input, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace aica::cli
