#pragma once

#include "json.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace aica::test {

inline std::string source_path(const std::string& rel) { return std::string(AICA_SOURCE_DIR) + "/" + rel; }

inline std::string slurp_abs(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string slurp(const std::string& rel) { return slurp_abs(source_path(rel)); }

inline nlohmann::json load(const std::string& rel) { return nlohmann::json::parse(slurp(rel)); }

inline std::vector<std::string> split_lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        out.push_back(line);
    return out;
}

} // namespace aica::test
