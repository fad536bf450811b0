#pragma once

#include "aica/sim/simulation.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aica::harness {

/// Where two NDJSON traces first differ. `line` is 1-based; `field` is
/// "t", "node", "kind", "detail.<key>", or "<eof>" when one side ends early.
struct Divergence {
    std::size_t line{0};
    std::string field;
    std::string expected;
    std::string actual;

    std::string report() const;
};

std::optional<Divergence> diff_trace(const std::string& actual, const std::string& golden);

/// Reads `golden`; a missing file is reported as a divergence at line 1.
std::optional<Divergence> diff_trace_file(const std::vector<sim::TraceRecord>& trace,
                                          const std::filesystem::path& golden);

std::vector<sim::TraceRecord> read_trace(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace aica::harness
