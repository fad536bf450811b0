#pragma once

#include "aica/harness/metrics.hpp"
#include "aica/harness/scenario.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace aica::harness {

/// Outcome of one seeded run, reduced to what batch comparisons need.
struct BatchItem {
    std::uint64_t seed{0};
    std::string trace_digest; // keyed hash of the NDJSON trace
    std::size_t trace_lines{0};
    RunMetrics metrics;
};

/// Reference: runs one seed after another.
std::vector<BatchItem> run_batch_serial(const Scenario& sc, const std::vector<std::uint64_t>& seeds);

/// Same results as run_batch_serial, one independent World per seed on
/// OpenMP worker threads. Output order follows `seeds`.
std::vector<BatchItem> run_batch_parallel(const Scenario& sc, const std::vector<std::uint64_t>& seeds);

} // namespace aica::harness
