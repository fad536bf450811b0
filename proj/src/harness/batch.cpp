#include "aica/harness/batch.hpp"

#include "aica/collab/collab.hpp"
#include "aica/harness/world.hpp"

#include <exception>

namespace aica::harness {

namespace {

BatchItem run_one(const Scenario& sc, std::uint64_t seed)
{
    RunResult r = run_scenario(sc, seed);
    const std::string text = sim::to_ndjson(r.trace);
    return {seed, collab::keyed_hash("trace-digest", text), r.trace.size(), r.metrics};
}

} // namespace

std::vector<BatchItem> run_batch_serial(const Scenario& sc, const std::vector<std::uint64_t>& seeds)
{
    std::vector<BatchItem> out;
    out.reserve(seeds.size());
    for (auto s : seeds)
        out.push_back(run_one(sc, s));
    return out;
}

std::vector<BatchItem> run_batch_parallel(const Scenario& sc, const std::vector<std::uint64_t>& seeds)
{
    std::vector<BatchItem> out(seeds.size());
    std::exception_ptr failure;
    const long n = static_cast<long>(seeds.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = run_one(sc, seeds[static_cast<std::size_t>(i)]);
        } catch (...) {
#pragma omp critical
            if (!failure)
                failure = std::current_exception();
        }
    }
    if (failure)
        std::rethrow_exception(failure);
    return out;
}

} // namespace aica::harness
