#pragma once

#include <cstdint>
#include <random>

namespace aica::sim {

/// Seeded stream with platform-independent draws. std::mt19937_64 output is
/// fixed by the standard; the distributions below avoid the unspecified
/// std:: distributions so traces stay byte-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next()
    {
        ++draws_;
        return engine_();
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [lo, hi], by rejection sampling.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi)
    {
        if (hi <= lo)
            return lo;
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        const std::uint64_t limit = span == 0 ? 0 : (~std::uint64_t{0} / span) * span;
        std::uint64_t x = next();
        while (span != 0 && x >= limit)
            x = next();
        return lo + static_cast<std::int64_t>(span == 0 ? x : x % span);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    std::uint64_t draws() const { return draws_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t draws_{0};
};

} // namespace aica::sim
