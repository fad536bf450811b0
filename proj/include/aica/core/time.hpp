#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace aica {

using Millis = std::int64_t;
using NodeId = std::string;

/// Simulated time in integer milliseconds since scenario start.
struct SimTime {
    Millis ms{0};

    constexpr SimTime() = default;
    constexpr explicit SimTime(Millis v) : ms(v) {}

    friend constexpr auto operator<=>(SimTime, SimTime) = default;
    friend constexpr SimTime operator+(SimTime t, Millis d) { return SimTime{t.ms + d}; }
    friend constexpr Millis operator-(SimTime a, SimTime b) { return a.ms - b.ms; }
};

/// Half-open interval [begin, end).
struct Interval {
    SimTime begin;
    SimTime end;

    constexpr bool contains(SimTime t) const { return begin <= t && t < end; }
    friend constexpr bool operator==(const Interval&, const Interval&) = default;
};

} // namespace aica
