#pragma once

#include "aica/core/time.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace aica {

enum class PerceptSource { Self, System, Environment };

enum class PerceptKind {
    ScanProbe,
    Connection,
    IntegrityFinding,
    LogEvent,
    MetricSample,
    HoneyEvent,
    FunctionalAnomaly,
    MessageReceived,
};

std::string_view to_string(PerceptSource s);
std::string_view to_string(PerceptKind k);
std::optional<PerceptSource> parse_percept_source(std::string_view s);
std::optional<PerceptKind> parse_percept_kind(std::string_view s);

/// One timestamped observation. Attribute values are kept as strings.
struct Percept {
    SimTime t;
    PerceptSource source{PerceptSource::Environment};
    PerceptKind kind{PerceptKind::LogEvent};
    std::map<std::string, std::string> attributes;

    /// Pure function of (kind, attributes).
    std::string dedupe_key() const;

    std::string attr(const std::string& key) const;

    friend bool operator==(const Percept&, const Percept&) = default;
};

} // namespace aica
