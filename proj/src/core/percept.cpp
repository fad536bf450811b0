#include "aica/core/percept.hpp"

#include <array>
#include <utility>

namespace aica {

namespace {

constexpr std::array<std::pair<PerceptKind, std::string_view>, 8> kKindNames{{
    {PerceptKind::ScanProbe, "scan-probe"},
    {PerceptKind::Connection, "connection"},
    {PerceptKind::IntegrityFinding, "integrity-finding"},
    {PerceptKind::LogEvent, "log-event"},
    {PerceptKind::MetricSample, "metric-sample"},
    {PerceptKind::HoneyEvent, "honey-event"},
    {PerceptKind::FunctionalAnomaly, "functional-anomaly"},
    {PerceptKind::MessageReceived, "message-received"},
}};

constexpr std::array<std::pair<PerceptSource, std::string_view>, 3> kSourceNames{{
    {PerceptSource::Self, "self"},
    {PerceptSource::System, "system"},
    {PerceptSource::Environment, "environment"},
}};

} // namespace

std::string_view to_string(PerceptSource s)
{
    for (const auto& [v, name] : kSourceNames)
        if (v == s)
            return name;
    return "?";
}

std::string_view to_string(PerceptKind k)
{
    for (const auto& [v, name] : kKindNames)
        if (v == k)
            return name;
    return "?";
}

std::optional<PerceptSource> parse_percept_source(std::string_view s)
{
    for (const auto& [v, name] : kSourceNames)
        if (name == s)
            return v;
    return std::nullopt;
}

std::optional<PerceptKind> parse_percept_kind(std::string_view s)
{
    for (const auto& [v, name] : kKindNames)
        if (name == s)
            return v;
    return std::nullopt;
}

std::string Percept::dedupe_key() const
{
    std::string key{to_string(kind)};
    for (const auto& [k, v] : attributes) {
        key += '|';
        key += k;
        key += '=';
        key += v;
    }
    return key;
}

std::string Percept::attr(const std::string& key) const
{
    auto it = attributes.find(key);
    return it == attributes.end() ? std::string{} : it->second;
}

} // namespace aica
