#pragma once

#include "aica/core/time.hpp"
#include "aica/harness/scenario.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aica::harness {

/// Ground-truth red activity, as the harness saw it happen.
struct RedRecord {
    SimTime t;
    std::string action; // infect, scan, exploit, loot, probe, or a scripted kind
    NodeId from;
    NodeId target;

    bool touches(const std::string& entity) const { return entity == from || entity == target; }
};

struct IocRecord {
    SimTime t;
    std::string agent;
    std::string entity;
    std::string reason;
};

/// An alert sent to C2 or to peers.
struct CryRecord {
    SimTime t;
    std::string agent;
    std::string channel; // c2 or peers
    std::string subject; // sender's most suspect entity at send time
};

struct RunLog {
    std::vector<RedRecord> red;
    std::vector<IocRecord> iocs;
    std::vector<CryRecord> cries;
    double resources_spent{0.0};
    std::uint64_t honey_events{0};
    std::optional<SimTime> neutralized_at;
};

struct ActionLatency {
    SimTime t;
    std::string action;
    NodeId target;
    std::optional<Millis> latency;
};

struct RunMetrics {
    std::optional<Millis> detection_latency; // first infection -> first IoC on a touched entity
    std::vector<ActionLatency> per_action;
    std::optional<Millis> dwell_time;
    std::uint64_t justified_cfh{0};
    std::uint64_t cw{0};
    std::uint64_t honey_events{0};
    std::uint64_t security_events{0};
    std::uint64_t false_positive_count{0};
    double resources_spent{0.0};
    double total_resources{1.0};
    double reward{0.0};

    nlohmann::json to_json() const;
};

/// True iff a red action touched `subject` within [t - window, t].
bool justified(const CryRecord& cry, const std::vector<RedRecord>& red, Millis window);

RunMetrics compute_metrics(const RunLog& log, const MetricsConfig& cfg);

} // namespace aica::harness
