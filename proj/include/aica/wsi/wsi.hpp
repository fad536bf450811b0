#pragma once

#include "aica/core/percept.hpp"
#include "aica/core/time.hpp"
#include "aica/sim/topology.hpp"
#include "aica/substrate/substrate.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace aica::wsi {

enum class Level { Clean = 0, Potential = 1, Likely = 2, Confirmed = 3 };

std::string_view to_string(Level l);

struct Thresholds {
    double potential{0.25};
    double likely{0.55};
    double confirmed{0.85};

    Level level_for(double confidence) const;
};

/// Confidence added per IoC, by evidence type.
struct EscalationWeights {
    double connection_source{0.30};
    double connection_peer{0.25};
    double integrity{0.40};
    double honey{0.50};
    double functional{0.60};
    double metric{0.15};
};

EscalationWeights load_escalation(const nlohmann::json& doc);

struct MetricBounds {
    double max_cpu_load{1.0};
    double max_mem_fraction{1.0};
};

/// Baselines of normal behavior.
struct Whitelists {
    std::set<std::tuple<NodeId, NodeId, int>> flows;
    std::map<NodeId, std::map<std::string, substrate::Hash>> file_hashes;
    std::set<substrate::Hash> blacklist;
    std::map<NodeId, MetricBounds> metric_bounds;
    std::set<std::string> process_images; // known-good images
    std::set<std::string> bad_images;

    bool flow_allowed(const NodeId& src, const NodeId& dst, int port) const
    {
        return flows.count({src, dst, port}) != 0;
    }
    substrate::IntegrityBaseline baseline_for(const NodeId& node) const;
};

Whitelists load_whitelists(const nlohmann::json& doc);

struct IoC {
    std::string entity;
    PerceptKind evidence{PerceptKind::Connection};
    std::string reason; // anomalous-connection, integrity-violation, honey-access, functional-anomaly, metric-out-of-bounds
    double delta{0.0};
    SimTime t;

    nlohmann::json to_json() const;
    friend bool operator==(const IoC&, const IoC&) = default;
};

struct EntityState {
    Level level{Level::Clean};
    double confidence{0.0};
    std::vector<std::string> services;
    substrate::Metrics last_metrics;

    friend bool operator==(const EntityState&, const EntityState&) = default;
};

enum class EnvironmentTag { Expected, Virtualized, Debugger };

std::string_view to_string(EnvironmentTag t);

struct WorldState {
    SimTime t;
    NodeId self;
    std::map<std::string, EntityState> entities;
    bool self_integrity_ok{true};
    EnvironmentTag environment{EnvironmentTag::Expected};

    const EntityState& entity(const std::string& id) const;
    /// Highest-confidence entity; ties resolve to self, then to the smallest id.
    std::string most_suspect() const;

    nlohmann::json to_json() const;
    static WorldState from_json(const nlohmann::json& j);
    friend bool operator==(const WorldState&, const WorldState&) = default;
};

/// One entry per topology node, all Clean.
WorldState initial_world_state(const sim::Topology& topo, const NodeId& self);

struct SanitizeStats {
    std::size_t malformed{0};
    std::size_t duplicates{0};
};

/// Queued percepts for `node` plus one self-check metric sample.
std::vector<Percept> collect(substrate::Substrate& sub, const NodeId& node, SimTime now);

/// Normalizes, sorts by (t, dedupe key), and collapses duplicates. Percepts
/// missing a mandatory attribute are dropped and counted.
std::vector<Percept> sanitize(const std::vector<Percept>& raw, SanitizeStats* stats = nullptr);

/// Latest environment marker in the batch, else `current`.
EnvironmentTag identify_environment(const std::vector<Percept>& percepts, EnvironmentTag current);

enum class Affiliation { Friend, Foe, Unknown };

std::string_view to_string(Affiliation a);

/// `decoy_accessors` holds pids seen touching a decoy (from honey-events).
Affiliation classify_friend_foe(const substrate::ProcessRecord& process, const Whitelists& wl,
                                const std::set<int>& decoy_accessors);

/// Pids named as accessors by honey-events in a sanitized batch.
std::set<int> decoy_accessors(const std::vector<Percept>& percepts, const NodeId& node);

/// One IoC per anomalous (src, dst) pair per batch for each end, and one per
/// unauthorized integrity finding, out-of-bounds metric, honey-event, and
/// functional anomaly.
std::vector<IoC> detect_anomaly(const std::vector<Percept>& percepts, const Whitelists& wl,
                                const EscalationWeights& w);

/// Adds deltas per entity, clamps confidence to 1, and raises levels to
/// match. Levels and confidences never decrease here.
WorldState update_world_state(const WorldState& state, const std::vector<IoC>& iocs, SimTime now,
                              const Thresholds& th = {});

/// Recovery: the only way an entity's level goes back down.
void reset_entity(WorldState& state, const std::string& entity);

} // namespace aica::wsi
