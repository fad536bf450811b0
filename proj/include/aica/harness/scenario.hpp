#pragma once

#include "aica/collab/collab.hpp"
#include "aica/core/errors.hpp"
#include "aica/decision/decision.hpp"
#include "aica/memory/memory.hpp"
#include "aica/red/red_agent.hpp"
#include "aica/sim/topology.hpp"
#include "aica/wsi/wsi.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aica::harness {

inline constexpr int kSchemaVersion = 1;

/// A cross-reference or required field is missing; where() is the JSON path.
class ReferenceError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct AgentConfig {
    std::string name;
    NodeId node;
    std::string key_id;
    bool discoverable{true};
    std::vector<NodeId> observes;
    decision::GoalProfile goals;
    decision::Repertoire repertoire;
    Millis c2_timeout{3000};
    Millis peer_timeout{7000};
    memory::LearningMode learning{memory::LearningMode::Off};
    std::vector<std::string> peers; // empty: every other agent
    Millis reply_delay{0};
    int depth{3};
    int branch{3};
    int replans{1};
    double cbr_min_value{0.75};
    collab::Capacities capacities{1, 1, 1};
    std::vector<std::string> services;
    AbstractState context; // initial context flags, e.g. in_combat
    std::optional<memory::ExperienceStore> experience;
    std::optional<memory::DynamicsTable> dynamics;
};

struct C2Config {
    std::string key_id;
    Millis reply_delay{100};
    std::vector<nlohmann::json> orders; // {"action":..., "args":{...}}, consumed in order
};

struct ScriptEvent {
    SimTime t;
    std::string kind; // red-event, connection, write_file, functional-anomaly, env-marker, set-metrics
    nlohmann::json data;
};

struct MetricsConfig {
    Millis cfh_window{60000};
    memory::RewardWeights weights;
    double total_resources{100.0};
};

struct Scenario {
    int schema_version{kSchemaVersion};
    std::string name;
    std::uint64_t seed{0};
    SimTime duration;
    sim::Topology topology;
    nlohmann::json nodes = nlohmann::json::object(); // per-node substrate documents
    wsi::Whitelists whitelists;
    wsi::EscalationWeights escalation;
    memory::SeverityTable severity;
    collab::KeyRing keys;
    std::vector<AgentConfig> agents;
    std::optional<C2Config> c2;
    std::optional<red::RedScript> red;
    std::vector<ScriptEvent> script;
    MetricsConfig metrics;

    const AgentConfig* agent(const std::string& name) const;
};

/// Throws ParseError, ValidationError, or ReferenceError.
Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);

} // namespace aica::harness
