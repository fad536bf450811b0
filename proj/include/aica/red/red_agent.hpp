#pragma once

#include "aica/core/time.hpp"
#include "aica/sim/rng.hpp"
#include "aica/sim/topology.hpp"
#include "aica/substrate/substrate.hpp"

#include "json.hpp"

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aica::red {

enum class RedPhase { Dormant, Recon, Exploit, Lateral, Evade, Neutralized };

std::string_view to_string(RedPhase p);

struct RedScript {
    std::string id{"red"};
    NodeId infection_node;
    std::optional<NodeId> vector; // node the infection arrives from (e.g. MAINT)
    SimTime infection_time;
    std::vector<sim::NodeKind> target_kinds;
    Millis scan_interval{100};
    double exploit_success_prob{1.0};
    bool abort_on_lockdown{true};
    std::string exploit_trigger;  // "" or "diagnostics"
    bool hijack_agents{false};    // exploited agents get their signing key replaced
    std::string exploit_path{"/etc/config"};
    substrate::Hash exploit_hash{0xbadbadbadbadULL};
    std::vector<std::string> loot_paths;
    std::optional<int> loot_port;  // connect to this port on the foothold after looting

    /// Concrete target nodes in attack order, resolved from target_kinds.
    std::vector<NodeId> targets;
};

/// Parses the "red" section of a scenario and resolves targets against the topology.
RedScript load_red_script(const nlohmann::json& doc, const sim::Topology& topo);

enum class RedActionKind { Infect, Scan, Exploit, Loot, Probe };

std::string_view to_string(RedActionKind k);

struct RedAction {
    RedActionKind kind{RedActionKind::Scan};
    NodeId from;
    NodeId target;
    std::string path; // Exploit / Loot
    int port{0};      // Probe
    bool lucky{true}; // Exploit: outcome of the success draw

    nlohmann::json to_json() const;
    friend bool operator==(const RedAction&, const RedAction&) = default;
};

struct ScanResult {
    NodeId target;
    std::vector<int> open_ports;
};

struct ExploitResult {
    NodeId target;
    bool success{false};
    std::string failure; // substrate error code, or "unlucky"
};

/// Everything the red side may look at: results of its own actions and the
/// logs of nodes it occupies. Blue agent internals are deliberately absent.
struct RedObservation {
    SimTime now;
    std::optional<ScanResult> scan;
    std::optional<ExploitResult> exploit;
    bool diagnostics_seen{false};
    std::vector<NodeId> footholds; // nodes where a live, uncontained red process remains
};

struct RedState {
    RedPhase phase{RedPhase::Dormant};
    std::vector<NodeId> footholds;
    std::optional<NodeId> located;
    std::set<NodeId> refused; // targets that rejected an exploit under lockdown
    std::size_t cursor{0};    // next index into targets to scan
    std::size_t looted{0};

    friend bool operator==(const RedState&, const RedState&) = default;
};

struct RedStep {
    RedState state;
    std::vector<RedAction> actions;
};

/// One red decision. Emits at most one action. Draws from `rng` only for an
/// exploit whose success probability is strictly between 0 and 1.
RedStep red_step(const RedScript& script, const RedState& state, const RedObservation& obs, sim::Rng& rng);

class NotPresentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Marks the red agent neutralized. Throws NotPresentError if it never
/// became active or is already neutralized.
RedState neutralize(const RedState& state);

} // namespace aica::red
