#pragma once

#include "aica/core/time.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aica::sim {

enum class NodeKind { Bus, Pld, Comms, Vns, Sens, Vms, Bms, C2, Maint };

std::string_view to_string(NodeKind k);
std::optional<NodeKind> parse_node_kind(std::string_view s);

struct LinkProfile {
    double drop_prob{0.0};
    Millis base_delay{0};
    Millis jitter{0};
    std::vector<Interval> jam_windows; // sorted, pairwise disjoint
    bool covert{false};                // not visible to red observers

    bool jammed_at(SimTime t) const;
};

struct Link {
    NodeId a;
    NodeId b;
    LinkProfile profile;
};

struct Node {
    NodeId id;
    NodeKind kind{NodeKind::Bus};
    bool unreachable{false};
};

/// Validated vehicle network. Links are bidirectional.
class Topology {
public:
    Topology() = default;

    const std::map<NodeId, Node>& nodes() const { return nodes_; }
    const std::vector<Link>& links() const { return links_; }

    bool has_node(const NodeId& id) const { return nodes_.count(id) != 0; }
    const Node& node(const NodeId& id) const;
    const NodeId& c2() const { return c2_; }

    std::vector<NodeId> nodes_of_kind(NodeKind k) const;
    std::vector<NodeId> neighbors(const NodeId& id) const;
    const Link* link_between(const NodeId& a, const NodeId& b) const;

    /// Shortest path src -> dst whose intermediate hops are BUS nodes or the
    /// COMMS radio gateway (the only way off the vehicle to C2).
    /// Returns the node sequence including both endpoints, or nullopt.
    std::optional<std::vector<NodeId>> route(const NodeId& src, const NodeId& dst) const;

    nlohmann::json to_json() const;

    friend Topology load_topology(const nlohmann::json& doc);

private:
    std::map<NodeId, Node> nodes_;
    std::vector<Link> links_;
    std::map<NodeId, std::vector<std::size_t>> adjacency_;
    NodeId c2_;
};

/// Throws ParseError on malformed documents and ValidationError on invariant violations.
Topology load_topology(const nlohmann::json& doc);
Topology load_topology_text(std::string_view text);

} // namespace aica::sim
