#include "aica/sim/topology.hpp"

#include "aica/core/errors.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <set>
#include <utility>

namespace aica::sim {

namespace {

constexpr std::array<std::pair<NodeKind, std::string_view>, 9> kKinds{{
    {NodeKind::Bus, "BUS"},
    {NodeKind::Pld, "PLD"},
    {NodeKind::Comms, "COMMS"},
    {NodeKind::Vns, "VNS"},
    {NodeKind::Sens, "SENS"},
    {NodeKind::Vms, "VMS"},
    {NodeKind::Bms, "BMS"},
    {NodeKind::C2, "C2"},
    {NodeKind::Maint, "MAINT"},
}};

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::string& where)
{
    if (!j.contains(key))
        throw ParseError(where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + "." + key + ": " + e.what());
    }
}

} // namespace

std::string_view to_string(NodeKind k)
{
    for (const auto& [v, name] : kKinds)
        if (v == k)
            return name;
    return "?";
}

std::optional<NodeKind> parse_node_kind(std::string_view s)
{
    for (const auto& [v, name] : kKinds)
        if (name == s)
            return v;
    return std::nullopt;
}

bool LinkProfile::jammed_at(SimTime t) const
{
    return std::any_of(jam_windows.begin(), jam_windows.end(),
                       [t](const Interval& w) { return w.contains(t); });
}

const Node& Topology::node(const NodeId& id) const
{
    auto it = nodes_.find(id);
    if (it == nodes_.end())
        throw ValidationError(id, "unknown node '" + id + "'");
    return it->second;
}

std::vector<NodeId> Topology::nodes_of_kind(NodeKind k) const
{
    std::vector<NodeId> out;
    for (const auto& [id, n] : nodes_)
        if (n.kind == k)
            out.push_back(id);
    return out;
}

std::vector<NodeId> Topology::neighbors(const NodeId& id) const
{
    std::vector<NodeId> out;
    auto it = adjacency_.find(id);
    if (it == adjacency_.end())
        return out;
    for (std::size_t idx : it->second) {
        const Link& l = links_[idx];
        out.push_back(l.a == id ? l.b : l.a);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

const Link* Topology::link_between(const NodeId& a, const NodeId& b) const
{
    auto it = adjacency_.find(a);
    if (it == adjacency_.end())
        return nullptr;
    for (std::size_t idx : it->second) {
        const Link& l = links_[idx];
        if ((l.a == a && l.b == b) || (l.a == b && l.b == a))
            return &l;
    }
    return nullptr;
}

std::optional<std::vector<NodeId>> Topology::route(const NodeId& src, const NodeId& dst) const
{
    if (!has_node(src) || !has_node(dst))
        return std::nullopt;
    if (src == dst)
        return std::vector<NodeId>{src};

    std::map<NodeId, NodeId> parent;
    std::deque<NodeId> frontier{src};
    parent.emplace(src, src);
    while (!frontier.empty()) {
        NodeId cur = frontier.front();
        frontier.pop_front();
        for (const NodeId& next : neighbors(cur)) {
            if (parent.count(next))
                continue;
            parent.emplace(next, cur);
            if (next == dst) {
                std::vector<NodeId> path{dst};
                for (NodeId at = dst; at != src;) {
                    at = parent.at(at);
                    path.push_back(at);
                }
                std::reverse(path.begin(), path.end());
                return path;
            }
            const NodeKind k = nodes_.at(next).kind;
            if (k == NodeKind::Bus || k == NodeKind::Comms)
                frontier.push_back(next);
        }
    }
    return std::nullopt;
}

nlohmann::json Topology::to_json() const
{
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& [id, n] : nodes_)
        nodes.push_back({{"id", id}, {"kind", std::string(to_string(n.kind))}, {"unreachable", n.unreachable}});
    nlohmann::json links = nlohmann::json::array();
    for (const Link& l : links_) {
        nlohmann::json jam = nlohmann::json::array();
        for (const Interval& w : l.profile.jam_windows)
            jam.push_back({w.begin.ms, w.end.ms});
        links.push_back({{"a", l.a},
                         {"b", l.b},
                         {"drop_prob", l.profile.drop_prob},
                         {"base_delay", l.profile.base_delay},
                         {"jitter", l.profile.jitter},
                         {"jam", jam},
                         {"covert", l.profile.covert}});
    }
    return {{"nodes", nodes}, {"links", links}};
}

Topology load_topology(const nlohmann::json& doc)
{
    if (!doc.is_object())
        throw ParseError("topology: expected an object");
    Topology topo;

    const auto nodes = field<nlohmann::json>(doc, "nodes", "topology");
    if (!nodes.is_array())
        throw ParseError("topology.nodes: expected an array");
    if (nodes.empty())
        throw ValidationError("topology.nodes", "topology has no nodes");

    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string where = "topology.nodes[" + std::to_string(i) + "]";
        Node n;
        n.id = field<std::string>(nodes[i], "id", where);
        const auto kind_name = field<std::string>(nodes[i], "kind", where);
        auto kind = parse_node_kind(kind_name);
        if (!kind)
            throw ParseError(where + ".kind: unknown node kind '" + kind_name + "'");
        n.kind = *kind;
        n.unreachable = nodes[i].value("unreachable", false);
        if (!topo.nodes_.emplace(n.id, n).second)
            throw ValidationError(n.id, "duplicate node id '" + n.id + "'");
    }

    const auto c2s = topo.nodes_of_kind(NodeKind::C2);
    if (c2s.size() != 1)
        throw ValidationError("topology.nodes",
                              "expected exactly one C2 node, found " + std::to_string(c2s.size()));
    topo.c2_ = c2s.front();

    const auto links = doc.value("links", nlohmann::json::array());
    if (!links.is_array())
        throw ParseError("topology.links: expected an array");
    for (std::size_t i = 0; i < links.size(); ++i) {
        const std::string where = "topology.links[" + std::to_string(i) + "]";
        Link l;
        l.a = field<std::string>(links[i], "a", where);
        l.b = field<std::string>(links[i], "b", where);
        for (const NodeId& end : {l.a, l.b})
            if (!topo.has_node(end))
                throw ValidationError(end, where + ": dangling link endpoint '" + end + "'");
        l.profile.drop_prob = links[i].value("drop_prob", 0.0);
        l.profile.base_delay = links[i].value("base_delay", Millis{0});
        l.profile.jitter = links[i].value("jitter", Millis{0});
        l.profile.covert = links[i].value("covert", false);
        if (l.profile.drop_prob < 0.0 || l.profile.drop_prob > 1.0)
            throw ValidationError(where, "drop_prob outside [0,1]");
        if (l.profile.base_delay < 0 || l.profile.jitter < 0)
            throw ValidationError(where, "negative delay");
        for (const auto& w : links[i].value("jam", nlohmann::json::array())) {
            if (!w.is_array() || w.size() != 2)
                throw ParseError(where + ".jam: expected [begin, end] pairs");
            l.profile.jam_windows.push_back({SimTime{w[0].get<Millis>()}, SimTime{w[1].get<Millis>()}});
        }
        auto& jw = l.profile.jam_windows;
        for (std::size_t k = 0; k < jw.size(); ++k) {
            if (jw[k].end < jw[k].begin)
                throw ValidationError(where, "jam window with end before begin");
            if (k > 0 && jw[k].begin < jw[k - 1].end)
                throw ValidationError(where, "jam windows must be sorted and disjoint");
        }
        topo.adjacency_[l.a].push_back(topo.links_.size());
        topo.adjacency_[l.b].push_back(topo.links_.size());
        topo.links_.push_back(std::move(l));
    }

    if (topo.nodes_of_kind(NodeKind::Bus).empty())
        throw ValidationError("topology.nodes", "topology needs at least one BUS node");

    // Connectivity over the undirected link graph.
    std::set<NodeId> seen{topo.nodes_.begin()->first};
    std::deque<NodeId> frontier{topo.nodes_.begin()->first};
    while (!frontier.empty()) {
        NodeId cur = frontier.front();
        frontier.pop_front();
        for (const NodeId& n : topo.neighbors(cur))
            if (seen.insert(n).second)
                frontier.push_back(n);
    }
    for (const auto& [id, n] : topo.nodes_)
        if (!seen.count(id))
            throw ValidationError(id, "node '" + id + "' is disconnected");

    return topo;
}

Topology load_topology_text(std::string_view text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("topology: ") + e.what());
    }
    return load_topology(doc);
}

} // namespace aica::sim
