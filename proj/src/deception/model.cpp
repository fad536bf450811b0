#include "aica/deception/deception.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

namespace aica::deception {

const BmNode& BehaviorModel::node(int id) const
{
    auto it = index_.find(id);
    if (it == index_.end())
        throw std::out_of_range("behavior model has no node " + std::to_string(id));
    return nodes_[it->second];
}

std::set<std::string> BehaviorModel::symbols() const
{
    std::set<std::string> out;
    for (const auto& n : nodes_)
        out.insert(n.outputs.begin(), n.outputs.end());
    return out;
}

std::vector<const BmEdge*> BehaviorModel::control_out(int id) const
{
    std::vector<const BmEdge*> out;
    for (const auto& e : edges_)
        if (e.kind == BmEdge::Kind::Control && e.from == id)
            out.push_back(&e);
    return out;
}

const BmEdge* BehaviorModel::control_edge(int from, int to) const
{
    for (const auto& e : edges_)
        if (e.kind == BmEdge::Kind::Control && e.from == from && e.to == to)
            return &e;
    return nullptr;
}

BehaviorModel load_behavior_model(const nlohmann::json& doc)
{
    if (!doc.is_object() || !doc.contains("nodes") || !doc.at("nodes").is_array())
        throw ModelError("malformed", "behavior model needs a 'nodes' array");
    BehaviorModel m;
    try {
        for (const auto& j : doc.at("nodes")) {
            BmNode n;
            n.id = j.at("id").get<int>();
            const auto kind = j.value("kind", std::string("poi"));
            if (kind != "poi" && kind != "fork")
                throw ModelError("malformed", "node " + std::to_string(n.id) + " has unknown kind '" + kind + "'");
            n.kind = kind == "fork" ? BmNode::Kind::Fork : BmNode::Kind::Poi;
            n.api = j.value("api", std::string());
            n.outputs = j.value("outputs", std::vector<std::string>{});
            if (n.kind == BmNode::Kind::Poi && n.api.empty())
                throw ModelError("malformed", "poi node " + std::to_string(n.id) + " needs an api name");
            if (m.index_.count(n.id))
                throw ModelError("malformed", "duplicate node id " + std::to_string(n.id));
            m.index_[n.id] = m.nodes_.size();
            m.nodes_.push_back(std::move(n));
        }
        for (const auto& j : doc.value("edges", nlohmann::json::array())) {
            BmEdge e;
            e.from = j.at("from").get<int>();
            e.to = j.at("to").get<int>();
            const auto kind = j.value("kind", std::string("control"));
            if (kind != "control" && kind != "data")
                throw ModelError("malformed", "edge has unknown kind '" + kind + "'");
            e.kind = kind == "data" ? BmEdge::Kind::Data : BmEdge::Kind::Control;
            e.condition = j.value("condition", std::string());
            m.edges_.push_back(std::move(e));
        }
        m.goal_ = doc.value("goal", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& ex) {
        throw ModelError("malformed", std::string("behavior model: ") + ex.what());
    }
    if (m.nodes_.empty())
        throw ModelError("malformed", "behavior model has no nodes");

    for (const auto& e : m.edges_) {
        if (!m.has_node(e.from) || !m.has_node(e.to))
            throw ModelError("dangling-edge", "edge " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                                                  " references a missing node");
        if (e.kind == BmEdge::Kind::Data && m.node(e.from).kind != BmNode::Kind::Poi)
            throw ModelError("malformed", "data edge from non-poi node " + std::to_string(e.from));
    }

    // cycle check over control edges
    std::map<int, int> color;
    std::function<void(int)> visit = [&](int id) {
        color[id] = 1;
        for (const BmEdge* e : m.control_out(id)) {
            if (color[e->to] == 1)
                throw ModelError("cycle-detected", "control cycle through node " + std::to_string(e->to));
            if (color[e->to] == 0)
                visit(e->to);
        }
        color[id] = 2;
    };
    for (const auto& n : m.nodes_)
        if (color[n.id] == 0)
            visit(n.id);

    for (const auto& n : m.nodes_) {
        if (n.kind != BmNode::Kind::Fork)
            continue;
        auto out = m.control_out(n.id);
        const bool conditioned =
            std::all_of(out.begin(), out.end(), [](const BmEdge* e) { return !e->condition.empty(); });
        if (out.size() < 2 || !conditioned)
            throw ModelError("fork-without-conditions",
                             "fork " + std::to_string(n.id) + " needs at least two conditioned control edges");
    }

    std::set<int> has_incoming;
    for (const auto& e : m.edges_)
        if (e.kind == BmEdge::Kind::Control)
            has_incoming.insert(e.to);
    std::vector<int> roots;
    for (const auto& n : m.nodes_)
        if (!has_incoming.count(n.id))
            roots.push_back(n.id);
    if (doc.contains("root")) {
        m.root_ = doc.at("root").get<int>();
        if (!m.has_node(m.root_) || has_incoming.count(m.root_))
            throw ModelError("malformed", "declared root is not a source node");
    } else if (roots.size() == 1) {
        m.root_ = roots.front();
    } else {
        throw ModelError("malformed", "control graph must have exactly one root");
    }
    return m;
}

std::set<std::string> condition_symbols(const std::string& cond, const std::set<std::string>& declared)
{
    std::set<std::string> out;
    std::size_t i = 0;
    while (i < cond.size()) {
        unsigned char c = cond[i];
        if (std::isalpha(c) || c == '_') {
            std::size_t j = i;
            while (j < cond.size() && (std::isalnum(static_cast<unsigned char>(cond[j])) || cond[j] == '_'))
                ++j;
            std::string ident = cond.substr(i, j - i);
            if (declared.count(ident))
                out.insert(ident);
            i = j;
        } else if (std::isdigit(c)) {
            while (i < cond.size() && (std::isalnum(static_cast<unsigned char>(cond[i])) || cond[i] == '.'))
                ++i;
        } else {
            ++i;
        }
    }
    return out;
}

std::vector<Path> control_paths(const BehaviorModel& m)
{
    std::vector<Path> out;
    Path cur;
    std::function<void(int)> walk = [&](int id) {
        cur.push_back(id);
        auto next = m.control_out(id);
        if (next.empty())
            out.push_back(cur);
        for (const BmEdge* e : next)
            walk(e->to);
        cur.pop_back();
    };
    walk(m.root());
    return out;
}

std::vector<std::string> api_sequence(const BehaviorModel& m, const Path& p)
{
    std::vector<std::string> out;
    for (int id : p) {
        const BmNode& n = m.node(id);
        if (n.kind == BmNode::Kind::Poi)
            out.push_back(n.api);
    }
    return out;
}

bool exhibits(const std::vector<std::string>& apis, const std::vector<std::string>& goal, bool contiguous)
{
    if (goal.empty())
        return true;
    if (contiguous)
        return std::search(apis.begin(), apis.end(), goal.begin(), goal.end()) != apis.end();
    std::size_t k = 0;
    for (const auto& a : apis)
        if (k < goal.size() && a == goal[k])
            ++k;
    return k == goal.size();
}

std::vector<Path> relevant_paths(const BehaviorModel& m, const std::vector<std::string>& goal, bool contiguous)
{
    std::vector<Path> out;
    for (auto& p : control_paths(m))
        if (exhibits(api_sequence(m, p), goal, contiguous))
            out.push_back(std::move(p));
    return out;
}

std::set<std::string> prune_dont_cares(const BehaviorModel& m, const std::vector<Path>& paths)
{
    const auto declared = m.symbols();
    std::set<std::string> live;
    for (const Path& p : paths)
        for (std::size_t i = 0; i + 1 < p.size(); ++i) {
            const BmEdge* e = m.control_edge(p[i], p[i + 1]);
            if (e && !e->condition.empty()) {
                auto syms = condition_symbols(e->condition, declared);
                live.insert(syms.begin(), syms.end());
            }
        }
    return live;
}

} // namespace aica::deception
