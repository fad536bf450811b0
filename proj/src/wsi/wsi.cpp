#include "aica/wsi/wsi.hpp"

#include "aica/core/errors.hpp"

#include <algorithm>
#include <cctype>

namespace aica::wsi {

std::string_view to_string(Level l)
{
    switch (l) {
    case Level::Clean: return "clean";
    case Level::Potential: return "potential";
    case Level::Likely: return "likely";
    case Level::Confirmed: return "confirmed";
    }
    return "?";
}

std::string_view to_string(EnvironmentTag t)
{
    switch (t) {
    case EnvironmentTag::Expected: return "expected";
    case EnvironmentTag::Virtualized: return "virtualized";
    case EnvironmentTag::Debugger: return "debugger";
    }
    return "?";
}

std::string_view to_string(Affiliation a)
{
    switch (a) {
    case Affiliation::Friend: return "friend";
    case Affiliation::Foe: return "foe";
    case Affiliation::Unknown: return "unknown";
    }
    return "?";
}

Level Thresholds::level_for(double c) const
{
    if (c >= confirmed)
        return Level::Confirmed;
    if (c >= likely)
        return Level::Likely;
    if (c >= potential)
        return Level::Potential;
    return Level::Clean;
}

EscalationWeights load_escalation(const nlohmann::json& doc)
{
    EscalationWeights w;
    if (doc.is_null())
        return w;
    if (!doc.is_object())
        throw ParseError("escalation: expected an object");
    w.connection_source = doc.value("connection_source", w.connection_source);
    w.connection_peer = doc.value("connection_peer", w.connection_peer);
    w.integrity = doc.value("integrity", w.integrity);
    w.honey = doc.value("honey", w.honey);
    w.functional = doc.value("functional", w.functional);
    w.metric = doc.value("metric", w.metric);
    for (double d : {w.connection_source, w.connection_peer, w.integrity, w.honey, w.functional, w.metric})
        if (!(d > 0.0))
            throw ValidationError("escalation", "escalation deltas must be positive");
    return w;
}

substrate::IntegrityBaseline Whitelists::baseline_for(const NodeId& node) const
{
    substrate::IntegrityBaseline b;
    if (auto it = file_hashes.find(node); it != file_hashes.end())
        b.whitelist = it->second;
    b.blacklist = blacklist;
    return b;
}

Whitelists load_whitelists(const nlohmann::json& doc)
{
    Whitelists wl;
    if (doc.is_null())
        return wl;
    if (!doc.is_object())
        throw ParseError("whitelists: expected an object");
    for (const auto& f : doc.value("flows", nlohmann::json::array())) {
        if (f.is_array() && f.size() == 3)
            wl.flows.insert({f[0].get<std::string>(), f[1].get<std::string>(), f[2].get<int>()});
        else if (f.is_object())
            wl.flows.insert({f.at("src").get<std::string>(), f.at("dst").get<std::string>(), f.at("port").get<int>()});
        else
            throw ParseError("whitelists.flows: entries are [src, dst, port]");
    }
    const auto hashes = doc.value("file_hashes", nlohmann::json::object());
    for (const auto& [node, files] : hashes.items())
        for (const auto& [path, h] : files.items())
            wl.file_hashes[node][path] = substrate::parse_hash(h);
    for (const auto& h : doc.value("blacklist", nlohmann::json::array()))
        wl.blacklist.insert(substrate::parse_hash(h));
    const auto bounds = doc.value("metric_bounds", nlohmann::json::object());
    for (const auto& [node, b] : bounds.items())
        wl.metric_bounds[node] = MetricBounds{b.value("max_cpu_load", 1.0), b.value("max_mem_fraction", 1.0)};
    for (const auto& s : doc.value("process_images", std::vector<std::string>{}))
        wl.process_images.insert(s);
    for (const auto& s : doc.value("bad_images", std::vector<std::string>{}))
        wl.bad_images.insert(s);
    return wl;
}

nlohmann::json IoC::to_json() const
{
    return {{"entity", entity},
            {"evidence", std::string(aica::to_string(evidence))},
            {"reason", reason},
            {"delta", delta},
            {"t", t.ms}};
}

const EntityState& WorldState::entity(const std::string& id) const
{
    static const EntityState clean{};
    auto it = entities.find(id);
    return it == entities.end() ? clean : it->second;
}

std::string WorldState::most_suspect() const
{
    std::string best = self;
    double best_c = entity(self).confidence;
    for (const auto& [id, e] : entities)
        if (e.confidence > best_c) {
            best = id;
            best_c = e.confidence;
        }
    return best;
}

nlohmann::json WorldState::to_json() const
{
    nlohmann::json ents = nlohmann::json::object();
    for (const auto& [id, e] : entities)
        ents[id] = {{"level", std::string(to_string(e.level))},
                    {"confidence", e.confidence},
                    {"services", e.services},
                    {"cpu_load", e.last_metrics.cpu_load},
                    {"mem_used", e.last_metrics.mem_used},
                    {"mem_total", e.last_metrics.mem_total}};
    return {{"t", t.ms},
            {"self", self},
            {"self_integrity_ok", self_integrity_ok},
            {"environment", std::string(to_string(environment))},
            {"entities", ents}};
}

WorldState WorldState::from_json(const nlohmann::json& j)
{
    WorldState w;
    w.t = SimTime{j.at("t").get<Millis>()};
    w.self = j.at("self").get<std::string>();
    w.self_integrity_ok = j.at("self_integrity_ok").get<bool>();
    const auto env = j.at("environment").get<std::string>();
    w.environment = env == "virtualized" ? EnvironmentTag::Virtualized
                    : env == "debugger"  ? EnvironmentTag::Debugger
                                         : EnvironmentTag::Expected;
    for (const auto& [id, e] : j.at("entities").items()) {
        EntityState s;
        const auto lvl = e.at("level").get<std::string>();
        for (Level l : {Level::Clean, Level::Potential, Level::Likely, Level::Confirmed})
            if (to_string(l) == lvl)
                s.level = l;
        s.confidence = e.at("confidence").get<double>();
        s.services = e.at("services").get<std::vector<std::string>>();
        s.last_metrics = {e.at("cpu_load").get<double>(), e.at("mem_used").get<double>(),
                          e.at("mem_total").get<double>()};
        w.entities[id] = s;
    }
    return w;
}

WorldState initial_world_state(const sim::Topology& topo, const NodeId& self)
{
    WorldState w;
    w.self = self;
    for (const auto& [id, n] : topo.nodes())
        w.entities[id] = EntityState{};
    w.entities[self];
    return w;
}

std::vector<Percept> collect(substrate::Substrate& sub, const NodeId& node, SimTime now)
{
    std::vector<Percept> out = sub.drain_percepts(node);
    const auto& m = sub.node(node).metrics;
    Percept self;
    self.t = now;
    self.source = PerceptSource::Self;
    self.kind = PerceptKind::MetricSample;
    self.attributes = {{"node", node},
                       {"cpu_load", nlohmann::json(m.cpu_load).dump()},
                       {"mem_used", nlohmann::json(m.mem_used).dump()},
                       {"mem_total", nlohmann::json(m.mem_total).dump()}};
    out.push_back(std::move(self));
    return out;
}

namespace {

std::vector<std::string_view> mandatory(PerceptKind k)
{
    switch (k) {
    case PerceptKind::ScanProbe:
    case PerceptKind::Connection: return {"src", "dst"};
    case PerceptKind::IntegrityFinding: return {"node", "path"};
    case PerceptKind::LogEvent: return {"node", "event"};
    case PerceptKind::MetricSample: return {"node"};
    case PerceptKind::HoneyEvent: return {"node", "accessor_node"};
    case PerceptKind::FunctionalAnomaly: return {"node"};
    case PerceptKind::MessageReceived: return {"from", "type"};
    }
    return {};
}

bool is_entity_key(const std::string& k)
{
    return k == "src" || k == "dst" || k == "node" || k == "from" || k == "accessor_node" || k == "peer";
}

std::string trim(std::string s)
{
    auto sp = [](unsigned char c) { return std::isspace(c) != 0; };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), sp));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), sp).base(), s.end());
    return s;
}

double number_or(const Percept& p, const std::string& key, double fallback)
{
    auto it = p.attributes.find(key);
    if (it == p.attributes.end())
        return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::logic_error&) {
        return fallback;
    }
}

} // namespace

std::vector<Percept> sanitize(const std::vector<Percept>& raw, SanitizeStats* stats)
{
    std::vector<std::pair<std::string, Percept>> keyed;
    keyed.reserve(raw.size());
    for (const Percept& in : raw) {
        Percept p;
        p.t = in.t;
        p.source = in.source;
        p.kind = in.kind;
        for (const auto& [k, v] : in.attributes) {
            std::string key = k;
            std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
            p.attributes[key] = is_entity_key(key) ? trim(v) : v;
        }
        bool ok = true;
        for (auto key : mandatory(p.kind)) {
            auto it = p.attributes.find(std::string(key));
            if (it == p.attributes.end() || it->second.empty())
                ok = false;
        }
        if (!ok) {
            if (stats)
                ++stats->malformed;
            continue;
        }
        std::string key = p.dedupe_key();
        keyed.emplace_back(std::move(key), std::move(p));
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        if (a.second.t != b.second.t)
            return a.second.t < b.second.t;
        if (a.first != b.first)
            return a.first < b.first;
        return a.second.source < b.second.source;
    });
    std::set<std::string> seen;
    std::vector<Percept> out;
    for (auto& [key, p] : keyed) {
        if (!seen.insert(key).second) {
            if (stats)
                ++stats->duplicates;
            continue;
        }
        out.push_back(std::move(p));
    }
    return out;
}

EnvironmentTag identify_environment(const std::vector<Percept>& percepts, EnvironmentTag current)
{
    for (const Percept& p : percepts) {
        if (p.kind != PerceptKind::LogEvent || p.attr("event") != "environment-marker")
            continue;
        const std::string m = p.attr("marker");
        if (m == "virtualized")
            current = EnvironmentTag::Virtualized;
        else if (m == "debugger")
            current = EnvironmentTag::Debugger;
        else if (m == "expected")
            current = EnvironmentTag::Expected;
    }
    return current;
}

Affiliation classify_friend_foe(const substrate::ProcessRecord& process, const Whitelists& wl,
                                const std::set<int>& accessors)
{
    if (process.owner == substrate::ProcessOwner::RedAgent || wl.bad_images.count(process.image) ||
        accessors.count(process.pid))
        return Affiliation::Foe;
    if (wl.process_images.count(process.image))
        return Affiliation::Friend;
    return Affiliation::Unknown;
}

std::set<int> decoy_accessors(const std::vector<Percept>& percepts, const NodeId& node)
{
    std::set<int> out;
    for (const Percept& p : percepts) {
        if (p.kind != PerceptKind::HoneyEvent || p.attr("accessor_node") != node)
            continue;
        try {
            out.insert(std::stoi(p.attr("accessor")));
        } catch (const std::logic_error&) {
        }
    }
    return out;
}

std::vector<IoC> detect_anomaly(const std::vector<Percept>& percepts, const Whitelists& wl,
                                const EscalationWeights& w)
{
    std::vector<IoC> out;
    std::set<std::pair<NodeId, NodeId>> pairs;
    for (const Percept& p : percepts) {
        switch (p.kind) {
        case PerceptKind::ScanProbe:
        case PerceptKind::Connection: {
            const NodeId src = p.attr("src");
            const NodeId dst = p.attr("dst");
            int port = static_cast<int>(number_or(p, "port", -1));
            if (wl.flow_allowed(src, dst, port) || !pairs.insert({src, dst}).second)
                break;
            out.push_back({src, p.kind, "anomalous-connection", w.connection_source, p.t});
            if (dst != src)
                out.push_back({dst, p.kind, "anomalous-connection", w.connection_peer, p.t});
            break;
        }
        case PerceptKind::IntegrityFinding:
            if (p.attr("authorized") == "false")
                out.push_back({p.attr("node"), p.kind, "integrity-violation", w.integrity, p.t});
            break;
        case PerceptKind::MetricSample: {
            const NodeId node = p.attr("node");
            auto b = wl.metric_bounds.find(node);
            if (b == wl.metric_bounds.end())
                break;
            double cpu = number_or(p, "cpu_load", 0.0);
            double total = number_or(p, "mem_total", 1.0);
            double used = number_or(p, "mem_used", 0.0);
            double frac = total > 0 ? used / total : 0.0;
            if (cpu > b->second.max_cpu_load || frac > b->second.max_mem_fraction)
                out.push_back({node, p.kind, "metric-out-of-bounds", w.metric, p.t});
            break;
        }
        case PerceptKind::HoneyEvent:
            out.push_back({p.attr("accessor_node"), p.kind, "honey-access", w.honey, p.t});
            break;
        case PerceptKind::FunctionalAnomaly:
            out.push_back({p.attr("node"), p.kind, "functional-anomaly", w.functional, p.t});
            break;
        case PerceptKind::LogEvent:
        case PerceptKind::MessageReceived:
            break;
        }
    }
    return out;
}

WorldState update_world_state(const WorldState& state, const std::vector<IoC>& iocs, SimTime now,
                              const Thresholds& th)
{
    WorldState next = state;
    next.t = now;
    std::map<std::string, double> sums;
    for (const IoC& ioc : iocs)
        sums[ioc.entity] += ioc.delta;
    for (const auto& [entity, sum] : sums) {
        EntityState& e = next.entities[entity];
        e.confidence = std::min(1.0, e.confidence + sum);
        e.level = std::max(e.level, th.level_for(e.confidence));
    }
    if (auto it = sums.find(next.self); it != sums.end())
        next.self_integrity_ok = next.entities[next.self].level == Level::Clean;
    return next;
}

void reset_entity(WorldState& state, const std::string& entity)
{
    auto it = state.entities.find(entity);
    if (it == state.entities.end())
        return;
    it->second.level = Level::Clean;
    it->second.confidence = 0.0;
    if (entity == state.self)
        state.self_integrity_ok = true;
}

} // namespace aica::wsi
