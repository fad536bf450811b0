#include "aica/harness/scenario.hpp"

#include "aica/substrate/substrate.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace aica::harness {

const AgentConfig* Scenario::agent(const std::string& name) const
{
    for (const auto& a : agents)
        if (a.name == name)
            return &a;
    return nullptr;
}

nlohmann::json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j = nlohmann::json::parse(ss.str(), nullptr, false);
    if (j.is_discarded())
        throw ParseError("'" + path.string() + "' is not valid JSON");
    return j;
}

namespace {

const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key))
        throw ReferenceError(where + key, "missing required field '" + where + key + "'");
    return obj.at(key);
}

// Inline object, or a string naming a file relative to the scenario.
nlohmann::json inline_or_file(const nlohmann::json& j, const std::filesystem::path& base)
{
    if (j.is_string())
        return read_json_file(base / j.get<std::string>());
    return j;
}

AgentConfig parse_agent(const nlohmann::json& j, std::size_t idx, const Scenario& sc,
                        const std::filesystem::path& base)
{
    const std::string where = "agents[" + std::to_string(idx) + "].";
    AgentConfig a;
    a.name = require(j, "name", where).get<std::string>();
    a.node = require(j, "node", where).get<std::string>();
    if (!sc.topology.has_node(a.node))
        throw ReferenceError(where + "node", "agent '" + a.name + "' sits on unknown node '" + a.node + "'");
    a.key_id = require(j, "key_id", where).get<std::string>();
    if (!sc.keys.find(a.key_id))
        throw ReferenceError(where + "key_id", "unknown key id '" + a.key_id + "'");
    a.discoverable = j.value("discoverable", true);
    a.observes = j.value("observes", std::vector<NodeId>{a.node});
    for (const auto& n : a.observes)
        if (!sc.topology.has_node(n))
            throw ReferenceError(where + "observes", "unknown node '" + n + "'");
    a.goals = decision::load_goal_profile(require(j, "goals", where));
    a.repertoire = decision::Repertoire::load(j.contains("repertoire") ? j.at("repertoire") : nlohmann::json());
    if (j.contains("timeouts")) {
        a.c2_timeout = j.at("timeouts").value("c2", a.c2_timeout);
        a.peer_timeout = j.at("timeouts").value("peer", a.peer_timeout);
    }
    auto mode = memory::parse_learning_mode(j.value("learning", std::string("off")));
    if (!mode)
        throw ValidationError(where + "learning", "learning mode must be off, passive, or active");
    a.learning = *mode;
    a.peers = j.value("peers", std::vector<std::string>{});
    a.reply_delay = j.value("reply_delay", a.reply_delay);
    a.depth = j.value("depth", a.depth);
    a.branch = j.value("branch", a.branch);
    a.replans = j.value("replans", a.replans);
    a.cbr_min_value = j.value("cbr_min_value", a.cbr_min_value);
    if (j.contains("capacities")) {
        const auto& c = j.at("capacities");
        a.capacities = {c.value("memory", 0.0), c.value("storage", 0.0), c.value("cpu", 0.0)};
    }
    a.services = j.value("services", std::vector<std::string>{});
    auto ctx = j.value("context", std::vector<std::string>{});
    a.context.insert(ctx.begin(), ctx.end());
    if (j.contains("experience"))
        a.experience = memory::ExperienceStore::from_json(inline_or_file(j.at("experience"), base));
    if (j.contains("dynamics"))
        a.dynamics = memory::DynamicsTable::from_json(inline_or_file(j.at("dynamics"), base));
    if (a.depth < 1 || a.branch < 1)
        throw ValidationError(where + "depth", "depth and branch must be at least 1");
    return a;
}

} // namespace

Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base)
{
    if (!doc.is_object())
        throw ParseError("scenario: expected a JSON object");
    Scenario sc;
    try {
        sc.schema_version = doc.value("schema_version", kSchemaVersion);
        if (sc.schema_version != kSchemaVersion)
            throw ValidationError("schema_version", "unsupported schema version " + std::to_string(sc.schema_version));
        sc.name = doc.value("name", std::string("scenario"));
        sc.seed = require(doc, "seed", "").get<std::uint64_t>();
        sc.duration = SimTime{require(doc, "duration", "").get<Millis>()};
        if (sc.duration.ms < 0)
            throw ValidationError("duration", "duration must be non-negative");
        sc.topology = sim::load_topology(inline_or_file(require(doc, "topology", ""), base));

        sc.nodes = doc.value("nodes", nlohmann::json::object());
        for (const auto& [id, st] : sc.nodes.items()) {
            if (!sc.topology.has_node(id))
                throw ReferenceError("nodes." + id, "substrate declared for unknown node '" + id + "'");
            substrate::NodeState probe;
            substrate::load_node_state(probe, st, "nodes." + id);
        }
        sc.whitelists = wsi::load_whitelists(doc.value("whitelists", nlohmann::json()));
        for (const auto& [node, _] : sc.whitelists.file_hashes)
            if (!sc.topology.has_node(node))
                throw ReferenceError("whitelists.file_hashes." + node, "unknown node '" + node + "'");
        for (const auto& [src, dst, port] : sc.whitelists.flows)
            for (const auto& n : {src, dst})
                if (!sc.topology.has_node(n))
                    throw ReferenceError("whitelists.flows", "unknown node '" + n + "'");
        sc.escalation = wsi::load_escalation(doc.value("escalation", nlohmann::json()));
        sc.severity = memory::load_severity(doc.value("severity", nlohmann::json()));

        const auto keys = doc.value("keys", nlohmann::json::object());
        for (const auto& [k, v] : keys.items())
            sc.keys.secrets[k] = v.get<std::string>();

        std::set<std::string> names;
        std::set<NodeId> hosts;
        const auto agents = doc.value("agents", nlohmann::json::array());
        for (std::size_t i = 0; i < agents.size(); ++i) {
            AgentConfig a = parse_agent(agents[i], i, sc, base);
            if (!names.insert(a.name).second)
                throw ValidationError("agents[" + std::to_string(i) + "].name", "duplicate agent name '" + a.name + "'");
            if (!hosts.insert(a.node).second)
                throw ValidationError("agents[" + std::to_string(i) + "].node", "two agents on node '" + a.node + "'");
            sc.agents.push_back(std::move(a));
        }
        for (std::size_t i = 0; i < sc.agents.size(); ++i)
            for (const auto& p : sc.agents[i].peers)
                if (!names.count(p))
                    throw ReferenceError("agents[" + std::to_string(i) + "].peers", "unknown peer '" + p + "'");

        if (doc.contains("c2")) {
            const auto& j = doc.at("c2");
            C2Config c;
            c.key_id = require(j, "key_id", "c2.").get<std::string>();
            if (!sc.keys.find(c.key_id))
                throw ReferenceError("c2.key_id", "unknown key id '" + c.key_id + "'");
            c.reply_delay = j.value("reply_delay", c.reply_delay);
            for (const auto& o : j.value("orders", nlohmann::json::array()))
                c.orders.push_back(o);
            sc.c2 = std::move(c);
        }
        if (doc.contains("red"))
            sc.red = red::load_red_script(doc.at("red"), sc.topology);

        const auto script = doc.value("script", nlohmann::json::array());
        for (std::size_t i = 0; i < script.size(); ++i) {
            const std::string where = "script[" + std::to_string(i) + "].";
            ScriptEvent ev;
            ev.t = SimTime{require(script[i], "t", where).get<Millis>()};
            ev.kind = require(script[i], "kind", where).get<std::string>();
            ev.data = script[i];
            for (const char* key : {"node", "src", "dst"})
                if (ev.data.contains(key) && !sc.topology.has_node(ev.data.at(key).get<std::string>()))
                    throw ReferenceError(where + key, "unknown node '" + ev.data.at(key).get<std::string>() + "'");
            sc.script.push_back(std::move(ev));
        }

        if (doc.contains("metrics")) {
            const auto& m = doc.at("metrics");
            sc.metrics.cfh_window = m.value("cfh_window", sc.metrics.cfh_window);
            if (m.contains("reward")) {
                const auto& r = m.at("reward");
                sc.metrics.weights = {r.value("a", 1.0), r.value("b", 1.0), r.value("c", 1.0)};
                sc.metrics.total_resources = r.value("total_resources", sc.metrics.total_resources);
            }
            if (sc.metrics.total_resources <= 0)
                throw ValidationError("metrics.reward.total_resources", "total resources must be positive");
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("scenario: ") + ex.what());
    }
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path)
{
    return parse_scenario(read_json_file(path), path.parent_path());
}

} // namespace aica::harness
