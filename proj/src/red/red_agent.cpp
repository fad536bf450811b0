#include "aica/red/red_agent.hpp"

#include "aica/core/errors.hpp"

#include <algorithm>

namespace aica::red {

std::string_view to_string(RedPhase p)
{
    switch (p) {
    case RedPhase::Dormant: return "dormant";
    case RedPhase::Recon: return "recon";
    case RedPhase::Exploit: return "exploit";
    case RedPhase::Lateral: return "lateral";
    case RedPhase::Evade: return "evade";
    case RedPhase::Neutralized: return "neutralized";
    }
    return "?";
}

std::string_view to_string(RedActionKind k)
{
    switch (k) {
    case RedActionKind::Infect: return "infect";
    case RedActionKind::Scan: return "scan";
    case RedActionKind::Exploit: return "exploit";
    case RedActionKind::Loot: return "loot";
    case RedActionKind::Probe: return "probe";
    }
    return "?";
}

nlohmann::json RedAction::to_json() const
{
    nlohmann::json j{{"action", std::string(to_string(kind))}, {"from", from}, {"target", target}};
    if (!path.empty())
        j["path"] = path;
    if (kind == RedActionKind::Probe)
        j["port"] = port;
    if (kind == RedActionKind::Exploit && !lucky)
        j["lucky"] = false;
    return j;
}

RedScript load_red_script(const nlohmann::json& doc, const sim::Topology& topo)
{
    if (!doc.is_object())
        throw ParseError("red: expected an object");
    RedScript s;
    s.id = doc.value("id", std::string("red"));
    if (!doc.contains("infection_node"))
        throw ValidationError("red.infection_node", "red script needs an infection node");
    s.infection_node = doc.at("infection_node").get<std::string>();
    if (!topo.has_node(s.infection_node))
        throw ValidationError("red.infection_node", "unknown node '" + s.infection_node + "'");
    if (doc.contains("vector")) {
        s.vector = doc.at("vector").get<std::string>();
        if (!topo.has_node(*s.vector))
            throw ValidationError("red.vector", "unknown node '" + *s.vector + "'");
    }
    s.infection_time = SimTime{doc.value("infection_time", Millis{0})};
    if (s.infection_time.ms < 0)
        throw ValidationError("red.infection_time", "infection time must be non-negative");
    s.scan_interval = doc.value("scan_interval", Millis{100});
    if (s.scan_interval <= 0)
        throw ValidationError("red.scan_interval", "scan interval must be positive");
    s.exploit_success_prob = doc.value("exploit_success_prob", 1.0);
    if (s.exploit_success_prob < 0.0 || s.exploit_success_prob > 1.0)
        throw ValidationError("red.exploit_success_prob", "probability out of [0,1]");
    s.abort_on_lockdown = doc.value("abort_on_lockdown", true);
    s.exploit_trigger = doc.value("exploit_trigger", std::string());
    if (!s.exploit_trigger.empty() && s.exploit_trigger != "diagnostics")
        throw ValidationError("red.exploit_trigger", "unknown trigger '" + s.exploit_trigger + "'");
    s.hijack_agents = doc.value("hijack_agents", false);
    s.exploit_path = doc.value("exploit_path", s.exploit_path);
    if (doc.contains("exploit_hash"))
        s.exploit_hash = substrate::parse_hash(doc.at("exploit_hash"));
    s.loot_paths = doc.value("loot_paths", std::vector<std::string>{});
    if (doc.contains("loot_port"))
        s.loot_port = doc.at("loot_port").get<int>();

    for (const auto& k : doc.value("target_kinds", std::vector<std::string>{})) {
        auto kind = sim::parse_node_kind(k);
        if (!kind)
            throw ValidationError("red.target_kinds", "unknown node kind '" + k + "'");
        s.target_kinds.push_back(*kind);
        for (const auto& id : topo.nodes_of_kind(*kind))
            if (id != s.infection_node && std::find(s.targets.begin(), s.targets.end(), id) == s.targets.end())
                s.targets.push_back(id);
    }
    return s;
}

namespace {

bool holds(const RedState& st, const NodeId& n)
{
    return std::find(st.footholds.begin(), st.footholds.end(), n) != st.footholds.end();
}

// Next scan target at or after the cursor. Recon skips refused targets;
// evasion keeps probing everything it does not yet hold.
std::optional<std::size_t> next_target(const RedScript& s, const RedState& st, bool include_refused)
{
    const std::size_t n = s.targets.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t idx = include_refused ? (st.cursor + i) % n : st.cursor + i;
        if (idx >= n)
            break;
        const NodeId& t = s.targets[idx];
        if (holds(st, t))
            continue;
        if (!include_refused && st.refused.count(t))
            continue;
        return idx;
    }
    return std::nullopt;
}

void scan_next(const RedScript& s, RedState& st, std::vector<RedAction>& out, bool evading)
{
    auto idx = next_target(s, st, evading);
    if (!idx)
        return;
    out.push_back({RedActionKind::Scan, st.footholds.front(), s.targets[*idx], {}, 0});
    st.cursor = *idx + 1;
}

void loot_or_idle(const RedScript& s, RedState& st, std::vector<RedAction>& out)
{
    if (st.looted < s.loot_paths.size()) {
        out.push_back({RedActionKind::Loot, st.footholds.front(), st.footholds.front(), s.loot_paths[st.looted], 0});
        ++st.looted;
    } else if (s.loot_port && st.looted == s.loot_paths.size()) {
        out.push_back({RedActionKind::Probe, st.footholds.front(), st.footholds.front(), {}, *s.loot_port});
        ++st.looted;
    }
}

} // namespace

RedStep red_step(const RedScript& s, const RedState& in, const RedObservation& obs, sim::Rng& rng)
{
    RedStep step{in, {}};
    RedState& st = step.state;
    auto& out = step.actions;

    if (st.phase == RedPhase::Neutralized)
        return step;

    if (st.phase == RedPhase::Dormant) {
        if (obs.now < s.infection_time)
            return step;
        st.phase = RedPhase::Recon;
        st.footholds = {s.infection_node};
        out.push_back({RedActionKind::Infect, s.vector.value_or(s.infection_node), s.infection_node, {}, 0});
        return step;
    }

    st.footholds = obs.footholds;
    if (st.footholds.empty())
        return step; // nothing left to act from; the harness neutralizes

    if (obs.exploit) {
        const ExploitResult& r = *obs.exploit;
        st.located.reset();
        if (r.success) {
            st.phase = RedPhase::Lateral; // the new foothold shows up in obs.footholds
        } else if (r.failure == "lockdown" && s.abort_on_lockdown) {
            st.refused.insert(r.target);
            st.phase = RedPhase::Evade;
            scan_next(s, st, out, true);
            return step;
        } else {
            st.phase = RedPhase::Recon;
        }
    }

    if (obs.scan && (st.phase == RedPhase::Recon || st.phase == RedPhase::Evade)) {
        const ScanResult& r = *obs.scan;
        if (!r.open_ports.empty() && !st.refused.count(r.target) && !holds(st, r.target)) {
            st.located = r.target;
            st.phase = RedPhase::Exploit;
        }
    }

    switch (st.phase) {
    case RedPhase::Exploit: {
        if (!st.located) {
            st.phase = RedPhase::Recon;
            scan_next(s, st, out, false);
            break;
        }
        if (s.exploit_trigger == "diagnostics" && !obs.diagnostics_seen)
            break;
        bool lucky = true;
        if (s.exploit_success_prob <= 0.0)
            lucky = false;
        else if (s.exploit_success_prob < 1.0)
            lucky = rng.bernoulli(s.exploit_success_prob);
        out.push_back({RedActionKind::Exploit, st.footholds.front(), *st.located, s.exploit_path, 0, lucky});
        break;
    }
    case RedPhase::Lateral:
        st.phase = RedPhase::Recon;
        scan_next(s, st, out, false);
        if (out.empty())
            loot_or_idle(s, st, out);
        break;
    case RedPhase::Recon:
        scan_next(s, st, out, false);
        if (out.empty())
            loot_or_idle(s, st, out);
        break;
    case RedPhase::Evade:
        scan_next(s, st, out, true);
        break;
    case RedPhase::Dormant:
    case RedPhase::Neutralized:
        break;
    }
    return step;
}

RedState neutralize(const RedState& state)
{
    if (state.phase == RedPhase::Dormant)
        throw NotPresentError("red agent is not present: not yet active");
    if (state.phase == RedPhase::Neutralized)
        throw NotPresentError("red agent is not present: already neutralized");
    RedState out = state;
    out.phase = RedPhase::Neutralized;
    out.footholds.clear();
    out.located.reset();
    return out;
}

} // namespace aica::red
