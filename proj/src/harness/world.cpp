#include "aica/harness/world.hpp"

#include "aica/core/errors.hpp"

#include <algorithm>
#include <cmath>

namespace aica::harness {

namespace {

constexpr int kMaxDecisionsPerInstant = 8;
const std::string kC2Name = "C2";

double round6(double x)
{
    return std::round(x * 1e6) / 1e6;
}

bool all_null(const decision::Plan& p, const decision::Repertoire& rep)
{
    for (const auto& s : p.steps) {
        const auto* a = rep.find(s.action);
        if (a && !a->is_null())
            return false;
    }
    return true;
}

nlohmann::json strings(const std::vector<std::string>& v)
{
    return nlohmann::json(v);
}

} // namespace

AgentRuntime::AgentRuntime(const AgentConfig& c, const sim::Topology& topo)
    : cfg(c),
      world(wsi::initial_world_state(topo, c.node)),
      context(c.context),
      auth(c.name),
      history(wsi::initial_world_state(topo, c.node)),
      dynamics(c.dynamics.value_or(memory::DynamicsTable{})),
      experience(c.experience.value_or(memory::ExperienceStore{}))
{
    responder.name = c.name;
    responder.capacity = c.capacities;
}

World::World(const Scenario& sc, std::optional<std::uint64_t> seed) : sc_(&sc)
{
    sim_ = std::make_unique<sim::Simulation>(sc.topology, seed.value_or(sc.seed));
    sub_ = std::make_unique<substrate::Substrate>(sim_->topology());
    for (const auto& [id, doc] : sc.nodes.items())
        substrate::load_node_state(sub_->node(id), doc, "nodes." + id);

    for (const auto& cfg : sc.agents) {
        auto a = std::make_unique<AgentRuntime>(cfg, sim_->topology());
        a->secret = *sc.keys.find(cfg.key_id);
        host_[cfg.node] = agents_.size();
        sub_->spawn_process(cfg.node, "aica-agent", substrate::ProcessOwner::BlueAgent, SimTime{0});
        agents_.push_back(std::move(a));
    }

    sub_->set_percept_listener([this](const NodeId& node) {
        for (auto& a : agents_) {
            const auto& obs = a->cfg.observes;
            if (node == a->cfg.node || std::find(obs.begin(), obs.end(), node) != obs.end())
                request_wake(*a);
        }
    });
    sim_->set_handler([this](sim::Simulation&, const sim::Event& ev) { handle(ev); });

    for (auto& a : agents_)
        request_wake(*a);
    if (sc.red)
        sim_->schedule(sc.red->infection_time, sc.red->infection_node, "red-wake");
    for (const auto& ev : sc.script)
        sim_->schedule(ev.t, ev.data.value("node", std::string()), "script", ev.data);
}

RunResult World::run()
{
    sim_->run_until(sc_->duration);
    for (auto& a : agents_)
        close_episode(*a, true);
    log_.honey_events = sub_->honey_events();
    return {sim_->trace_records(), compute_metrics(log_, sc_->metrics), log_};
}

const AgentRuntime& World::agent(const std::string& name) const
{
    for (const auto& a : agents_)
        if (a->cfg.name == name)
            return *a;
    throw std::out_of_range("no agent named '" + name + "'");
}

AgentRuntime* World::find_agent(const std::string& name)
{
    for (auto& a : agents_)
        if (a->cfg.name == name)
            return a.get();
    return nullptr;
}

AgentRuntime* World::agent_on(const NodeId& node)
{
    auto it = host_.find(node);
    return it == host_.end() ? nullptr : agents_[it->second].get();
}

collab::AgentIdentity World::identity(const AgentRuntime& a) const
{
    return {a.cfg.name, a.cfg.key_id, a.cfg.discoverable, a.cfg.node};
}

std::vector<collab::AgentIdentity> World::identities() const
{
    std::vector<collab::AgentIdentity> out;
    for (const auto& a : agents_)
        out.push_back(identity(*a));
    return out;
}

void World::handle(const sim::Event& ev)
{
    if (ev.kind == "deliver") {
        if (ev.message)
            on_deliver(*ev.message);
        return;
    }
    if (ev.kind == "red-wake") {
        on_red_wake();
        return;
    }
    if (ev.kind == "script") {
        on_script(ev.data);
        return;
    }
    if (ev.kind == "c2-reply") {
        c2_reply(ev.data.at("agent").get<std::string>());
        return;
    }
    AgentRuntime* a = find_agent(ev.data.value("agent", std::string()));
    if (!a)
        return;
    if (ev.kind == "wake") {
        on_wake(*a);
    } else if (ev.kind == "step-done") {
        on_step_done(*a, ev.data.at("token").get<std::uint64_t>());
    } else if (ev.kind == "c2-timeout") {
        on_c2_timeout(*a);
    } else if (ev.kind == "peer-timeout") {
        on_peer_timeout(*a);
    } else if (ev.kind == "auth-reply") {
        if (a->quarantined)
            return;
        const auto nonce = ev.data.at("nonce").get<std::string>();
        nlohmann::json body{{"nonce", nonce},
                            {"tag", collab::auth_response(a->secret, nonce, a->cfg.name)},
                            {"services", a->cfg.services},
                            {"capacities",
                             {{"memory", a->cfg.capacities.memory},
                              {"storage", a->cfg.capacities.storage},
                              {"cpu", a->cfg.capacities.cpu}}}};
        send_envelope(*a, collab::MessageType::Auth, ev.data.at("to").get<std::string>(), std::move(body));
    }
}

// ---- decision cycle --------------------------------------------------------

void World::request_wake(AgentRuntime& a)
{
    if (a.wake_pending || a.quarantined)
        return;
    a.wake_pending = true;
    sim_->schedule(sim_->now(), a.cfg.node, "wake", {{"agent", a.cfg.name}});
}

void World::on_wake(AgentRuntime& a)
{
    a.wake_pending = false;
    if (a.quarantined)
        return;
    sense(a);
    if (!a.running)
        decide(a, a.cfg.replans);
}

AbstractState World::abstract(const AgentRuntime& a) const
{
    return decision::abstract_state(a.world, a.context);
}

void World::sense(AgentRuntime& a)
{
    const SimTime now = sim_->now();
    const NodeId& self = a.cfg.node;

    std::vector<Percept> raw = wsi::collect(*sub_, self, now);
    ++sensing_reads_;
    for (const auto& n : a.cfg.observes) {
        if (n == self)
            continue;
        auto more = sub_->drain_percepts(n);
        ++sensing_reads_;
        raw.insert(raw.end(), more.begin(), more.end());
    }

    const auto batch = wsi::sanitize(raw, &a.sanitize);
    const auto env = wsi::identify_environment(batch, a.world.environment);
    if (env != a.world.environment)
        sim_->trace(self, "environment", {{"agent", a.cfg.name}, {"tag", std::string(wsi::to_string(env))}});
    for (int pid : wsi::decoy_accessors(batch, self))
        a.decoy_accessors.insert(pid);

    for (const auto& p : batch) {
        switch (p.kind) {
        case PerceptKind::IntegrityFinding:
            if (p.attr("node") == self && p.attr("authorized") == "false") {
                a.violated_paths.insert(p.attr("path"));
                a.context.insert("integrity_violation");
            }
            break;
        case PerceptKind::MessageReceived:
            if (p.attr("type") == "alert") {
                a.alerting_peers.insert(p.attr("from"));
                a.context.insert("peer_alert");
                if (a.alerting_peers.size() >= 2)
                    a.context.insert("peer_alerts_2");
                a.episode.push_back({now, std::nullopt, std::string("alert-received")});
                a.episode_percepts.push_back("alert-received");
            }
            break;
        case PerceptKind::HoneyEvent:
            a.context.insert("honey_triggered");
            break;
        case PerceptKind::Connection:
            if (p.attr("src") == self || p.attr("dst") == self) {
                int port = 0;
                try {
                    port = std::stoi(p.attr("port"));
                } catch (const std::logic_error&) {
                }
                a.history.append_flow({p.t, p.attr("src"), p.attr("dst"), port});
            }
            break;
        case PerceptKind::LogEvent:
            a.history.append_log(p.t, p.attr("event"));
            break;
        default:
            break;
        }
    }

    bool foe = false;
    for (const auto& pr : sub_->visible_processes(self))
        if (!pr.contained &&
            wsi::classify_friend_foe(pr, sc_->whitelists, a.decoy_accessors) == wsi::Affiliation::Foe)
            foe = true;
    if (foe)
        a.context.insert("foe_process");
    else
        a.context.erase("foe_process");

    const auto iocs = wsi::detect_anomaly(batch, sc_->whitelists, sc_->escalation);
    const wsi::WorldState prev = a.world;
    a.world.environment = env;
    a.world = wsi::update_world_state(a.world, iocs, now);
    a.history.append_metric(now, self, sub_->node(self).metrics);
    a.history.append_update(now, iocs, {}, a.world);

    for (const auto& ioc : iocs) {
        nlohmann::json d = ioc.to_json();
        d["agent"] = a.cfg.name;
        d["delta"] = round6(ioc.delta);
        sim_->trace(self, "ioc", std::move(d));
        log_.iocs.push_back({now, a.cfg.name, ioc.entity, ioc.reason});
        a.episode.push_back({now, std::nullopt, ioc.reason});
        a.episode_percepts.push_back(ioc.reason);
    }
    for (const auto& [id, e] : a.world.entities) {
        const auto& before = prev.entity(id);
        if (e.level != before.level)
            sim_->trace(self, "level",
                        {{"agent", a.cfg.name},
                         {"entity", id},
                         {"from", std::string(wsi::to_string(before.level))},
                         {"to", std::string(wsi::to_string(e.level))},
                         {"confidence", round6(e.confidence)}});
    }
    close_episode(a, false);
}

void World::close_episode(AgentRuntime& a, bool force)
{
    if (a.cfg.learning == memory::LearningMode::Off) {
        a.episode.clear();
        a.episode_percepts.clear();
        return;
    }
    if (a.episode.empty() || (!force && a.episode.size() < a.experience.chunk_length()))
        return;
    const double v = memory::assess_value(a.episode_percepts, sc_->severity);
    a.experience.record_episode(a.episode, v);
    a.episode.clear();
    a.episode_percepts.clear();
}

void World::decide(AgentRuntime& a, int replans_left)
{
    const SimTime now = sim_->now();
    if (now == a.last_decision) {
        if (++a.decisions_at_last > kMaxDecisionsPerInstant)
            return;
    } else {
        a.last_decision = now;
        a.decisions_at_last = 1;
    }

    const auto& rep = a.cfg.repertoire;
    const AbstractState s = abstract(a);
    decision::GoalProfile goals = a.cfg.goals;
    if (s.count("in_combat"))
        goals.urgency = true;
    decision::Selector sel(std::move(goals), rep);

    if (a.cfg.learning == memory::LearningMode::Active) {
        if (auto suffix = a.experience.match_episodes(a.recent_actions, a.cfg.cbr_min_value)) {
            decision::Plan p;
            p.plan_id = a.next_plan_id++;
            p.origin = "experience";
            AbstractState cur = s;
            bool ok = !suffix->empty();
            for (const auto& id : *suffix) {
                const auto* spec = rep.find(id);
                if (!spec || !spec->feasible_in(cur)) {
                    ok = false;
                    break;
                }
                cur = spec->apply(cur);
                p.steps.push_back({id, cur, 1.0});
            }
            if (ok) {
                p.outcome = {{cur, 1.0}};
                sel.offer(std::move(p));
            }
        }
    }

    if (!sel.stopped()) {
        const memory::DynamicsTable* dyn = a.dynamics.size() ? &a.dynamics : nullptr;
        a.next_plan_id += decision::plan(s, a.cfg.depth, a.cfg.branch, rep, dyn,
                                         [&](decision::Plan p) { return sel.offer(std::move(p)); },
                                         a.next_plan_id);
    }
    decision::Plan chosen = sel.result(s);
    ++a.cycles;
    if (chosen.steps.empty() || all_null(chosen, rep))
        return;
    start_plan(a, std::move(chosen), replans_left);
}

void World::start_plan(AgentRuntime& a, decision::Plan p, int replans_left)
{
    sim_->trace(a.cfg.node, "plan",
                {{"agent", a.cfg.name},
                 {"plan", p.plan_id},
                 {"actions", strings(p.action_ids())},
                 {"origin", p.origin},
                 {"score", round6(p.score.total)}});
    AgentRuntime::Running r;
    r.plan = std::move(p);
    r.replans_left = replans_left;
    a.running = std::move(r);
    a.responder.busy = true;
    begin_step(a);
}

void World::begin_step(AgentRuntime& a)
{
    auto& r = *a.running;
    const auto& rep = a.cfg.repertoire;
    while (r.step < r.plan.steps.size()) {
        const auto* spec = rep.find(r.plan.steps[r.step].action);
        if (spec && !spec->is_null())
            break;
        ++r.step;
    }
    if (r.step >= r.plan.steps.size()) {
        finish_plan(a, true, true);
        return;
    }
    const auto* spec = rep.find(r.plan.steps[r.step].action);
    r.before = abstract(a);
    r.token = a.next_token++;
    sim_->schedule(sim_->now() + spec->duration, a.cfg.node, "step-done",
                   {{"agent", a.cfg.name}, {"token", r.token}});
}

std::optional<NodeId> World::resolve_target(const AgentRuntime& a, const decision::ActionSpec& spec) const
{
    using T = decision::TargetSelector;
    switch (spec.target) {
    case T::Self:
        return a.cfg.node;
    case T::Peers:
        return NodeId("peers");
    case T::C2:
        if (sim_->topology().c2().empty())
            return std::nullopt;
        return sim_->topology().c2();
    case T::DistrustedPeer:
        if (!a.distrusted)
            return std::nullopt;
        for (const auto& b : agents_)
            if (b->cfg.name == *a.distrusted)
                return b->cfg.node;
        return std::nullopt;
    case T::MostSuspect:
        return a.world.most_suspect();
    case T::Node:
        return spec.target_node;
    }
    return std::nullopt;
}

void World::on_step_done(AgentRuntime& a, std::uint64_t token)
{
    if (!a.running || a.running->token != token || a.quarantined)
        return;
    const SimTime now = sim_->now();
    auto& r = *a.running;
    const auto& spec = *a.cfg.repertoire.find(r.plan.steps[r.step].action);
    const auto target = resolve_target(a, spec);

    std::vector<std::function<void()>> post;
    decision::StepResult res;
    if (!target) {
        res.status = decision::ExecStatus::WronglyDone;
        res.error = "no target for " + std::string(decision::to_string(spec.target));
    } else {
        std::vector<NodeId> nodes{a.cfg.node};
        if (*target != a.cfg.node && sub_->has_node(*target))
            nodes.push_back(*target);
        res = decision::run_atomic(*sub_, nodes, [&] { return execute(a, spec, *target, post); });
    }

    nlohmann::json detail{{"agent", a.cfg.name},
                          {"action", spec.id},
                          {"target", target.value_or("")},
                          {"status", std::string(decision::to_string(res.status))},
                          {"plan", r.plan.plan_id}};
    if (!spec.args.empty())
        detail["args"] = spec.args;
    if (!res.error.empty())
        detail["error"] = res.error;
    for (const auto& [k, v] : res.detail.items())
        detail[k] = v;
    sim_->trace(a.cfg.node, "command", std::move(detail));

    if (res.status == decision::ExecStatus::Done) {
        a.context = spec.apply(a.context);
        log_.resources_spent += spec.cost;
        a.recent_actions.push_back(spec.id);
        a.episode.push_back({now, spec.id, std::nullopt});
        for (auto& f : post)
            f();
    }
    if (a.cfg.learning != memory::LearningMode::Off)
        a.dynamics.record(r.before, spec.id, abstract(a));
    close_episode(a, false);

    if (!a.running || a.quarantined)
        return;
    const auto adj = decision::adjust(res, r.retries, r.replans_left);
    if (adj != decision::Adjustment::Continue)
        sim_->trace(a.cfg.node, "adjust",
                    {{"agent", a.cfg.name},
                     {"action", spec.id},
                     {"adjustment", std::string(decision::to_string(adj))}});
    switch (adj) {
    case decision::Adjustment::Continue:
        ++r.step;
        if (r.step < r.plan.steps.size())
            begin_step(a);
        else
            finish_plan(a, true, true);
        break;
    case decision::Adjustment::RetryStep:
        ++r.retries;
        begin_step(a);
        break;
    case decision::Adjustment::Replan: {
        const int left = r.replans_left - 1;
        finish_plan(a, false, false);
        if (!a.running)
            decide(a, left);
        break;
    }
    case decision::Adjustment::Collaborate:
        a.context.insert("needs_help");
        finish_plan(a, false, false);
        break;
    }
}

void World::finish_plan(AgentRuntime& a, bool ok, bool redecide)
{
    AgentRuntime::Running r = std::move(*a.running);
    a.running.reset();
    a.responder.busy = false;

    if (r.plan.origin == "c2" && a.c2.state() == collab::C2Session::State::Acknowledged) {
        const std::string text = a.c2.on_result(ok);
        sim_->trace(a.cfg.node, "c2-report", {{"agent", a.cfg.name}, {"text", text}});
        send_envelope(a, collab::MessageType::C2, kC2Name, {{"kind", "report"}, {"text", text}});
    }
    if (r.task_id) {
        for (auto& ag : a.responder.agreements)
            if (ag.task_id == *r.task_id)
                send_envelope(a, collab::MessageType::Negotiate, ag.requester,
                              {{"kind", "report"}, {"task_id", ag.task_id}, {"ok", ok}});
    }
    if (a.pending_order) {
        decision::Plan p = std::move(*a.pending_order);
        a.pending_order.reset();
        start_plan(a, std::move(p), a.cfg.replans);
        return;
    }
    if (redecide)
        decide(a, a.cfg.replans);
}

// ---- executors -------------------------------------------------------------

std::vector<AgentRuntime*> World::reachable_peers(AgentRuntime& a)
{
    auto found = collab::discover(identities(), a.cfg.name, a.cfg.node, sim_->topology());
    std::vector<AgentRuntime*> out;
    for (const auto& id : found) {
        if (!a.cfg.peers.empty() && std::find(a.cfg.peers.begin(), a.cfg.peers.end(), id.name) == a.cfg.peers.end())
            continue;
        out.push_back(find_agent(id.name));
    }
    return out;
}

decision::StepResult World::execute(AgentRuntime& a, const decision::ActionSpec& spec, const NodeId& target,
                                    std::vector<std::function<void()>>& post)
{
    using decision::ExecStatus;
    const SimTime now = sim_->now();
    const auto& args = spec.args;
    const std::string& ex = spec.executor;
    decision::StepResult res;

    auto wrongly = [&](std::string why) {
        res.status = ExecStatus::WronglyDone;
        res.error = std::move(why);
        return res;
    };

    if (spec.is_null() || ex == decision::kNullAction) {
        return res;
    }
    if (ex == "run_integrity_check") {
        auto findings = sub_->check_integrity(target, sc_->whitelists.baseline_for(target));
        std::vector<std::string> paths;
        for (const auto& f : findings)
            paths.push_back(f.path);
        res.detail["findings"] = paths;
        post.push_back([&a, paths, target] {
            if (target != a.cfg.node)
                return;
            for (const auto& p : paths)
                a.violated_paths.insert(p);
            if (!paths.empty())
                a.context.insert("integrity_violation");
        });
        return res;
    }
    if (ex == "run_antivirus_scan") {
        std::vector<std::string> bad;
        for (const auto& [path, f] : sub_->node(target).files)
            if (sc_->whitelists.blacklist.count(f.content_hash))
                bad.push_back(path);
        res.detail["malicious"] = bad;
        post.push_back([&a, bad] {
            for (const auto& p : bad)
                a.malicious_paths.insert(p);
            if (!bad.empty())
                a.context.insert("malicious_file");
        });
        return res;
    }
    if (ex == "delete_file") {
        std::vector<std::string> paths;
        if (args.contains("path"))
            paths.push_back(args.at("path").get<std::string>());
        else
            paths.assign(a.malicious_paths.begin(), a.malicious_paths.end());
        if (paths.empty())
            return wrongly("nothing to delete");
        for (const auto& p : paths)
            if (auto err = sub_->delete_file(target, p, args.value("privileged", true), now))
                return wrongly(*err);
        post.push_back([&a, paths] {
            for (const auto& p : paths)
                a.malicious_paths.erase(p);
        });
        return res;
    }
    if (ex == "restore_file_from_backup") {
        std::vector<std::string> paths;
        if (args.contains("path"))
            paths.push_back(args.at("path").get<std::string>());
        else
            paths.assign(a.violated_paths.begin(), a.violated_paths.end());
        for (const auto& p : paths)
            if (!sub_->restore_file(target, p, now))
                return wrongly("no backup for " + p);
        res.detail["restored"] = paths;
        post.push_back([&a] { a.violated_paths.clear(); });
        return res;
    }
    if (ex == "quarantine_process" || ex == "quarantine_agent") {
        std::vector<int> killed;
        for (const auto& pr : sub_->visible_processes(target))
            if (pr.owner == substrate::ProcessOwner::Unknown || sc_->whitelists.bad_images.count(pr.image) ||
                (target == a.cfg.node && a.decoy_accessors.count(pr.pid))) {
                sub_->kill_process(target, pr.pid, now);
                killed.push_back(pr.pid);
            }
        res.detail["killed"] = killed;
        const bool reset_self = args.value("reset", false);
        const bool agent_too = ex == "quarantine_agent";
        post.push_back([this, &a, target, reset_self, agent_too] {
            if (reset_self && target == a.cfg.node) {
                wsi::reset_entity(a.world, a.cfg.node);
                a.history.append_update(sim_->now(), {}, {a.cfg.node}, a.world);
            }
            if (agent_too)
                if (AgentRuntime* b = agent_on(target); b && b != &a) {
                    b->quarantined = true;
                    b->running.reset();
                    b->pending_order.reset();
                    b->responder.busy = false;
                    a.context.insert("peer_quarantined");
                }
            check_neutralized();
        });
        return res;
    }
    if (ex == "overwrite_agent_image") {
        AgentRuntime* b = agent_on(target);
        if (!b || b == &a)
            return wrongly("no agent on " + target);
        post.push_back([this, &a, b] {
            b->secret = *sc_->keys.find(b->cfg.key_id);
            b->hijacked = false;
            b->quarantined = false;
            b->world = wsi::initial_world_state(sim_->topology(), b->cfg.node);
            b->context = b->cfg.context;
            b->running.reset();
            a.context.erase("peer_compromised");
            a.context.erase("peer_quarantined");
            if (a.distrusted == b->cfg.name)
                a.distrusted.reset();
            check_neutralized();
        });
        return res;
    }
    if (ex == "lockdown_node") {
        sub_->set_lockdown(target, true, now);
        return res;
    }
    if (ex == "remap_port") {
        const int from = args.value("from", 0);
        const int to = args.value("to", 0);
        sub_->remap_port(target, from, to, args.value("decoy", true), now);
        return res;
    }
    if (ex == "deploy_decoy") {
        const auto kind_name = args.value("kind", std::string("fake-file"));
        auto kind = substrate::parse_decoy_kind(kind_name);
        if (!kind)
            return wrongly("unknown decoy kind " + kind_name);
        std::string locator = args.value("locator", std::string());
        if (locator.empty())
            locator = *kind == substrate::DecoyKind::HoneypotNode ? target : "/decoy/" + a.cfg.name;
        auto handle = sub_->deploy_decoy(target, *kind, locator, now);
        res.detail["decoy"] = handle.id;
        if (args.value("isolate", false)) {
            std::vector<int> contained;
            for (auto& [pid, pr] : sub_->node(target).processes)
                if (pr.owner != substrate::ProcessOwner::System && pr.owner != substrate::ProcessOwner::BlueAgent &&
                    !sc_->whitelists.process_images.count(pr.image)) {
                    pr.contained = true;
                    contained.push_back(pid);
                }
            res.detail["contained"] = contained;
        }
        return res;
    }
    if (ex == "notify_peer") {
        auto peers = reachable_peers(a);
        if (peers.empty())
            return wrongly("no reachable peers");
        const bool await = args.value("await", true);
        const std::string subject = a.world.most_suspect();
        std::vector<std::pair<std::string, std::string>> sends;
        for (AgentRuntime* p : peers)
            sends.emplace_back(p->cfg.name, await ? a.auth.issue_challenge(p->cfg.name, sim_->rng().next()) : "");
        nlohmann::json names = nlohmann::json::array();
        for (const auto& [n, nonce] : sends)
            names.push_back(n);
        res.detail["peers"] = names;
        res.detail["subject"] = subject;
        post.push_back([this, &a, sends, subject, await] {
            const SimTime t = sim_->now();
            for (const auto& [name, nonce] : sends) {
                nlohmann::json body{{"subject", subject},
                                    {"level", std::string(wsi::to_string(a.world.entity(subject).level))}};
                if (await) {
                    body["nonce"] = nonce;
                    a.awaiting_peers.insert(name);
                }
                send_envelope(a, collab::MessageType::Alert, name, std::move(body));
            }
            if (await)
                sim_->schedule(t + a.cfg.peer_timeout, a.cfg.node, "peer-timeout", {{"agent", a.cfg.name}});
            log_.cries.push_back({t, a.cfg.name, "peers", subject});
        });
        return res;
    }
    if (ex == "query_c2") {
        if (!sc_->c2 || sim_->topology().c2().empty())
            return wrongly("no C2 configured");
        const std::string subject = a.world.most_suspect();
        res.detail["subject"] = subject;
        post.push_back([this, &a, subject] {
            const SimTime t = sim_->now();
            const std::string question = "advise: " + subject + " " +
                                         std::string(wsi::to_string(a.world.entity(subject).level));
            const SimTime deadline = a.c2.start(question, t, a.cfg.c2_timeout);
            send_envelope(a, collab::MessageType::C2, kC2Name,
                          {{"kind", "query"}, {"question", question}, {"subject", subject}});
            sim_->schedule(deadline, a.cfg.node, "c2-timeout", {{"agent", a.cfg.name}});
            log_.cries.push_back({t, a.cfg.name, "c2", subject});
        });
        return res;
    }
    if (ex == "shut_down_service") {
        auto& ports = sub_->node(target).ports;
        if (args.contains("port")) {
            auto it = ports.find(args.at("port").get<int>());
            if (it == ports.end() || !it->second.open)
                return wrongly("port not open");
            it->second.open = false;
        } else {
            for (auto& [port, entry] : ports)
                if (entry.authenticity == substrate::Authenticity::Real)
                    entry.open = false;
        }
        sub_->append_log(target, "service shut down", now);
        return res;
    }
    if (ex == "run_diagnostics") {
        sub_->append_log(target, "diagnostics-started", now);
        return res;
    }
    if (ex == "negotiate") {
        collab::NegotiationRequest req;
        req.requester = a.cfg.name;
        req.task_id = a.cfg.name + "-task-" + std::to_string(a.envelope_seq + 1);
        req.action = args.value("action", std::string());
        if (args.contains("requirements")) {
            const auto& q = args.at("requirements");
            req.requirements = {q.value("memory", 0.0), q.value("storage", 0.0), q.value("cpu", 0.0)};
        }
        req.terms = args.value("terms", std::string("immediate"));
        auto targets = collab::negotiation_targets(req, a.registry, a.trust);
        if (targets.empty())
            return wrongly("no trusted peer can take the task");
        res.detail["peer"] = targets.front();
        res.detail["task_id"] = req.task_id;
        post.push_back([this, &a, req, to = targets.front()] {
            send_envelope(a, collab::MessageType::Negotiate, to,
                          {{"kind", "request"},
                           {"task_id", req.task_id},
                           {"action", req.action},
                           {"terms", req.terms},
                           {"requirements",
                            {{"memory", req.requirements.memory},
                             {"storage", req.requirements.storage},
                             {"cpu", req.requirements.cpu}}}});
        });
        return res;
    }
    return wrongly("no executor named " + ex);
}

// ---- messaging -------------------------------------------------------------

void World::send_envelope(AgentRuntime& a, collab::MessageType type, const std::string& to, nlohmann::json body)
{
    NodeId dst;
    if (to == kC2Name) {
        dst = sim_->topology().c2();
    } else if (AgentRuntime* b = find_agent(to)) {
        dst = b->cfg.node;
    } else {
        return;
    }
    collab::Envelope env;
    env.type = type;
    env.from = a.cfg.name;
    env.to = to;
    env.seq = ++a.envelope_seq;
    env.body = std::move(body);
    env.sign(a.secret);

    sim::Message m;
    m.src = a.cfg.node;
    m.dst = dst;
    m.kind = type == collab::MessageType::C2 ? sim::MessageKind::C2Protocol : sim::MessageKind::AgentProtocol;
    m.payload = env.serialize();
    m.signature = env.sig;
    try {
        sim_->send(std::move(m));
    } catch (const sim::NoRouteError&) {
        sim_->trace(a.cfg.node, "transmit", {{"dst", dst}, {"delivered", false}, {"reason", "no-route"}});
    }
}

void World::on_deliver(const sim::Message& m)
{
    if (m.kind == sim::MessageKind::C2Protocol && m.dst == sim_->topology().c2()) {
        c2_receive(m);
        return;
    }
    if (AgentRuntime* a = agent_on(m.dst))
        agent_receive(*a, m);
}

void World::auth_failure(AgentRuntime& a, const std::string& peer, const std::string& reason)
{
    sim_->trace(a.cfg.node, "auth", {{"agent", a.cfg.name}, {"peer", peer}, {"result", reason}});
    const double score = a.trust.update(peer, collab::TrustEvidence::AuthFail);
    sim_->trace(a.cfg.node, "trust", {{"agent", a.cfg.name}, {"peer", peer}, {"score", round6(score)}});
    ++a.discarded;
    a.awaiting_peers.erase(peer);
    if (peer != kC2Name) {
        a.context.insert("peer_compromised");
        a.distrusted = peer;
    }
    request_wake(a);
}

void World::agent_receive(AgentRuntime& a, const sim::Message& m)
{
    if (a.quarantined)
        return;
    collab::Envelope env;
    try {
        env = collab::Envelope::parse(m.payload);
    } catch (const ParseError&) {
        ++a.discarded;
        sim_->trace(a.cfg.node, "receive", {{"agent", a.cfg.name}, {"error", "malformed"}});
        return;
    }
    sim_->trace(a.cfg.node, "receive",
                {{"agent", a.cfg.name}, {"from", env.from}, {"type", std::string(collab::to_string(env.type))}});

    const std::string* key = nullptr;
    AgentRuntime* sender = nullptr;
    if (env.from == kC2Name) {
        if (sc_->c2)
            key = sc_->keys.find(sc_->c2->key_id);
    } else if ((sender = find_agent(env.from))) {
        key = sc_->keys.find(sender->cfg.key_id);
    }
    if (!key) {
        auth_failure(a, env.from, std::string(collab::to_string(collab::AuthResult::UnknownKey)));
        return;
    }
    if (!env.verify(*key)) {
        auth_failure(a, env.from, std::string(collab::to_string(collab::AuthResult::BadSignature)));
        return;
    }

    switch (env.type) {
    case collab::MessageType::Alert: {
        Percept p;
        p.t = sim_->now();
        p.source = PerceptSource::System;
        p.kind = PerceptKind::MessageReceived;
        p.attributes = {{"from", env.from}, {"type", "alert"}, {"subject", env.body.value("subject", std::string())}};
        if (env.body.contains("nonce"))
            sim_->schedule(sim_->now() + a.cfg.reply_delay, a.cfg.node, "auth-reply",
                           {{"agent", a.cfg.name}, {"to", env.from}, {"nonce", env.body.at("nonce")}});
        sub_->enqueue_percept(a.cfg.node, std::move(p));
        break;
    }
    case collab::MessageType::Auth: {
        if (!sender)
            break;
        const auto res = a.auth.authenticate(identity(*sender), env.body.value("nonce", std::string()),
                                             env.body.value("tag", std::string()), sc_->keys);
        if (res != collab::AuthResult::Ok) {
            auth_failure(a, env.from, std::string(collab::to_string(res)));
            break;
        }
        sim_->trace(a.cfg.node, "auth", {{"agent", a.cfg.name}, {"peer", env.from}, {"result", "ok"}});
        a.awaiting_peers.erase(env.from);
        collab::ServiceRecord rec;
        rec.agent = env.from;
        rec.services = env.body.value("services", std::vector<std::string>{});
        if (env.body.contains("capacities")) {
            const auto& c = env.body.at("capacities");
            rec.capacities = {c.value("memory", 0.0), c.value("storage", 0.0), c.value("cpu", 0.0)};
        }
        rec.t = sim_->now();
        a.registry.declare(rec, a.auth);
        a.context.insert("peers_responded");
        if (a.awaiting_peers.empty())
            a.context.erase("peers_pending");
        request_wake(a);
        break;
    }
    case collab::MessageType::C2:
        handle_order(a, env.body);
        break;
    case collab::MessageType::Negotiate:
        handle_negotiation(a, env.from, env.body);
        break;
    case collab::MessageType::Scd:
    case collab::MessageType::Discover:
        break;
    }
}

void World::handle_order(AgentRuntime& a, const nlohmann::json& body)
{
    const auto kind = body.value("kind", std::string());
    if (a.c2.state() != collab::C2Session::State::Awaiting) {
        sim_->trace(a.cfg.node, "c2-late", {{"agent", a.cfg.name}, {"kind", kind}});
        return;
    }
    a.context.erase("c2_pending");
    if (kind != "order") {
        a.context.insert("c2_answered");
        a.c2.on_reply("", false, "no order");
        request_wake(a);
        return;
    }
    const auto action = body.value("action", std::string());
    const auto* spec = a.cfg.repertoire.find(action);
    const AbstractState s = abstract(a);
    std::string reason;
    if (!spec)
        reason = "no permission";
    else if (!spec->feasible_in(s))
        reason = "preconditions not met";
    const std::string ack = a.c2.on_reply(action, reason.empty(), reason);
    sim_->trace(a.cfg.node, "c2-ack", {{"agent", a.cfg.name}, {"order", action}, {"text", ack}});
    send_envelope(a, collab::MessageType::C2, kC2Name, {{"kind", "ack"}, {"text", ack}});
    a.context.insert("c2_answered");
    if (!reason.empty()) {
        request_wake(a);
        return;
    }
    decision::Plan p;
    p.plan_id = a.next_plan_id++;
    p.origin = "c2";
    p.steps.push_back({action, spec->apply(s), 1.0});
    p.outcome = {{spec->apply(s), 1.0}};
    if (a.running)
        a.pending_order = std::move(p);
    else
        start_plan(a, std::move(p), a.cfg.replans);
}

void World::handle_negotiation(AgentRuntime& a, const std::string& from, const nlohmann::json& body)
{
    const auto kind = body.value("kind", std::string());
    const auto task = body.value("task_id", std::string());
    if (kind == "request") {
        if (!a.auth.authenticated(from) && a.trust.excluded(from))
            return;
        collab::NegotiationRequest req;
        req.task_id = task;
        req.requester = from;
        req.action = body.value("action", std::string());
        req.terms = body.value("terms", std::string("immediate"));
        if (body.contains("requirements")) {
            const auto& q = body.at("requirements");
            req.requirements = {q.value("memory", 0.0), q.value("storage", 0.0), q.value("cpu", 0.0)};
        }
        const auto resp = collab::respond(a.responder, req, sim_->now());
        sim_->trace(a.cfg.node, "negotiation",
                    {{"agent", a.cfg.name}, {"peer", from}, {"task_id", task}, {"response", resp.to_json()}});
        nlohmann::json out = resp.to_json();
        out["kind"] = "response";
        out["task_id"] = task;
        send_envelope(a, collab::MessageType::Negotiate, from, std::move(out));
        if (resp.kind == collab::ResponseKind::Accept) {
            const auto& ag = a.responder.agreements.back();
            sim_->trace(a.cfg.node, "agreement", ag.to_json());
            if (const auto* spec = a.cfg.repertoire.find(req.action); spec && !a.running) {
                decision::Plan p;
                p.plan_id = a.next_plan_id++;
                p.origin = "agreement";
                p.steps.push_back({req.action, spec->apply(abstract(a)), 1.0});
                start_plan(a, std::move(p), a.cfg.replans);
                if (a.running)
                    a.running->task_id = task;
            }
        }
        return;
    }
    if (kind == "response") {
        sim_->trace(a.cfg.node, "negotiation",
                    {{"agent", a.cfg.name}, {"peer", from}, {"task_id", task}, {"response", body}});
        try {
            if (collab::NegotiationResponse::from_json(body).kind == collab::ResponseKind::Accept)
                a.context.insert("help_agreed");
        } catch (const std::exception&) {
            ++a.discarded;
        }
        request_wake(a);
        return;
    }
    if (kind == "report") {
        const double score = a.trust.update(from, body.value("ok", false) ? collab::TrustEvidence::AgreementHonored
                                                                          : collab::TrustEvidence::AgreementBroken);
        sim_->trace(a.cfg.node, "trust", {{"agent", a.cfg.name}, {"peer", from}, {"score", round6(score)}});
    }
}

void World::on_c2_timeout(AgentRuntime& a)
{
    if (a.quarantined || !a.c2.on_timeout(sim_->now()))
        return;
    sim_->trace(a.cfg.node, "local-decision", {{"agent", a.cfg.name}, {"reason", "c2-timeout"}});
    a.context.erase("c2_pending");
    a.context.insert("c2_unreachable");
    request_wake(a);
}

void World::on_peer_timeout(AgentRuntime& a)
{
    if (a.quarantined || a.awaiting_peers.empty() || !a.context.count("peers_pending"))
        return;
    sim_->trace(a.cfg.node, "local-decision",
                {{"agent", a.cfg.name},
                 {"reason", "peer-timeout"},
                 {"unanswered", std::vector<std::string>(a.awaiting_peers.begin(), a.awaiting_peers.end())}});
    a.context.erase("peers_pending");
    a.context.insert("peers_unresponsive");
    request_wake(a);
}

// ---- scripted C2 -----------------------------------------------------------

void World::c2_receive(const sim::Message& m)
{
    const NodeId& c2 = sim_->topology().c2();
    collab::Envelope env;
    try {
        env = collab::Envelope::parse(m.payload);
    } catch (const ParseError&) {
        return;
    }
    AgentRuntime* sender = find_agent(env.from);
    if (!sender || !sc_->c2)
        return;
    if (!env.verify(*sc_->keys.find(sender->cfg.key_id))) {
        sim_->trace(c2, "c2-reject", {{"from", env.from}, {"reason", "bad-signature"}});
        return;
    }
    const auto kind = env.body.value("kind", std::string());
    sim_->trace(c2, "c2-received", {{"from", env.from}, {"kind", kind}, {"text", env.body.value("text", std::string())}});
    if (kind == "query")
        sim_->schedule(sim_->now() + sc_->c2->reply_delay, c2, "c2-reply", {{"agent", env.from}});
}

void World::c2_reply(const std::string& agent)
{
    AgentRuntime* a = find_agent(agent);
    if (!a || !sc_->c2)
        return;
    collab::Envelope env;
    env.type = collab::MessageType::C2;
    env.from = kC2Name;
    env.to = agent;
    env.seq = c2_next_order_ + 1;
    if (c2_next_order_ < sc_->c2->orders.size()) {
        env.body = sc_->c2->orders[c2_next_order_++];
        env.body["kind"] = "order";
    } else {
        env.body = {{"kind", "no-order"}};
    }
    env.sign(*sc_->keys.find(sc_->c2->key_id));
    sim::Message m;
    m.src = sim_->topology().c2();
    m.dst = a->cfg.node;
    m.kind = sim::MessageKind::C2Protocol;
    m.payload = env.serialize();
    m.signature = env.sig;
    try {
        sim_->send(std::move(m));
    } catch (const sim::NoRouteError&) {
    }
}

// ---- red and script --------------------------------------------------------

std::vector<NodeId> World::red_footholds() const
{
    std::vector<NodeId> out;
    for (const auto& [node, pid] : red_pids_) {
        const auto& procs = sub_->node(node).processes;
        auto it = procs.find(pid);
        if (it != procs.end() && !it->second.contained &&
            std::find(out.begin(), out.end(), node) == out.end())
            out.push_back(node);
    }
    return out;
}

void World::on_red_wake()
{
    if (!sc_->red)
        return;
    const auto& script = *sc_->red;
    red_obs_.now = sim_->now();
    red_obs_.footholds = red_footholds();
    red_obs_.diagnostics_seen = false;
    for (const auto& node : red_obs_.footholds)
        for (const auto& e : sub_->node(node).log)
            if (e.event == "diagnostics-started")
                red_obs_.diagnostics_seen = true;

    const red::RedPhase before = red_.phase;
    red::RedStep step = red::red_step(script, red_, red_obs_, sim_->rng());
    red_ = step.state;
    red_obs_.scan.reset();
    red_obs_.exploit.reset();
    for (const auto& act : step.actions)
        apply_red(act);
    if (red_.phase != before)
        sim_->trace(script.infection_node, "red-phase",
                    {{"red", script.id},
                     {"from", std::string(red::to_string(before))},
                     {"to", std::string(red::to_string(red_.phase))}});
    if (red_.phase != red::RedPhase::Neutralized)
        sim_->schedule(sim_->now() + script.scan_interval, script.infection_node, "red-wake");
}

void World::apply_red(const red::RedAction& act)
{
    const auto& script = *sc_->red;
    const SimTime now = sim_->now();
    nlohmann::json d = act.to_json();
    d["red"] = script.id;
    const std::string kind(red::to_string(act.kind));
    log_.red.push_back({now, kind, act.from, act.target});

    auto red_pid = [&](const NodeId& node) {
        for (const auto& [n, pid] : red_pids_)
            if (n == node)
                return pid;
        return 0;
    };

    switch (act.kind) {
    case red::RedActionKind::Infect:
        red_pids_.emplace_back(act.target, sub_->spawn_process(act.target, "implant", substrate::ProcessOwner::RedAgent, now));
        break;
    case red::RedActionKind::Scan: {
        auto ports = sub_->scan_ports(act.target, act.from, now);
        red_obs_.scan = red::ScanResult{act.target, ports};
        d["ports"] = ports;
        break;
    }
    case red::RedActionKind::Exploit: {
        red::ExploitResult r{act.target, false, {}};
        if (!act.lucky) {
            r.failure = "unlucky";
        } else {
            try {
                sub_->write_file(act.target, act.path, script.exploit_hash, false, now);
                r.success = true;
            } catch (const substrate::SubstrateError& e) {
                r.failure = e.code();
            }
        }
        if (r.success) {
            red_pids_.emplace_back(act.target,
                                   sub_->spawn_process(act.target, "implant", substrate::ProcessOwner::RedAgent, now));
            if (script.hijack_agents)
                if (AgentRuntime* b = agent_on(act.target)) {
                    b->secret = "red:" + script.id;
                    b->hijacked = true;
                    d["hijacked"] = b->cfg.name;
                }
        }
        d["success"] = r.success;
        if (!r.success)
            d["failure"] = r.failure;
        red_obs_.exploit = r;
        break;
    }
    case red::RedActionKind::Loot:
        sub_->read_file(act.target, act.path, red_pid(act.from), act.from, now);
        break;
    case red::RedActionKind::Probe:
        sub_->connect(act.target, act.port, red_pid(act.from), act.from, now);
        break;
    }
    sim_->trace(act.from, "red", std::move(d));
}

void World::check_neutralized()
{
    if (!sc_->red || red_.phase == red::RedPhase::Dormant || red_.phase == red::RedPhase::Neutralized)
        return;
    if (!red_footholds().empty())
        return;
    const red::RedPhase before = red_.phase;
    red_ = red::neutralize(red_);
    const SimTime now = sim_->now();
    for (const auto& [node, pid] : red_pids_)
        sub_->kill_process(node, pid, now);
    red_pids_.clear();
    log_.neutralized_at = now;
    sim_->trace(sc_->red->infection_node, "red-neutralized",
                {{"red", sc_->red->id}, {"from", std::string(red::to_string(before))}});
}

void World::on_script(const nlohmann::json& data)
{
    const SimTime now = sim_->now();
    const auto kind = data.value("kind", std::string());
    const auto node = data.value("node", std::string());
    nlohmann::json d = data;
    d.erase("t");
    d.erase("kind");
    d["event"] = kind;
    sim_->trace(node.empty() ? data.value("src", std::string()) : node, "script", d);

    const bool red = data.value("red", false);
    if (kind == "red-event") {
        const auto action = data.value("action", std::string("infect"));
        if (action == "compromise")
            sub_->write_file(node, data.value("path", std::string("/etc/config")),
                             substrate::parse_hash(data.value("hash", nlohmann::json(0xbadbadbadbadULL))), false, now);
        red_pids_.emplace_back(node, sub_->spawn_process(node, "implant", substrate::ProcessOwner::RedAgent, now));
        log_.red.push_back({now, action == "compromise" ? "compromise" : "infect",
                            data.value("from", node), node});
    } else if (kind == "connection") {
        const auto src = data.at("src").get<std::string>();
        const auto dst = data.at("dst").get<std::string>();
        sub_->record_connection(src, dst, data.value("port", 0), now);
        if (red)
            log_.red.push_back({now, "connection", src, dst});
    } else if (kind == "write_file") {
        sub_->write_file(node, data.at("path").get<std::string>(), substrate::parse_hash(data.at("hash")),
                         data.value("authorized", false), now);
        if (red)
            log_.red.push_back({now, "write", node, node});
    } else if (kind == "functional-anomaly") {
        sub_->report_functional_anomaly(node, data.value("detail", std::string("malfunction")), now);
        if (red)
            log_.red.push_back({now, "functional-anomaly", node, node});
    } else if (kind == "env-marker") {
        sub_->report_marker(node, data.at("marker").get<std::string>(), now);
    } else if (kind == "set-metrics") {
        auto& m = sub_->node(node).metrics;
        m.cpu_load = data.value("cpu_load", m.cpu_load);
        m.mem_used = data.value("mem_used", m.mem_used);
    }
}

RunResult run_scenario(const Scenario& sc, std::optional<std::uint64_t> seed)
{
    World w(sc, seed);
    return w.run();
}

} // namespace aica::harness
