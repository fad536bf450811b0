#include "aica/decision/decision.hpp"

#include "aica/core/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace aica::decision {

namespace {

constexpr std::array<std::pair<Category, std::string_view>, 8> kCategories{{
    {Category::Admin, "admin"},
    {Category::Antivirus, "antivirus"},
    {Category::Integrity, "integrity"},
    {Category::ActiveDefense, "active-defense"},
    {Category::Proxy, "proxy"},
    {Category::Comms, "comms"},
    {Category::Collaboration, "collaboration"},
    {Category::Null, "null"},
}};

constexpr std::array<std::pair<TargetSelector, std::string_view>, 6> kTargets{{
    {TargetSelector::Self, "self"},
    {TargetSelector::Peers, "peers"},
    {TargetSelector::C2, "c2"},
    {TargetSelector::DistrustedPeer, "distrusted-peer"},
    {TargetSelector::MostSuspect, "most-suspect"},
    {TargetSelector::Node, "node"},
}};

ActionSpec make(std::string id, Category cat, AbstractState needs, AbstractState forbids, AbstractState adds,
                AbstractState removes, double cost, double risk, Millis duration,
                TargetSelector target = TargetSelector::Self)
{
    ActionSpec a;
    a.executor = id;
    a.id = std::move(id);
    a.category = cat;
    a.needs = std::move(needs);
    a.forbids = std::move(forbids);
    a.adds = std::move(adds);
    a.removes = std::move(removes);
    a.cost = cost;
    a.risk = risk;
    a.duration = duration;
    a.target = target;
    return a;
}

AbstractState flag_set(const nlohmann::json& j, const char* key, const AbstractState& fallback)
{
    if (!j.contains(key))
        return fallback;
    return j.at(key).get<AbstractState>();
}

} // namespace

std::string_view to_string(Category c)
{
    for (const auto& [v, n] : kCategories)
        if (v == c)
            return n;
    return "?";
}

std::optional<Category> parse_category(std::string_view s)
{
    for (const auto& [v, n] : kCategories)
        if (n == s)
            return v;
    return std::nullopt;
}

std::string_view to_string(TargetSelector t)
{
    for (const auto& [v, n] : kTargets)
        if (v == t)
            return n;
    return "?";
}

std::optional<TargetSelector> parse_target_selector(std::string_view s)
{
    for (const auto& [v, n] : kTargets)
        if (n == s)
            return v;
    return std::nullopt;
}

bool ActionSpec::feasible_in(const AbstractState& s) const
{
    for (const auto& f : needs)
        if (!s.count(f))
            return false;
    for (const auto& f : forbids)
        if (s.count(f))
            return false;
    return true;
}

AbstractState ActionSpec::apply(const AbstractState& s) const
{
    AbstractState out;
    for (const auto& f : s)
        if (!removes.count(f))
            out.insert(f);
    out.insert(adds.begin(), adds.end());
    return out;
}

Repertoire Repertoire::core()
{
    using C = Category;
    using T = TargetSelector;
    Repertoire r;
    r.add(make(std::string(kNullAction), C::Null, {}, {}, {}, {}, 0, 0, 0));
    r.add(make("run_integrity_check", C::Integrity, {}, {"integrity_checked"}, {"integrity_checked"}, {}, 1, 0, 100));
    r.add(make("run_antivirus_scan", C::Antivirus, {}, {"av_scanned"}, {"av_scanned"}, {}, 2, 0, 500));
    r.add(make("delete_file", C::Antivirus, {"malicious_file"}, {}, {}, {"malicious_file"}, 1, 0.1, 50));
    r.add(make("restore_file_from_backup", C::Integrity, {"integrity_violation"}, {},
               {"restored"}, {"integrity_violation"}, 2, 0.05, 200));
    r.add(make("quarantine_process", C::Admin, {"foe_process"}, {}, {"red_contained"}, {"foe_process"}, 2, 0.1, 100));
    r.add(make("lockdown_node", C::Admin, {"self_suspect"}, {"locked_down"}, {"locked_down"}, {}, 3, 0.2, 100));
    r.add(make("remap_port", C::ActiveDefense, {"self_suspect"}, {"ports_remapped"}, {"ports_remapped"}, {}, 2, 0.1,
               200));
    r.add(make("deploy_decoy", C::ActiveDefense, {"self_suspect"}, {"decoy_deployed"}, {"decoy_deployed"}, {}, 2, 0.05,
               200));
    r.add(make("notify_peer", C::Collaboration, {"self_suspect"}, {"peers_pending", "peers_alerted"},
               {"peers_pending"}, {}, 0.5, 0, 20, T::Peers));
    r.add(make("query_c2", C::Comms, {"self_suspect"}, {"c2_pending", "c2_unreachable"}, {"c2_pending"}, {}, 0.5, 0,
               20, T::C2));
    r.add(make("overwrite_agent_image", C::Admin, {"peer_compromised"}, {"peer_restored"}, {"peer_restored"}, {}, 3,
               0.1, 300, T::DistrustedPeer));
    r.add(make("shut_down_service", C::Admin, {"self_suspect"}, {"service_down"}, {"service_down"}, {}, 2, 0.3, 100));
    return r;
}

void Repertoire::add(ActionSpec a)
{
    for (auto& existing : actions_)
        if (existing.id == a.id) {
            existing = std::move(a);
            return;
        }
    actions_.push_back(std::move(a));
}

const ActionSpec* Repertoire::find(std::string_view id) const
{
    for (const auto& a : actions_)
        if (a.id == id)
            return &a;
    return nullptr;
}

const ActionSpec& Repertoire::null_action() const
{
    for (const auto& a : actions_)
        if (a.is_null())
            return a;
    throw std::logic_error("repertoire without a null action");
}

std::size_t Repertoire::index_of(std::string_view id) const
{
    for (std::size_t i = 0; i < actions_.size(); ++i)
        if (actions_[i].id == id)
            return i;
    return actions_.size();
}

ActionSpec load_action(const nlohmann::json& j, const ActionSpec* base)
{
    if (!j.is_object() || !j.contains("id"))
        throw ParseError("repertoire: each action needs an 'id'");
    ActionSpec a = base ? *base : ActionSpec{};
    a.id = j.at("id").get<std::string>();
    a.executor = j.value("executor", base ? base->executor : a.id);
    if (j.contains("category")) {
        auto c = parse_category(j.at("category").get<std::string>());
        if (!c)
            throw ValidationError("repertoire." + a.id + ".category", "unknown category");
        a.category = *c;
    } else if (!base) {
        a.category = a.id == kNullAction ? Category::Null : Category::Admin;
    }
    a.needs = flag_set(j, "requires", a.needs);
    a.forbids = flag_set(j, "forbids", a.forbids);
    a.adds = flag_set(j, "adds", a.adds);
    a.removes = flag_set(j, "removes", a.removes);
    a.cost = j.value("cost", a.cost);
    a.risk = j.value("risk", a.risk);
    a.duration = j.value("duration", a.duration);
    if (j.contains("target")) {
        const auto t = j.at("target").get<std::string>();
        auto sel = parse_target_selector(t);
        if (sel) {
            a.target = *sel;
        } else {
            a.target = TargetSelector::Node;
            a.target_node = t;
        }
    }
    if (j.contains("args"))
        a.args = j.at("args");
    if (a.cost < 0 || a.risk < 0 || a.risk > 1 || a.duration < 0)
        throw ValidationError("repertoire." + a.id, "cost and duration must be non-negative and risk in [0,1]");
    if (a.is_null() && (a.cost != 0 || a.risk != 0 || !a.adds.empty() || !a.removes.empty()))
        throw ValidationError("repertoire." + a.id, "the null action has no cost, risk, or effects");
    return a;
}

Repertoire Repertoire::load(const nlohmann::json& doc)
{
    if (doc.is_null())
        return core();
    if (!doc.is_object())
        throw ParseError("repertoire: expected an object");
    Repertoire r = doc.value("include_core", true) ? core() : Repertoire{};
    if (!r.find(kNullAction))
        r.add(make(std::string(kNullAction), Category::Null, {}, {}, {}, {}, 0, 0, 0));
    for (const auto& j : doc.value("actions", nlohmann::json::array())) {
        const auto id = j.value("id", std::string());
        r.add(load_action(j, r.find(id)));
    }
    return r;
}

AbstractState abstract_state(const wsi::WorldState& w, const AbstractState& context)
{
    AbstractState s = context;
    const auto self_level = w.entity(w.self).level;
    if (self_level >= wsi::Level::Potential)
        s.insert("self_suspect");
    if (self_level >= wsi::Level::Likely)
        s.insert("self_likely");
    if (self_level >= wsi::Level::Confirmed)
        s.insert("self_confirmed");
    wsi::Level peer_level = wsi::Level::Clean;
    for (const auto& [id, e] : w.entities)
        if (id != w.self)
            peer_level = std::max(peer_level, e.level);
    if (peer_level >= wsi::Level::Potential)
        s.insert("peer_suspect");
    if (peer_level >= wsi::Level::Likely)
        s.insert("peer_likely");
    if (peer_level >= wsi::Level::Confirmed)
        s.insert("peer_confirmed");
    if (w.environment == wsi::EnvironmentTag::Virtualized)
        s.insert("env_virtualized");
    if (w.environment == wsi::EnvironmentTag::Debugger)
        s.insert("env_debugger");
    return s;
}

std::vector<std::string> feasible_actions(const AbstractState& s, const Repertoire& rep)
{
    std::vector<std::string> out;
    for (const auto& a : rep.actions())
        if (a.is_null() || a.feasible_in(s))
            out.push_back(a.id);
    return out;
}

Prediction predict(const AbstractState& s, const ActionSpec& a, const memory::DynamicsTable* dynamics)
{
    if (!a.is_null() && !a.feasible_in(s))
        throw InfeasibleActionError("action '" + a.id + "' is not feasible in " + aica::to_string(s));
    if (dynamics) {
        auto dist = dynamics->successor_distribution(s, a.id);
        if (!dist.empty())
            return {std::move(dist), dynamics->confidence(s, a.id)};
    }
    return {{{a.apply(s), 1.0}}, 0.0};
}

std::vector<std::string> Plan::action_ids() const
{
    std::vector<std::string> out;
    for (const auto& s : steps)
        out.push_back(s.action);
    return out;
}

nlohmann::json Plan::to_json() const
{
    nlohmann::json steps_j = nlohmann::json::array();
    for (const auto& s : steps)
        steps_j.push_back({{"action", s.action}, {"expected", state_to_json(s.expected)}});
    return {{"plan_id", plan_id},
            {"steps", steps_j},
            {"efficacy", score.efficacy},
            {"rapidity", score.rapidity},
            {"risk", score.risk},
            {"score", score.total},
            {"fallback", fallback},
            {"origin", origin}};
}

Plan null_plan(const AbstractState& s, const Repertoire& rep, std::uint64_t plan_id)
{
    Plan p;
    p.plan_id = plan_id;
    p.steps.push_back({rep.null_action().id, s, 1.0});
    p.outcome = {{s, 1.0}};
    return p;
}

namespace {

struct Child {
    const ActionSpec* action;
    std::size_t order;
    AbstractState next;
    double p;
    memory::Distribution dist;
};

struct PlanSearch {
    const Repertoire& rep;
    const memory::DynamicsTable* dynamics;
    int depth;
    std::size_t branch;
    const PlanSink& sink;
    std::uint64_t next_id;
    std::size_t emitted{0};
    bool stop{false};

    std::vector<Child> children(const AbstractState& s) const
    {
        std::vector<Child> out;
        const std::size_t n = rep.actions().size();
        for (std::size_t i = 0; i < n; ++i) {
            const ActionSpec& a = rep.actions()[i];
            if (!a.is_null() && !a.feasible_in(s))
                continue;
            auto pred = predict(s, a, dynamics);
            // null ranks after every real action at equal probability
            const std::size_t order = a.is_null() ? n + i : i;
            for (const auto& [next, p] : pred.successors)
                out.push_back({&a, order, next, p, pred.successors});
        }
        std::stable_sort(out.begin(), out.end(), [](const Child& x, const Child& y) {
            if (x.p != y.p)
                return x.p > y.p;
            return x.order < y.order;
        });
        if (out.size() > branch)
            out.resize(branch);
        return out;
    }

    void expand(const AbstractState& s, std::vector<PlanStep>& path)
    {
        for (Child& c : children(s)) {
            if (stop)
                return;
            path.push_back({c.action->id, c.next, c.p});
            Plan plan;
            plan.plan_id = next_id++;
            plan.steps = path;
            plan.outcome = c.dist;
            ++emitted;
            if (!sink(std::move(plan)))
                stop = true;
            if (!stop && !c.action->is_null() && static_cast<int>(path.size()) < depth)
                expand(c.next, path);
            path.pop_back();
        }
    }
};

} // namespace

std::size_t plan(const AbstractState& start, int depth, int branch, const Repertoire& rep,
                 const memory::DynamicsTable* dynamics, const PlanSink& sink, std::uint64_t first_id)
{
    if (depth < 1 || branch < 1)
        throw std::invalid_argument("plan: depth and branch must be at least 1");
    PlanSearch search{rep, dynamics, depth, static_cast<std::size_t>(branch), sink, first_id};
    std::vector<PlanStep> path;
    search.expand(start, path);
    return search.emitted;
}

double Goal::degree(const AbstractState& s) const
{
    if (literals.empty())
        return 1.0;
    std::size_t held = 0;
    for (const auto& lit : literals) {
        const bool neg = !lit.empty() && lit[0] == '!';
        const std::string flag = neg ? lit.substr(1) : lit;
        if ((s.count(flag) != 0) != neg)
            ++held;
    }
    if (mode == Mode::Any)
        return held > 0 ? 1.0 : 0.0;
    return double(held) / double(literals.size());
}

void GoalProfile::validate() const
{
    if (goals.empty())
        throw ValidationError("goals", "a goal profile needs at least one goal function");
    if (w_e < 0 || w_t < 0 || w_r < 0)
        throw ValidationError("goals.weights", "weights must be non-negative");
    if (w_e + w_t + w_r <= 0)
        throw ValidationError("goals.weights", "at least one weight must be positive");
    if (time_scale <= 0)
        throw ValidationError("goals.time_scale", "time scale must be positive");
    double total = 0;
    for (const auto& g : goals) {
        if (g.weight < 0)
            throw ValidationError("goals." + g.name, "goal weight must be non-negative");
        total += g.weight;
    }
    if (total <= 0)
        throw ValidationError("goals", "goal weights sum to zero");
}

double GoalProfile::efficacy(const AbstractState& s) const
{
    double num = 0, den = 0;
    for (const auto& g : goals) {
        num += g.weight * g.degree(s);
        den += g.weight;
    }
    return den > 0 ? num / den : 0.0;
}

GoalProfile load_goal_profile(const nlohmann::json& doc)
{
    GoalProfile g;
    if (!doc.is_object())
        throw ParseError("goals: expected an object");
    if (doc.contains("weights")) {
        const auto& w = doc.at("weights");
        g.w_e = w.value("efficacy", g.w_e);
        g.w_t = w.value("rapidity", g.w_t);
        g.w_r = w.value("risk", g.w_r);
    }
    g.min_score = doc.value("min_score", g.min_score);
    g.urgency = doc.value("urgency", g.urgency);
    g.time_scale = doc.value("time_scale", g.time_scale);
    for (const auto& j : doc.value("functions", nlohmann::json::array())) {
        Goal goal;
        goal.name = j.value("name", std::string("goal"));
        goal.weight = j.value("weight", 1.0);
        goal.literals = j.value("literals", std::vector<std::string>{});
        const auto mode = j.value("mode", std::string("all"));
        if (mode != "all" && mode != "any")
            throw ValidationError("goals." + goal.name + ".mode", "mode must be 'all' or 'any'");
        goal.mode = mode == "any" ? Goal::Mode::Any : Goal::Mode::All;
        g.goals.push_back(std::move(goal));
    }
    g.validate();
    return g;
}

Score score(const Plan& p, const GoalProfile& g, const Repertoire& rep)
{
    Score s;
    double eff = 0.0;
    for (const auto& [state, prob] : p.outcome)
        eff += prob * g.efficacy(state);
    s.efficacy = std::clamp(eff, 0.0, 1.0);
    double keep = 1.0;
    for (const auto& step : p.steps) {
        const ActionSpec* a = rep.find(step.action);
        if (!a)
            throw std::invalid_argument("plan step '" + step.action + "' is not in the repertoire");
        s.rapidity += a->duration;
        keep *= 1.0 - a->risk;
    }
    s.risk = 1.0 - keep;
    s.rapidity_penalty = double(s.rapidity) / double(g.time_scale);
    s.total = g.w_e * s.efficacy - g.w_t * s.rapidity_penalty - g.w_r * s.risk;
    return s;
}

bool dominates(const Score& a, const Score& b)
{
    const bool no_worse = a.efficacy >= b.efficacy && a.rapidity <= b.rapidity && a.risk <= b.risk;
    const bool better = a.efficacy > b.efficacy || a.rapidity < b.rapidity || a.risk < b.risk;
    return no_worse && better;
}

namespace {

bool near(double a, double b)
{
    return std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)});
}

} // namespace

std::size_t argmax_plan(const std::vector<Plan>& plans)
{
    if (plans.empty())
        throw std::invalid_argument("argmax_plan: no plans");
    double best = plans[0].score.total;
    for (const auto& p : plans)
        best = std::max(best, p.score.total);
    std::vector<std::size_t> tied;
    for (std::size_t i = 0; i < plans.size(); ++i)
        if (near(plans[i].score.total, best))
            tied.push_back(i);
    std::vector<std::size_t> front;
    for (std::size_t i : tied) {
        bool dominated = false;
        for (std::size_t j : tied)
            if (j != i && dominates(plans[j].score, plans[i].score))
                dominated = true;
        if (!dominated)
            front.push_back(i);
    }
    return *std::min_element(front.begin(), front.end(), [&](std::size_t x, std::size_t y) {
        if (plans[x].steps.size() != plans[y].steps.size())
            return plans[x].steps.size() < plans[y].steps.size();
        return plans[x].plan_id < plans[y].plan_id;
    });
}

bool Selector::offer(Plan p)
{
    if (stopped_)
        return false;
    p.score = score(p, goals_, *rep_);
    plans_.push_back(std::move(p));
    if (goals_.urgency && plans_.back().score.total >= goals_.min_score) {
        chosen_ = plans_.size() - 1;
        stopped_ = true;
        return false;
    }
    return true;
}

Plan Selector::result(const AbstractState& s) const
{
    if (chosen_)
        return plans_[*chosen_];
    if (!plans_.empty()) {
        const std::size_t i = argmax_plan(plans_);
        // urgent mode falls back to the best seen so far
        if (goals_.urgency || plans_[i].score.total >= goals_.min_score)
            return plans_[i];
    }
    Plan p = null_plan(s, *rep_);
    p.score = score(p, goals_, *rep_);
    p.fallback = true;
    return p;
}

std::string_view to_string(ExecStatus s)
{
    switch (s) {
    case ExecStatus::Done: return "done";
    case ExecStatus::NotDone: return "not-done";
    case ExecStatus::WronglyDone: return "wrongly-done";
    }
    return "?";
}

std::string_view to_string(Adjustment a)
{
    switch (a) {
    case Adjustment::Continue: return "continue";
    case Adjustment::RetryStep: return "retry-step";
    case Adjustment::Replan: return "replan";
    case Adjustment::Collaborate: return "collaborate";
    }
    return "?";
}

StepResult run_atomic(substrate::Substrate& sub, const std::vector<NodeId>& nodes,
                      const std::function<StepResult()>& body)
{
    std::vector<std::pair<NodeId, substrate::NodeState>> saved;
    for (const auto& n : nodes)
        if (sub.has_node(n))
            saved.emplace_back(n, sub.node(n));
    auto rollback = [&] {
        for (auto& [n, st] : saved)
            sub.node(n) = st;
    };
    StepResult r;
    try {
        r = body();
    } catch (const substrate::SubstrateError& e) {
        rollback();
        r.status = ExecStatus::WronglyDone;
        r.error = e.what();
        r.effects_ok = false;
        r.detail["code"] = e.code();
        return r;
    }
    if (r.status != ExecStatus::Done)
        rollback();
    return r;
}

Adjustment adjust(const StepResult& r, int retries_used, int replans_left)
{
    if (r.status == ExecStatus::Done && r.effects_ok)
        return Adjustment::Continue;
    if (r.status == ExecStatus::NotDone && retries_used == 0)
        return Adjustment::RetryStep;
    return replans_left > 0 ? Adjustment::Replan : Adjustment::Collaborate;
}

ExecutionLog execute(const Plan& p, const Repertoire& rep,
                     const std::function<StepResult(const ActionSpec&, const PlanStep&)>& exec, int replans_left)
{
    ExecutionLog log;
    for (const auto& step : p.steps) {
        const ActionSpec* a = rep.find(step.action);
        if (!a)
            throw std::invalid_argument("plan step '" + step.action + "' is not in the repertoire");
        int retries = 0;
        for (;;) {
            StepResult r = exec(*a, step);
            log.steps.emplace_back(step.action, r);
            Adjustment adj = adjust(r, retries, replans_left);
            if (adj == Adjustment::Continue)
                break;
            if (adj == Adjustment::RetryStep) {
                ++retries;
                ++log.retries;
                continue;
            }
            log.final_adjustment = adj;
            return log;
        }
    }
    return log;
}

} // namespace aica::decision
