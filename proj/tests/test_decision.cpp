#include "aica/core/errors.hpp"
#include "aica/decision/decision.hpp"
#include "support.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

using namespace aica;
using namespace aica::decision;

namespace {

Repertoire combat_repertoire()
{
    return Repertoire::load(nlohmann::json::parse(R"({
      "include_core": false,
      "actions": [
        {"id": "shut_down_comm_radio_Y", "category": "comms", "requires": ["unseen_radio_tx"],
         "removes": ["unseen_radio_tx"], "adds": ["radio_off"], "cost": 1, "risk": 0.2, "duration": 50},
        {"id": "shut_down_computer", "category": "admin", "requires": ["file_hash_changed"],
         "removes": ["file_hash_changed", "in_combat"], "adds": ["computer_off"], "cost": 5, "risk": 0.6, "duration": 500},
        {"id": "restore_file_from_backup", "category": "integrity", "requires": ["integrity_violation"],
         "removes": ["integrity_violation"], "cost": 2, "duration": 200},
        {"id": "lockdown_node", "category": "admin", "requires": ["self_suspect"], "forbids": ["locked_down"],
         "adds": ["locked_down"], "cost": 3, "risk": 0.2, "duration": 100}
      ]
    })"));
}

const AbstractState kCombat{"in_combat", "file_hash_changed", "unseen_radio_tx"};

GoalProfile profile(nlohmann::json functions, nlohmann::json extra = nlohmann::json::object())
{
    nlohmann::json doc{{"functions", functions}};
    doc.update(extra);
    return load_goal_profile(doc);
}

// Random repertoire of `n` actions over a small flag universe.
Repertoire random_repertoire(std::mt19937_64& gen, int n, const std::vector<std::string>& flags)
{
    Repertoire r = Repertoire::load(nlohmann::json{{"include_core", false}});
    for (int i = 0; i < n; ++i) {
        ActionSpec a;
        a.id = "a" + std::to_string(i);
        a.executor = a.id;
        a.category = Category::Admin;
        for (const auto& f : flags) {
            switch (gen() % 6) {
            case 0: a.needs.insert(f); break;
            case 1: a.forbids.insert(f); break;
            case 2: a.adds.insert(f); break;
            case 3: a.removes.insert(f); break;
            default: break;
            }
        }
        a.risk = double(gen() % 10) / 10.0;
        a.duration = Millis(gen() % 1000);
        a.cost = double(gen() % 5);
        r.add(a);
    }
    return r;
}

AbstractState random_state(std::mt19937_64& gen, const std::vector<std::string>& flags)
{
    AbstractState s;
    for (const auto& f : flags)
        if (gen() % 2)
            s.insert(f);
    return s;
}

const std::vector<std::string> kFlags{"f0", "f1", "f2", "f3", "f4"};

std::vector<Plan> collect_plans(const AbstractState& s, int depth, int branch, const Repertoire& rep,
                                const memory::DynamicsTable* dyn = nullptr)
{
    std::vector<Plan> out;
    plan(s, depth, branch, rep, dyn, [&](Plan p) {
        out.push_back(std::move(p));
        return true;
    });
    return out;
}

} // namespace

TEST_CASE("combat example: proposed actions")
{
    auto rep = combat_repertoire();
    auto ids = feasible_actions(kCombat, rep);
    std::set<std::string> got(ids.begin(), ids.end());
    CHECK(got == std::set<std::string>{"no_action", "shut_down_comm_radio_Y", "shut_down_computer"});
    CHECK(feasible_actions({}, rep) == std::vector<std::string>{"no_action"});
}

TEST_CASE("core repertoire in an all-clear state offers only routine checks")
{
    auto rep = Repertoire::core();
    auto ids = feasible_actions({}, rep);
    CHECK(ids == std::vector<std::string>{"no_action", "run_integrity_check", "run_antivirus_scan"});
    const auto& null = rep.null_action();
    CHECK(null.cost == 0);
    CHECK(null.risk == 0);
    CHECK(null.adds.empty());
    CHECK(null.removes.empty());
}

TEST_CASE("repertoire validation")
{
    CHECK_THROWS_AS(Repertoire::load({{"actions", {{{"id", "x"}, {"risk", 2.0}}}}}), ValidationError);
    CHECK_THROWS_AS(Repertoire::load({{"actions", {{{"id", "no_action"}, {"cost", 1}}}}}), ValidationError);
    CHECK_THROWS_AS(Repertoire::load({{"actions", {{{"id", "x"}, {"category", "magic"}}}}}), ValidationError);
    auto over = Repertoire::load({{"actions", {{{"id", "lockdown_node"}, {"duration", 7}}}}});
    CHECK(over.find("lockdown_node")->duration == 7);
    CHECK(over.find("lockdown_node")->risk == doctest::Approx(0.2));
}

TEST_CASE("feasible actions equal a brute-force precondition filter")
{
    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 1000; ++trial) {
        auto rep = random_repertoire(gen, 6, kFlags);
        auto s = random_state(gen, kFlags);
        std::vector<std::string> expect;
        for (const auto& a : rep.actions()) {
            bool ok = true;
            for (const auto& f : a.needs)
                ok = ok && s.count(f);
            for (const auto& f : a.forbids)
                ok = ok && !s.count(f);
            if (a.is_null() || ok)
                expect.push_back(a.id);
        }
        CHECK(feasible_actions(s, rep) == expect);
    }
}

TEST_CASE("predict")
{
    auto rep = combat_repertoire();
    SUBCASE("null with no dynamics is identity")
    {
        auto p = predict(kCombat, rep.null_action(), nullptr);
        REQUIRE(p.successors.size() == 1);
        CHECK(p.successors[0].first == kCombat);
        CHECK(p.successors[0].second == 1.0);
        CHECK(p.confidence == 0.0);
    }
    SUBCASE("learned side effect appears among successors")
    {
        memory::DynamicsTable dyn;
        const auto* radio = rep.find("shut_down_comm_radio_Y");
        AbstractState bad = radio->apply(kCombat);
        bad.insert("weapon_malfunction");
        dyn.record(kCombat, radio->id, bad);
        dyn.record(kCombat, radio->id, radio->apply(kCombat));
        dyn.record(kCombat, radio->id, bad);
        auto p = predict(kCombat, *radio, &dyn);
        bool found = false;
        for (const auto& [st, pr] : p.successors)
            if (st.count("weapon_malfunction")) {
                found = true;
                CHECK(pr == doctest::Approx(3.0 / 5.0)); // (2 + 1) / (3 + 2)
            }
        CHECK(found);
        CHECK(p.confidence == doctest::Approx(3.0 / 8.0));
    }
    SUBCASE("unseen key falls back to the declared effect")
    {
        memory::DynamicsTable dyn;
        const auto* pc = rep.find("shut_down_computer");
        auto p = predict(kCombat, *pc, &dyn);
        REQUIRE(p.successors.size() == 1);
        CHECK(p.successors[0].first == AbstractState{"computer_off", "unseen_radio_tx"});
    }
    SUBCASE("infeasible action")
    {
        CHECK_THROWS_AS(predict({}, *rep.find("shut_down_computer"), nullptr), InfeasibleActionError);
    }
}

TEST_CASE("planning depth one over the combat state gives three plans")
{
    auto rep = combat_repertoire();
    auto plans = collect_plans(kCombat, 1, 3, rep);
    CHECK(plans.size() == 3);
    std::set<std::string> first;
    for (const auto& p : plans) {
        CHECK(p.steps.size() == 1);
        first.insert(p.steps[0].action);
    }
    CHECK(first == std::set<std::string>{"no_action", "shut_down_comm_radio_Y", "shut_down_computer"});
    CHECK_THROWS_AS(plan(kCombat, 0, 1, rep, nullptr, [](Plan) { return true; }), std::invalid_argument);
}

TEST_CASE("planning stops when the sink says so")
{
    auto rep = combat_repertoire();
    int seen = 0;
    auto n = plan(kCombat, 3, 3, rep, nullptr, [&](Plan) { return ++seen < 2; });
    CHECK(n == 2);
    CHECK(seen == 2);
}

TEST_CASE("plan count bound")
{
    std::mt19937_64 gen(77);
    for (int trial = 0; trial < 300; ++trial) {
        auto rep = random_repertoire(gen, 3 + int(gen() % 4), kFlags);
        memory::DynamicsTable dyn;
        for (int k = 0; k < 20; ++k) {
            const auto& a = rep.actions()[gen() % rep.actions().size()];
            dyn.record(random_state(gen, kFlags), a.id, random_state(gen, kFlags));
        }
        const int D = 1 + int(gen() % 3);
        const int B = 1 + int(gen() % 3);
        auto plans = collect_plans(random_state(gen, kFlags), D, B, rep, trial % 2 ? &dyn : nullptr);
        std::size_t bound = 0;
        for (int d = 1; d <= D; ++d)
            bound += std::size_t(std::pow(B, d));
        CHECK(plans.size() <= bound);
        for (const auto& p : plans) {
            CHECK_FALSE(p.steps.empty());
            CHECK(int(p.steps.size()) <= D);
            for (const auto& st : p.steps)
                CHECK(rep.find(st.action) != nullptr);
        }
    }
    // the stated bound for two levels of three feasible actions and B = 1
    auto rep = combat_repertoire();
    CHECK(collect_plans(kCombat, 2, 1, rep).size() <= 9);
}

namespace {

// Exhaustive tree with pruning, written out independently: list every
// (action, successor) child, rank by probability with null after real
// actions, keep the first B, recurse below non-null steps.
void oracle_expand(const AbstractState& s, int depth, int B, const Repertoire& rep, const memory::DynamicsTable* dyn,
                   std::vector<std::string>& path, std::vector<std::vector<std::string>>& out)
{
    struct C {
        std::string id;
        bool null;
        std::size_t idx;
        AbstractState next;
        double p;
    };
    std::vector<C> kids;
    for (std::size_t i = 0; i < rep.actions().size(); ++i) {
        const auto& a = rep.actions()[i];
        if (!a.is_null() && !a.feasible_in(s))
            continue;
        memory::Distribution d;
        if (dyn)
            d = dyn->successor_distribution(s, a.id);
        if (d.empty())
            d = {{a.apply(s), 1.0}};
        for (const auto& [n, p] : d)
            kids.push_back({a.id, a.is_null(), i, n, p});
    }
    std::stable_sort(kids.begin(), kids.end(), [](const C& x, const C& y) {
        if (x.p != y.p)
            return x.p > y.p;
        if (x.null != y.null)
            return !x.null;
        return x.idx < y.idx;
    });
    if (int(kids.size()) > B)
        kids.resize(std::size_t(B));
    for (const auto& k : kids) {
        path.push_back(k.id);
        out.push_back(path);
        if (!k.null && int(path.size()) < depth)
            oracle_expand(k.next, depth, B, rep, dyn, path, out);
        path.pop_back();
    }
}

} // namespace

TEST_CASE("depth-two plan set equals the pruned exhaustive tree")
{
    std::mt19937_64 gen(5150);
    for (int trial = 0; trial < 300; ++trial) {
        auto rep = random_repertoire(gen, 5, kFlags);
        memory::DynamicsTable dyn;
        for (int k = 0; k < 30; ++k) {
            const auto& a = rep.actions()[gen() % rep.actions().size()];
            dyn.record(random_state(gen, kFlags), a.id, random_state(gen, kFlags));
        }
        const auto s = random_state(gen, kFlags);
        const int B = 1 + int(gen() % 4);
        std::vector<std::vector<std::string>> expect;
        std::vector<std::string> path;
        oracle_expand(s, 2, B, rep, &dyn, path, expect);
        std::vector<std::vector<std::string>> got;
        for (const auto& p : collect_plans(s, 2, B, rep, &dyn))
            got.push_back(p.action_ids());
        CHECK(got == expect);
    }
}

TEST_CASE("scoring")
{
    auto rep = Repertoire::load(nlohmann::json::parse(R"({
      "include_core": false,
      "actions": [
        {"id": "risky", "risk": 0.5, "duration": 0},
        {"id": "fix", "adds": ["fixed"], "duration": 6000}
      ]})"));
    auto g = profile({{{"name", "integrity"}, {"literals", {"!integrity_violation"}}}});

    SUBCASE("null-only plan with the goal already met")
    {
        auto p = null_plan({}, rep);
        auto s = score(p, g, rep);
        CHECK(s.efficacy == 1.0);
        CHECK(s.risk == 0.0);
        CHECK(s.total == doctest::Approx(1.0));
    }
    SUBCASE("two risk-0.5 actions compound to 0.75")
    {
        Plan p;
        p.steps = {{"risky", {}, 1.0}, {"risky", {}, 1.0}};
        p.outcome = {{{}, 1.0}};
        CHECK(score(p, g, rep).risk == doctest::Approx(0.75));
    }
    SUBCASE("rapidity penalty scales with duration")
    {
        Plan p;
        p.steps = {{"fix", {"fixed"}, 1.0}};
        p.outcome = {{{"fixed"}, 1.0}};
        auto s = score(p, g, rep);
        CHECK(s.rapidity == 6000);
        CHECK(s.rapidity_penalty == doctest::Approx(0.1));
        CHECK(s.total == doctest::Approx(1.0 - 0.1 * 0.1));
    }
    SUBCASE("efficacy is probability-weighted over the outcome")
    {
        Plan p;
        p.steps = {{"fix", {}, 1.0}};
        p.outcome = {{{"integrity_violation"}, 0.25}, {{}, 0.75}};
        CHECK(score(p, g, rep).efficacy == doctest::Approx(0.75));
    }
}

TEST_CASE("adding a zero-effect risky action never raises the score")
{
    std::mt19937_64 gen(12);
    for (int trial = 0; trial < 500; ++trial) {
        auto rep = random_repertoire(gen, 4, kFlags);
        ActionSpec noop;
        noop.id = "noop_risky";
        noop.category = Category::Admin;
        noop.risk = double(gen() % 10) / 10.0;
        noop.duration = Millis(gen() % 100);
        rep.add(noop);
        auto g = profile({{{"literals", {"f0", "!f1"}}}, {{"literals", {"f2"}}, {"mode", "any"}}});
        auto s = random_state(gen, kFlags);
        auto plans = collect_plans(s, 2, 3, rep);
        for (auto p : plans) {
            Plan q = p;
            q.steps.push_back({noop.id, q.steps.back().expected, 1.0});
            CHECK(score(q, g, rep).total <= score(p, g, rep).total + 1e-12);
        }
    }
}

TEST_CASE("goal profile validation")
{
    CHECK_THROWS_AS(load_goal_profile({{"functions", nlohmann::json::array()}}), ValidationError);
    CHECK_THROWS_AS(profile({{{"literals", {"x"}}}}, {{"weights", {{"efficacy", 0}, {"rapidity", 0}, {"risk", 0}}}}),
                    ValidationError);
    CHECK_THROWS_AS(profile({{{"literals", {"x"}}, {"mode", "some"}}}), ValidationError);
    Goal any{"g", 1, {"a", "b"}, Goal::Mode::Any};
    Goal all{"g", 1, {"a", "b"}, Goal::Mode::All};
    CHECK(any.degree({"b"}) == 1.0);
    CHECK(all.degree({"b"}) == 0.5);
}

TEST_CASE("selection")
{
    auto rep = combat_repertoire();

    SUBCASE("urgent mode takes the first acceptable plan and stops planning")
    {
        auto g = profile({{{"literals", {"radio_off"}}}}, {{"urgency", true}, {"min_score", 0.7}});
        Selector sel(g, rep);
        int emitted = 0;
        plan(kCombat, 3, 3, rep, nullptr, [&](Plan p) {
            ++emitted;
            return sel.offer(std::move(p));
        });
        CHECK(sel.stopped());
        auto chosen = sel.result(kCombat);
        CHECK(chosen.score.total >= 0.7);
        CHECK(chosen.plan_id == sel.plans().back().plan_id);
        CHECK(emitted == int(sel.received()));
        CHECK(chosen.steps[0].action == "shut_down_comm_radio_Y");
    }
    SUBCASE("urgent with nothing acceptable returns the best so far")
    {
        auto g = profile({{{"literals", {"radio_off"}}}}, {{"urgency", true}, {"min_score", 5.0}});
        Selector sel(g, rep);
        plan(kCombat, 2, 3, rep, nullptr, [&](Plan p) { return sel.offer(std::move(p)); });
        auto chosen = sel.result(kCombat);
        CHECK_FALSE(chosen.fallback);
        for (const auto& p : sel.plans())
            CHECK(chosen.score.total >= p.score.total);
    }
    SUBCASE("nothing acceptable and not urgent falls back to a flagged null plan")
    {
        auto g = profile({{{"literals", {"radio_off"}}}}, {{"min_score", 5.0}});
        Selector sel(g, rep);
        plan(kCombat, 2, 3, rep, nullptr, [&](Plan p) { return sel.offer(std::move(p)); });
        auto chosen = sel.result(kCombat);
        CHECK(chosen.fallback);
        CHECK(chosen.action_ids() == std::vector<std::string>{"no_action"});
    }
    SUBCASE("equal scores prefer the shorter plan")
    {
        std::vector<Plan> ps(2);
        ps[0].plan_id = 1;
        ps[0].steps.resize(3);
        ps[0].score = {1.0, 0, 0, 0, 0.5};
        ps[1].plan_id = 2;
        ps[1].steps.resize(1);
        ps[1].score = {1.0, 0, 0, 0, 0.5};
        CHECK(argmax_plan(ps) == 1);
    }
}

TEST_CASE("non-urgent selection matches a brute-force maximum and is never dominated")
{
    std::mt19937_64 gen(404);
    for (int trial = 0; trial < 500; ++trial) {
        auto rep = random_repertoire(gen, 5, kFlags);
        auto g = profile({{{"literals", {"f0", "!f3"}}, {"weight", 2}}, {{"literals", {"f4"}}}});
        Selector sel(g, rep);
        auto s = random_state(gen, kFlags);
        plan(s, 2, 3, rep, nullptr, [&](Plan p) { return sel.offer(std::move(p)); });
        auto chosen = sel.result(s);
        double best = -1e300;
        for (const auto& p : sel.plans())
            best = std::max(best, p.score.total);
        if (chosen.fallback) {
            CHECK(best < g.min_score);
            continue;
        }
        CHECK(chosen.score.total == doctest::Approx(best));
        for (const auto& p : sel.plans()) {
            const bool strictly = p.score.efficacy > chosen.score.efficacy && p.score.rapidity < chosen.score.rapidity &&
                                  p.score.risk < chosen.score.risk;
            CHECK_FALSE(strictly);
        }
    }
}

TEST_CASE("selection is invariant under positive scaling of the criterion weights")
{
    std::mt19937_64 gen(2718);
    std::uniform_real_distribution<double> u(0.05, 3.0);
    for (int trial = 0; trial < 500; ++trial) {
        auto rep = random_repertoire(gen, 5, kFlags);
        const double we = u(gen), wt = u(gen), wr = u(gen), k = u(gen) * 10;
        auto base = profile({{{"literals", {"f1", "f2"}}}},
                            {{"weights", {{"efficacy", we}, {"rapidity", wt}, {"risk", wr}}}, {"min_score", -100}});
        auto scaled = profile({{{"literals", {"f1", "f2"}}}},
                              {{"weights", {{"efficacy", we * k}, {"rapidity", wt * k}, {"risk", wr * k}}},
                               {"min_score", -100 * k}});
        auto s = random_state(gen, kFlags);
        Selector a(base, rep), b(scaled, rep);
        plan(s, 2, 3, rep, nullptr, [&](Plan p) { return a.offer(std::move(p)); });
        plan(s, 2, 3, rep, nullptr, [&](Plan p) { return b.offer(std::move(p)); });
        CHECK(a.result(s).plan_id == b.result(s).plan_id);
    }
}

TEST_CASE("execution against the substrate")
{
    auto topo = sim::load_topology(test::load("tests/fixtures/vehicle_topology.json"));
    substrate::Substrate sub(topo);
    substrate::load_node_state(sub.node("BMS"),
                               {{"files", {{{"path", "/etc/config"}, {"hash", "0xb001"}},
                                           {{"path", "/bin/init"}, {"hash", "0xb002"}, {"protected", true}}}}},
                               "BMS");
    const SimTime now{10};

    SUBCASE("deleting a missing file is wrongly done with the substrate message")
    {
        auto r = run_atomic(sub, {"BMS"}, [&] {
            StepResult res;
            if (auto err = sub.delete_file("BMS", "/missing", false, now)) {
                res.status = ExecStatus::WronglyDone;
                res.error = *err;
            }
            return res;
        });
        CHECK(r.status == ExecStatus::WronglyDone);
        CHECK(r.error == "The file cannot be deleted. The requested file does not exist.");
    }
    SUBCASE("restore then integrity passes")
    {
        sub.write_file("BMS", "/etc/config", 0xbad, false, now);
        substrate::IntegrityBaseline base;
        base.whitelist = {{"/etc/config", 0xb001}, {"/bin/init", 0xb002}};
        CHECK(sub.check_integrity("BMS", base).size() == 1);
        auto r = run_atomic(sub, {"BMS"}, [&] {
            StepResult res;
            if (!sub.restore_file("BMS", "/etc/config", now))
                res.status = ExecStatus::NotDone;
            return res;
        });
        CHECK(r.status == ExecStatus::Done);
        CHECK(sub.check_integrity("BMS", base).empty());
    }
    SUBCASE("null plan leaves the substrate alone")
    {
        auto rep = Repertoire::core();
        const auto before = sub.node("BMS");
        auto log = execute(null_plan({}, rep), rep, [&](const ActionSpec&, const PlanStep&) {
            return run_atomic(sub, {"BMS"}, [] { return StepResult{}; });
        });
        REQUIRE(log.steps.size() == 1);
        CHECK(log.steps[0].second.status == ExecStatus::Done);
        CHECK(sub.node("BMS") == before);
    }
    SUBCASE("a thrown substrate error becomes wrongly done and rolls back")
    {
        const auto before = sub.node("BMS");
        auto r = run_atomic(sub, {"BMS"}, [&]() -> StepResult {
            sub.write_file("BMS", "/etc/config", 1, true, now);
            sub.write_file("BMS", "/bin/init", 2, false, now);
            return {};
        });
        CHECK(r.status == ExecStatus::WronglyDone);
        CHECK(r.detail.at("code") == "protected-file");
        CHECK(sub.node("BMS") == before);
    }
}

TEST_CASE("atomicity under injected failures")
{
    auto topo = sim::load_topology(test::load("tests/fixtures/vehicle_topology.json"));
    substrate::Substrate sub(topo);
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto before_bms = sub.node("BMS");
        const auto before_vms = sub.node("VMS");
        const int fail = int(gen() % 3); // 0 none, 1 not-done, 2 throw
        const int writes = 1 + int(gen() % 4);
        auto r = run_atomic(sub, {"BMS", "VMS"}, [&]() -> StepResult {
            for (int i = 0; i < writes; ++i) {
                sub.write_file(i % 2 ? "BMS" : "VMS", "/f" + std::to_string(gen() % 3), gen(), gen() % 2,
                               SimTime{trial});
                sub.spawn_process("BMS", "p", substrate::ProcessOwner::System, SimTime{trial});
            }
            if (fail == 2)
                throw substrate::SubstrateError("lockdown", "injected");
            StepResult res;
            if (fail == 1)
                res.status = ExecStatus::NotDone;
            return res;
        });
        if (fail) {
            CHECK(r.status != ExecStatus::Done);
            CHECK(sub.node("BMS") == before_bms);
            CHECK(sub.node("VMS") == before_vms);
        } else {
            CHECK(r.status == ExecStatus::Done);
            CHECK_FALSE(sub.node("BMS") == before_bms);
        }
    }
}

TEST_CASE("adjustment")
{
    StepResult done;
    StepResult not_done{ExecStatus::NotDone, "", true, {}};
    StepResult wrong{ExecStatus::WronglyDone, "The file cannot be deleted. The requested file is protected.", false, {}};
    StepResult bad_effects{ExecStatus::Done, "", false, {}};

    CHECK(adjust(done, 0, 1) == Adjustment::Continue);
    CHECK(adjust(not_done, 0, 1) == Adjustment::RetryStep);
    CHECK(adjust(not_done, 1, 1) == Adjustment::Replan);
    CHECK(adjust(wrong, 0, 1) == Adjustment::Replan);
    CHECK(adjust(bad_effects, 0, 1) == Adjustment::Replan);
    CHECK(adjust(wrong, 0, 0) == Adjustment::Collaborate);

    auto rep = combat_repertoire();
    Plan p;
    p.steps = {{"shut_down_comm_radio_Y", {}, 1.0}, {"shut_down_computer", {}, 1.0}};

    SUBCASE("all done runs to completion")
    {
        auto log = execute(p, rep, [](const ActionSpec&, const PlanStep&) { return StepResult{}; });
        CHECK(log.steps.size() == 2);
        CHECK_FALSE(log.final_adjustment);
    }
    SUBCASE("one not-done then done records one retry")
    {
        int calls = 0;
        auto log = execute(p, rep, [&](const ActionSpec&, const PlanStep&) {
            return ++calls == 1 ? not_done : StepResult{};
        });
        CHECK(log.retries == 1);
        CHECK(log.steps.size() == 3);
        CHECK_FALSE(log.final_adjustment);
    }
    SUBCASE("wrongly done asks for a replan")
    {
        auto log = execute(p, rep, [&](const ActionSpec&, const PlanStep&) { return wrong; }, 1);
        CHECK(log.steps.size() == 1);
        CHECK(log.final_adjustment == Adjustment::Replan);
    }
}

TEST_CASE("abstract state derives level flags")
{
    auto topo = sim::load_topology(test::load("tests/fixtures/vehicle_topology.json"));
    auto w = wsi::initial_world_state(topo, "VMS");
    w.entities["VMS"].level = wsi::Level::Likely;
    w.entities["BMS"].level = wsi::Level::Potential;
    w.environment = wsi::EnvironmentTag::Virtualized;
    auto s = abstract_state(w, {"in_combat"});
    CHECK(s == AbstractState{"env_virtualized", "in_combat", "peer_suspect", "self_likely", "self_suspect"});
}
