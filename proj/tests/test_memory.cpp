#include "aica/memory/memory.hpp"
#include "support.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace aica;
using namespace aica::memory;

namespace {

std::vector<EpisodeStep> steps_of(const std::vector<std::string>& actions)
{
    std::vector<EpisodeStep> out;
    for (std::size_t i = 0; i < actions.size(); ++i)
        out.push_back({SimTime{Millis(i)}, actions[i], std::nullopt});
    return out;
}

bool starts_with(const std::vector<std::string>& seq, const std::vector<std::string>& prefix)
{
    return seq.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), seq.begin());
}

} // namespace

TEST_CASE("dynamics table smoothing")
{
    DynamicsTable t;
    const AbstractState s{"in_combat"}, s1{"a"}, s2{"b"};
    for (int i = 0; i < 3; ++i)
        t.record(s, "x", s1);
    t.record(s, "x", s2);
    auto d = t.successor_distribution(s, "x");
    REQUIRE(d.size() == 2);
    CHECK(d[0].first == s1);
    CHECK(d[0].second == doctest::Approx(4.0 / 6.0));
    CHECK(d[1].second == doctest::Approx(2.0 / 6.0));
    CHECK(t.confidence(s, "x") == doctest::Approx(4.0 / 9.0));
    CHECK(t.successor_distribution(s, "y").empty());
    CHECK(t.confidence(s, "y") == 0.0);

    DynamicsTable one;
    one.record(s, "x", s1);
    auto d1 = one.successor_distribution(s, "x");
    REQUIRE(d1.size() == 1);
    CHECK(d1[0].second == 1.0);

    auto back = DynamicsTable::from_json(t.to_json());
    CHECK(back.successor_distribution(s, "x") == d);
}

TEST_CASE("dynamics distributions sum to one and confidence never decreases")
{
    std::mt19937_64 gen(31);
    DynamicsTable t;
    std::map<std::pair<AbstractState, std::string>, double> last;
    for (int i = 0; i < 5000; ++i) {
        AbstractState prev{"p" + std::to_string(gen() % 4)};
        std::string act = "a" + std::to_string(gen() % 3);
        AbstractState next{"n" + std::to_string(gen() % 6)};
        t.record(prev, act, next);
        const double c = t.confidence(prev, act);
        CHECK(c >= last[{prev, act}]);
        CHECK(c < 1.0);
        last[{prev, act}] = c;
        double sum = 0;
        for (const auto& [st, p] : t.successor_distribution(prev, act))
            sum += p;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("state assessment")
{
    auto table = load_severity(test::load("tests/fixtures/severity.json"));
    CHECK(assess_value({}, table) == 0.0);
    // first example episode: integrity check, unexpected file, delete, then enemy C2 traffic
    CHECK(assess_value({"enemy-c2-traffic"}, table) == doctest::Approx(-0.09));
    // second: poisoned password file, then an alert from another node
    CHECK(assess_value({"alert-received"}, table) == doctest::Approx(-0.57));

    SeverityTable big{{{"x", 0.7}, {"y", 0.6}}};
    CHECK(assess_value({"x", "y"}, big) == -1.0);

    std::size_t unknown = 0;
    CHECK(assess_value({"mystery", "scan-probe"}, table, &unknown) == doctest::Approx(-0.05));
    CHECK(unknown == 1);

    CHECK_THROWS(load_severity(nlohmann::json{{"x", -0.1}}));

    std::mt19937_64 gen(4);
    std::vector<std::string> kinds{"enemy-c2-traffic", "alert-received", "scan-probe", "integrity-finding", "other"};
    for (int i = 0; i < 1000; ++i) {
        std::vector<std::string> w;
        for (int k = int(gen() % 8); k > 0; --k)
            w.push_back(kinds[gen() % kinds.size()]);
        const double v = assess_value(w, table);
        CHECK(v <= 0.0);
        CHECK(v >= -1.0);
    }
}

TEST_CASE("episode recording")
{
    ExperienceStore store;
    std::vector<EpisodeStep> first{{SimTime{0}, "run_integrity_check", std::nullopt},
                                   {SimTime{1}, std::nullopt, "unexpected-file"},
                                   {SimTime{2}, "delete_file", std::nullopt},
                                   {SimTime{3}, std::nullopt, "file-gone"},
                                   {SimTime{4}, "no_action", std::nullopt},
                                   {SimTime{5}, std::nullopt, "enemy-c2-traffic"}};
    const auto& e = store.record_episode(first, -0.09);
    CHECK(e.steps == first);
    CHECK(e.value == -0.09);
    CHECK(e.actions() == std::vector<std::string>{"run_integrity_check", "delete_file", "no_action"});

    std::vector<EpisodeStep> second{{SimTime{0}, "run_integrity_check", std::nullopt},
                                    {SimTime{1}, std::nullopt, "unexpected-file"},
                                    {SimTime{2}, "deploy_decoy", std::nullopt},
                                    {SimTime{5}, std::nullopt, "alert-received"}};
    store.record_episode(second, -0.57);
    CHECK(store.episodes().size() == 2);
    CHECK(store.episodes()[1].value == -0.57);
    CHECK(store.episodes()[1].seq > store.episodes()[0].seq);

    CHECK_THROWS_AS(store.record_episode({}, 0.0), EmptyEpisodeError);

    ExperienceStore chunked(3);
    chunked.record_episode(steps_of({"a", "b", "c", "d", "e", "f", "g"}), 0.4);
    REQUIRE(chunked.episodes().size() == 3);
    CHECK(chunked.episodes()[2].actions() == std::vector<std::string>{"g"});
    for (const auto& ep : chunked.episodes())
        CHECK(ep.value == 0.4);

    auto back = ExperienceStore::from_json(store.to_json());
    REQUIRE(back.episodes().size() == 2);
    CHECK(back.episodes()[0].steps == first);
}

TEST_CASE("case-based plan lookup")
{
    ExperienceStore store;
    CHECK_FALSE(store.match_episodes({"a13", "a76"}, 0.75));
    store.record_episode(steps_of({"a13", "a76", "a06", "a52"}), 0.83);

    auto plan = store.match_episodes({"a13", "a76"}, 0.75);
    REQUIRE(plan);
    CHECK(*plan == std::vector<std::string>{"a06", "a52"});
    CHECK(store.predict_plan_value({"a13", "a76"}, {"a06", "a52"}) == 0.83);
    CHECK_FALSE(store.predict_plan_value({"a13", "a76"}, {"a06"}));
    CHECK_FALSE(store.match_episodes({"a13", "a76"}, 0.9));
    CHECK_FALSE(store.match_episodes({"a13", "a76", "a06", "a52"}, 0.0));

    store.record_episode(steps_of({"a13", "a76", "a99"}), 0.5);
    store.record_episode(steps_of({"a13", "a76", "a11"}), 0.9);
    CHECK(*store.match_episodes({"a13", "a76"}, 0.0) == std::vector<std::string>{"a11"});
    store.record_episode(steps_of({"a13", "a76", "a06", "a52"}), 0.95);
    CHECK(store.predict_plan_value({"a13", "a76"}, {"a06", "a52"}) == 0.95);
    store.record_episode(steps_of({"a13", "a76", "a12"}), 0.95);
    CHECK(*store.match_episodes({"a13", "a76"}, 0.0) == std::vector<std::string>{"a12"});
}

TEST_CASE("case-based lookup agrees with a linear scan")
{
    std::mt19937_64 gen(1212);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ExperienceStore store(64);
    std::vector<std::pair<std::vector<std::string>, double>> mirror;
    auto word = [&] { return "a" + std::to_string(gen() % 4); };
    for (int i = 0; i < 10000; ++i) {
        std::vector<std::string> acts;
        for (int k = 1 + int(gen() % 5); k > 0; --k)
            acts.push_back(word());
        const double v = std::round(u(gen) * 20) / 20;
        store.record_episode(steps_of(acts), v);
        mirror.emplace_back(acts, v);
    }
    for (int q = 0; q < 300; ++q) {
        std::vector<std::string> recent;
        for (int k = 1 + int(gen() % 2); k > 0; --k)
            recent.push_back(word());
        const double min_value = std::round(u(gen) * 20) / 20;

        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < mirror.size(); ++i) {
            const auto& [acts, v] = mirror[i];
            if (acts.size() > recent.size() && starts_with(acts, recent) && v >= min_value &&
                (!best || v >= mirror[*best].second))
                best = i;
        }
        auto got = store.match_episodes(recent, min_value);
        REQUIRE(bool(got) == bool(best));
        if (best)
            CHECK(*got == std::vector<std::string>(mirror[*best].first.begin() + std::ptrdiff_t(recent.size()),
                                                   mirror[*best].first.end()));

        std::vector<std::string> proposal{word()};
        std::optional<double> expect;
        auto full = recent;
        full.insert(full.end(), proposal.begin(), proposal.end());
        for (const auto& [acts, v] : mirror)
            if (acts == full && (!expect || v > *expect))
                expect = v;
        CHECK(store.predict_plan_value(recent, proposal) == expect);
    }
}

TEST_CASE("reward")
{
    RewardWeights one;
    CHECK(compute_reward({}, one) == 0.0);
    CHECK(compute_reward({4, 2, 100, -10, 3, 0}, one) == doctest::Approx(4.9));
    CHECK(compute_reward({0, 0, 100, 0, 2, 4}, one) == doctest::Approx(0.5));

    std::mt19937_64 gen(55);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int i = 0; i < 100; ++i) {
        RewardInputs in;
        in.honey_events = double(gen() % 6);
        in.security_events = double(gen() % 4); // zero a quarter of the time
        in.total_resources = 1 + u(gen) * 10;
        in.delta_resources = -u(gen);
        in.justified_cfh = double(gen() % 5);
        in.cw = double(gen() % 3);
        RewardWeights w{u(gen), u(gen), u(gen)};
        const double sec = in.security_events == 0 ? 1.0 : in.security_events;
        const double cw = in.cw == 0 ? 1.0 : in.cw;
        const double expect = w.a * in.honey_events / sec + w.b * in.delta_resources / in.total_resources +
                              w.c * in.justified_cfh / cw;
        const double got = compute_reward(in, w);
        CHECK(std::abs(got - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));

        // linear in each coefficient
        for (int c = 0; c < 3; ++c) {
            auto at = [&](double x) {
                RewardWeights v = w;
                (c == 0 ? v.a : c == 1 ? v.b : v.c) = x;
                return compute_reward(in, v);
            };
            const double r0 = at(0), r1 = at(1), r3 = at(3);
            CHECK(r3 - r0 == doctest::Approx(3 * (r1 - r0)).epsilon(1e-9));
        }
    }
}

TEST_CASE("learning mode names")
{
    for (auto m : {LearningMode::Off, LearningMode::Passive, LearningMode::Active})
        CHECK(parse_learning_mode(to_string(m)) == m);
    CHECK_FALSE(parse_learning_mode("eager"));
}

TEST_CASE("history replay reconstructs every snapshot")
{
    auto topo = sim::load_topology(test::load("tests/fixtures/vehicle_topology.json"));
    const auto init = wsi::initial_world_state(topo, "VMS");
    HistoryDB db(init);
    std::mt19937_64 gen(808);
    std::vector<std::string> ents{"VMS", "BMS", "COMMS", "BUS"};
    wsi::WorldState w = init;
    for (int step = 1; step <= 500; ++step) {
        std::vector<wsi::IoC> iocs;
        for (int k = int(gen() % 3); k > 0; --k)
            iocs.push_back({ents[gen() % ents.size()], PerceptKind::Connection, "anomalous-connection",
                            double(gen() % 7) / 10.0, SimTime{step}});
        std::vector<std::string> resets;
        if (gen() % 10 == 0)
            resets.push_back(ents[gen() % ents.size()]);
        for (const auto& e : resets)
            wsi::reset_entity(w, e);
        if (gen() % 50 == 0)
            w.environment = wsi::EnvironmentTag::Virtualized;
        w = wsi::update_world_state(w, iocs, SimTime{step});
        db.append_update(SimTime{step}, iocs, resets, w);
        db.append_flow({SimTime{step}, "VMS", "BMS", 502});
    }
    const auto replayed = db.replay();
    CHECK(replayed == db.snapshots());
    CHECK(db.size() == 1000);
}
