#include "aica/collab/collab.hpp"
#include "aica/core/errors.hpp"
#include "support.hpp"

#include "doctest.h"

#include <random>

using namespace aica;
using namespace aica::collab;

namespace {

sim::Topology vehicle(bool bms_unreachable = false)
{
    auto doc = test::load("tests/fixtures/vehicle_topology.json");
    if (bms_unreachable)
        for (auto& n : doc["nodes"])
            if (n["id"] == "BMS")
                n["unreachable"] = true;
    return sim::load_topology(doc);
}

const KeyRing kKeys{{{"k19", "secret-19"}, {"k23", "secret-23"}, {"kvms", "secret-vms"}}};

std::vector<AgentIdentity> fleet()
{
    return {{"Blue-VMS", "kvms", true, "VMS"}, {"Blue-19", "k19", true, "BMS"}, {"Blue-23", "k23", true, "SENS"}};
}

Authenticator authed(const std::string& peer, const std::string& key_id)
{
    Authenticator a("Blue-VMS");
    auto n = a.issue_challenge(peer, 1);
    a.authenticate({peer, key_id, true, ""}, n, auth_response(*kKeys.find(key_id), n, peer), kKeys);
    return a;
}

} // namespace

TEST_CASE("keyed hash matches the published HMAC-SHA256 vector")
{
    CHECK(keyed_hash("Jefe", "what do ya want for nothing?") ==
          "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
    CHECK(tags_equal("abc", "abc"));
    CHECK_FALSE(tags_equal("abc", "abd"));
    CHECK_FALSE(tags_equal("abc", "ab"));
}

TEST_CASE("discovery")
{
    auto topo = vehicle();
    auto found = discover(fleet(), "Blue-VMS", "VMS", topo);
    REQUIRE(found.size() == 2);
    CHECK(found[0].name == "Blue-19");
    CHECK(found[1].name == "Blue-23");

    auto hidden = fleet();
    hidden[2].discoverable = false;
    found = discover(hidden, "Blue-VMS", "VMS", topo);
    REQUIRE(found.size() == 1);
    CHECK(found[0].name == "Blue-19");

    CHECK(discover(fleet(), "Blue-VMS", "VMS", vehicle(true)).size() == 1);
    CHECK(discover({fleet()[0]}, "Blue-VMS", "VMS", topo).empty());
}

TEST_CASE("challenge-response authentication")
{
    Authenticator a("Blue-VMS");
    const AgentIdentity b19{"Blue-19", "k19", true, "BMS"};
    const AgentIdentity b23{"Blue-23", "k23", true, "SENS"};

    auto n1 = a.issue_challenge(b19.name, 42);
    auto good = auth_response("secret-19", n1, b19.name);
    CHECK(a.authenticate(b19, n1, good, kKeys) == AuthResult::Ok);
    CHECK(a.authenticated(b19.name));
    CHECK(a.outstanding() == 0);

    SUBCASE("replaying the same response fails")
    {
        CHECK(a.authenticate(b19, n1, good, kKeys) == AuthResult::Replay);
        CHECK_FALSE(a.authenticated(b19.name));
    }
    SUBCASE("a peer whose key was replaced fails the signature check")
    {
        auto n2 = a.issue_challenge(b23.name, 43);
        CHECK(a.authenticate(b23, n2, auth_response("red-key", n2, b23.name), kKeys) == AuthResult::BadSignature);
        CHECK_FALSE(a.authenticated(b23.name));
    }
    SUBCASE("unknown key id")
    {
        const AgentIdentity stranger{"Blue-99", "k99", true, "PLD"};
        auto n3 = a.issue_challenge(stranger.name, 44);
        CHECK(a.authenticate(stranger, n3, "00", kKeys) == AuthResult::UnknownKey);
    }
    SUBCASE("a nonce issued to one peer cannot be answered by another")
    {
        auto n4 = a.issue_challenge(b19.name, 45);
        CHECK(a.authenticate(b23, n4, auth_response("secret-23", n4, b23.name), kKeys) == AuthResult::Replay);
    }
}

TEST_CASE("nonces are never reused")
{
    Authenticator a("Blue-VMS");
    std::set<std::string> seen;
    std::mt19937_64 gen(3);
    for (int i = 0; i < 5000; ++i)
        CHECK(seen.insert(a.issue_challenge("Blue-19", gen() % 4)).second);
}

TEST_CASE("envelopes")
{
    Envelope e;
    e.type = MessageType::Alert;
    e.from = "Blue-VMS";
    e.to = "Blue-19";
    e.seq = 7;
    e.body = {{"risk", "malicious S1"}};
    e.sign("secret-vms");
    auto back = Envelope::parse(e.serialize());
    CHECK(back.verify("secret-vms"));
    CHECK_FALSE(back.verify("secret-19"));
    CHECK(back.body == e.body);
    CHECK(back.seq == 7);

    back.body["risk"] = "benign";
    CHECK_FALSE(back.verify("secret-vms"));

    auto j = nlohmann::json::parse(e.serialize());
    CHECK(j.at("v") == kProtocolVersion);
    j["v"] = 2;
    CHECK_THROWS_AS(Envelope::parse(j.dump()), ParseError);
    CHECK_THROWS_AS(Envelope::parse("{"), ParseError);
    for (auto t : {MessageType::Discover, MessageType::Auth, MessageType::Scd, MessageType::Negotiate,
                   MessageType::Alert, MessageType::C2})
        CHECK(parse_message_type(to_string(t)) == t);
}

TEST_CASE("service declarations need an authenticated peer")
{
    ServiceRegistry reg;
    auto a = authed("Blue-19", "k19");
    ServiceRecord r{"Blue-19", {"integrity"}, {64, 100, 2}, SimTime{5}};
    reg.declare(r, a);
    CHECK(reg.query("Blue-19", a) == r);

    ServiceRecord newer = r;
    newer.capacities.cpu = 4;
    newer.t = SimTime{9};
    reg.declare(newer, a);
    CHECK(reg.query("Blue-19", a) == newer);

    Authenticator fresh("Blue-VMS");
    CHECK_THROWS_AS(reg.query("Blue-19", fresh), NotAuthenticatedError);
    CHECK_THROWS_AS(reg.declare({"Blue-23", {}, {}, SimTime{1}}, a), NotAuthenticatedError);
}

TEST_CASE("negotiation")
{
    ResponderState b{"Blue-19", {8, 8, 8}, {}, false, {}, {}};
    NegotiationRequest req{"task-1", "Blue-VMS", "kill_service_S1", {4, 4, 4}, "immediate"};

    auto r = respond(b, req, SimTime{100});
    CHECK(r.kind == ResponseKind::Accept);
    REQUIRE(b.agreements.size() == 1);
    CHECK(b.agreements[0].task_id == "task-1");
    CHECK(b.plan_updates == std::vector<std::string>{"kill_service_S1"});

    CHECK(respond(b, req, SimTime{101}).kind == ResponseKind::Reject); // same task again

    b.busy = true;
    auto p = respond(b, {"task-2", "Blue-VMS", "x2", {1, 1, 1}, "immediate"}, SimTime{102});
    CHECK(p.kind == ResponseKind::Propose);
    CHECK(p.terms == "start-after-current-plan");

    auto no = respond(b, {"task-3", "Blue-VMS", "x3", {100, 1, 1}, "immediate"}, SimTime{103});
    CHECK(no.kind == ResponseKind::Reject);

    CHECK_THROWS_AS(parse_response_kind("maybe"), ParseError);
    CHECK_THROWS_AS(NegotiationResponse::from_json({{"response", "counter"}, {"terms", ""}}), ParseError);
}

TEST_CASE("negotiation responses stay in the closed set and agreements precede plan updates")
{
    std::mt19937_64 gen(61);
    for (int trial = 0; trial < 2000; ++trial) {
        ResponderState b{"B", {double(gen() % 10), double(gen() % 10), double(gen() % 10)}, {}, bool(gen() % 2), {}, {}};
        for (int k = 0; k < 5; ++k) {
            NegotiationRequest req{"t" + std::to_string(gen() % 3), "A", "act" + std::to_string(k),
                                   {double(gen() % 6), double(gen() % 6), double(gen() % 6)}, "immediate"};
            const auto before_agreements = b.agreements.size();
            const auto before_updates = b.plan_updates.size();
            auto r = respond(b, req, SimTime{k});
            auto j = r.to_json();
            CHECK((j.at("response") == "accept" || j.at("response") == "reject" || j.at("response") == "propose"));
            CHECK(NegotiationResponse::from_json(j).kind == r.kind);
            const bool accepted = r.kind == ResponseKind::Accept;
            CHECK(b.agreements.size() == before_agreements + (accepted ? 1 : 0));
            CHECK(b.plan_updates.size() == before_updates + (accepted ? 1 : 0));
            CHECK(b.plan_updates.size() == b.agreements.size());
            CHECK(b.capacity.covers(b.committed));
        }
    }
}

TEST_CASE("trust")
{
    TrustTable t;
    CHECK(t.score("B") == 0.5);
    CHECK(t.update("B", TrustEvidence::AuthFail) == 0.0);
    CHECK(t.excluded("B"));

    for (int i = 0; i < 3; ++i)
        t.update("C", TrustEvidence::AgreementHonored);
    CHECK(t.score("C") == doctest::Approx(0.8));

    t.update("D", TrustEvidence::BadData);
    t.update("D", TrustEvidence::BadData);
    CHECK(t.score("D") == doctest::Approx(0.1));
    CHECK(t.excluded("D"));

    ServiceRegistry reg;
    for (const auto& name : {"C", "D"}) {
        auto a = authed(name, "k19");
        reg.declare({name, {}, {10, 10, 10}, SimTime{1}}, a);
    }
    CHECK(negotiation_targets({"t", "A", "x", {1, 1, 1}, ""}, reg, t) == std::vector<std::string>{"C"});

    std::mt19937_64 gen(17);
    TrustTable r;
    for (int i = 0; i < 5000; ++i) {
        const double s = r.update("P", TrustEvidence(gen() % 4));
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("C2 exchange")
{
    C2Session s;
    CHECK(s.start("should I delete application X1?", SimTime{220}, Millis{2780}) == SimTime{3000});
    CHECK_FALSE(s.on_timeout(SimTime{2999}));
    CHECK(s.on_reply("uninstall X1", true, "") == kWillDo);
    CHECK(s.state() == C2Session::State::Acknowledged);
    CHECK(s.on_result(true) == kSuccess);
    CHECK(s.state() == C2Session::State::Reported);

    C2Session no;
    no.start("q", SimTime{0}, Millis{100});
    CHECK(no.on_reply("reflash firmware", false, "no permission") == "cannot do: no permission");
    CHECK(no.state() == C2Session::State::Declined);

    C2Session silent;
    silent.start("q", SimTime{220}, Millis{2780});
    CHECK(silent.on_timeout(SimTime{3000}));
    CHECK(silent.state() == C2Session::State::TimedOut);

    C2Session failed;
    failed.start("q", SimTime{0}, Millis{100});
    failed.on_reply("kill X1", true, "");
    CHECK(failed.on_result(false) == kActionFailed);
}
