#pragma once

#include "aica/core/time.hpp"
#include "aica/sim/topology.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aica::collab {

// ---- keys and signatures ---------------------------------------------------

/// Pre-shared secrets by key id.
struct KeyRing {
    std::map<std::string, std::string> secrets;

    const std::string* find(const std::string& key_id) const
    {
        auto it = secrets.find(key_id);
        return it == secrets.end() ? nullptr : &it->second;
    }
};

/// Lower-case hex HMAC-SHA256 of `data` under `key`.
std::string keyed_hash(const std::string& key, const std::string& data);

/// Constant-time comparison of two tags.
bool tags_equal(const std::string& a, const std::string& b);

struct AgentIdentity {
    std::string name;
    std::string key_id;
    bool discoverable{true};
    NodeId node;

    friend bool operator==(const AgentIdentity&, const AgentIdentity&) = default;
};

/// Agents other than `self` that are discoverable and reachable from `from`
/// (a route exists and the destination is not marked unreachable), by name.
std::vector<AgentIdentity> discover(const std::vector<AgentIdentity>& agents, const std::string& self,
                                    const NodeId& from, const sim::Topology& topo);

// ---- envelopes -------------------------------------------------------------

inline constexpr int kProtocolVersion = 1;

enum class MessageType { Discover, Auth, Scd, Negotiate, Alert, C2 };

std::string_view to_string(MessageType t);
std::optional<MessageType> parse_message_type(std::string_view s);

/// {"v":1,"type":...,"from":...,"to":...,"seq":...,"body":{...},"sig":"<hex>"}.
/// The signature covers the compact dump of every other field.
struct Envelope {
    MessageType type{MessageType::Alert};
    std::string from;
    std::string to;
    std::uint64_t seq{0};
    nlohmann::json body = nlohmann::json::object();
    std::string sig;

    std::string signing_input() const;
    void sign(const std::string& key) { sig = keyed_hash(key, signing_input()); }
    bool verify(const std::string& key) const { return tags_equal(sig, keyed_hash(key, signing_input())); }

    std::string serialize() const;
    /// Throws ParseError on malformed or wrong-version payloads.
    static Envelope parse(const std::string& payload);
};

// ---- authentication --------------------------------------------------------

enum class AuthResult { Ok, BadSignature, UnknownKey, Replay };

std::string_view to_string(AuthResult r);

/// Tag a prover returns for a challenge: keyed hash over nonce ‖ name.
std::string auth_response(const std::string& key, const std::string& nonce, const std::string& name);

/// Verifier side of challenge-response. Nonces are single use.
class Authenticator {
public:
    explicit Authenticator(std::string self) : self_(std::move(self)) {}

    /// Fresh nonce bound to `peer`; `entropy` comes from the run's seeded stream.
    std::string issue_challenge(const std::string& peer, std::uint64_t entropy);

    /// Consumes the nonce and checks the tag under the peer's pre-shared key.
    AuthResult authenticate(const AgentIdentity& peer, const std::string& nonce, const std::string& tag,
                            const KeyRing& keys);

    /// True iff the most recent authenticate() for `peer` returned Ok.
    bool authenticated(const std::string& peer) const;
    std::size_t outstanding() const { return outstanding_.size(); }

private:
    std::string self_;
    std::uint64_t counter_{0};
    std::map<std::string, std::string> outstanding_; // nonce -> peer
    std::map<std::string, bool> last_;
};

// ---- services and negotiation ----------------------------------------------

struct Capacities {
    double memory{0};
    double storage{0};
    double cpu{0};

    bool covers(const Capacities& need) const
    {
        return memory >= need.memory && storage >= need.storage && cpu >= need.cpu;
    }
    friend bool operator==(const Capacities&, const Capacities&) = default;
};

Capacities operator-(const Capacities& a, const Capacities& b);
Capacities operator+(const Capacities& a, const Capacities& b);

struct ServiceRecord {
    std::string agent;
    std::vector<std::string> services;
    Capacities capacities;
    SimTime t;

    nlohmann::json to_json() const;
    friend bool operator==(const ServiceRecord&, const ServiceRecord&) = default;
};

class NotAuthenticatedError : public std::runtime_error {
public:
    explicit NotAuthenticatedError(const std::string& peer)
        : std::runtime_error("peer '" + peer + "' is not authenticated")
    {
    }
};

/// Latest service-and-capacity declaration per agent.
class ServiceRegistry {
public:
    void declare(const ServiceRecord& r, const Authenticator& auth);
    const ServiceRecord& query(const std::string& peer, const Authenticator& auth) const;
    const std::map<std::string, ServiceRecord>& records() const { return records_; }

private:
    std::map<std::string, ServiceRecord> records_;
};

enum class ResponseKind { Accept, Reject, Propose };

std::string_view to_string(ResponseKind k);
/// Closed set: anything other than accept/reject/propose throws ParseError.
ResponseKind parse_response_kind(std::string_view s);

struct NegotiationRequest {
    std::string task_id;
    std::string requester;
    std::string action; // what the responder is asked to do
    Capacities requirements;
    std::string terms{"immediate"};
};

struct NegotiationResponse {
    ResponseKind kind{ResponseKind::Reject};
    std::string terms; // counter-terms for propose, reason for reject

    nlohmann::json to_json() const;
    static NegotiationResponse from_json(const nlohmann::json& j);
};

struct Agreement {
    std::string requester;
    std::string responder;
    std::string task_id;
    std::string action;
    std::string terms;
    SimTime registered_at;

    nlohmann::json to_json() const;
};

/// Responder-side resources and commitments.
struct ResponderState {
    std::string name;
    Capacities capacity;
    Capacities committed;
    bool busy{false}; // currently executing a plan
    std::vector<Agreement> agreements;
    std::vector<std::string> plan_updates; // actions appended on accept

    Capacities free() const { return capacity - committed; }
};

/// Accept when free capacity covers the requirement, the responder is idle,
/// and no agreement exists for the task; propose a deferred start when total
/// capacity would cover it; otherwise reject. On accept the agreement is
/// registered before the responder's plan is updated.
NegotiationResponse respond(ResponderState& responder, const NegotiationRequest& req, SimTime now);

// ---- trust -------------------------------------------------------------

enum class TrustEvidence { AuthFail, BadData, AgreementHonored, AgreementBroken };

std::string_view to_string(TrustEvidence e);

class TrustTable {
public:
    static constexpr double kInitial = 0.5;
    static constexpr double kExclusion = 0.3;

    double score(const std::string& peer) const;
    double update(const std::string& peer, TrustEvidence e);
    bool excluded(const std::string& peer) const { return score(peer) < kExclusion; }
    const std::map<std::string, double>& scores() const { return scores_; }

private:
    std::map<std::string, double> scores_;
};

/// Agents whose latest record covers the requirement and whose trust is not
/// below the exclusion threshold, by name.
std::vector<std::string> negotiation_targets(const NegotiationRequest& req, const ServiceRegistry& registry,
                                             const TrustTable& trust);

// ---- C2 exchange -------------------------------------------------------

inline constexpr std::string_view kWillDo = "will do";
inline constexpr std::string_view kSuccess = "success";
inline constexpr std::string_view kActionFailed = "action failed";

/// One query to C2 following the reply/acknowledge/report flowchart.
class C2Session {
public:
    enum class State { Idle, Awaiting, Acknowledged, Reported, TimedOut, Declined };

    /// Sends the question; returns the deadline.
    SimTime start(std::string question, SimTime now, Millis timeout);

    /// Authenticated reply with an order. Returns the acknowledgement:
    /// "will do" when feasible, else "cannot do: <reason>".
    std::string on_reply(const std::string& order, bool feasible, const std::string& reason);

    /// Outcome of the ordered action: "success" or "action failed".
    std::string on_result(bool ok);

    /// True (and the session moves to local decision) when the deadline has
    /// passed without a reply.
    bool on_timeout(SimTime now);

    State state() const { return state_; }
    const std::string& question() const { return question_; }
    const std::string& order() const { return order_; }
    SimTime deadline() const { return deadline_; }

private:
    State state_{State::Idle};
    std::string question_;
    std::string order_;
    SimTime deadline_;
};

std::string_view to_string(C2Session::State s);

} // namespace aica::collab
