#include "aica/collab/collab.hpp"

#include "aica/core/errors.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>
#include <array>
#include <cstdio>

namespace aica::collab {

std::string keyed_hash(const std::string& key, const std::string& data)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), reinterpret_cast<const unsigned char*>(data.data()),
         data.size(), md, &len);
    std::string hex;
    hex.reserve(len * 2);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

bool tags_equal(const std::string& a, const std::string& b)
{
    return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

std::vector<AgentIdentity> discover(const std::vector<AgentIdentity>& agents, const std::string& self,
                                    const NodeId& from, const sim::Topology& topo)
{
    std::vector<AgentIdentity> out;
    for (const auto& a : agents) {
        if (a.name == self || !a.discoverable || !topo.has_node(a.node))
            continue;
        if (topo.node(a.node).unreachable || !topo.route(from, a.node))
            continue;
        out.push_back(a);
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.name < y.name; });
    return out;
}

namespace {

constexpr std::array<std::pair<MessageType, std::string_view>, 6> kTypes{{
    {MessageType::Discover, "discover"},
    {MessageType::Auth, "auth"},
    {MessageType::Scd, "scd"},
    {MessageType::Negotiate, "negotiate"},
    {MessageType::Alert, "alert"},
    {MessageType::C2, "c2"},
}};

} // namespace

std::string_view to_string(MessageType t)
{
    for (const auto& [v, n] : kTypes)
        if (v == t)
            return n;
    return "?";
}

std::optional<MessageType> parse_message_type(std::string_view s)
{
    for (const auto& [v, n] : kTypes)
        if (n == s)
            return v;
    return std::nullopt;
}

std::string Envelope::signing_input() const
{
    nlohmann::json j{{"v", kProtocolVersion},
                     {"type", std::string(to_string(type))},
                     {"from", from},
                     {"to", to},
                     {"seq", seq},
                     {"body", body}};
    return j.dump();
}

std::string Envelope::serialize() const
{
    nlohmann::json j{{"v", kProtocolVersion},
                     {"type", std::string(to_string(type))},
                     {"from", from},
                     {"to", to},
                     {"seq", seq},
                     {"body", body},
                     {"sig", sig}};
    return j.dump();
}

Envelope Envelope::parse(const std::string& payload)
{
    nlohmann::json j = nlohmann::json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ParseError("envelope: not a JSON object");
    if (j.value("v", 0) != kProtocolVersion)
        throw ParseError("envelope: unsupported protocol version");
    Envelope e;
    try {
        auto t = parse_message_type(j.at("type").get<std::string>());
        if (!t)
            throw ParseError("envelope: unknown message type");
        e.type = *t;
        e.from = j.at("from").get<std::string>();
        e.to = j.at("to").get<std::string>();
        e.seq = j.at("seq").get<std::uint64_t>();
        e.body = j.at("body");
        e.sig = j.at("sig").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("envelope: ") + ex.what());
    }
    return e;
}

std::string_view to_string(AuthResult r)
{
    switch (r) {
    case AuthResult::Ok: return "ok";
    case AuthResult::BadSignature: return "bad-signature";
    case AuthResult::UnknownKey: return "unknown-key";
    case AuthResult::Replay: return "replay";
    }
    return "?";
}

std::string auth_response(const std::string& key, const std::string& nonce, const std::string& name)
{
    return keyed_hash(key, nonce + "|" + name);
}

std::string Authenticator::issue_challenge(const std::string& peer, std::uint64_t entropy)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(entropy));
    std::string nonce = self_ + ":" + std::to_string(++counter_) + ":" + buf;
    outstanding_[nonce] = peer;
    return nonce;
}

AuthResult Authenticator::authenticate(const AgentIdentity& peer, const std::string& nonce, const std::string& tag,
                                       const KeyRing& keys)
{
    AuthResult r;
    auto it = outstanding_.find(nonce);
    if (it == outstanding_.end() || it->second != peer.name) {
        r = AuthResult::Replay;
    } else {
        outstanding_.erase(it);
        const std::string* key = keys.find(peer.key_id);
        if (!key)
            r = AuthResult::UnknownKey;
        else
            r = tags_equal(tag, auth_response(*key, nonce, peer.name)) ? AuthResult::Ok : AuthResult::BadSignature;
    }
    last_[peer.name] = r == AuthResult::Ok;
    return r;
}

bool Authenticator::authenticated(const std::string& peer) const
{
    auto it = last_.find(peer);
    return it != last_.end() && it->second;
}

Capacities operator-(const Capacities& a, const Capacities& b)
{
    return {a.memory - b.memory, a.storage - b.storage, a.cpu - b.cpu};
}

Capacities operator+(const Capacities& a, const Capacities& b)
{
    return {a.memory + b.memory, a.storage + b.storage, a.cpu + b.cpu};
}

nlohmann::json ServiceRecord::to_json() const
{
    return {{"agent", agent},
            {"services", services},
            {"memory", capacities.memory},
            {"storage", capacities.storage},
            {"cpu", capacities.cpu},
            {"t", t.ms}};
}

void ServiceRegistry::declare(const ServiceRecord& r, const Authenticator& auth)
{
    if (!auth.authenticated(r.agent))
        throw NotAuthenticatedError(r.agent);
    records_[r.agent] = r;
}

const ServiceRecord& ServiceRegistry::query(const std::string& peer, const Authenticator& auth) const
{
    if (!auth.authenticated(peer))
        throw NotAuthenticatedError(peer);
    auto it = records_.find(peer);
    if (it == records_.end())
        throw std::out_of_range("no service record for '" + peer + "'");
    return it->second;
}

std::string_view to_string(ResponseKind k)
{
    switch (k) {
    case ResponseKind::Accept: return "accept";
    case ResponseKind::Reject: return "reject";
    case ResponseKind::Propose: return "propose";
    }
    return "?";
}

ResponseKind parse_response_kind(std::string_view s)
{
    for (auto k : {ResponseKind::Accept, ResponseKind::Reject, ResponseKind::Propose})
        if (to_string(k) == s)
            return k;
    throw ParseError("negotiation response '" + std::string(s) + "' is not accept, reject, or propose");
}

nlohmann::json NegotiationResponse::to_json() const
{
    return {{"response", std::string(to_string(kind))}, {"terms", terms}};
}

NegotiationResponse NegotiationResponse::from_json(const nlohmann::json& j)
{
    return {parse_response_kind(j.at("response").get<std::string>()), j.value("terms", std::string())};
}

nlohmann::json Agreement::to_json() const
{
    return {{"requester", requester},
            {"responder", responder},
            {"task", task_id},
            {"action", action},
            {"terms", terms},
            {"registered_at", registered_at.ms}};
}

NegotiationResponse respond(ResponderState& r, const NegotiationRequest& req, SimTime now)
{
    const bool conflict = std::any_of(r.agreements.begin(), r.agreements.end(),
                                      [&](const Agreement& a) { return a.task_id == req.task_id; });
    if (conflict)
        return {ResponseKind::Reject, "conflicting agreement for task " + req.task_id};
    if (!r.busy && r.free().covers(req.requirements)) {
        r.agreements.push_back({req.requester, r.name, req.task_id, req.action, req.terms, now});
        r.committed = r.committed + req.requirements;
        r.plan_updates.push_back(req.action);
        return {ResponseKind::Accept, req.terms};
    }
    if (r.capacity.covers(req.requirements))
        return {ResponseKind::Propose, "start-after-current-plan"};
    return {ResponseKind::Reject, "insufficient capacity"};
}

std::string_view to_string(TrustEvidence e)
{
    switch (e) {
    case TrustEvidence::AuthFail: return "auth-fail";
    case TrustEvidence::BadData: return "bad-data";
    case TrustEvidence::AgreementHonored: return "agreement-honored";
    case TrustEvidence::AgreementBroken: return "agreement-broken";
    }
    return "?";
}

double TrustTable::score(const std::string& peer) const
{
    auto it = scores_.find(peer);
    return it == scores_.end() ? kInitial : it->second;
}

double TrustTable::update(const std::string& peer, TrustEvidence e)
{
    double s = score(peer);
    switch (e) {
    case TrustEvidence::AuthFail: s = 0.0; break;
    case TrustEvidence::BadData: s -= 0.2; break;
    case TrustEvidence::AgreementBroken: s -= 0.3; break;
    case TrustEvidence::AgreementHonored: s += 0.1; break;
    }
    s = std::clamp(s, 0.0, 1.0);
    scores_[peer] = s;
    return s;
}

std::vector<std::string> negotiation_targets(const NegotiationRequest& req, const ServiceRegistry& registry,
                                             const TrustTable& trust)
{
    std::vector<std::string> out;
    for (const auto& [name, rec] : registry.records())
        if (name != req.requester && !trust.excluded(name) && rec.capacities.covers(req.requirements))
            out.push_back(name);
    return out;
}

SimTime C2Session::start(std::string question, SimTime now, Millis timeout)
{
    question_ = std::move(question);
    order_.clear();
    deadline_ = now + timeout;
    state_ = State::Awaiting;
    return deadline_;
}

std::string C2Session::on_reply(const std::string& order, bool feasible, const std::string& reason)
{
    order_ = order;
    if (feasible) {
        state_ = State::Acknowledged;
        return std::string(kWillDo);
    }
    state_ = State::Declined;
    return "cannot do: " + reason;
}

std::string C2Session::on_result(bool ok)
{
    state_ = State::Reported;
    return std::string(ok ? kSuccess : kActionFailed);
}

bool C2Session::on_timeout(SimTime now)
{
    if (state_ != State::Awaiting || now < deadline_)
        return false;
    state_ = State::TimedOut;
    return true;
}

std::string_view to_string(C2Session::State s)
{
    switch (s) {
    case C2Session::State::Idle: return "idle";
    case C2Session::State::Awaiting: return "awaiting";
    case C2Session::State::Acknowledged: return "acknowledged";
    case C2Session::State::Reported: return "reported";
    case C2Session::State::TimedOut: return "timed-out";
    case C2Session::State::Declined: return "declined";
    }
    return "?";
}

} // namespace aica::collab
