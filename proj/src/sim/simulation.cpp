#include "aica/sim/simulation.hpp"

#include "aica/core/errors.hpp"

#include <sstream>

namespace aica::sim {

EventId EventQueue::push(Event ev)
{
    ev.id = next_id_++;
    EventId id = ev.id;
    heap_.push(std::move(ev));
    return id;
}

Event EventQueue::pop()
{
    Event ev = heap_.top();
    heap_.pop();
    return ev;
}

std::string TraceRecord::to_line() const
{
    nlohmann::json node_json = node;
    nlohmann::json kind_json = kind;
    std::string line = "{\"t\":" + std::to_string(t.ms) + ",\"node\":" + node_json.dump() +
                       ",\"kind\":" + kind_json.dump() + ",\"detail\":" + detail.dump() + "}";
    return line;
}

TraceRecord TraceRecord::from_line(std::string_view line)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("trace line: ") + e.what());
    }
    TraceRecord r;
    r.t = SimTime{j.at("t").get<Millis>()};
    r.node = j.at("node").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    r.detail = j.value("detail", nlohmann::json::object());
    return r;
}

std::string to_ndjson(const std::vector<TraceRecord>& trace)
{
    std::string out;
    for (const auto& r : trace) {
        out += r.to_line();
        out += '\n';
    }
    return out;
}

Simulation::Simulation(Topology topo, std::uint64_t seed) : topo_(std::move(topo)), rng_(seed) {}

EventId Simulation::schedule(SimTime at, NodeId target, std::string kind, nlohmann::json data)
{
    if (at < clock_)
        throw TimeInPastError(at, clock_);
    Event ev;
    ev.at = at;
    ev.target = std::move(target);
    ev.kind = std::move(kind);
    ev.data = std::move(data);
    return queue_.push(std::move(ev));
}

DeliveryOutcome Simulation::send(Message msg)
{
    const bool protocol = msg.kind == MessageKind::AgentProtocol || msg.kind == MessageKind::C2Protocol;
    if (protocol && !msg.signature)
        throw std::invalid_argument("protocol message from '" + msg.src + "' is unsigned");
    msg.seq = ++seq_[{msg.src, msg.kind}];

    DeliveryOutcome out = transmit(topo_, rng_, msg, clock_);
    nlohmann::json detail{{"dst", msg.dst},
                          {"msg", std::string(to_string(msg.kind))},
                          {"seq", msg.seq},
                          {"delivered", out.delivered}};
    if (out.delivered)
        detail["at"] = out.delivered_at.ms;
    else {
        detail["reason"] = out.drop_reason;
        detail["hop"] = out.dropped_on;
    }
    trace(msg.src, "transmit", std::move(detail));

    if (out.delivered) {
        Event ev;
        ev.at = out.delivered_at;
        ev.target = msg.dst;
        ev.kind = "deliver";
        ev.message = std::move(msg);
        queue_.push(std::move(ev));
    }
    return out;
}

std::vector<TraceRecord> Simulation::run_until(SimTime t)
{
    if (t < clock_)
        throw TimeInPastError(t, clock_);
    const std::size_t first = trace_.size();
    while (!queue_.empty() && queue_.top().at <= t) {
        Event ev = queue_.pop();
        clock_ = ev.at;
        if (handler_)
            handler_(*this, ev);
    }
    clock_ = t;
    return {trace_.begin() + static_cast<std::ptrdiff_t>(first), trace_.end()};
}

void Simulation::trace(const NodeId& node, std::string kind, nlohmann::json detail)
{
    if (detail.is_null())
        detail = nlohmann::json::object();
    trace_.push_back({clock_, node, std::move(kind), std::move(detail)});
}

} // namespace aica::sim
