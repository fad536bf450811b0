#pragma once

#include "aica/core/time.hpp"
#include "aica/sim/network.hpp"
#include "aica/sim/rng.hpp"
#include "aica/sim/topology.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace aica::sim {

using EventId = std::uint64_t;

struct Event {
    EventId id{0}; // insertion sequence, unique within a run
    SimTime at;
    NodeId target;
    std::string kind;
    nlohmann::json data;
    std::optional<Message> message;
};

/// Min-queue on (at, id). Equal times pop in insertion order.
class EventQueue {
public:
    EventId push(Event ev);
    Event pop();
    const Event& top() const { return heap_.top(); }
    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const
        {
            return a.at != b.at ? a.at > b.at : a.id > b.id;
        }
    };
    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    EventId next_id_{1};
};

/// One line of the run trace. Serialized as
/// {"t":<int>,"node":"<id>","kind":"<kind>","detail":<object>} with detail
/// keys in lexicographic order.
struct TraceRecord {
    SimTime t;
    NodeId node;
    std::string kind;
    nlohmann::json detail = nlohmann::json::object();

    std::string to_line() const;
    static TraceRecord from_line(std::string_view line);

    friend bool operator==(const TraceRecord& a, const TraceRecord& b)
    {
        return a.t == b.t && a.node == b.node && a.kind == b.kind && a.detail == b.detail;
    }
};

std::string to_ndjson(const std::vector<TraceRecord>& trace);

class TimeInPastError : public std::runtime_error {
public:
    TimeInPastError(SimTime at, SimTime now)
        : std::runtime_error("cannot schedule at " + std::to_string(at.ms) + " ms: clock is at " +
                             std::to_string(now.ms) + " ms")
    {
    }
};

/// Single-threaded discrete-event kernel: clock, queue, seeded stream, trace.
class Simulation {
public:
    using Handler = std::function<void(Simulation&, const Event&)>;

    Simulation(Topology topo, std::uint64_t seed);

    SimTime now() const { return clock_; }
    const Topology& topology() const { return topo_; }
    Rng& rng() { return rng_; }

    void set_handler(Handler h) { handler_ = std::move(h); }

    /// Throws TimeInPastError when at < now().
    EventId schedule(SimTime at, NodeId target, std::string kind, nlohmann::json data = nlohmann::json::object());

    /// Assigns the per-(src, kind) sequence number, traces the outcome, and
    /// enqueues a "deliver" event at the destination when delivered. Protocol
    /// messages must be signed. Throws NoRouteError.
    DeliveryOutcome send(Message msg);

    std::vector<TraceRecord> run_until(SimTime t);

    void trace(const NodeId& node, std::string kind, nlohmann::json detail);
    const std::vector<TraceRecord>& trace_records() const { return trace_; }

    std::size_t pending() const { return queue_.size(); }

private:
    Topology topo_;
    Rng rng_;
    SimTime clock_{};
    EventQueue queue_;
    Handler handler_;
    std::vector<TraceRecord> trace_;
    std::map<std::pair<NodeId, MessageKind>, std::uint64_t> seq_;
};

} // namespace aica::sim
