#pragma once

#include "aica/core/time.hpp"
#include "aica/sim/rng.hpp"
#include "aica/sim/topology.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace aica::sim {

enum class MessageKind { AgentProtocol, C2Protocol, Traffic, ScanProbe, Exploit };

std::string_view to_string(MessageKind k);

struct Message {
    NodeId src;
    NodeId dst;
    MessageKind kind{MessageKind::Traffic};
    std::string payload;
    std::optional<std::string> signature;
    std::uint64_t seq{0};
};

struct DeliveryOutcome {
    bool delivered{false};
    SimTime delivered_at;
    std::string drop_reason; // "jammed", "lost", "unreachable"; empty when delivered
    NodeId dropped_on;       // hop tail where the drop happened

    static DeliveryOutcome dropped(std::string reason, NodeId where)
    {
        return {false, SimTime{}, std::move(reason), std::move(where)};
    }
};

class NoRouteError : public std::runtime_error {
public:
    NoRouteError(const NodeId& src, const NodeId& dst)
        : std::runtime_error("no route from '" + src + "' to '" + dst + "'")
    {
    }
};

/// Applies each hop's LinkProfile along the BUS route. Per hop, in order:
/// jam check at the hop's send time; one loss draw if 0 < drop_prob < 1;
/// one jitter draw if jitter > 0. Throws NoRouteError.
DeliveryOutcome transmit(const Topology& topo, Rng& rng, const Message& msg, SimTime at);

} // namespace aica::sim
