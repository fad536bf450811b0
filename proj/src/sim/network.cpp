#include "aica/sim/network.hpp"

namespace aica::sim {

std::string_view to_string(MessageKind k)
{
    switch (k) {
    case MessageKind::AgentProtocol: return "agent-protocol";
    case MessageKind::C2Protocol: return "c2-protocol";
    case MessageKind::Traffic: return "traffic";
    case MessageKind::ScanProbe: return "scan-probe";
    case MessageKind::Exploit: return "exploit";
    }
    return "?";
}

DeliveryOutcome transmit(const Topology& topo, Rng& rng, const Message& msg, SimTime at)
{
    auto path = topo.route(msg.src, msg.dst);
    if (!path)
        throw NoRouteError(msg.src, msg.dst);

    if (topo.node(msg.dst).unreachable)
        return DeliveryOutcome::dropped("unreachable", msg.dst);

    SimTime t = at;
    for (std::size_t i = 0; i + 1 < path->size(); ++i) {
        const Link* link = topo.link_between((*path)[i], (*path)[i + 1]);
        const LinkProfile& p = link->profile;
        if (p.jammed_at(t))
            return DeliveryOutcome::dropped("jammed", (*path)[i]);
        if (p.drop_prob >= 1.0)
            return DeliveryOutcome::dropped("lost", (*path)[i]);
        if (p.drop_prob > 0.0 && rng.bernoulli(p.drop_prob))
            return DeliveryOutcome::dropped("lost", (*path)[i]);
        Millis delay = p.base_delay;
        if (p.jitter > 0)
            delay += rng.uniform_int(0, p.jitter);
        t = t + delay;
    }
    return {true, t, {}, {}};
}

} // namespace aica::sim
