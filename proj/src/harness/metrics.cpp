#include "aica/harness/metrics.hpp"

#include <algorithm>

namespace aica::harness {

namespace {

nlohmann::json opt(const std::optional<Millis>& v)
{
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

bool red_near(const std::vector<RedRecord>& red, const std::string& entity, SimTime t, Millis window)
{
    return std::any_of(red.begin(), red.end(), [&](const RedRecord& r) {
        return r.touches(entity) && r.t <= t && r.t.ms >= t.ms - window;
    });
}

} // namespace

bool justified(const CryRecord& cry, const std::vector<RedRecord>& red, Millis window)
{
    return red_near(red, cry.subject, cry.t, window);
}

nlohmann::json RunMetrics::to_json() const
{
    nlohmann::json per = nlohmann::json::array();
    for (const auto& a : per_action)
        per.push_back({{"t", a.t.ms}, {"action", a.action}, {"target", a.target}, {"latency", opt(a.latency)}});
    return {{"schema_version", kSchemaVersion},
            {"detection_latency", opt(detection_latency)},
            {"per_action", per},
            {"dwell_time", opt(dwell_time)},
            {"justified_cfh", justified_cfh},
            {"cw", cw},
            {"honey_events", honey_events},
            {"security_events", security_events},
            {"false_positive_count", false_positive_count},
            {"resources_spent", resources_spent},
            {"total_resources", total_resources},
            {"reward", reward}};
}

RunMetrics compute_metrics(const RunLog& log, const MetricsConfig& cfg)
{
    RunMetrics m;
    m.honey_events = log.honey_events;
    m.resources_spent = log.resources_spent;
    m.total_resources = cfg.total_resources;

    auto first_infection = std::find_if(log.red.begin(), log.red.end(),
                                        [](const RedRecord& r) { return r.action == "infect"; });

    for (const auto& r : log.red) {
        ActionLatency a{r.t, r.action, r.target, std::nullopt};
        for (const auto& ioc : log.iocs)
            if (ioc.t >= r.t && r.touches(ioc.entity)) {
                a.latency = ioc.t.ms - r.t.ms;
                break;
            }
        m.per_action.push_back(a);
    }

    if (first_infection != log.red.end()) {
        const SimTime t0 = first_infection->t;
        for (const auto& ioc : log.iocs) {
            if (ioc.t < t0)
                continue;
            bool touched = std::any_of(log.red.begin(), log.red.end(),
                                       [&](const RedRecord& r) { return r.t <= ioc.t && r.touches(ioc.entity); });
            if (touched) {
                m.detection_latency = ioc.t.ms - t0.ms;
                break;
            }
        }
        if (log.neutralized_at)
            m.dwell_time = log.neutralized_at->ms - t0.ms;
    }

    for (const auto& ioc : log.iocs) {
        if (ioc.reason != "honey-access")
            ++m.security_events;
        if (!red_near(log.red, ioc.entity, ioc.t, cfg.cfh_window))
            ++m.false_positive_count;
    }
    for (const auto& c : log.cries) {
        if (justified(c, log.red, cfg.cfh_window))
            ++m.justified_cfh;
        else
            ++m.cw;
    }

    memory::RewardInputs in;
    in.honey_events = double(m.honey_events);
    in.security_events = double(m.security_events);
    in.total_resources = cfg.total_resources;
    in.delta_resources = -m.resources_spent;
    in.justified_cfh = double(m.justified_cfh);
    in.cw = double(m.cw);
    m.reward = memory::compute_reward(in, cfg.weights);
    return m;
}

} // namespace aica::harness
