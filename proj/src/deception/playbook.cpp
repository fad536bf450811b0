#include "aica/deception/deception.hpp"

#include <algorithm>
#include <array>

namespace aica::deception {

namespace {

constexpr std::array<std::pair<DeceptionGoal, std::string_view>, 4> kGoals{{
    {DeceptionGoal::Deflect, "deflect"},
    {DeceptionGoal::Distort, "distort"},
    {DeceptionGoal::Deplete, "deplete"},
    {DeceptionGoal::Discover, "discover"},
}};

} // namespace

std::string_view to_string(DeceptionGoal g)
{
    for (const auto& [v, n] : kGoals)
        if (v == g)
            return n;
    return "?";
}

std::optional<DeceptionGoal> parse_deception_goal(std::string_view s)
{
    for (const auto& [v, n] : kGoals)
        if (n == s)
            return v;
    return std::nullopt;
}

nlohmann::json Playbook::to_json() const
{
    nlohmann::json acts = nlohmann::json::array();
    for (const auto& a : actions)
        acts.push_back({{"action", a.action}, {"args", a.args}});
    return {{"name", name},
            {"goal", std::string(to_string(goal))},
            {"parameters", parameters},
            {"preconditions", preconditions},
            {"actions", acts},
            {"cost", cost}};
}

std::vector<Playbook> load_playbooks(const nlohmann::json& doc)
{
    const nlohmann::json& list = doc.is_object() ? doc.value("playbooks", nlohmann::json::array()) : doc;
    if (!list.is_array())
        throw ModelError("malformed", "playbook library: expected an array");
    std::vector<Playbook> out;
    try {
        for (const auto& j : list) {
            Playbook p;
            p.name = j.at("name").get<std::string>();
            auto g = parse_deception_goal(j.at("goal").get<std::string>());
            if (!g)
                throw ModelError("malformed", "playbook '" + p.name + "' has an unknown goal");
            p.goal = *g;
            auto params = j.at("parameters").get<std::vector<std::string>>();
            p.parameters.insert(params.begin(), params.end());
            auto pre = j.value("preconditions", std::vector<std::string>{});
            p.preconditions.insert(pre.begin(), pre.end());
            for (const auto& a : j.at("actions")) {
                if (a.is_string())
                    p.actions.push_back({a.get<std::string>(), nlohmann::json::object()});
                else
                    p.actions.push_back({a.at("action").get<std::string>(), a.value("args", nlohmann::json::object())});
            }
            p.cost = j.value("cost", 0.0);
            if (p.parameters.empty() || p.actions.empty())
                throw ModelError("malformed", "playbook '" + p.name + "' needs parameters and actions");
            out.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ModelError("malformed", std::string("playbook library: ") + ex.what());
    }
    return out;
}

std::optional<Playbook> plan_playbook(const std::vector<std::string>& selected, const std::vector<Playbook>& library,
                                      DeceptionGoal goal, const std::set<std::string>& facts)
{
    const std::set<std::string> have(selected.begin(), selected.end());
    const Playbook* best = nullptr;
    for (const Playbook& p : library) {
        if (p.goal != goal)
            continue;
        if (!std::includes(have.begin(), have.end(), p.parameters.begin(), p.parameters.end()))
            continue;
        if (!std::includes(facts.begin(), facts.end(), p.preconditions.begin(), p.preconditions.end()))
            continue;
        if (!best || p.cost < best->cost)
            best = &p;
    }
    if (!best)
        return std::nullopt;
    return *best;
}

} // namespace aica::deception
