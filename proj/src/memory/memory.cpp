#include "aica/memory/memory.hpp"

#include "aica/core/errors.hpp"

#include <algorithm>

namespace aica::memory {

const TransitionPattern& DynamicsTable::record(const AbstractState& prev, const std::string& action,
                                               const AbstractState& next)
{
    TransitionPattern& p = table_[{prev, action}];
    ++p.successors[next];
    ++p.total;
    return p;
}

const TransitionPattern* DynamicsTable::find(const AbstractState& state, const std::string& action) const
{
    auto it = table_.find({state, action});
    return it == table_.end() ? nullptr : &it->second;
}

double DynamicsTable::confidence(const AbstractState& state, const std::string& action) const
{
    const TransitionPattern* p = find(state, action);
    return p ? p->confidence(k_) : 0.0;
}

Distribution DynamicsTable::successor_distribution(const AbstractState& state, const std::string& action) const
{
    Distribution out;
    const TransitionPattern* p = find(state, action);
    if (!p || p->successors.empty())
        return out;
    const double denom = double(p->total) + double(p->successors.size());
    for (const auto& [s, n] : p->successors)
        out.emplace_back(s, (double(n) + 1.0) / denom);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

nlohmann::json DynamicsTable::to_json() const
{
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [key, p] : table_) {
        nlohmann::json succ = nlohmann::json::array();
        for (const auto& [s, n] : p.successors)
            succ.push_back({{"state", state_to_json(s)}, {"count", n}});
        entries.push_back({{"state", state_to_json(key.first)},
                           {"action", key.second},
                           {"scope", p.scope},
                           {"successors", succ}});
    }
    return {{"smoothing_k", k_}, {"patterns", entries}};
}

DynamicsTable DynamicsTable::from_json(const nlohmann::json& j)
{
    DynamicsTable t(j.value("smoothing_k", 5.0));
    for (const auto& e : j.value("patterns", nlohmann::json::array())) {
        auto& p = t.table_[{state_from_json(e.at("state")), e.at("action").get<std::string>()}];
        p.scope = e.value("scope", p.scope);
        for (const auto& s : e.at("successors")) {
            auto n = s.at("count").get<std::uint64_t>();
            p.successors[state_from_json(s.at("state"))] += n;
            p.total += n;
        }
    }
    return t;
}

std::vector<std::string> Episode::actions() const
{
    std::vector<std::string> out;
    for (const auto& s : steps)
        if (s.action)
            out.push_back(*s.action);
    return out;
}

const Episode& ExperienceStore::record_episode(const std::vector<EpisodeStep>& steps, double value)
{
    if (steps.empty())
        throw EmptyEpisodeError();
    const std::size_t n = chunk_ == 0 ? steps.size() : chunk_;
    for (std::size_t i = 0; i < steps.size(); i += n) {
        Episode e;
        e.steps.assign(steps.begin() + i, steps.begin() + std::min(steps.size(), i + n));
        e.value = value;
        e.seq = next_seq_++;
        episodes_.push_back(std::move(e));
    }
    return episodes_.back();
}

std::optional<std::vector<std::string>> ExperienceStore::match_episodes(const std::vector<std::string>& recent,
                                                                        double min_value) const
{
    const Episode* best = nullptr;
    std::vector<std::string> best_actions;
    for (const Episode& e : episodes_) {
        if (e.value < min_value)
            continue;
        auto acts = e.actions();
        if (acts.size() <= recent.size() || !std::equal(recent.begin(), recent.end(), acts.begin()))
            continue;
        if (!best || e.value > best->value || (e.value == best->value && e.seq > best->seq)) {
            best = &e;
            best_actions = std::move(acts);
        }
    }
    if (!best)
        return std::nullopt;
    return std::vector<std::string>(best_actions.begin() + static_cast<std::ptrdiff_t>(recent.size()),
                                    best_actions.end());
}

std::optional<double> ExperienceStore::predict_plan_value(const std::vector<std::string>& recent,
                                                          const std::vector<std::string>& plan) const
{
    std::vector<std::string> want = recent;
    want.insert(want.end(), plan.begin(), plan.end());
    std::optional<double> best;
    for (const Episode& e : episodes_)
        if (e.actions() == want && (!best || e.value > *best))
            best = e.value;
    return best;
}

nlohmann::json ExperienceStore::to_json() const
{
    nlohmann::json eps = nlohmann::json::array();
    for (const Episode& e : episodes_) {
        nlohmann::json steps = nlohmann::json::array();
        for (const auto& s : e.steps)
            steps.push_back({{"t", s.t.ms},
                             {"action", s.action ? nlohmann::json(*s.action) : nlohmann::json()},
                             {"percept", s.percept ? nlohmann::json(*s.percept) : nlohmann::json()}});
        eps.push_back({{"steps", steps}, {"value", e.value}});
    }
    return {{"chunk_length", chunk_}, {"episodes", eps}};
}

ExperienceStore ExperienceStore::from_json(const nlohmann::json& j)
{
    ExperienceStore store(j.value("chunk_length", std::size_t{8}));
    for (const auto& e : j.value("episodes", nlohmann::json::array())) {
        std::vector<EpisodeStep> steps;
        for (const auto& s : e.at("steps")) {
            EpisodeStep st;
            st.t = SimTime{s.value("t", Millis{0})};
            if (s.contains("action") && !s.at("action").is_null())
                st.action = s.at("action").get<std::string>();
            if (s.contains("percept") && !s.at("percept").is_null())
                st.percept = s.at("percept").get<std::string>();
            steps.push_back(std::move(st));
        }
        double v = e.at("value").get<double>();
        if (v < -1.0 || v > 1.0)
            throw ValidationError("experience.value", "episode value out of [-1, 1]");
        store.record_episode(steps, v);
    }
    return store;
}

SeverityTable load_severity(const nlohmann::json& doc)
{
    SeverityTable t;
    if (doc.is_null())
        return t;
    for (const auto& [k, v] : doc.items()) {
        double s = v.get<double>();
        if (s < 0)
            throw ValidationError("severity." + k, "severity must be non-negative");
        t.severity[k] = s;
    }
    return t;
}

double assess_value(const std::vector<std::string>& kinds, const SeverityTable& table, std::size_t* unknown)
{
    double sum = 0.0;
    for (const auto& k : kinds) {
        auto it = table.severity.find(k);
        if (it == table.severity.end()) {
            if (unknown)
                ++*unknown;
            continue;
        }
        sum += it->second;
    }
    return -std::min(1.0, sum);
}

double compute_reward(const RewardInputs& in, const RewardWeights& w)
{
    return w.a * (in.honey_events / den(in.security_events)) + w.b * (in.delta_resources / in.total_resources) +
           w.c * (in.justified_cfh / den(in.cw));
}

std::string_view to_string(LearningMode m)
{
    switch (m) {
    case LearningMode::Off: return "off";
    case LearningMode::Passive: return "passive";
    case LearningMode::Active: return "active";
    }
    return "?";
}

std::optional<LearningMode> parse_learning_mode(std::string_view s)
{
    for (auto m : {LearningMode::Off, LearningMode::Passive, LearningMode::Active})
        if (to_string(m) == s)
            return m;
    return std::nullopt;
}

void HistoryDB::append_update(SimTime t, const std::vector<wsi::IoC>& iocs, const std::vector<std::string>& resets,
                              const wsi::WorldState& snapshot)
{
    updates_.push_back({t, iocs, resets, snapshot.environment});
    snapshots_.push_back(snapshot);
}

std::vector<wsi::WorldState> HistoryDB::replay() const
{
    std::vector<wsi::WorldState> out;
    wsi::WorldState w = initial_;
    for (const Update& u : updates_) {
        for (const auto& e : u.resets)
            wsi::reset_entity(w, e);
        w.environment = u.environment;
        w = wsi::update_world_state(w, u.iocs, u.t, th_);
        out.push_back(w);
    }
    return out;
}

} // namespace aica::memory
