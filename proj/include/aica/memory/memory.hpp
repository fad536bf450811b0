#pragma once

#include "aica/core/abstract_state.hpp"
#include "aica/core/time.hpp"
#include "aica/wsi/wsi.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace aica::memory {

// ---- world dynamics ----------------------------------------------------

/// Observed successors of one (state, action) key.
struct TransitionPattern {
    std::map<AbstractState, std::uint64_t> successors;
    std::uint64_t total{0};
    std::string scope{"agent-event"}; // world-event / agent-event, stored as a tag only

    /// n / (n + k); 0 when nothing was observed.
    double confidence(double k = 5.0) const { return total == 0 ? 0.0 : double(total) / (double(total) + k); }
};

using Distribution = std::vector<std::pair<AbstractState, double>>;

class DynamicsTable {
public:
    explicit DynamicsTable(double smoothing_k = 5.0) : k_(smoothing_k) {}

    const TransitionPattern& record(const AbstractState& prev, const std::string& action, const AbstractState& next);

    /// Add-one smoothed frequencies over the successors seen for the key,
    /// ordered by probability (descending) then state. Empty for unseen keys.
    Distribution successor_distribution(const AbstractState& state, const std::string& action) const;

    const TransitionPattern* find(const AbstractState& state, const std::string& action) const;
    double confidence(const AbstractState& state, const std::string& action) const;
    double smoothing() const { return k_; }
    std::size_t size() const { return table_.size(); }

    nlohmann::json to_json() const;
    static DynamicsTable from_json(const nlohmann::json& j);

private:
    double k_;
    std::map<std::pair<AbstractState, std::string>, TransitionPattern> table_;
};

// ---- experience --------------------------------------------------------

struct EpisodeStep {
    SimTime t;
    std::optional<std::string> action;
    std::optional<std::string> percept;

    friend bool operator==(const EpisodeStep&, const EpisodeStep&) = default;
};

struct Episode {
    std::vector<EpisodeStep> steps;
    double value{0.0};
    std::uint64_t seq{0}; // recording order; larger is more recent

    /// Action ids in step order, skipping steps without an action.
    std::vector<std::string> actions() const;
};

class EmptyEpisodeError : public std::invalid_argument {
public:
    EmptyEpisodeError() : std::invalid_argument("episode has no steps") {}
};

class ExperienceStore {
public:
    explicit ExperienceStore(std::size_t chunk_length = 8) : chunk_(chunk_length) {}

    /// Appends the steps as one episode, or as consecutive chunks of at most
    /// chunk_length steps that all carry `value`. Returns the last stored episode.
    const Episode& record_episode(const std::vector<EpisodeStep>& steps, double value);

    /// Suffix of the best episode (highest value, ties to most recent) whose
    /// action sequence strictly extends `recent` and whose value >= min_value.
    std::optional<std::vector<std::string>> match_episodes(const std::vector<std::string>& recent,
                                                           double min_value) const;

    /// Value of the best episode whose actions equal recent ++ plan exactly.
    std::optional<double> predict_plan_value(const std::vector<std::string>& recent,
                                             const std::vector<std::string>& plan) const;

    const std::vector<Episode>& episodes() const { return episodes_; }
    std::size_t chunk_length() const { return chunk_; }

    nlohmann::json to_json() const;
    static ExperienceStore from_json(const nlohmann::json& j);

private:
    std::size_t chunk_;
    std::vector<Episode> episodes_;
    std::uint64_t next_seq_{0};
};

// ---- state assessment and reward --------------------------------------

struct SeverityTable {
    std::map<std::string, double> severity;
};

SeverityTable load_severity(const nlohmann::json& doc);

/// -min(1, sum of severities). Unknown kinds score 0 and are counted.
double assess_value(const std::vector<std::string>& percept_kinds, const SeverityTable& table,
                    std::size_t* unknown = nullptr);

struct RewardInputs {
    double honey_events{0};
    double security_events{0};
    double total_resources{1};
    double delta_resources{0};
    double justified_cfh{0};
    double cw{0};
};

struct RewardWeights {
    double a{1};
    double b{1};
    double c{1};
};

/// x when positive, else 1.
inline double den(double x) { return x > 0 ? x : 1.0; }

/// R = a*honey/den(security) + b*delta/total + c*justified/den(cw).
double compute_reward(const RewardInputs& in, const RewardWeights& w);

enum class LearningMode { Off, Passive, Active };

std::string_view to_string(LearningMode m);
std::optional<LearningMode> parse_learning_mode(std::string_view s);

// ---- data services ----------------------------------------------------

/// Baselines and the expected entity descriptions.
struct WorldModelDB {
    wsi::Whitelists whitelists;
    std::map<NodeId, std::vector<std::string>> expected_services;
};

struct FlowRecord {
    SimTime t;
    NodeId src;
    NodeId dst;
    int port{0};
};

/// Append-only record of what an agent saw and concluded. Each snapshot is
/// preceded by the IoCs and resets that produced it, so replaying from the
/// initial state reconstructs every snapshot.
class HistoryDB {
public:
    explicit HistoryDB(wsi::WorldState initial, wsi::Thresholds th = {}) : initial_(std::move(initial)), th_(th) {}

    void append_flow(const FlowRecord& f) { flows_.push_back(f); }
    void append_log(SimTime t, const std::string& line) { logs_.push_back({t, line}); }
    void append_metric(SimTime t, const NodeId& node, const substrate::Metrics& m) { metrics_.push_back({t, node, m}); }

    /// Records one update step and the resulting snapshot.
    void append_update(SimTime t, const std::vector<wsi::IoC>& iocs, const std::vector<std::string>& resets,
                       const wsi::WorldState& snapshot);

    const std::vector<wsi::WorldState>& snapshots() const { return snapshots_; }
    const std::vector<FlowRecord>& flows() const { return flows_; }
    std::size_t size() const { return flows_.size() + logs_.size() + metrics_.size() + updates_.size(); }

    std::vector<wsi::WorldState> replay() const;

private:
    struct Update {
        SimTime t;
        std::vector<wsi::IoC> iocs;
        std::vector<std::string> resets;
        wsi::EnvironmentTag environment;
    };
    struct MetricRecord {
        SimTime t;
        NodeId node;
        substrate::Metrics m;
    };

    wsi::WorldState initial_;
    wsi::Thresholds th_;
    std::vector<FlowRecord> flows_;
    std::vector<std::pair<SimTime, std::string>> logs_;
    std::vector<MetricRecord> metrics_;
    std::vector<Update> updates_;
    std::vector<wsi::WorldState> snapshots_;
};

} // namespace aica::memory
