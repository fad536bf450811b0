#pragma once

#include "aica/collab/collab.hpp"
#include "aica/decision/decision.hpp"
#include "aica/harness/metrics.hpp"
#include "aica/harness/scenario.hpp"
#include "aica/memory/memory.hpp"
#include "aica/red/red_agent.hpp"
#include "aica/sim/simulation.hpp"
#include "aica/substrate/substrate.hpp"
#include "aica/wsi/wsi.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace aica::harness {

/// Live state of one blue agent. Only that agent's decision cycle writes it.
struct AgentRuntime {
    AgentRuntime(const AgentConfig& cfg, const sim::Topology& topo);

    AgentConfig cfg;
    std::string secret; // key currently used for signing; replaced on hijack
    bool hijacked{false};
    bool quarantined{false};

    wsi::WorldState world;
    AbstractState context;
    wsi::SanitizeStats sanitize;
    std::set<int> decoy_accessors;
    std::set<std::string> violated_paths;
    std::set<std::string> malicious_paths;

    collab::Authenticator auth;
    collab::TrustTable trust;
    collab::ServiceRegistry registry;
    collab::ResponderState responder;
    collab::C2Session c2;
    std::set<std::string> awaiting_peers;
    std::set<std::string> alerting_peers;
    std::optional<std::string> distrusted;

    memory::HistoryDB history;
    memory::DynamicsTable dynamics;
    memory::ExperienceStore experience;
    std::vector<std::string> recent_actions;
    std::vector<memory::EpisodeStep> episode;
    std::vector<std::string> episode_percepts;

    struct Running {
        decision::Plan plan;
        std::size_t step{0};
        int retries{0};
        int replans_left{0};
        AbstractState before;
        std::uint64_t token{0};
        std::optional<std::string> task_id; // set for agreement work
    };
    std::optional<Running> running;
    std::optional<decision::Plan> pending_order;
    std::optional<std::pair<std::string, std::string>> pending_agreement; // (requester, task id)

    bool wake_pending{false};
    std::uint64_t next_plan_id{1};
    std::uint64_t next_token{1};
    std::uint64_t envelope_seq{0};
    std::size_t cycles{0};
    std::size_t discarded{0};
    SimTime last_decision{-1};
    int decisions_at_last{0};
};

struct RunResult {
    std::vector<sim::TraceRecord> trace;
    RunMetrics metrics;
    RunLog log;
};

/// One scenario instance: simulation kernel, substrate, red, blue agents,
/// and the scripted C2 node. Single-threaded; not copyable.
class World {
public:
    explicit World(const Scenario& sc, std::optional<std::uint64_t> seed = std::nullopt);
    World(const World&) = delete;
    World& operator=(const World&) = delete;

    RunResult run();

    const sim::Simulation& simulation() const { return *sim_; }
    const substrate::Substrate& substrate() const { return *sub_; }
    const AgentRuntime& agent(const std::string& name) const;
    const std::vector<std::unique_ptr<AgentRuntime>>& agents() const { return agents_; }
    const red::RedState& red_state() const { return red_; }
    const RunLog& log() const { return log_; }
    /// Drain calls issued by sensing; equals the substrate's read counter
    /// when nothing else reads percept queues.
    std::size_t sensing_reads() const { return sensing_reads_; }

private:
    void handle(const sim::Event& ev);

    AgentRuntime* find_agent(const std::string& name);
    AgentRuntime* agent_on(const NodeId& node);
    std::vector<collab::AgentIdentity> identities() const;
    collab::AgentIdentity identity(const AgentRuntime& a) const;

    void request_wake(AgentRuntime& a);
    void on_wake(AgentRuntime& a);
    void sense(AgentRuntime& a);
    void decide(AgentRuntime& a, int replans_left);
    void start_plan(AgentRuntime& a, decision::Plan p, int replans_left);
    void begin_step(AgentRuntime& a);
    void on_step_done(AgentRuntime& a, std::uint64_t token);
    void finish_plan(AgentRuntime& a, bool ok, bool redecide);
    void close_episode(AgentRuntime& a, bool force);
    AbstractState abstract(const AgentRuntime& a) const;

    decision::StepResult execute(AgentRuntime& a, const decision::ActionSpec& spec, const NodeId& target,
                                 std::vector<std::function<void()>>& post);
    std::optional<NodeId> resolve_target(const AgentRuntime& a, const decision::ActionSpec& spec) const;
    std::vector<AgentRuntime*> reachable_peers(AgentRuntime& a);

    void send_envelope(AgentRuntime& a, collab::MessageType type, const std::string& to, nlohmann::json body);
    void on_deliver(const sim::Message& m);
    void agent_receive(AgentRuntime& a, const sim::Message& m);
    void c2_receive(const sim::Message& m);
    void c2_reply(const std::string& agent);
    void handle_order(AgentRuntime& a, const nlohmann::json& body);
    void handle_negotiation(AgentRuntime& a, const std::string& from, const nlohmann::json& body);
    void auth_failure(AgentRuntime& a, const std::string& peer, const std::string& reason);
    void on_c2_timeout(AgentRuntime& a);
    void on_peer_timeout(AgentRuntime& a);

    void on_red_wake();
    void apply_red(const red::RedAction& act);
    std::vector<NodeId> red_footholds() const;
    void check_neutralized();
    void on_script(const nlohmann::json& data);

    const Scenario* sc_;
    std::unique_ptr<sim::Simulation> sim_;
    std::unique_ptr<substrate::Substrate> sub_;
    std::vector<std::unique_ptr<AgentRuntime>> agents_;
    std::map<NodeId, std::size_t> host_;

    red::RedState red_;
    red::RedObservation red_obs_;
    std::vector<std::pair<NodeId, int>> red_pids_;
    std::size_t c2_next_order_{0};

    RunLog log_;
    std::size_t sensing_reads_{0};
};

RunResult run_scenario(const Scenario& sc, std::optional<std::uint64_t> seed = std::nullopt);

} // namespace aica::harness
