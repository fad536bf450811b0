#pragma once

#include "aica/core/abstract_state.hpp"
#include "aica/core/time.hpp"
#include "aica/memory/memory.hpp"
#include "aica/substrate/substrate.hpp"
#include "aica/wsi/wsi.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aica::decision {

inline constexpr std::string_view kNullAction = "no_action";

enum class Category { Admin, Antivirus, Integrity, ActiveDefense, Proxy, Comms, Collaboration, Null };

std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view s);

/// Who an action is aimed at, resolved by the runtime when the step starts.
enum class TargetSelector { Self, Peers, C2, DistrustedPeer, MostSuspect, Node };

std::string_view to_string(TargetSelector t);
std::optional<TargetSelector> parse_target_selector(std::string_view s);

struct ActionSpec {
    std::string id;
    std::string executor; // runtime behavior; defaults to id
    Category category{Category::Null};
    AbstractState needs; // flags that must hold
    AbstractState forbids;
    AbstractState adds;
    AbstractState removes;
    double cost{0.0};
    double risk{0.0};
    Millis duration{0};
    TargetSelector target{TargetSelector::Self};
    NodeId target_node; // for TargetSelector::Node
    nlohmann::json args = nlohmann::json::object();

    bool is_null() const { return category == Category::Null; }
    bool feasible_in(const AbstractState& s) const;
    /// Declared effect: (s \ removes) ∪ adds.
    AbstractState apply(const AbstractState& s) const;
};

class Repertoire {
public:
    /// The built-in core set, null action first.
    static Repertoire core();

    /// Scenario repertoire: optional core set plus entries that add actions or
    /// override fields of core actions with the same id.
    static Repertoire load(const nlohmann::json& doc);

    void add(ActionSpec a); // replaces an action with the same id
    const ActionSpec* find(std::string_view id) const;
    const ActionSpec& null_action() const;
    const std::vector<ActionSpec>& actions() const { return actions_; }
    std::size_t index_of(std::string_view id) const;

private:
    std::vector<ActionSpec> actions_;
};

ActionSpec load_action(const nlohmann::json& doc, const ActionSpec* base);

// ---- state abstraction ---------------------------------------------------

/// Flags derived from the world state (self_suspect/self_likely/self_confirmed,
/// peer_suspect/peer_likely/peer_confirmed, env_virtualized, env_debugger)
/// united with the runtime's context flags.
AbstractState abstract_state(const wsi::WorldState& w, const AbstractState& context);

// ---- proposal and prediction ---------------------------------------------

/// Ids of actions whose preconditions hold, in repertoire order; always
/// includes the null action.
std::vector<std::string> feasible_actions(const AbstractState& s, const Repertoire& rep);

class InfeasibleActionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Prediction {
    memory::Distribution successors;
    double confidence{0.0}; // 0 when falling back to the declared effect
};

/// Successor distribution from the dynamics table, else the declared effect
/// with probability 1 and confidence 0. Throws InfeasibleActionError.
Prediction predict(const AbstractState& s, const ActionSpec& a, const memory::DynamicsTable* dynamics);

// ---- plans ---------------------------------------------------------------

struct PlanStep {
    std::string action;
    AbstractState expected; // most likely successor along this branch
    double probability{1.0};

    friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

struct Score {
    double efficacy{0.0};
    Millis rapidity{0};
    double rapidity_penalty{0.0};
    double risk{0.0};
    double total{0.0};
};

struct Plan {
    std::uint64_t plan_id{0};
    std::vector<PlanStep> steps;
    memory::Distribution outcome; // distribution after the last step
    Score score;
    bool fallback{false}; // null plan chosen because nothing was acceptable
    std::string origin{"planner"};

    std::vector<std::string> action_ids() const;
    nlohmann::json to_json() const;
};

/// Plan consisting of the null action only.
Plan null_plan(const AbstractState& s, const Repertoire& rep, std::uint64_t plan_id = 0);

/// Sink for emitted plans; return false to stop planning.
using PlanSink = std::function<bool(Plan)>;

/// Depth-first expansion. At each tree node the children are all
/// (feasible action, successor) pairs, ranked by probability then repertoire
/// order (null last), and only the first `branch` are kept. Every non-root
/// tree node is emitted as a plan before its children are expanded. Null
/// steps are leaves. Returns the number of plans emitted.
std::size_t plan(const AbstractState& start, int depth, int branch, const Repertoire& rep,
                 const memory::DynamicsTable* dynamics, const PlanSink& sink, std::uint64_t first_id = 1);

// ---- goals and scoring ---------------------------------------------------

struct Goal {
    enum class Mode { All, Any };

    std::string name;
    double weight{1.0};
    std::vector<std::string> literals; // "flag" or "!flag"
    Mode mode{Mode::All};

    /// All: fraction of literals that hold. Any: 1 if one holds, else 0.
    double degree(const AbstractState& s) const;
};

struct GoalProfile {
    double w_e{1.0};
    double w_t{0.1};
    double w_r{0.5};
    double min_score{0.0};
    bool urgency{false}; // the runtime also forces this on while in_combat holds
    Millis time_scale{60000};
    std::vector<Goal> goals;

    /// Throws ValidationError when the invariants do not hold.
    void validate() const;
    /// Weighted mean goal degree in [0, 1].
    double efficacy(const AbstractState& s) const;
};

GoalProfile load_goal_profile(const nlohmann::json& doc);

Score score(const Plan& p, const GoalProfile& g, const Repertoire& rep);

// ---- selection -----------------------------------------------------------

/// Consumes scored plans in arrival order.
class Selector {
public:
    Selector(GoalProfile goals, const Repertoire& rep) : goals_(std::move(goals)), rep_(&rep) {}

    /// Scores and records the plan. Returns false when planning should stop.
    bool offer(Plan p);

    /// Best plan per the selection rules, or the flagged null plan when
    /// nothing acceptable arrived.
    Plan result(const AbstractState& s) const;

    std::size_t received() const { return plans_.size(); }
    bool stopped() const { return stopped_; }
    const std::vector<Plan>& plans() const { return plans_; }

private:
    GoalProfile goals_;
    const Repertoire* rep_;
    std::vector<Plan> plans_;
    std::optional<std::size_t> chosen_;
    bool stopped_{false};
};

/// Index of the plan chosen from an already scored, non-empty list, using
/// the non-urgent rule: argmax score; among near-ties drop dominated plans,
/// then prefer fewer steps, then lower plan_id.
std::size_t argmax_plan(const std::vector<Plan>& plans);

bool dominates(const Score& a, const Score& b);

// ---- execution -----------------------------------------------------------

enum class ExecStatus { Done, NotDone, WronglyDone };

std::string_view to_string(ExecStatus s);

struct StepResult {
    ExecStatus status{ExecStatus::Done};
    std::string error; // substrate error text for WronglyDone
    bool effects_ok{true};
    nlohmann::json detail = nlohmann::json::object();
};

/// Runs `body` against the substrate. On NotDone, WronglyDone, or a thrown
/// SubstrateError, the listed nodes are restored to their prior state.
StepResult run_atomic(substrate::Substrate& sub, const std::vector<NodeId>& nodes,
                      const std::function<StepResult()>& body);

enum class Adjustment { Continue, RetryStep, Replan, Collaborate };

std::string_view to_string(Adjustment a);

/// Done with good effects -> continue; first NotDone -> retry; repeated
/// NotDone, WronglyDone, or bad effects -> replan while replans remain,
/// otherwise ask collaborators.
Adjustment adjust(const StepResult& r, int retries_used, int replans_left);

/// Runs all steps of a plan synchronously through `exec`, applying adjust.
/// Used where no simulated duration is needed (tests, offline evaluation).
struct ExecutionLog {
    std::vector<std::pair<std::string, StepResult>> steps;
    int retries{0};
    std::optional<Adjustment> final_adjustment; // set when execution stopped early
};

ExecutionLog execute(const Plan& p, const Repertoire& rep,
                     const std::function<StepResult(const ActionSpec&, const PlanStep&)>& exec, int replans_left = 0);

} // namespace aica::decision
