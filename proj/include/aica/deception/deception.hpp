#pragma once

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aica::deception {

// ---- behavior models ---------------------------------------------------

struct BmNode {
    enum class Kind { Poi, Fork };

    int id{0};
    Kind kind{Kind::Poi};
    std::string api;                  // poi only
    std::vector<std::string> outputs; // symbolic outputs
};

struct BmEdge {
    enum class Kind { Control, Data };

    int from{0};
    int to{0};
    Kind kind{Kind::Control};
    std::string condition; // control edges leaving a fork
};

class ModelError : public std::runtime_error {
public:
    ModelError(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
    /// cycle-detected, dangling-edge, fork-without-conditions, or malformed.
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class BehaviorModel {
public:
    const std::vector<BmNode>& nodes() const { return nodes_; }
    const std::vector<BmEdge>& edges() const { return edges_; }
    const BmNode& node(int id) const;
    bool has_node(int id) const { return index_.count(id) != 0; }
    int root() const { return root_; }

    /// Every symbol declared as some node's output.
    std::set<std::string> symbols() const;
    /// Control successors of `id` in edge order.
    std::vector<const BmEdge*> control_out(int id) const;
    const BmEdge* control_edge(int from, int to) const;

    /// Attack goal the model was annotated with, if any.
    const std::vector<std::string>& goal() const { return goal_; }

    friend BehaviorModel load_behavior_model(const nlohmann::json& doc);

private:
    std::vector<BmNode> nodes_;
    std::vector<BmEdge> edges_;
    std::map<int, std::size_t> index_;
    int root_{0};
    std::vector<std::string> goal_;
};

/// Validates: control edges form a DAG with a single root, edge endpoints
/// exist, data edges start at a poi, forks have >= 2 conditioned control
/// edges. Throws ModelError.
BehaviorModel load_behavior_model(const nlohmann::json& doc);

/// Identifiers in `condition` that name declared symbols, sorted.
std::set<std::string> condition_symbols(const std::string& condition, const std::set<std::string>& declared);

using Path = std::vector<int>;

/// Root-to-terminal control paths in depth-first, edge order.
std::vector<Path> control_paths(const BehaviorModel& m);

/// Poi api names along a path.
std::vector<std::string> api_sequence(const BehaviorModel& m, const Path& p);

/// Subsequence match, or contiguous when requested.
bool exhibits(const std::vector<std::string>& apis, const std::vector<std::string>& goal, bool contiguous = false);

std::vector<Path> relevant_paths(const BehaviorModel& m, const std::vector<std::string>& goal,
                                 bool contiguous = false);

/// Symbols appearing in conditions of the control edges the paths take.
std::set<std::string> prune_dont_cares(const BehaviorModel& m, const std::vector<Path>& paths);

// ---- parameter selection -----------------------------------------------

struct Parameter {
    std::string id;
    double cost{0.0};
    std::set<std::string> dependencies;
};

struct SymbolMap {
    std::map<std::string, std::string> symbol_to_parameter;
    std::map<std::string, Parameter> parameters;
};

/// Throws ModelError("malformed") for unknown references and
/// ModelError("cycle-detected") for cyclic dependencies.
SymbolMap load_symbol_map(const nlohmann::json& doc);

inline constexpr std::size_t kMaxParameters = 20;

/// Exact cover problem over at most 20 parameters, as bitmasks.
struct CoverInstance {
    std::vector<double> cost;             // per parameter
    std::vector<std::uint32_t> closure;   // dependency closure needed by each parameter
    std::vector<std::uint32_t> paths;     // parameters usable on each path

    bool feasible_mask(std::uint32_t mask) const;
    double mask_cost(std::uint32_t mask) const;
};

/// Ordering used to pick among solutions: lower cost, then fewer
/// parameters, then smaller mask.
bool better_mask(const CoverInstance& inst, std::uint32_t a, std::uint32_t b);

/// Exhaustive minimum; nullopt when no subset is feasible.
std::optional<std::uint32_t> solve_serial(const CoverInstance& inst);
/// Same result, subsets split across OpenMP threads.
std::optional<std::uint32_t> solve_parallel(const CoverInstance& inst);

struct ParameterSelection {
    std::vector<std::string> parameters; // sorted
    double cost{0.0};
};

class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SelectionProblem {
    std::vector<std::string> universe; // parameter ids, sorted
    CoverInstance instance;
};

/// Candidates are parameters mapped from live symbols output by pois on the
/// paths, plus their dependencies. Throws InfeasibleError when a path has no
/// candidate and std::length_error above kMaxParameters.
SelectionProblem build_problem(const std::set<std::string>& live, const SymbolMap& map, const BehaviorModel& m,
                               const std::vector<Path>& paths);

ParameterSelection select_parameters(const std::set<std::string>& live, const SymbolMap& map,
                                     const BehaviorModel& m, const std::vector<Path>& paths, bool parallel = false);

// ---- playbooks ---------------------------------------------------------

enum class DeceptionGoal { Deflect, Distort, Deplete, Discover };

std::string_view to_string(DeceptionGoal g);
std::optional<DeceptionGoal> parse_deception_goal(std::string_view s);

struct PlaybookAction {
    std::string action; // repertoire action id
    nlohmann::json args = nlohmann::json::object();
};

struct Playbook {
    std::string name;
    DeceptionGoal goal{DeceptionGoal::Deflect};
    std::set<std::string> parameters;
    std::set<std::string> preconditions; // facts that must hold
    std::vector<PlaybookAction> actions;
    double cost{0.0};

    nlohmann::json to_json() const;
};

std::vector<Playbook> load_playbooks(const nlohmann::json& doc);

/// Cheapest playbook (library order on ties) whose parameter key is a subset
/// of `selected`, whose goal matches, and whose preconditions are in `facts`.
std::optional<Playbook> plan_playbook(const std::vector<std::string>& selected, const std::vector<Playbook>& library,
                                      DeceptionGoal goal, const std::set<std::string>& facts = {});

} // namespace aica::deception
