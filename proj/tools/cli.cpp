#include "cli.hpp"

#include "aica/core/errors.hpp"
#include "aica/deception/deception.hpp"
#include "aica/harness/golden.hpp"
#include "aica/harness/scenario.hpp"
#include "aica/harness/world.hpp"

#include "CLI11.hpp"

#include <map>

namespace aica::cli {

namespace {

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& trace_out,
            const std::string& metrics_out, std::ostream& out)
{
    const auto sc = harness::load_scenario(path);
    const auto r = harness::run_scenario(sc, seed);
    const std::string metrics = r.metrics.to_json().dump(2) + "\n";
    if (!trace_out.empty())
        harness::write_text(trace_out, sim::to_ndjson(r.trace));
    if (!metrics_out.empty())
        harness::write_text(metrics_out, metrics);
    else
        out << metrics;
    return 0;
}

int cmd_verify(const std::string& path, const std::string& golden, std::optional<std::uint64_t> seed,
               std::ostream& out, std::ostream& err)
{
    const auto sc = harness::load_scenario(path);
    const auto r = harness::run_scenario(sc, seed);
    if (auto d = harness::diff_trace_file(r.trace, golden)) {
        err << d->report() << "\n";
        return 1;
    }
    out << "match: " << r.trace.size() << " records\n";
    return 0;
}

int cmd_plan(const std::string& model_path, const std::string& symbols_path, const std::string& goal_name,
             const std::string& library_path, bool contiguous, bool parallel, std::ostream& out, std::ostream& err)
{
    auto goal = deception::parse_deception_goal(goal_name);
    if (!goal) {
        err << "unknown deception goal '" << goal_name << "' (deflect, distort, deplete, discover)\n";
        return 2;
    }
    const auto model = deception::load_behavior_model(harness::read_json_file(model_path));
    const auto symbols_doc = harness::read_json_file(symbols_path);
    const auto map = deception::load_symbol_map(symbols_doc);
    const auto library = deception::load_playbooks(
        library_path.empty() ? symbols_doc.value("playbooks", nlohmann::json::array())
                             : harness::read_json_file(library_path));
    if (model.goal().empty()) {
        err << "behavior model declares no goal pattern\n";
        return 1;
    }

    const auto paths = deception::relevant_paths(model, model.goal(), contiguous);
    const auto live = deception::prune_dont_cares(model, paths);
    const auto sel = deception::select_parameters(live, map, model, paths, parallel);
    const auto pb = deception::plan_playbook(sel.parameters, library, *goal);

    nlohmann::json doc{{"goal_pattern", model.goal()},
                       {"relevant_paths", paths},
                       {"live_symbols", live},
                       {"parameters", sel.parameters},
                       {"cost", sel.cost},
                       {"playbook", pb ? pb->to_json() : nlohmann::json(nullptr)}};
    out << doc.dump(2) << "\n";
    return 0;
}

bool mentions(const sim::TraceRecord& r, const std::string& entity)
{
    if (r.node == entity)
        return true;
    for (const char* key : {"entity", "target", "subject", "peer", "from", "dst"})
        if (r.detail.contains(key) && r.detail.at(key).is_string() && r.detail.at(key).get<std::string>() == entity)
            return true;
    return false;
}

int cmd_inspect(const std::string& path, const std::string& entity, std::ostream& out)
{
    const auto trace = harness::read_trace(path);
    std::map<std::string, std::size_t> kinds;
    std::size_t shown = 0;
    for (const auto& r : trace) {
        if (!entity.empty() && !mentions(r, entity))
            continue;
        ++kinds[r.kind];
        ++shown;
        if (!entity.empty())
            out << r.to_line() << "\n";
    }
    out << shown << " records";
    if (!trace.empty())
        out << ", t=" << trace.front().t.ms << ".." << trace.back().t.ms << " ms";
    out << "\n";
    for (const auto& [k, n] : kinds)
        out << "  " << k << ": " << n << "\n";
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Autonomous cyber-defense agent simulator"};
    app.require_subcommand(1);

    std::string scenario, trace_out, metrics_out, golden, model, symbols, goal, library, trace_in, entity;
    std::optional<std::uint64_t> seed;
    bool contiguous = false, parallel = false;

    auto* run_cmd = app.add_subcommand("run", "Run a scenario");
    run_cmd->add_option("scenario", scenario, "Scenario JSON")->required();
    run_cmd->add_option("--seed", seed, "Override the scenario seed");
    run_cmd->add_option("--trace", trace_out, "Write the NDJSON trace here");
    run_cmd->add_option("--metrics", metrics_out, "Write metrics JSON here (default stdout)");

    auto* verify_cmd = app.add_subcommand("verify", "Compare a run against a golden trace");
    verify_cmd->add_option("scenario", scenario, "Scenario JSON")->required();
    verify_cmd->add_option("--golden", golden, "Golden NDJSON trace")->required();
    verify_cmd->add_option("--seed", seed, "Override the scenario seed");

    auto* dec_cmd = app.add_subcommand("deception", "Deception planning");
    dec_cmd->require_subcommand(1);
    auto* plan_cmd = dec_cmd->add_subcommand("plan", "Select parameters and a playbook for a behavior model");
    plan_cmd->add_option("model", model, "Behavior model JSON")->required();
    plan_cmd->add_option("symbols", symbols, "Symbol map JSON")->required();
    plan_cmd->add_option("goal", goal, "deflect, distort, deplete, or discover")->required();
    plan_cmd->add_option("--library", library, "Playbook library JSON (default: playbooks in the symbol map)");
    plan_cmd->add_flag("--contiguous", contiguous, "Match the goal pattern as a contiguous run");
    plan_cmd->add_flag("--parallel", parallel, "Use the parallel subset search");

    auto* inspect_cmd = app.add_subcommand("inspect", "Summarize a trace");
    inspect_cmd->add_option("trace", trace_in, "NDJSON trace")->required();
    inspect_cmd->add_option("--entity", entity, "Only records that mention this entity");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (*run_cmd)
            return cmd_run(scenario, seed, trace_out, metrics_out, out);
        if (*verify_cmd)
            return cmd_verify(scenario, golden, seed, out, err);
        if (*plan_cmd)
            return cmd_plan(model, symbols, goal, library, contiguous, parallel, out, err);
        if (*inspect_cmd)
            return cmd_inspect(trace_in, entity, out);
    } catch (const ValidationError& e) {
        err << "invalid input at " << e.where() << ": " << e.what() << "\n";
        return 1;
    } catch (const deception::ModelError& e) {
        err << "behavior model: " << e.code() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace aica::cli
