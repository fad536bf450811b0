#include "aica/deception/deception.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <functional>

namespace aica::deception {

SymbolMap load_symbol_map(const nlohmann::json& doc)
{
    if (!doc.is_object())
        throw ModelError("malformed", "symbol map: expected an object");
    SymbolMap m;
    try {
        for (const auto& j : doc.value("parameters", nlohmann::json::array())) {
            Parameter p;
            p.id = j.at("id").get<std::string>();
            p.cost = j.value("cost", 0.0);
            if (p.cost < 0)
                throw ModelError("malformed", "parameter '" + p.id + "' has negative cost");
            auto deps = j.value("dependencies", std::vector<std::string>{});
            p.dependencies.insert(deps.begin(), deps.end());
            m.parameters[p.id] = std::move(p);
        }
        const auto symbols = doc.value("symbols", nlohmann::json::object());
        for (const auto& [sym, param] : symbols.items())
            m.symbol_to_parameter[sym] = param.get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
        throw ModelError("malformed", std::string("symbol map: ") + ex.what());
    }
    for (const auto& [sym, param] : m.symbol_to_parameter)
        if (!m.parameters.count(param))
            throw ModelError("malformed", "symbol '" + sym + "' maps to unknown parameter '" + param + "'");
    for (const auto& [id, p] : m.parameters)
        for (const auto& d : p.dependencies)
            if (!m.parameters.count(d))
                throw ModelError("malformed", "parameter '" + id + "' depends on unknown '" + d + "'");

    std::map<std::string, int> color;
    std::function<void(const std::string&)> visit = [&](const std::string& id) {
        color[id] = 1;
        for (const auto& d : m.parameters.at(id).dependencies) {
            if (color[d] == 1)
                throw ModelError("cycle-detected", "dependency cycle through parameter '" + d + "'");
            if (color[d] == 0)
                visit(d);
        }
        color[id] = 2;
    };
    for (const auto& [id, p] : m.parameters)
        if (color[id] == 0)
            visit(id);
    return m;
}

bool CoverInstance::feasible_mask(std::uint32_t mask) const
{
    for (std::uint32_t rest = mask; rest; rest &= rest - 1) {
        const int i = std::countr_zero(rest);
        if (closure[i] & ~mask)
            return false;
    }
    for (std::uint32_t p : paths)
        if (!(p & mask))
            return false;
    return true;
}

double CoverInstance::mask_cost(std::uint32_t mask) const
{
    double c = 0.0;
    for (std::uint32_t rest = mask; rest; rest &= rest - 1)
        c += cost[std::countr_zero(rest)];
    return c;
}

bool better_mask(const CoverInstance& inst, std::uint32_t a, std::uint32_t b)
{
    const double ca = inst.mask_cost(a), cb = inst.mask_cost(b);
    if (ca != cb)
        return ca < cb;
    const int na = std::popcount(a), nb = std::popcount(b);
    if (na != nb)
        return na < nb;
    return a < b;
}

namespace {

std::uint64_t mask_count(const CoverInstance& inst)
{
    if (inst.cost.size() > kMaxParameters)
        throw std::length_error("more than 20 candidate parameters");
    return std::uint64_t{1} << inst.cost.size();
}

} // namespace

std::optional<std::uint32_t> solve_serial(const CoverInstance& inst)
{
    const std::uint64_t n = mask_count(inst);
    std::optional<std::uint32_t> best;
    for (std::uint64_t m = 0; m < n; ++m) {
        const auto mask = static_cast<std::uint32_t>(m);
        if (inst.feasible_mask(mask) && (!best || better_mask(inst, mask, *best)))
            best = mask;
    }
    return best;
}

std::optional<std::uint32_t> solve_parallel(const CoverInstance& inst)
{
    const std::uint64_t n = mask_count(inst);
    const int threads = omp_get_max_threads();
    std::vector<std::int64_t> local(static_cast<std::size_t>(threads), -1);
#pragma omp parallel num_threads(threads)
    {
        const int tid = omp_get_thread_num();
        std::int64_t mine = -1;
#pragma omp for schedule(static)
        for (std::int64_t m = 0; m < static_cast<std::int64_t>(n); ++m) {
            const auto mask = static_cast<std::uint32_t>(m);
            if (inst.feasible_mask(mask) && (mine < 0 || better_mask(inst, mask, static_cast<std::uint32_t>(mine))))
                mine = m;
        }
        local[static_cast<std::size_t>(tid)] = mine;
    }
    std::optional<std::uint32_t> best;
    for (std::int64_t m : local)
        if (m >= 0 && (!best || better_mask(inst, static_cast<std::uint32_t>(m), *best)))
            best = static_cast<std::uint32_t>(m);
    return best;
}

SelectionProblem build_problem(const std::set<std::string>& live, const SymbolMap& map, const BehaviorModel& m,
                               const std::vector<Path>& paths)
{
    std::vector<std::set<std::string>> per_path;
    std::set<std::string> universe;
    for (const Path& p : paths) {
        std::set<std::string> params;
        for (int id : p) {
            const BmNode& n = m.node(id);
            if (n.kind != BmNode::Kind::Poi)
                continue;
            for (const auto& sym : n.outputs) {
                if (!live.count(sym))
                    continue;
                auto it = map.symbol_to_parameter.find(sym);
                if (it != map.symbol_to_parameter.end())
                    params.insert(it->second);
            }
        }
        if (params.empty()) {
            std::string ids;
            for (int id : p)
                ids += (ids.empty() ? "" : "-") + std::to_string(id);
            throw InfeasibleError("path " + ids + " has no mappable deception parameter");
        }
        universe.insert(params.begin(), params.end());
        per_path.push_back(std::move(params));
    }

    // pull in dependencies so closure is expressible
    std::vector<std::string> stack(universe.begin(), universe.end());
    while (!stack.empty()) {
        std::string id = stack.back();
        stack.pop_back();
        for (const auto& d : map.parameters.at(id).dependencies)
            if (universe.insert(d).second)
                stack.push_back(d);
    }

    SelectionProblem prob;
    prob.universe.assign(universe.begin(), universe.end());
    if (prob.universe.size() > kMaxParameters)
        throw std::length_error("more than 20 candidate parameters");
    std::map<std::string, int> bit;
    for (std::size_t i = 0; i < prob.universe.size(); ++i)
        bit[prob.universe[i]] = static_cast<int>(i);

    auto& inst = prob.instance;
    for (const auto& id : prob.universe) {
        inst.cost.push_back(map.parameters.at(id).cost);
        std::uint32_t closure = 0;
        std::vector<std::string> todo(map.parameters.at(id).dependencies.begin(),
                                      map.parameters.at(id).dependencies.end());
        while (!todo.empty()) {
            std::string d = todo.back();
            todo.pop_back();
            const std::uint32_t b = std::uint32_t{1} << bit.at(d);
            if (closure & b)
                continue;
            closure |= b;
            for (const auto& dd : map.parameters.at(d).dependencies)
                todo.push_back(dd);
        }
        inst.closure.push_back(closure);
    }
    for (const auto& params : per_path) {
        std::uint32_t mask = 0;
        for (const auto& id : params)
            mask |= std::uint32_t{1} << bit.at(id);
        inst.paths.push_back(mask);
    }
    return prob;
}

ParameterSelection select_parameters(const std::set<std::string>& live, const SymbolMap& map,
                                     const BehaviorModel& m, const std::vector<Path>& paths, bool parallel)
{
    SelectionProblem prob = build_problem(live, map, m, paths);
    auto best = parallel ? solve_parallel(prob.instance) : solve_serial(prob.instance);
    if (!best)
        throw InfeasibleError("no parameter subset satisfies coverage and closure");
    ParameterSelection out;
    for (std::size_t i = 0; i < prob.universe.size(); ++i)
        if (*best & (std::uint32_t{1} << i))
            out.parameters.push_back(prob.universe[i]);
    out.cost = prob.instance.mask_cost(*best);
    return out;
}

} // namespace aica::deception
