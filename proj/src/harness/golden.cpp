#include "aica/harness/golden.hpp"

#include "aica/core/errors.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace aica::harness {

namespace {

std::vector<std::string> split_lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        out.push_back(line);
    return out;
}

std::string slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string dump_or_missing(const nlohmann::json& j, const std::string& key)
{
    return j.contains(key) ? j.at(key).dump() : "<missing>";
}

// First differing field of two lines that are not byte-identical.
std::string first_field(const std::string& a, const std::string& b, std::string& ea, std::string& eb)
{
    nlohmann::json ja = nlohmann::json::parse(a, nullptr, false);
    nlohmann::json jb = nlohmann::json::parse(b, nullptr, false);
    ea = a;
    eb = b;
    if (ja.is_discarded() || jb.is_discarded() || !ja.is_object() || !jb.is_object())
        return "<line>";
    for (const char* key : {"t", "node", "kind"}) {
        if (dump_or_missing(ja, key) != dump_or_missing(jb, key)) {
            ea = dump_or_missing(ja, key);
            eb = dump_or_missing(jb, key);
            return key;
        }
    }
    const auto da = ja.value("detail", nlohmann::json::object());
    const auto db = jb.value("detail", nlohmann::json::object());
    std::set<std::string> keys;
    for (const auto& [k, _] : da.items())
        keys.insert(k);
    for (const auto& [k, _] : db.items())
        keys.insert(k);
    for (const auto& k : keys) {
        if (dump_or_missing(da, k) != dump_or_missing(db, k)) {
            ea = dump_or_missing(da, k);
            eb = dump_or_missing(db, k);
            return "detail." + k;
        }
    }
    return "<bytes>";
}

} // namespace

std::string Divergence::report() const
{
    return "trace diverges at line " + std::to_string(line) + ", field " + field + ": expected " + expected +
           ", got " + actual;
}

std::optional<Divergence> diff_trace(const std::string& actual, const std::string& golden)
{
    if (actual == golden)
        return std::nullopt;
    const auto a = split_lines(actual);
    const auto g = split_lines(golden);
    const std::size_t n = std::min(a.size(), g.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] == g[i])
            continue;
        Divergence d;
        d.line = i + 1;
        d.field = first_field(g[i], a[i], d.expected, d.actual);
        return d;
    }
    Divergence d;
    d.line = n + 1;
    d.field = "<eof>";
    d.expected = n < g.size() ? g[n] : "<end of trace>";
    d.actual = n < a.size() ? a[n] : "<end of trace>";
    if (a.size() == g.size()) {
        // Same lines, different bytes: trailing newline or line endings.
        d.expected = "<" + std::to_string(golden.size()) + " bytes>";
        d.actual = "<" + std::to_string(actual.size()) + " bytes>";
    }
    return d;
}

std::optional<Divergence> diff_trace_file(const std::vector<sim::TraceRecord>& trace,
                                          const std::filesystem::path& golden)
{
    std::string text;
    try {
        text = slurp(golden);
    } catch (const ParseError& e) {
        return Divergence{1, "<file>", golden.string(), e.what()};
    }
    return diff_trace(sim::to_ndjson(trace), text);
}

std::vector<sim::TraceRecord> read_trace(const std::filesystem::path& path)
{
    std::vector<sim::TraceRecord> out;
    for (const auto& line : split_lines(slurp(path)))
        if (!line.empty())
            out.push_back(sim::TraceRecord::from_line(line));
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ParseError("cannot write '" + path.string() + "'");
    out << text;
}

} // namespace aica::harness
