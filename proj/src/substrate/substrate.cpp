#include "aica/substrate/substrate.hpp"

#include "aica/core/errors.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <utility>

namespace aica::substrate {

namespace {

Hash fnv1a(std::string_view s)
{
    Hash h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::array<std::pair<ProcessOwner, std::string_view>, 4> kOwners{{
    {ProcessOwner::System, "system"},
    {ProcessOwner::BlueAgent, "blue-agent"},
    {ProcessOwner::RedAgent, "red-agent"},
    {ProcessOwner::Unknown, "unknown"},
}};

constexpr std::array<std::pair<DecoyKind, std::string_view>, 4> kDecoys{{
    {DecoyKind::FakeFile, "fake-file"},
    {DecoyKind::FakePasswordFile, "fake-password-file"},
    {DecoyKind::FakeService, "fake-service"},
    {DecoyKind::HoneypotNode, "honeypot-node"},
}};

} // namespace

std::string hash_to_hex(Hash h)
{
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Hash parse_hash(const nlohmann::json& j)
{
    if (j.is_number_unsigned() || j.is_number_integer())
        return j.get<Hash>();
    if (!j.is_string())
        throw ParseError("hash: expected string or integer");
    const auto s = j.get<std::string>();
    try {
        std::size_t used = 0;
        Hash h = std::stoull(s, &used, 0);
        if (used != s.size())
            throw ParseError("hash: trailing characters in '" + s + "'");
        return h;
    } catch (const std::logic_error&) {
        throw ParseError("hash: cannot parse '" + s + "'");
    }
}

std::string_view to_string(ProcessOwner o)
{
    for (const auto& [v, n] : kOwners)
        if (v == o)
            return n;
    return "?";
}

std::optional<ProcessOwner> parse_process_owner(std::string_view s)
{
    for (const auto& [v, n] : kOwners)
        if (n == s)
            return v;
    return std::nullopt;
}

std::string_view to_string(DecoyKind k)
{
    for (const auto& [v, n] : kDecoys)
        if (v == k)
            return n;
    return "?";
}

std::optional<DecoyKind> parse_decoy_kind(std::string_view s)
{
    for (const auto& [v, n] : kDecoys)
        if (n == s)
            return v;
    return std::nullopt;
}

std::string_view to_string(FindingKind k)
{
    switch (k) {
    case FindingKind::HashMismatch: return "hash-mismatch";
    case FindingKind::BlacklistMatch: return "blacklist-match";
    case FindingKind::UnexpectedPath: return "unexpected-path";
    }
    return "?";
}

Substrate::Substrate(const sim::Topology& topo) : topo_(&topo)
{
    for (const auto& [id, n] : topo.nodes())
        nodes_.emplace(id, NodeState{});
}

void Substrate::require_node(const NodeId& node) const
{
    if (!nodes_.count(node))
        throw SubstrateError("unknown-node", "unknown node '" + node + "'");
}

NodeState& Substrate::node(const NodeId& id)
{
    require_node(id);
    return nodes_.at(id);
}

const NodeState& Substrate::node(const NodeId& id) const
{
    require_node(id);
    return nodes_.at(id);
}

FileEntry Substrate::write_file(const NodeId& node, const std::string& path, Hash new_hash, bool authorized,
                                SimTime now)
{
    NodeState& st = this->node(node);
    auto it = st.files.find(path);
    if (!authorized && st.lockdown)
        throw SubstrateError("lockdown", "node '" + node + "' refuses unprivileged changes during lockdown");
    if (it != st.files.end() && it->second.protected_file && !authorized)
        throw SubstrateError("protected-file", "file '" + path + "' on '" + node + "' is protected");

    const bool in_window =
        st.maintenance_windows.empty() ||
        std::any_of(st.maintenance_windows.begin(), st.maintenance_windows.end(),
                    [now](const Interval& w) { return w.contains(now); });

    FileEntry entry = it == st.files.end() ? FileEntry{path, 0, false, now, true} : it->second;
    entry.content_hash = new_hash;
    entry.last_change = now;
    entry.change_authorized = authorized && in_window;
    st.files[path] = entry;
    st.log.push_back({now, "write " + path + " " + hash_to_hex(new_hash) +
                               (entry.change_authorized ? " authorized" : " unauthorized")});

    if (st.supervised && !entry.change_authorized) {
        Percept p;
        p.t = now;
        p.source = PerceptSource::System;
        p.kind = PerceptKind::IntegrityFinding;
        p.attributes = {{"node", node},
                        {"path", path},
                        {"finding", std::string(to_string(FindingKind::HashMismatch))},
                        {"authorized", "false"}};
        enqueue_percept(node, std::move(p));
    }
    return entry;
}

std::optional<std::string> Substrate::delete_file(const NodeId& node, const std::string& path, bool privileged,
                                                  SimTime now)
{
    NodeState& st = this->node(node);
    auto it = st.files.find(path);
    if (it == st.files.end())
        return std::string(kDeleteMissing);
    if (it->second.protected_file && !privileged)
        return std::string(kDeleteProtected);
    st.files.erase(it);
    st.log.push_back({now, "delete " + path});
    return std::nullopt;
}

bool Substrate::restore_file(const NodeId& node, const std::string& path, SimTime now)
{
    NodeState& st = this->node(node);
    auto b = st.backups.find(path);
    if (b == st.backups.end())
        return false;
    FileEntry& f = st.files[path];
    f.path = path;
    f.content_hash = b->second;
    f.last_change = now;
    f.change_authorized = true;
    st.log.push_back({now, "restore " + path + " " + hash_to_hex(b->second)});
    return true;
}

std::vector<IntegrityFinding> Substrate::check_integrity(const NodeId& node, const IntegrityBaseline& baseline) const
{
    const NodeState& st = this->node(node);
    std::vector<IntegrityFinding> out;
    for (const auto& [path, f] : st.files) {
        const bool is_decoy = std::any_of(st.decoys.begin(), st.decoys.end(),
                                          [&](const Decoy& d) { return d.locator == path; });
        if (is_decoy)
            continue;
        IntegrityFinding finding{node, path, FindingKind::HashMismatch, f.content_hash, f.change_authorized};
        if (baseline.blacklist.count(f.content_hash)) {
            finding.kind = FindingKind::BlacklistMatch;
            out.push_back(finding);
            continue;
        }
        auto w = baseline.whitelist.find(path);
        if (w == baseline.whitelist.end()) {
            finding.kind = FindingKind::UnexpectedPath;
            out.push_back(finding);
        } else if (w->second != f.content_hash) {
            out.push_back(finding);
        }
    }
    return out;
}

std::vector<int> Substrate::scan_ports(const NodeId& node, const NodeId& scanner, SimTime now)
{
    require_node(node);
    require_node(scanner);
    if (!topo_->route(scanner, node))
        throw SubstrateError("no-route", "no route from '" + scanner + "' to '" + node + "'");
    std::vector<int> open;
    for (const auto& [port, entry] : nodes_.at(node).ports)
        if (entry.open)
            open.push_back(port);
    for (int port : open) {
        Percept p;
        p.t = now;
        p.source = PerceptSource::Environment;
        p.kind = PerceptKind::ScanProbe;
        p.attributes = {{"src", scanner}, {"dst", node}, {"port", std::to_string(port)}};
        enqueue_percept(node, p);
        if (scanner != node)
            enqueue_percept(scanner, p);
    }
    return open;
}

const PortTable& Substrate::remap_port(const NodeId& node, int from, int to, bool decoy, SimTime now)
{
    NodeState& st = this->node(node);
    auto src = st.ports.find(from);
    if (src == st.ports.end() || !src->second.open)
        throw SubstrateError("port-not-open", "port " + std::to_string(from) + " is not open on '" + node + "'");
    if (st.ports.count(to))
        throw SubstrateError("port-busy", "port " + std::to_string(to) + " is busy on '" + node + "'");
    if (decoy && st.decoys.size() >= st.decoy_capacity)
        throw SubstrateError("capacity-exceeded", "decoy capacity exhausted on '" + node + "'");

    PortEntry moved = src->second;
    st.ports.erase(src);
    st.ports[to] = moved;
    if (decoy) {
        st.ports[from] = PortEntry{moved.service, Authenticity::Fake, true};
        st.decoys.push_back(Decoy{st.next_decoy++, DecoyKind::FakeService, std::to_string(from), 0});
    }
    st.log.push_back({now, "remap " + std::to_string(from) + "->" + std::to_string(to) + (decoy ? " decoy" : "")});
    return st.ports;
}

DecoyHandle Substrate::deploy_decoy(const NodeId& node, DecoyKind kind, const std::string& locator, SimTime now)
{
    NodeState& st = this->node(node);
    if (st.decoys.size() >= st.decoy_capacity)
        throw SubstrateError("capacity-exceeded", "decoy capacity exhausted on '" + node + "'");

    switch (kind) {
    case DecoyKind::FakeFile:
    case DecoyKind::FakePasswordFile:
        if (st.files.count(locator))
            throw SubstrateError("port-busy", "path '" + locator + "' already exists on '" + node + "'");
        st.files[locator] = FileEntry{locator, fnv1a("decoy:" + locator), false, now, true};
        break;
    case DecoyKind::FakeService: {
        int port = 0;
        try {
            port = std::stoi(locator);
        } catch (const std::logic_error&) {
            throw SubstrateError("not-found", "fake service needs a port number, got '" + locator + "'");
        }
        if (st.ports.count(port))
            throw SubstrateError("port-busy", "port " + locator + " is busy on '" + node + "'");
        st.ports[port] = PortEntry{"decoy", Authenticity::Fake, true};
        break;
    }
    case DecoyKind::HoneypotNode:
        break;
    }
    Decoy d{st.next_decoy++, kind, locator, 0};
    st.decoys.push_back(d);
    st.log.push_back({now, "decoy " + std::string(to_string(kind)) + " " + locator});
    return DecoyHandle{node, d.id};
}

void Substrate::honey(const NodeId& node, const Decoy& d, int accessor_pid, const NodeId& accessor_node, SimTime now)
{
    ++honey_events_;
    Percept p;
    p.t = now;
    p.source = PerceptSource::Environment;
    p.kind = PerceptKind::HoneyEvent;
    p.attributes = {{"node", node},
                    {"decoy", std::to_string(d.id)},
                    {"accessor", std::to_string(accessor_pid)},
                    {"accessor_node", accessor_node}};
    enqueue_percept(node, std::move(p));
}

std::optional<Hash> Substrate::read_file(const NodeId& node, const std::string& path, int accessor_pid,
                                         const NodeId& accessor_node, SimTime now)
{
    NodeState& st = this->node(node);
    auto it = st.files.find(path);
    if (it == st.files.end())
        return std::nullopt;
    for (Decoy& d : st.decoys) {
        if ((d.kind == DecoyKind::FakeFile || d.kind == DecoyKind::FakePasswordFile) && d.locator == path) {
            ++d.accesses;
            honey(node, d, accessor_pid, accessor_node, now);
        }
    }
    return it->second.content_hash;
}

bool Substrate::connect(const NodeId& node, int port, int accessor_pid, const NodeId& accessor_node, SimTime now)
{
    NodeState& st = this->node(node);
    auto it = st.ports.find(port);
    if (it == st.ports.end() || !it->second.open)
        return false;
    for (Decoy& d : st.decoys) {
        const bool service_hit = d.kind == DecoyKind::FakeService && d.locator == std::to_string(port);
        const bool honeypot_hit = d.kind == DecoyKind::HoneypotNode;
        if (service_hit || honeypot_hit) {
            ++d.accesses;
            honey(node, d, accessor_pid, accessor_node, now);
        }
    }
    return true;
}

int Substrate::spawn_process(const NodeId& node, const std::string& image, ProcessOwner owner, SimTime now)
{
    NodeState& st = this->node(node);
    int pid = st.next_pid++;
    st.processes[pid] = ProcessRecord{pid, image, owner, now, false};
    return pid;
}

bool Substrate::kill_process(const NodeId& node, int pid, SimTime now)
{
    NodeState& st = this->node(node);
    auto it = st.processes.find(pid);
    if (it == st.processes.end())
        return false;
    st.log.push_back({now, "kill " + std::to_string(pid) + " " + it->second.image});
    st.processes.erase(it);
    return true;
}

std::vector<ProcessRecord> Substrate::visible_processes(const NodeId& node) const
{
    std::vector<ProcessRecord> out;
    for (const auto& [pid, p] : this->node(node).processes) {
        ProcessRecord v = p;
        if (v.owner == ProcessOwner::RedAgent)
            v.owner = ProcessOwner::Unknown;
        out.push_back(v);
    }
    return out;
}

void Substrate::set_lockdown(const NodeId& node, bool on, SimTime now)
{
    NodeState& st = this->node(node);
    st.lockdown = on;
    st.log.push_back({now, on ? "lockdown on" : "lockdown off"});
}

void Substrate::append_log(const NodeId& node, const std::string& event, SimTime now)
{
    this->node(node).log.push_back({now, event});
}

void Substrate::record_connection(const NodeId& src, const NodeId& dst, int port, SimTime now)
{
    require_node(src);
    require_node(dst);
    Percept p;
    p.t = now;
    p.source = PerceptSource::Environment;
    p.kind = PerceptKind::Connection;
    p.attributes = {{"src", src}, {"dst", dst}, {"port", std::to_string(port)}};
    enqueue_percept(src, p);
    if (dst != src)
        enqueue_percept(dst, p);
}

void Substrate::report_functional_anomaly(const NodeId& node, const std::string& detail, SimTime now)
{
    Percept p;
    p.t = now;
    p.source = PerceptSource::System;
    p.kind = PerceptKind::FunctionalAnomaly;
    p.attributes = {{"node", node}, {"detail", detail}};
    append_log(node, "functional-anomaly " + detail, now);
    enqueue_percept(node, std::move(p));
}

void Substrate::report_marker(const NodeId& node, const std::string& marker, SimTime now)
{
    Percept p;
    p.t = now;
    p.source = PerceptSource::System;
    p.kind = PerceptKind::LogEvent;
    p.attributes = {{"node", node}, {"event", "environment-marker"}, {"marker", marker}};
    append_log(node, "marker " + marker, now);
    enqueue_percept(node, std::move(p));
}

void Substrate::enqueue_percept(const NodeId& node, Percept p)
{
    require_node(node);
    pending_[node].push_back(std::move(p));
    if (listener_)
        listener_(node);
}

std::vector<Percept> Substrate::drain_percepts(const NodeId& node)
{
    ++percept_reads_;
    auto it = pending_.find(node);
    if (it == pending_.end())
        return {};
    std::vector<Percept> out(it->second.begin(), it->second.end());
    it->second.clear();
    return out;
}

bool Substrate::has_pending_percepts(const NodeId& node) const
{
    auto it = pending_.find(node);
    return it != pending_.end() && !it->second.empty();
}

void load_node_state(NodeState& st, const nlohmann::json& doc, const std::string& where)
{
    if (!doc.is_object())
        throw ParseError(where + ": expected an object");
    for (const auto& f : doc.value("files", nlohmann::json::array())) {
        if (!f.contains("path") || !f.contains("hash"))
            throw ParseError(where + ".files: entries need 'path' and 'hash'");
        FileEntry e;
        e.path = f.at("path").get<std::string>();
        e.content_hash = parse_hash(f.at("hash"));
        e.protected_file = f.value("protected", false);
        st.files[e.path] = e;
        st.backups[e.path] = e.content_hash;
    }
    for (const auto& p : doc.value("ports", nlohmann::json::array())) {
        if (!p.contains("port"))
            throw ParseError(where + ".ports: entries need 'port'");
        int port = p.at("port").get<int>();
        if (st.ports.count(port))
            throw ValidationError(where + ".ports", "duplicate port " + std::to_string(port));
        st.ports[port] = PortEntry{p.value("service", std::string("svc")),
                                   p.value("fake", false) ? Authenticity::Fake : Authenticity::Real,
                                   p.value("open", true)};
    }
    for (const auto& p : doc.value("processes", nlohmann::json::array())) {
        auto owner = parse_process_owner(p.value("owner", std::string("system")));
        if (!owner)
            throw ParseError(where + ".processes: unknown owner");
        int pid = st.next_pid++;
        st.processes[pid] = ProcessRecord{pid, p.value("image", std::string("proc")), *owner, SimTime{0}, false};
    }
    if (doc.contains("metrics")) {
        const auto& m = doc.at("metrics");
        st.metrics.cpu_load = m.value("cpu_load", 0.0);
        st.metrics.mem_used = m.value("mem_used", 0.0);
        st.metrics.mem_total = m.value("mem_total", 1.0);
        if (st.metrics.mem_used > st.metrics.mem_total)
            throw ValidationError(where + ".metrics", "mem_used exceeds mem_total");
    }
    for (const auto& w : doc.value("maintenance_windows", nlohmann::json::array()))
        st.maintenance_windows.push_back({SimTime{w.at(0).get<Millis>()}, SimTime{w.at(1).get<Millis>()}});
    st.supervised = doc.value("supervised", false);
    st.lockdown = doc.value("lockdown", false);
    st.decoy_capacity = doc.value("decoy_capacity", std::size_t{8});
}

} // namespace aica::substrate
