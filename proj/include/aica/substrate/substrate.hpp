#pragma once

#include "aica/core/percept.hpp"
#include "aica/core/time.hpp"
#include "aica/sim/topology.hpp"

#include "json.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aica::substrate {

/// Files are represented by a 64-bit content digest only.
using Hash = std::uint64_t;

std::string hash_to_hex(Hash h);
Hash parse_hash(const nlohmann::json& j); // accepts "0x..." strings or integers

struct FileEntry {
    std::string path;
    Hash content_hash{0};
    bool protected_file{false};
    SimTime last_change;
    bool change_authorized{true};

    friend bool operator==(const FileEntry&, const FileEntry&) = default;
};

enum class Authenticity { Real, Fake };

struct PortEntry {
    std::string service;
    Authenticity authenticity{Authenticity::Real};
    bool open{true};

    friend bool operator==(const PortEntry&, const PortEntry&) = default;
};

using PortTable = std::map<int, PortEntry>;

enum class ProcessOwner { System, BlueAgent, RedAgent, Unknown };
std::string_view to_string(ProcessOwner o);
std::optional<ProcessOwner> parse_process_owner(std::string_view s);

struct ProcessRecord {
    int pid{0};
    std::string image;
    ProcessOwner owner{ProcessOwner::System};
    SimTime started;
    bool contained{false}; // isolated in a honeypot: alive but cut off

    friend bool operator==(const ProcessRecord&, const ProcessRecord&) = default;
};

struct LogEntry {
    SimTime t;
    std::string event;

    friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

struct Metrics {
    double cpu_load{0.0};
    double mem_used{0.0};
    double mem_total{1.0};

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

enum class DecoyKind { FakeFile, FakePasswordFile, FakeService, HoneypotNode };
std::string_view to_string(DecoyKind k);
std::optional<DecoyKind> parse_decoy_kind(std::string_view s);

struct DecoyHandle {
    NodeId node;
    int id{0};

    friend bool operator==(const DecoyHandle&, const DecoyHandle&) = default;
};

struct Decoy {
    int id{0};
    DecoyKind kind{DecoyKind::FakeFile};
    std::string locator; // path for file decoys, port number for services, node id for honeypots
    std::uint64_t accesses{0};

    friend bool operator==(const Decoy&, const Decoy&) = default;
};

/// Everything the substrate owns for one node. Value type; equality is the
/// snapshot comparison used by atomicity checks.
struct NodeState {
    std::map<std::string, FileEntry> files;
    std::map<std::string, Hash> backups;
    PortTable ports;
    std::map<int, ProcessRecord> processes;
    std::vector<LogEntry> log;
    Metrics metrics;
    bool lockdown{false};
    bool supervised{false}; // file-integrity supervisor reports unauthorized writes
    std::vector<Interval> maintenance_windows;
    std::vector<Decoy> decoys;
    std::size_t decoy_capacity{8};
    int next_pid{100};
    int next_decoy{1};

    friend bool operator==(const NodeState&, const NodeState&) = default;
};

enum class FindingKind { HashMismatch, BlacklistMatch, UnexpectedPath };
std::string_view to_string(FindingKind k);

struct IntegrityFinding {
    NodeId node;
    std::string path;
    FindingKind kind{FindingKind::HashMismatch};
    Hash hash{0};
    bool change_authorized{true};

    friend bool operator==(const IntegrityFinding&, const IntegrityFinding&) = default;
};

/// Expected file hashes for one node plus globally known-bad hashes.
struct IntegrityBaseline {
    std::map<std::string, Hash> whitelist;
    std::set<Hash> blacklist;
};

class SubstrateError : public std::runtime_error {
public:
    SubstrateError(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code))
    {
    }
    /// One of: protected-file, lockdown, port-busy, port-not-open,
    /// capacity-exceeded, no-route, unknown-node, not-found.
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

inline constexpr std::string_view kDeleteMissing = "The file cannot be deleted. The requested file does not exist.";
inline constexpr std::string_view kDeleteProtected = "The file cannot be deleted. The requested file is protected.";

/// Per-node abstract operating environment. Every mutating operation either
/// applies fully or throws and leaves the node unchanged. Percepts produced by
/// observers are queued per node until drained by sensing.
class Substrate {
public:
    explicit Substrate(const sim::Topology& topo);

    bool has_node(const NodeId& id) const { return nodes_.count(id) != 0; }
    NodeState& node(const NodeId& id);
    const NodeState& node(const NodeId& id) const;
    const sim::Topology& topology() const { return *topo_; }

    FileEntry write_file(const NodeId& node, const std::string& path, Hash new_hash, bool authorized, SimTime now);

    /// nullopt on success, otherwise the exact error string.
    std::optional<std::string> delete_file(const NodeId& node, const std::string& path, bool privileged, SimTime now);

    /// Privileged recovery: puts the backup hash back and marks the change
    /// authorized. False when the path has no backup.
    bool restore_file(const NodeId& node, const std::string& path, SimTime now);

    std::vector<IntegrityFinding> check_integrity(const NodeId& node, const IntegrityBaseline& baseline) const;

    /// Real and fake open ports alike, ascending. One scan-probe percept per
    /// probed port is queued at both the target and the scanner.
    std::vector<int> scan_ports(const NodeId& node, const NodeId& scanner, SimTime now);

    const PortTable& remap_port(const NodeId& node, int from, int to, bool decoy, SimTime now);

    DecoyHandle deploy_decoy(const NodeId& node, DecoyKind kind, const std::string& locator, SimTime now);

    /// Reads a file on behalf of a process. Decoy reads queue a honey-event.
    std::optional<Hash> read_file(const NodeId& node, const std::string& path, int accessor_pid,
                                  const NodeId& accessor_node, SimTime now);

    /// Connects to a port. Fake services and honeypots queue a honey-event.
    bool connect(const NodeId& node, int port, int accessor_pid, const NodeId& accessor_node, SimTime now);

    int spawn_process(const NodeId& node, const std::string& image, ProcessOwner owner, SimTime now);
    bool kill_process(const NodeId& node, int pid, SimTime now);

    /// What blue sensing sees: red-owned processes are reported as Unknown.
    std::vector<ProcessRecord> visible_processes(const NodeId& node) const;

    void set_lockdown(const NodeId& node, bool on, SimTime now);
    void append_log(const NodeId& node, const std::string& event, SimTime now);

    /// Observable network flow: queues a connection percept at both ends.
    void record_connection(const NodeId& src, const NodeId& dst, int port, SimTime now);
    void report_functional_anomaly(const NodeId& node, const std::string& detail, SimTime now);
    void report_marker(const NodeId& node, const std::string& marker, SimTime now);

    void enqueue_percept(const NodeId& node, Percept p);
    std::vector<Percept> drain_percepts(const NodeId& node);
    bool has_pending_percepts(const NodeId& node) const;
    std::size_t percept_reads() const { return percept_reads_; }

    /// Called whenever a percept is queued at a node.
    void set_percept_listener(std::function<void(const NodeId&)> fn) { listener_ = std::move(fn); }

    std::uint64_t honey_events() const { return honey_events_; }

private:
    void require_node(const NodeId& node) const;
    void honey(const NodeId& node, const Decoy& d, int accessor_pid, const NodeId& accessor_node, SimTime now);

    const sim::Topology* topo_;
    std::map<NodeId, NodeState> nodes_;
    std::map<NodeId, std::deque<Percept>> pending_;
    std::function<void(const NodeId&)> listener_;
    std::size_t percept_reads_{0};
    std::uint64_t honey_events_{0};
};

/// Applies a scenario "nodes" entry to a node (files, ports, processes, metrics).
void load_node_state(NodeState& state, const nlohmann::json& doc, const std::string& where);

} // namespace aica::substrate
