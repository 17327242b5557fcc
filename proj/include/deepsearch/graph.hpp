#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace deepsearch {

inline constexpr std::string_view kRootName = "root";
inline constexpr std::string_view kEndName = "response";

enum class NodeKind { Start, Search, End };
enum class NodeState { Pending, Running, Done, Failed };

std::string_view to_string(NodeKind kind);
std::string_view to_string(NodeState state);
std::optional<NodeKind> parse_node_kind(std::string_view s);
std::optional<NodeState> parse_node_state(std::string_view s);

inline bool is_resolved(NodeState s) { return s == NodeState::Done || s == NodeState::Failed; }

struct Citation {
    std::string url;
    std::string title;
    bool operator==(const Citation&) const = default;
};

struct NodeResponse {
    std::string answer_text;
    std::vector<Citation> citations;
    std::string transcript_digest;
    bool operator==(const NodeResponse&) const = default;
};

struct GraphNode {
    std::string name;
    std::string content;
    NodeKind kind = NodeKind::Search;
    NodeState state = NodeState::Pending;
    std::optional<NodeResponse> response;
    std::optional<std::string> error;
    std::uint64_t seq = 0;
};

enum class GraphErrc {
    EmptyQuestion,
    EmptyContent,
    InvalidName,
    ReservedName,
    DuplicateNode,
    UnknownNode,
    SelfLoop,
    CycleCreated,
    EdgeFromEnd,
    InvalidTransition,
};

std::string_view to_string(GraphErrc code);

class GraphError : public std::runtime_error {
public:
    GraphError(GraphErrc code, std::string detail);
    GraphErrc code() const noexcept { return code_; }
    /// Message without the leading error-code name.
    const std::string& detail() const noexcept { return detail_; }

private:
    GraphErrc code_;
    std::string detail_;
};

/// `[a-z][a-z0-9_]{0,63}`
bool is_valid_node_name(std::string_view name);

/// Structural view of a graph as carried by the canonical snapshot text:
/// everything except node content (reduced to a digest) and responses.
struct GraphSkeleton {
    struct Node {
        std::string name;
        NodeKind kind = NodeKind::Search;
        NodeState state = NodeState::Pending;
        std::uint64_t seq = 0;
        std::string digest8;
        bool operator==(const Node&) const = default;
    };
    std::vector<Node> nodes;                               // by seq
    std::vector<std::pair<std::string, std::string>> edges; // lexicographic

    std::string render() const;
    /// Throws std::invalid_argument on malformed text.
    static GraphSkeleton parse(std::string_view text);
    bool operator==(const GraphSkeleton&) const = default;
};

/// First eight hex digits of sha256(content), as used by snapshots and events.
std::string content_digest8(std::string_view content);

/// The mutable DAG of sub-questions for one user question. Single owner;
/// callers that share it across threads must serialize access.
class ThoughtGraph {
public:
    explicit ThoughtGraph(std::string question);

    void add_node(const std::string& name, std::string content);

    /// Returns false when the edge already existed (no-op).
    bool add_edge(const std::string& from, const std::string& to);

    /// Pending nodes whose predecessors are all resolved, by insertion seq.
    /// The end node additionally requires every other node to be resolved.
    std::vector<std::string> ready_nodes() const;

    void mark_running(const std::string& name);
    void record_result(const std::string& name, NodeResponse response);
    void record_failure(const std::string& name, std::string error);

    bool contains(std::string_view name) const { return nodes_.find(name) != nodes_.end(); }
    const GraphNode& node(std::string_view name) const;
    const GraphNode& root() const { return node(kRootName); }
    const std::string& question() const { return root().content; }
    std::optional<std::string> end_name() const { return end_name_; }

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    const std::set<std::pair<std::string, std::string>>& edges() const { return edges_; }

    /// Node names ordered by insertion seq.
    const std::vector<std::string>& order() const { return order_; }

    std::vector<std::string> predecessors(std::string_view name) const;
    std::vector<std::string> successors(std::string_view name) const;
    bool reachable(std::string_view from, std::string_view to) const;

    /// Search/start nodes without outgoing edges, excluding the end node.
    std::vector<std::string> sinks() const;

    GraphSkeleton skeleton() const;
    std::string snapshot() const { return skeleton().render(); }

private:
    GraphNode& mutable_node(std::string_view name);
    std::vector<std::string> sort_by_seq(const std::set<std::string, std::less<>>& names) const;

    std::map<std::string, GraphNode, std::less<>> nodes_;
    std::set<std::pair<std::string, std::string>> edges_;
    std::map<std::string, std::set<std::string, std::less<>>, std::less<>> out_;
    std::map<std::string, std::set<std::string, std::less<>>, std::less<>> in_;
    std::vector<std::string> order_;
    std::optional<std::string> end_name_;
    std::uint64_t next_seq_ = 0;
};

} // namespace deepsearch
