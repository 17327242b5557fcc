#include "deepsearch/graph.hpp"

#include "deepsearch/util.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace deepsearch {

std::string_view to_string(NodeKind kind) {
    switch (kind) {
    case NodeKind::Start: return "Start";
    case NodeKind::Search: return "Search";
    case NodeKind::End: return "End";
    }
    return "?";
}

std::string_view to_string(NodeState state) {
    switch (state) {
    case NodeState::Pending: return "Pending";
    case NodeState::Running: return "Running";
    case NodeState::Done: return "Done";
    case NodeState::Failed: return "Failed";
    }
    return "?";
}

std::optional<NodeKind> parse_node_kind(std::string_view s) {
    if (s == "Start") return NodeKind::Start;
    if (s == "Search") return NodeKind::Search;
    if (s == "End") return NodeKind::End;
    return std::nullopt;
}

std::optional<NodeState> parse_node_state(std::string_view s) {
    if (s == "Pending") return NodeState::Pending;
    if (s == "Running") return NodeState::Running;
    if (s == "Done") return NodeState::Done;
    if (s == "Failed") return NodeState::Failed;
    return std::nullopt;
}

std::string_view to_string(GraphErrc code) {
    switch (code) {
    case GraphErrc::EmptyQuestion: return "EmptyQuestion";
    case GraphErrc::EmptyContent: return "EmptyContent";
    case GraphErrc::InvalidName: return "InvalidName";
    case GraphErrc::ReservedName: return "ReservedName";
    case GraphErrc::DuplicateNode: return "DuplicateNode";
    case GraphErrc::UnknownNode: return "UnknownNode";
    case GraphErrc::SelfLoop: return "SelfLoop";
    case GraphErrc::CycleCreated: return "CycleCreated";
    case GraphErrc::EdgeFromEnd: return "EdgeFromEnd";
    case GraphErrc::InvalidTransition: return "InvalidTransition";
    }
    return "?";
}

bool is_valid_node_name(std::string_view name) {
    if (name.empty() || name.size() > 64) return false;
    if (name[0] < 'a' || name[0] > 'z') return false;
    return std::all_of(name.begin() + 1, name.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    });
}

std::string content_digest8(std::string_view content) { return sha256_hex(content).substr(0, 8); }

GraphError::GraphError(GraphErrc code, std::string detail)
    : std::runtime_error(std::string{to_string(code)} + ": " + detail), code_(code), detail_(std::move(detail)) {}

namespace {

[[noreturn]] void fail(GraphErrc code, const std::string& detail) { throw GraphError(code, detail); }

} // namespace

ThoughtGraph::ThoughtGraph(std::string question) {
    if (question.empty()) fail(GraphErrc::EmptyQuestion, "question must be non-empty");
    GraphNode root;
    root.name = std::string{kRootName};
    root.content = std::move(question);
    root.kind = NodeKind::Start;
    root.state = NodeState::Done;
    root.response = NodeResponse{};
    root.seq = next_seq_++;
    order_.push_back(root.name);
    out_[root.name];
    in_[root.name];
    nodes_.emplace(root.name, std::move(root));
}

void ThoughtGraph::add_node(const std::string& name, std::string content) {
    if (name == kRootName) fail(GraphErrc::ReservedName, "'root' is reserved for the start node");
    if (!is_valid_node_name(name)) fail(GraphErrc::InvalidName, "'" + name + "' does not match [a-z][a-z0-9_]{0,63}");
    if (contains(name)) fail(GraphErrc::DuplicateNode, "node '" + name + "' already exists");
    if (content.empty()) fail(GraphErrc::EmptyContent, "node '" + name + "' has empty content");

    GraphNode node;
    node.name = name;
    node.content = std::move(content);
    node.kind = name == kEndName ? NodeKind::End : NodeKind::Search;
    node.seq = next_seq_++;
    if (node.kind == NodeKind::End) end_name_ = name;
    order_.push_back(name);
    out_[name];
    in_[name];
    nodes_.emplace(name, std::move(node));
}

bool ThoughtGraph::add_edge(const std::string& from, const std::string& to) {
    if (!contains(from)) fail(GraphErrc::UnknownNode, "unknown node '" + from + "'");
    if (!contains(to)) fail(GraphErrc::UnknownNode, "unknown node '" + to + "'");
    if (from == to) fail(GraphErrc::SelfLoop, "edge '" + from + "' -> itself");
    if (node(from).kind == NodeKind::End) fail(GraphErrc::EdgeFromEnd, "the end node cannot have outgoing edges");
    if (edges_.count({from, to})) return false;
    if (reachable(to, from)) fail(GraphErrc::CycleCreated, "edge '" + from + "' -> '" + to + "' closes a cycle");
    edges_.emplace(from, to);
    out_[from].insert(to);
    in_[to].insert(from);
    return true;
}

bool ThoughtGraph::reachable(std::string_view from, std::string_view to) const {
    if (from == to) return true;
    std::vector<std::string_view> stack{from};
    std::set<std::string_view> seen{from};
    while (!stack.empty()) {
        auto cur = stack.back();
        stack.pop_back();
        auto it = out_.find(cur);
        if (it == out_.end()) continue;
        for (const auto& next : it->second) {
            if (next == to) return true;
            if (seen.insert(next).second) stack.push_back(next);
        }
    }
    return false;
}

std::vector<std::string> ThoughtGraph::ready_nodes() const {
    bool others_resolved = true;
    for (const auto& [name, n] : nodes_)
        if (n.kind != NodeKind::End && !is_resolved(n.state)) others_resolved = false;

    std::vector<std::string> ready;
    for (const auto& name : order_) {
        const auto& n = nodes_.find(name)->second;
        if (n.state != NodeState::Pending) continue;
        if (n.kind == NodeKind::End && !others_resolved) continue;
        const auto& preds = in_.find(name)->second;
        bool ok = std::all_of(preds.begin(), preds.end(),
                              [&](const std::string& p) { return is_resolved(nodes_.find(p)->second.state); });
        if (ok) ready.push_back(name);
    }
    return ready;
}

GraphNode& ThoughtGraph::mutable_node(std::string_view name) {
    auto it = nodes_.find(name);
    if (it == nodes_.end()) fail(GraphErrc::UnknownNode, "unknown node '" + std::string{name} + "'");
    return it->second;
}

const GraphNode& ThoughtGraph::node(std::string_view name) const {
    auto it = nodes_.find(name);
    if (it == nodes_.end()) fail(GraphErrc::UnknownNode, "unknown node '" + std::string{name} + "'");
    return it->second;
}

void ThoughtGraph::mark_running(const std::string& name) {
    auto& n = mutable_node(name);
    if (n.state != NodeState::Pending)
        fail(GraphErrc::InvalidTransition, "node '" + name + "' is " + std::string{to_string(n.state)} + ", not Pending");
    n.state = NodeState::Running;
}

void ThoughtGraph::record_result(const std::string& name, NodeResponse response) {
    auto& n = mutable_node(name);
    if (n.state != NodeState::Running)
        fail(GraphErrc::InvalidTransition, "node '" + name + "' is " + std::string{to_string(n.state)} + ", not Running");
    n.state = NodeState::Done;
    n.response = std::move(response);
}

void ThoughtGraph::record_failure(const std::string& name, std::string error) {
    auto& n = mutable_node(name);
    if (n.state != NodeState::Running)
        fail(GraphErrc::InvalidTransition, "node '" + name + "' is " + std::string{to_string(n.state)} + ", not Running");
    n.state = NodeState::Failed;
    n.error = std::move(error);
}

std::vector<std::string> ThoughtGraph::sort_by_seq(const std::set<std::string, std::less<>>& names) const {
    std::vector<std::string> out(names.begin(), names.end());
    std::sort(out.begin(), out.end(),
              [&](const std::string& a, const std::string& b) { return node(a).seq < node(b).seq; });
    return out;
}

std::vector<std::string> ThoughtGraph::predecessors(std::string_view name) const {
    auto it = in_.find(name);
    if (it == in_.end()) fail(GraphErrc::UnknownNode, "unknown node '" + std::string{name} + "'");
    return sort_by_seq(it->second);
}

std::vector<std::string> ThoughtGraph::successors(std::string_view name) const {
    auto it = out_.find(name);
    if (it == out_.end()) fail(GraphErrc::UnknownNode, "unknown node '" + std::string{name} + "'");
    return sort_by_seq(it->second);
}

std::vector<std::string> ThoughtGraph::sinks() const {
    std::vector<std::string> out;
    for (const auto& name : order_) {
        const auto& n = node(name);
        if (n.kind == NodeKind::End) continue;
        if (out_.find(name)->second.empty()) out.push_back(name);
    }
    return out;
}

GraphSkeleton ThoughtGraph::skeleton() const {
    GraphSkeleton sk;
    for (const auto& name : order_) {
        const auto& n = node(name);
        sk.nodes.push_back({n.name, n.kind, n.state, n.seq, content_digest8(n.content)});
    }
    sk.edges.assign(edges_.begin(), edges_.end());
    return sk;
}

std::string GraphSkeleton::render() const {
    std::ostringstream os;
    for (const auto& n : nodes)
        os << "node " << n.name << ' ' << to_string(n.kind) << ' ' << to_string(n.state) << ' ' << n.seq << ' '
           << n.digest8 << '\n';
    for (const auto& [from, to] : edges) os << "edge " << from << ' ' << to << '\n';
    return os.str();
}

GraphSkeleton GraphSkeleton::parse(std::string_view text) {
    GraphSkeleton sk;
    std::size_t lineno = 0;
    for (const auto& line : split_lines(text)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string tag;
        is >> tag;
        auto bad = [&](const char* why) {
            throw std::invalid_argument("snapshot line " + std::to_string(lineno) + ": " + why);
        };
        if (tag == "node") {
            std::string name, kind, state, seq, digest, extra;
            if (!(is >> name >> kind >> state >> seq >> digest) || (is >> extra)) bad("expected 5 node fields");
            Node n;
            n.name = name;
            auto k = parse_node_kind(kind);
            auto s = parse_node_state(state);
            if (!k || !s) bad("bad kind or state");
            n.kind = *k;
            n.state = *s;
            auto [p, ec] = std::from_chars(seq.data(), seq.data() + seq.size(), n.seq);
            if (ec != std::errc{} || p != seq.data() + seq.size()) bad("bad seq");
            if (!sk.edges.empty()) bad("node line after edge lines");
            n.digest8 = digest;
            sk.nodes.push_back(std::move(n));
        } else if (tag == "edge") {
            std::string from, to, extra;
            if (!(is >> from >> to) || (is >> extra)) bad("expected 2 edge fields");
            sk.edges.emplace_back(from, to);
        } else {
            bad("unknown line tag");
        }
    }
    return sk;
}

} // namespace deepsearch
