#pragma once

#include "deepsearch/graph.hpp"

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace deepsearch {

/// Byte range into the code text a diagnostic or action came from.
struct Span {
    std::size_t offset = 0;
    std::size_t length = 0;
    bool operator==(const Span&) const = default;
};

enum class Severity { Error, Warning };
std::string_view to_string(Severity s);

struct Diagnostic {
    Severity severity = Severity::Error;
    Span span;
    std::string code;
    std::string message;
};

struct AddNode {
    std::string name;
    std::string content;
    bool operator==(const AddNode&) const = default;
};

struct AddEdge {
    std::string from;
    std::string to;
    bool operator==(const AddEdge&) const = default;
};

struct CodeAction {
    std::variant<AddNode, AddEdge> op;
    Span source_span;
};

struct ParseOutcome {
    std::vector<CodeAction> actions;
    std::vector<Diagnostic> diagnostics;

    bool has_errors() const;
};

inline constexpr std::size_t kMaxStatements = 64;

/// Contents of the last fenced code block in a model message. Without any
/// fence, the whole message is returned only if it parses cleanly into at
/// least one action.
std::optional<std::string> extract_code(std::string_view message);

/// Parses the restricted `graph.add_node(...)` / `graph.add_edge(...)`
/// statement language. Never throws; if any Error diagnostic is produced,
/// `actions` is empty.
ParseOutcome parse_actions(std::string_view code);

/// `<severity> <line>:<col> <code> <message>`, with 1-based line and column.
std::string render_diagnostic(std::string_view code, const Diagnostic& d);

/// Renders actions back into the statement language, one per line.
std::string pretty_print(const std::vector<CodeAction>& actions);

struct ApplyOptions {
    /// Cap on Search nodes in the graph; further add_node actions are skipped.
    std::size_t max_search_nodes = std::numeric_limits<std::size_t>::max();
};

struct ApplyResult {
    std::vector<std::string> new_search_nodes;
    std::vector<CodeAction> applied;  // actions that changed the graph, in order
    std::vector<Diagnostic> diagnostics;
    bool aborted = false;             // a CycleCreated stopped the batch
};

/// Applies parsed actions in order. Graph-level rejections become warnings
/// and the action is skipped, except CycleCreated which aborts the rest.
ApplyResult apply_actions(ThoughtGraph& graph, const std::vector<CodeAction>& actions, const ApplyOptions& options = {});

} // namespace deepsearch
