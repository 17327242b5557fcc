#pragma once

#include "deepsearch/action.hpp"

#include <random>
#include <string>

namespace parsecheck {

/// Structural checks every ParseOutcome must satisfy. Returns an empty
/// string when all hold, otherwise a description of the first violation.
inline std::string violation(std::string_view code, const deepsearch::ParseOutcome& out) {
    using deepsearch::Severity;
    bool errors = false;
    for (const auto& d : out.diagnostics) {
        if (d.severity == Severity::Error) errors = true;
        if (d.span.offset > code.size() || d.span.length > code.size() - d.span.offset)
            return "diagnostic span out of range: " + d.code;
        if (d.code.empty() || d.message.empty()) return "diagnostic without code or message";
        auto rendered = deepsearch::render_diagnostic(code, d);
        if (rendered.rfind(d.severity == Severity::Error ? "error " : "warning ", 0) != 0) return "bad rendering: " + rendered;
    }
    if (errors && !out.actions.empty()) return "actions returned alongside errors";
    if (!errors && !out.diagnostics.empty()) return "non-error diagnostics from the parser";
    if (out.actions.size() > deepsearch::kMaxStatements) return "more actions than the statement cap";
    for (const auto& a : out.actions)
        if (a.source_span.offset > code.size() || a.source_span.length > code.size() - a.source_span.offset)
            return "action span out of range";
    return {};
}

/// Random input drawn from three generators: raw bytes, grammar-shaped
/// token soup, and mutations of a valid program.
inline std::string random_input(std::mt19937_64& rng) {
    static const char* pieces[] = {"graph", ".", "add_node", "add_edge", "(", ")", ",", "=", "\"", "'", "\"\"\"", "'''",
                                   "name", "content", "node_name", "node_content", "start_node", "end_node", "\n", ";",
                                   "#", "\\", " ", "\t", "x", "1", "é", "\xff", "\xe2\x82", "import", "os", "\\n"};
    static const std::string valid =
        "graph.add_node(node_name=\"a\", node_content=\"What is A?\")\n"
        "graph.add_edge(start_node=\"root\", end_node=\"a\")\n"
        "graph.add_node('b', '''multi\nline''')  # note\n";
    std::uniform_int_distribution<int> which(0, 2);
    std::uniform_int_distribution<std::size_t> len(0, 1024);
    std::string s;
    switch (which(rng)) {
    case 0: {
        std::uniform_int_distribution<int> byte(0, 255);
        auto n = len(rng);
        for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<char>(byte(rng)));
        break;
    }
    case 1: {
        std::uniform_int_distribution<std::size_t> pick(0, sizeof(pieces) / sizeof(pieces[0]) - 1);
        while (s.size() < len(rng) / 4) s += pieces[pick(rng)];
        break;
    }
    default: {
        s = valid;
        std::uniform_int_distribution<int> edits(1, 8);
        std::uniform_int_distribution<int> byte(0, 255);
        for (int e = edits(rng); e > 0; --e) {
            std::uniform_int_distribution<std::size_t> at(0, s.size());
            auto i = at(rng);
            switch (byte(rng) % 3) {
            case 0: s.insert(s.begin() + static_cast<long>(i), static_cast<char>(byte(rng))); break;
            case 1:
                if (i < s.size()) s.erase(i, 1);
                break;
            default:
                if (i < s.size()) s[i] = static_cast<char>(byte(rng));
            }
        }
    }
    }
    if (s.size() > 1024) s.resize(1024);
    return s;
}

} // namespace parsecheck
