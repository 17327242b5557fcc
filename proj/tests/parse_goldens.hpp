#pragma once

// Golden parser cases shared by the unit and acceptance suites.

#include "deepsearch/action.hpp"

#include "parse_checks.hpp"

#include <string>
#include <variant>
#include <vector>

namespace parsecheck {

using deepsearch::AddEdge;
using deepsearch::AddNode;
using deepsearch::ParseOutcome;

using Op = std::variant<AddNode, AddEdge>;

struct Golden {
    const char* label;
    std::string code;
    std::vector<Op> actions;   // expected when error is empty
    std::string error;         // code of the first diagnostic
    std::string rendered = {}; // full first diagnostic line, when pinned
};

inline std::vector<Op> ops(const ParseOutcome& out) {
    std::vector<Op> v;
    for (const auto& a : out.actions) v.push_back(a.op);
    return v;
}

inline std::string many_statements(int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += "graph.add_edge(\"root\", \"n" + std::to_string(i) + "\")\n";
    return s;
}

inline const std::vector<Golden>& goldens() {
    static const std::vector<Golden> cases{
        {"keyword aliases", R"(graph.add_node(name="capital", content="What is the capital of France?"))",
         {AddNode{"capital", "What is the capital of France?"}}, ""},
        {"canonical keywords", R"(graph.add_node(node_name="a", node_content="Q a"))", {AddNode{"a", "Q a"}}, ""},
        {"positional add_node", R"(graph.add_node("a", "Q a"))", {AddNode{"a", "Q a"}}, ""},
        {"keyword add_edge", R"(graph.add_edge(start_node="root", end_node="capital"))", {AddEdge{"root", "capital"}}, ""},
        {"positional add_edge", R"(graph.add_edge("root", "a"))", {AddEdge{"root", "a"}}, ""},
        {"positional then keyword", R"(graph.add_node("a", content="Q a"))", {AddNode{"a", "Q a"}}, ""},
        {"keywords reordered", R"(graph.add_node(content="Q a", name="a"))", {AddNode{"a", "Q a"}}, ""},
        {"adjacent literals", R"(graph.add_node('a', 'it''s'))", {}, "NonLiteralArgument"},
        {"single quotes with escape", R"(graph.add_node('a', 'it\'s'))", {AddNode{"a", "it's"}}, ""},
        {"triple double quotes", "graph.add_node(\"a\", \"\"\"line one\nline \"two\" \"\"\")",
         {AddNode{"a", "line one\nline \"two\" "}}, ""},
        {"triple single quotes", "graph.add_node('a', '''x\n'y'\n''')", {AddNode{"a", "x\n'y'\n"}}, ""},
        {"escapes", R"(graph.add_node("a", "q\"uote\\back\nnew\ttab"))", {AddNode{"a", "q\"uote\\back\nnew\ttab"}}, ""},
        {"trailing comma", R"(graph.add_edge("root", "a",))", {AddEdge{"root", "a"}}, ""},
        {"comments and blank lines",
         "# plan\n\ngraph.add_node(\"a\", \"A\")  # first\n\n# done\ngraph.add_edge(\"root\", \"a\")\n",
         {AddNode{"a", "A"}, AddEdge{"root", "a"}}, ""},
        {"semicolons", R"(graph.add_node("a", "A"); graph.add_edge("root", "a");)", {AddNode{"a", "A"}, AddEdge{"root", "a"}}, ""},
        {"call split across lines", "graph.add_node(\n    node_name=\"a\",\n    node_content=\"A\",\n)\n", {AddNode{"a", "A"}}, ""},
        {"utf-8 content", "graph.add_node(\"a\", \"Qu'est-ce que c'est ? 東京\")", {AddNode{"a", "Qu'est-ce que c'est ? 東京"}}, ""},
        {"line continuation", "graph.add_edge(\"root\", \\\n \"a\")", {AddEdge{"root", "a"}}, ""},
        {"empty program", "# nothing here\n\n", {}, ""},
        {"import statement", "import os", {}, "BadReceiver",
         "error 1:1 BadReceiver only calls on 'graph' are allowed, found 'import'"},
        {"other receiver", "print(\"hi\")", {}, "BadReceiver"},
        {"assignment", "x = \"a\"", {}, "BadReceiver"},
        {"unknown method", R"(graph.remove_node("a"))", {}, "UnknownMethod",
         "error 1:7 UnknownMethod unknown method 'remove_node', expected add_node or add_edge"},
        {"variable argument", R"(graph.add_node(name=foo, content="x"))", {}, "NonLiteralArgument"},
        {"bare identifier argument", R"(graph.add_node(foo, "x"))", {}, "NonLiteralArgument"},
        {"number argument", R"(graph.add_node(1, "x"))", {}, "NonLiteralArgument"},
        {"concatenation", R"(graph.add_node("a" + "b", "x"))", {}, "NonLiteralArgument"},
        {"missing argument", R"(graph.add_node(name="a"))", {}, "ArityMismatch",
         "error 1:1 ArityMismatch add_node is missing 'node_content'"},
        {"extra argument", R"(graph.add_edge("a", "b", "c"))", {}, "ArityMismatch"},
        {"repeated parameter", R"(graph.add_node(name="a", node_name="b", content="x"))", {}, "ArityMismatch"},
        {"unknown keyword", R"(graph.add_node(label="a", content="x"))", {}, "UnknownKeyword",
         "error 1:16 UnknownKeyword 'label' is not a parameter of add_node"},
        {"edge keyword on node", R"(graph.add_node(start_node="a", content="x"))", {}, "UnknownKeyword"},
        {"unterminated string", "graph.add_node(name=\"abc", {}, "UnterminatedString",
         "error 1:21 UnterminatedString string literal is never closed"},
        {"unterminated triple string", "graph.add_node(\"a\", \"\"\"never\nclosed", {}, "UnterminatedString"},
        {"positional after keyword", R"(graph.add_node(name="a", "x"))", {}, "SyntaxError"},
        {"missing terminator", R"(graph.add_node("a", "A") graph.add_edge("root", "a"))", {}, "SyntaxError"},
        {"missing parenthesis", "graph.add_node", {}, "SyntaxError"},
        {"one bad line voids the block", "graph.add_node(\"a\", \"A\")\nos.system(\"rm\")\n", {}, "BadReceiver",
         "error 2:1 BadReceiver only calls on 'graph' are allowed, found 'os'"},
        {"64 statements", many_statements(64), {}, ""},
        {"65 statements", many_statements(65), {}, "TooManyStatements"},
    };
    return cases;
}

/// Empty when the parser output matches the golden case exactly.
inline std::string golden_mismatch(const Golden& g) {
    auto out = deepsearch::parse_actions(g.code);
    if (auto why = violation(g.code, out); !why.empty()) return why;
    if (g.error.empty()) {
        if (!out.diagnostics.empty()) return "unexpected diagnostic " + out.diagnostics[0].code;
        if (std::string{g.label} == "64 statements") return out.actions.size() == 64 ? "" : "wrong action count";
        return ops(out) == g.actions ? "" : "actions differ";
    }
    if (out.diagnostics.empty()) return "expected " + g.error + ", got no diagnostic";
    if (out.diagnostics[0].code != g.error) return "expected " + g.error + ", got " + out.diagnostics[0].code;
    if (!out.actions.empty()) return "actions returned with an error";
    if (!g.rendered.empty() && deepsearch::render_diagnostic(g.code, out.diagnostics[0]) != g.rendered)
        return "rendered as " + deepsearch::render_diagnostic(g.code, out.diagnostics[0]);
    return {};
}

} // namespace parsecheck
