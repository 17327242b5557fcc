#include "deepsearch/action.hpp"

#include "deepsearch/util.hpp"

#include <array>

namespace deepsearch {

std::string_view to_string(Severity s) { return s == Severity::Error ? "error" : "warning"; }

bool ParseOutcome::has_errors() const {
    for (const auto& d : diagnostics)
        if (d.severity == Severity::Error) return true;
    return false;
}

namespace {

enum class Tok { Ident, String, Number, Dot, LParen, RParen, Comma, Equals, Semicolon, Newline, Other, BadString, End };

struct Token {
    Tok kind = Tok::End;
    Span span;
    std::string value;  // identifier text or unescaped string payload
};

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run(std::vector<Diagnostic>& diags) {
        std::vector<Token> out;
        while (true) {
            skip_blank();
            if (pos_ >= src_.size()) {
                out.push_back({Tok::End, {src_.size(), 0}, {}});
                return out;
            }
            out.push_back(next(diags));
        }
    }

private:
    void skip_blank() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
                ++pos_;
            } else if (c == '\\' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') {
                pos_ += 2;
            } else if (c == '\\' && pos_ + 2 < src_.size() && src_[pos_ + 1] == '\r' && src_[pos_ + 2] == '\n') {
                pos_ += 3;
            } else if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
            } else {
                return;
            }
        }
    }

    Token single(Tok kind) {
        Token t{kind, {pos_, 1}, {}};
        ++pos_;
        return t;
    }

    Token next(std::vector<Diagnostic>& diags) {
        char c = src_[pos_];
        switch (c) {
        case '\n': return single(Tok::Newline);
        case '.': return single(Tok::Dot);
        case '(': return single(Tok::LParen);
        case ')': return single(Tok::RParen);
        case ',': return single(Tok::Comma);
        case '=': return single(Tok::Equals);
        case ';': return single(Tok::Semicolon);
        case '"':
        case '\'': return string_literal(diags);
        default: break;
        }
        std::size_t start = pos_;
        if (is_ident_start(c)) {
            while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
            return {Tok::Ident, {start, pos_ - start}, std::string{src_.substr(start, pos_ - start)}};
        }
        if (c >= '0' && c <= '9') {
            while (pos_ < src_.size() && (is_ident_char(src_[pos_]) || src_[pos_] == '.')) ++pos_;
            return {Tok::Number, {start, pos_ - start}, {}};
        }
        pos_ += utf8_sequence_length(src_, pos_);
        return {Tok::Other, {start, pos_ - start}, {}};
    }

    Token string_literal(std::vector<Diagnostic>& diags) {
        std::size_t start = pos_;
        char quote = src_[pos_];
        bool triple = pos_ + 2 < src_.size() && src_[pos_ + 1] == quote && src_[pos_ + 2] == quote;
        pos_ += triple ? 3 : 1;
        std::string value;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\\' && pos_ + 1 < src_.size()) {
                char e = src_[pos_ + 1];
                switch (e) {
                case '\\': value.push_back('\\'); break;
                case '\'': value.push_back('\''); break;
                case '"': value.push_back('"'); break;
                case 'n': value.push_back('\n'); break;
                case 't': value.push_back('\t'); break;
                case '\n': break;
                default:
                    value.push_back('\\');
                    value.push_back(e);
                    break;
                }
                pos_ += 2;
                continue;
            }
            if (triple) {
                if (c == quote && pos_ + 2 < src_.size() && src_[pos_ + 1] == quote && src_[pos_ + 2] == quote) {
                    pos_ += 3;
                    return {Tok::String, {start, pos_ - start}, std::move(value)};
                }
            } else {
                if (c == quote) {
                    ++pos_;
                    return {Tok::String, {start, pos_ - start}, std::move(value)};
                }
                if (c == '\n') break;
            }
            value.push_back(c);
            ++pos_;
        }
        Span span{start, pos_ - start};
        diags.push_back({Severity::Error, span, "UnterminatedString", "string literal is never closed"});
        return {Tok::BadString, span, {}};
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

struct ParamSpec {
    std::string_view canonical;
    std::array<std::string_view, 2> aliases;
};

constexpr std::array<ParamSpec, 2> kAddNodeParams{{
    {"node_name", {"node_name", "name"}},
    {"node_content", {"node_content", "content"}},
}};
constexpr std::array<ParamSpec, 2> kAddEdgeParams{{
    {"start_node", {"start_node", "start_node"}},
    {"end_node", {"end_node", "end_node"}},
}};

struct Arg {
    std::optional<Token> keyword;
    Token literal;
};

class Parser {
public:
    Parser(std::string_view src, std::vector<Token> tokens, std::vector<Diagnostic>& diags)
        : src_(src), toks_(std::move(tokens)), diags_(diags) {}

    std::vector<CodeAction> run() {
        std::vector<CodeAction> actions;
        std::size_t statements = 0;
        while (true) {
            while (peek().kind == Tok::Newline || peek().kind == Tok::Semicolon) ++pos_;
            if (peek().kind == Tok::End) break;
            if (statements == kMaxStatements) {
                error(peek().span, "TooManyStatements",
                      "more than " + std::to_string(kMaxStatements) + " statements in one code block");
                break;
            }
            ++statements;
            depth_ = 0;
            if (auto action = statement()) {
                actions.push_back(std::move(*action));
            } else {
                recover();
            }
        }
        return actions;
    }

private:
    const Token& peek() const { return toks_[pos_]; }

    const Token& advance() {
        const Token& t = toks_[pos_];
        if (t.kind != Tok::End) ++pos_;
        if (t.kind == Tok::LParen) ++depth_;
        if (t.kind == Tok::RParen) --depth_;
        return t;
    }

    void skip_newlines_in_parens() {
        while (depth_ > 0 && peek().kind == Tok::Newline) ++pos_;
    }

    void error(Span span, std::string code, std::string message) {
        diags_.push_back({Severity::Error, span, std::move(code), std::move(message)});
    }

    // Bad tokens already carry a lexer diagnostic.
    void unexpected(const Token& t, std::string code, const std::string& what) {
        if (t.kind == Tok::BadString) return;
        if (t.kind == Tok::End) {
            error(t.span, "SyntaxError", "unexpected end of input, " + what);
            return;
        }
        if (t.kind == Tok::Newline) {
            error(t.span, "SyntaxError", "unexpected end of line, " + what);
            return;
        }
        error(t.span, std::move(code), "unexpected '" + std::string{src_.substr(t.span.offset, t.span.length)} + "', " + what);
    }

    void recover() {
        while (true) {
            const Token& t = peek();
            if (t.kind == Tok::End) return;
            if ((t.kind == Tok::Newline || t.kind == Tok::Semicolon) && depth_ <= 0) return;
            advance();
        }
    }

    std::optional<CodeAction> statement() {
        const Token& receiver = advance();
        if (receiver.kind != Tok::Ident) {
            unexpected(receiver, "SyntaxError", "expected a graph.add_node(...) or graph.add_edge(...) statement");
            return std::nullopt;
        }
        if (receiver.value != "graph") {
            error(receiver.span, "BadReceiver", "only calls on 'graph' are allowed, found '" + receiver.value + "'");
            return std::nullopt;
        }
        const Token& dot = advance();
        if (dot.kind != Tok::Dot) {
            unexpected(dot, "SyntaxError", "expected '.' after 'graph'");
            return std::nullopt;
        }
        const Token& method = advance();
        if (method.kind != Tok::Ident) {
            unexpected(method, "SyntaxError", "expected a method name");
            return std::nullopt;
        }
        if (method.value != "add_node" && method.value != "add_edge") {
            error(method.span, "UnknownMethod", "unknown method '" + method.value + "', expected add_node or add_edge");
            return std::nullopt;
        }
        const Token& open = advance();
        if (open.kind != Tok::LParen) {
            unexpected(open, "SyntaxError", "expected '(' after method name");
            return std::nullopt;
        }
        auto args = arguments();
        if (!args) return std::nullopt;
        const Token& close = toks_[pos_ - 1];
        Span call{receiver.span.offset, close.span.offset + close.span.length - receiver.span.offset};

        const Token& term = peek();
        if (term.kind != Tok::Newline && term.kind != Tok::Semicolon && term.kind != Tok::End) {
            unexpected(term, "SyntaxError", "expected end of statement");
            return std::nullopt;
        }

        bool is_node = method.value == "add_node";
        const auto& params = is_node ? kAddNodeParams : kAddEdgeParams;
        auto bound = bind(*args, params, method.value, call);
        if (!bound) return std::nullopt;
        CodeAction action;
        action.source_span = call;
        if (is_node)
            action.op = AddNode{std::move((*bound)[0]), std::move((*bound)[1])};
        else
            action.op = AddEdge{std::move((*bound)[0]), std::move((*bound)[1])};
        return action;
    }

    std::optional<std::vector<Arg>> arguments() {
        std::vector<Arg> args;
        bool seen_keyword = false;
        while (true) {
            skip_newlines_in_parens();
            if (peek().kind == Tok::RParen) {
                advance();
                return args;
            }
            Arg arg;
            const Token& first = advance();
            if (first.kind == Tok::Ident) {
                skip_newlines_in_parens();
                if (peek().kind != Tok::Equals) {
                    error(first.span, "NonLiteralArgument", "argument '" + first.value + "' is not a string literal");
                    return std::nullopt;
                }
                advance();
                skip_newlines_in_parens();
                arg.keyword = first;
                const Token& lit = advance();
                if (lit.kind != Tok::String) {
                    if (lit.kind == Tok::BadString) return std::nullopt;
                    if (lit.kind == Tok::End || lit.kind == Tok::Newline || lit.kind == Tok::RParen || lit.kind == Tok::Comma)
                        unexpected(lit, "SyntaxError", "expected a string literal");
                    else
                        unexpected(lit, "NonLiteralArgument", "arguments must be string literals");
                    return std::nullopt;
                }
                arg.literal = lit;
                seen_keyword = true;
            } else if (first.kind == Tok::String) {
                if (seen_keyword) {
                    error(first.span, "SyntaxError", "positional argument follows keyword argument");
                    return std::nullopt;
                }
                arg.literal = first;
            } else if (first.kind == Tok::Number || first.kind == Tok::LParen || first.kind == Tok::Other) {
                unexpected(first, "NonLiteralArgument", "arguments must be string literals");
                return std::nullopt;
            } else {
                unexpected(first, "SyntaxError", "expected an argument");
                return std::nullopt;
            }
            args.push_back(std::move(arg));

            skip_newlines_in_parens();
            const Token& sep = advance();
            if (sep.kind == Tok::RParen) return args;
            if (sep.kind != Tok::Comma) {
                if (sep.kind == Tok::String || sep.kind == Tok::Ident || sep.kind == Tok::Number || sep.kind == Tok::Dot ||
                    sep.kind == Tok::Other || sep.kind == Tok::LParen)
                    unexpected(sep, "NonLiteralArgument", "arguments must be single string literals");
                else
                    unexpected(sep, "SyntaxError", "expected ',' or ')'");
                return std::nullopt;
            }
        }
    }

    template <std::size_t N>
    std::optional<std::array<std::string, N>> bind(std::vector<Arg>& args, const std::array<ParamSpec, N>& params,
                                                   const std::string& method, Span call) {
        std::array<std::optional<std::string>, N> slots;
        std::size_t positional = 0;
        for (auto& arg : args) {
            std::size_t index = N;
            if (arg.keyword) {
                for (std::size_t i = 0; i < N; ++i)
                    for (auto alias : params[i].aliases)
                        if (alias == arg.keyword->value) index = i;
                if (index == N) {
                    error(arg.keyword->span, "UnknownKeyword",
                          "'" + arg.keyword->value + "' is not a parameter of " + method);
                    return std::nullopt;
                }
            } else {
                index = positional++;
                if (index >= N) {
                    error(arg.literal.span, "ArityMismatch", method + " takes " + std::to_string(N) + " arguments");
                    return std::nullopt;
                }
            }
            if (slots[index]) {
                Span where = arg.keyword ? arg.keyword->span : arg.literal.span;
                error(where, "ArityMismatch",
                      "parameter '" + std::string{params[index].canonical} + "' given more than once");
                return std::nullopt;
            }
            slots[index] = std::move(arg.literal.value);
        }
        std::array<std::string, N> out;
        for (std::size_t i = 0; i < N; ++i) {
            if (!slots[i]) {
                error(call, "ArityMismatch", method + " is missing '" + std::string{params[i].canonical} + "'");
                return std::nullopt;
            }
            out[i] = std::move(*slots[i]);
        }
        return out;
    }

    std::string_view src_;
    std::vector<Token> toks_;
    std::vector<Diagnostic>& diags_;
    std::size_t pos_ = 0;
    int depth_ = 0;
};

std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '"': out += "\\\""; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

bool is_fence(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    return line.substr(i, 3) == "```";
}

} // namespace

ParseOutcome parse_actions(std::string_view code) {
    ParseOutcome outcome;
    auto tokens = Lexer{code}.run(outcome.diagnostics);
    outcome.actions = Parser{code, std::move(tokens), outcome.diagnostics}.run();
    if (outcome.has_errors()) outcome.actions.clear();
    return outcome;
}

std::optional<std::string> extract_code(std::string_view message) {
    auto lines = split_lines(message);
    std::optional<std::string> last;
    std::optional<std::string> current;
    for (const auto& line : lines) {
        if (is_fence(line)) {
            if (current) {
                last = std::move(*current);
                current.reset();
            } else {
                current.emplace();
            }
            continue;
        }
        if (current) {
            current->append(line);
            current->push_back('\n');
        }
    }
    if (current) last = std::move(*current);
    if (last) return last;

    auto outcome = parse_actions(message);
    if (!outcome.has_errors() && !outcome.actions.empty()) return std::string{message};
    return std::nullopt;
}

std::string render_diagnostic(std::string_view code, const Diagnostic& d) {
    std::size_t offset = std::min(d.span.offset, code.size());
    std::size_t line = 1, line_start = 0;
    for (std::size_t i = 0; i < offset; ++i)
        if (code[i] == '\n') {
            ++line;
            line_start = i + 1;
        }
    std::size_t col = utf8_length(code.substr(line_start, offset - line_start)) + 1;
    return std::string{to_string(d.severity)} + " " + std::to_string(line) + ":" + std::to_string(col) + " " + d.code +
           " " + d.message;
}

std::string pretty_print(const std::vector<CodeAction>& actions) {
    std::string out;
    for (const auto& a : actions) {
        if (const auto* n = std::get_if<AddNode>(&a.op))
            out += "graph.add_node(node_name=" + quote(n->name) + ", node_content=" + quote(n->content) + ")\n";
        else if (const auto* e = std::get_if<AddEdge>(&a.op))
            out += "graph.add_edge(start_node=" + quote(e->from) + ", end_node=" + quote(e->to) + ")\n";
    }
    return out;
}

ApplyResult apply_actions(ThoughtGraph& graph, const std::vector<CodeAction>& actions, const ApplyOptions& options) {
    ApplyResult result;
    auto search_nodes = [&] {
        std::size_t n = 0;
        for (const auto& name : graph.order())
            if (graph.node(name).kind == NodeKind::Search) ++n;
        return n;
    };
    for (const auto& action : actions) {
        try {
            if (const auto* n = std::get_if<AddNode>(&action.op)) {
                if (n->name != kEndName && is_valid_node_name(n->name) && !graph.contains(n->name) &&
                    search_nodes() >= options.max_search_nodes) {
                    result.diagnostics.push_back({Severity::Warning, action.source_span, "NodeLimit",
                                                  "node limit of " + std::to_string(options.max_search_nodes) +
                                                      " reached, '" + n->name + "' skipped"});
                    continue;
                }
                graph.add_node(n->name, n->content);
                result.applied.push_back(action);
                if (graph.node(n->name).kind == NodeKind::Search) result.new_search_nodes.push_back(n->name);
            } else if (const auto* e = std::get_if<AddEdge>(&action.op)) {
                if (graph.add_edge(e->from, e->to)) result.applied.push_back(action);
            }
        } catch (const GraphError& err) {
            if (err.code() == GraphErrc::CycleCreated) {
                result.diagnostics.push_back({Severity::Error, action.source_span, "CycleCreated", err.detail()});
                result.aborted = true;
                break;
            }
            result.diagnostics.push_back({Severity::Warning, action.source_span, std::string{to_string(err.code())}, err.detail()});
        }
    }
    return result;
}

} // namespace deepsearch
