#pragma once

#include "deepsearch/backends.hpp"
#include "deepsearch/planner.hpp"
#include "deepsearch/searcher.hpp"
#include "deepsearch/templates.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepsearch {

struct QAItem {
    std::string id;
    std::string question;
    std::vector<std::string> answers;
    std::vector<std::string> tags;
};

class MalformedRecord : public std::runtime_error {
public:
    MalformedRecord(std::size_t line, const std::string& what)
        : std::runtime_error("MalformedRecord at line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// One `{id, question, answers[], tags[]}` record per line; blank lines are
/// skipped.
std::vector<QAItem> parse_dataset(std::string_view jsonl);
std::vector<QAItem> load_dataset(const std::filesystem::path& path);

/// Lowercase, ASCII punctuation removed, whitespace collapsed, one leading
/// article dropped.
std::string normalize_answer(std::string_view text);
bool exact_match(std::string_view prediction, const std::vector<std::string>& gold_answers);

struct JudgeVerdict {
    bool correct = false;
    std::optional<std::string> warning;
};

/// Asks the model to grade; its first word must be CORRECT or INCORRECT.
/// A malformed reply is retried once, then counts as incorrect.
JudgeVerdict llm_judge(const std::string& question, const std::string& prediction,
                       const std::vector<std::string>& gold_answers, LlmBackend& llm, const TemplateSet& templates);

struct ReactResult {
    std::string prediction;
    bool flagged = false;  // step budget ran out before a final answer
    std::size_t steps = 0;
    std::size_t searches = 0;
    std::vector<std::string> notes;
};

struct ReactStep {
    std::string thought;
    std::optional<std::string> query;         // Action: search("...")
    std::optional<std::string> final_answer;  // Final Answer: ...
};

/// Reads the Thought / Action / Final Answer lines of one model reply.
ReactStep parse_react_reply(std::string_view reply);

/// Thought / Action / Observation loop over the first search engine.
/// Throws LlmBackendError when the model call fails.
ReactResult react_agent(const std::string& question, const Backends& backends, const TemplateSet& templates,
                        std::size_t max_steps = 6, std::size_t top_k = 3);

enum class AgentKind { NoSearch, React, MindSearch };
std::string_view to_string(AgentKind kind);
std::optional<AgentKind> parse_agent_kind(std::string_view s);
/// Row label used in the results table.
std::string_view display_name(AgentKind kind);

enum class Scoring { ExactMatch, Judge };

struct ItemResult {
    std::string id;
    AgentKind agent = AgentKind::NoSearch;
    std::string prediction;
    bool verdict = false;
    std::chrono::milliseconds latency{0};
    std::size_t pages_read = 0;
    std::vector<std::string> tags;
    bool flagged = false;
    std::vector<std::string> notes;

    nlohmann::json to_json() const;
};

struct TagStats {
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct EvalReport {
    AgentKind agent = AgentKind::NoSearch;
    Scoring scoring = Scoring::ExactMatch;
    std::vector<ItemResult> items;       // dataset order
    std::vector<std::string> tag_order;  // first appearance in the dataset
    std::map<std::string, TagStats> by_tag;
    TagStats overall;

    /// Unweighted mean of the per-tag accuracies, the AVG column of the
    /// results table. Pooled accuracy when no item carries a tag.
    double macro_average() const;

    nlohmann::json aggregate_json() const;
    /// Per-item records followed by the aggregate record.
    std::string to_jsonl() const;
};

struct EvalOptions {
    AgentKind agent = AgentKind::MindSearch;
    Scoring scoring = Scoring::ExactMatch;
    std::size_t width = 4;
    std::size_t react_max_steps = 6;
    std::size_t react_top_k = 3;
    PlannerConfig planner;
    SearcherConfig searcher;
    /// Grader for Scoring::Judge; the agent LLM when unset.
    std::shared_ptr<LlmBackend> judge;
};

/// Runs every item (up to `width` at once) and scores it. Per-item failures
/// are recorded as incorrect with a note.
EvalReport run_eval(const std::vector<QAItem>& items, const EvalOptions& options, const Backends& backends,
                    std::shared_ptr<const TemplateSet> templates);

/// Agents as rows, tags as columns, plus an AVG column; cells are accuracy
/// percentages.
std::string render_table(const std::vector<EvalReport>& reports);

} // namespace deepsearch
