#pragma once

#include "deepsearch/backends.hpp"
#include "deepsearch/graph.hpp"
#include "deepsearch/templates.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepsearch {

struct SearcherConfig {
    std::size_t max_query_variants = 3;
    std::size_t hits_per_query = 5;
    std::size_t merged_hit_cap = 20;
    std::size_t max_pages_to_read = 4;
    std::size_t page_char_budget = 8000;
    std::chrono::milliseconds fetch_timeout{15000};
    /// Characters reserved for the root question and parent answers in a prompt.
    std::size_t context_char_budget = 3000;
    /// Upper bound on everything in a prompt except page bodies / hit listings.
    std::size_t prompt_overhead_chars = 8000;
    GenerationParams llm_params{0.0, 1024, {}};
};

struct ParentAnswer {
    std::string node;
    std::string text;  // answer, or a failure note
    bool failed = false;
    bool operator==(const ParentAnswer&) const = default;
};

struct SearcherContext {
    std::string node_name;
    std::string root_question;
    std::vector<ParentAnswer> parent_answers;  // by parent seq
    std::string node_question;
};

struct PageDocument {
    std::string url;
    std::string title;
    std::string body_text;  // at most page_char_budget code points
    bool truncated = false;
};

struct HitList {
    std::string query;
    std::string engine;
    std::vector<SearchHit> hits;
    bool failed = false;
};

struct PageRecord {
    std::string url;
    std::string title;
    bool truncated = false;
    std::size_t chars = 0;
    std::string digest;
};

/// Append-only record of one searcher run. Contains no timing data, so two
/// runs on identical inputs serialize identically.
struct SearcherTranscript {
    std::string node;
    std::vector<std::string> stages;
    std::vector<std::string> queries;
    std::vector<HitList> hits;
    std::vector<SearchHit> merged;
    std::vector<std::string> selected;
    std::vector<PageRecord> pages;
    std::string summary_prompt;
    std::string answer;
    std::vector<Citation> citations;
    std::vector<std::string> notes;
    std::optional<std::string> error;

    nlohmann::json to_json() const;
    std::string digest() const;
};

enum class SearcherErrc { Timeout, AllEnginesFailed, LlmBackendError };
std::string_view to_string(SearcherErrc code);

class SearcherError : public std::runtime_error {
public:
    SearcherError(SearcherErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    SearcherErrc code() const noexcept { return code_; }

private:
    SearcherErrc code_;
};

/// Root question plus the answers of the node's direct predecessors. The root
/// contributes only through root_question. Requires the node to be Running.
SearcherContext build_searcher_context(const ThoughtGraph& graph, const std::string& node);

/// The "earlier findings" block shared by all searcher prompts, truncated to
/// the context budget.
std::string render_parent_answers(const SearcherContext& ctx, std::size_t char_budget);

/// Model-written query variants plus the original sub-question, deduplicated.
/// Falls back to just the sub-question if the model fails.
std::vector<std::string> rewrite_queries(const SearcherContext& ctx, LlmBackend& llm, const TemplateSet& templates,
                                         const SearcherConfig& config, const Deadline& deadline,
                                         std::vector<std::string>* notes = nullptr);

/// Parses a rewrite reply into at most `max_variants` queries.
std::vector<std::string> parse_query_lines(std::string_view reply, std::size_t max_variants);

/// Runs every (query, engine) pair concurrently. Results are ordered by
/// (query index, engine index); failed pairs yield empty lists and a note.
/// Throws SearcherError(AllEnginesFailed) when every pair failed.
std::vector<HitList> fan_out_search(const std::vector<std::string>& queries,
                                    const std::vector<std::shared_ptr<SearchBackend>>& engines, std::size_t k,
                                    const Deadline& deadline, std::vector<std::string>* notes = nullptr);

/// Deduplicates hits by normalized URL, keeping the lexicographically first
/// title and the best rank (summary and engine follow the best-ranked hit,
/// first seen on ties). Ordered by (rank, url) and capped.
std::vector<SearchHit> merge_hits(const std::vector<std::vector<SearchHit>>& lists, std::size_t cap = 20);

/// Parses 1-based indices out of a selection reply; invalid and repeated
/// indices are dropped. Empty when the reply names no valid index.
std::vector<std::size_t> parse_selection(std::string_view reply, std::size_t hit_count, std::size_t max_pages);

std::vector<std::string> select_pages(const SearcherContext& ctx, const std::vector<SearchHit>& merged, LlmBackend& llm,
                                      const TemplateSet& templates, const SearcherConfig& config,
                                      const Deadline& deadline, std::vector<std::string>* notes = nullptr,
                                      std::string* prompt_out = nullptr);

/// Fetches concurrently and reduces each page to plain text within the
/// character budget. Failed urls are skipped with a note.
std::vector<PageDocument> fetch_pages(const std::vector<std::string>& urls, const std::vector<SearchHit>& merged,
                                      PageFetcher& fetcher, const SearcherConfig& config, const Deadline& deadline,
                                      std::vector<std::string>* notes = nullptr);

/// Builds the summarize prompt; exposed for inspection.
std::string summarize_prompt(const SearcherContext& ctx, const std::vector<PageDocument>& pages,
                             const TemplateSet& templates, const SearcherConfig& config);

/// Bracketed 1-based page references in an answer, e.g. "[2]" or "[1, 3]".
std::vector<std::size_t> parse_citations(std::string_view answer, std::size_t page_count);

/// Answers the sub-question from the pages. Throws LlmBackendError (or
/// TimeoutError) when the model call fails.
NodeResponse summarize(const SearcherContext& ctx, const std::vector<PageDocument>& pages, LlmBackend& llm,
                       const TemplateSet& templates, const SearcherConfig& config, const Deadline& deadline,
                       std::string* prompt_out = nullptr);

struct SearcherOutcome {
    std::optional<NodeResponse> response;
    std::optional<SearcherErrc> error_code;
    std::string error;
    SearcherTranscript transcript;
};

/// The full pipeline: rewrite, search and merge, select and fetch, summarize.
SearcherOutcome run_searcher(const SearcherContext& ctx, const Backends& backends, const TemplateSet& templates,
                             const SearcherConfig& config, const Deadline& deadline);

} // namespace deepsearch
