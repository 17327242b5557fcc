#pragma once

#include "deepsearch/action.hpp"
#include "deepsearch/backends.hpp"
#include "deepsearch/events.hpp"
#include "deepsearch/graph.hpp"
#include "deepsearch/searcher.hpp"
#include "deepsearch/templates.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace deepsearch {

struct PlannerConfig {
    std::size_t max_turns = 10;
    std::size_t max_nodes = 32;
    std::size_t max_concurrent_searchers = 8;
    std::chrono::milliseconds searcher_timeout{60000};
    GenerationParams llm_params{0.0, 2048, {}};

    /// Throws std::invalid_argument when a count is zero.
    void validate() const;
};

enum class SessionStatus { Active, Finalizing, Done, Aborted };
std::string_view to_string(SessionStatus s);

struct TurnRecord {
    std::size_t index = 0;
    std::string assistant;                // raw model text
    std::optional<std::string> code;      // extracted block, if any
    std::vector<std::string> diagnostics; // rendered
    std::vector<std::string> completed;   // nodes resolved during this turn, by seq
    std::string tool_message;             // what the model sees next turn
    bool final = false;
    std::chrono::milliseconds duration{0};
    std::optional<int> prompt_tokens;
    std::optional<int> completion_tokens;

    nlohmann::json to_json() const;
};

class PlannerSession {
public:
    PlannerSession(std::string question, PlannerConfig config);

    const std::string& question() const { return question_; }
    const PlannerConfig& config() const { return config_; }

    // The accessors below are unsynchronized; use them from the turn loop or
    // once the session has finished. Concurrent observers use snapshot(),
    // status_now() and trace_json(), which take the session lock.
    const ThoughtGraph& graph() const { return graph_; }
    const std::vector<TurnRecord>& turns() const { return turns_; }
    const std::optional<TurnRecord>& final_turn() const { return final_turn_; }
    SessionStatus status() const { return status_; }
    bool best_effort() const { return best_effort_; }
    std::size_t llm_calls() const { return llm_calls_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    const std::optional<std::string>& error() const { return error_; }
    const std::map<std::string, SearcherTranscript>& transcripts() const { return transcripts_; }
    std::optional<NodeResponse> final_answer() const;

    std::string snapshot() const;
    SessionStatus status_now() const;
    nlohmann::json trace_json() const;

private:
    friend class Planner;

    std::string question_;
    PlannerConfig config_;
    ThoughtGraph graph_;
    std::vector<TurnRecord> turns_;
    std::optional<TurnRecord> final_turn_;
    SessionStatus status_ = SessionStatus::Active;
    bool best_effort_ = false;
    std::size_t llm_calls_ = 0;
    std::vector<std::string> warnings_;
    std::optional<std::string> error_;
    std::map<std::string, SearcherTranscript> transcripts_;
    mutable std::unique_ptr<std::shared_mutex> lock_ = std::make_unique<std::shared_mutex>();
};

/// Message sequence for the next planner call. Depends only on the question,
/// the recorded turns and the session status.
std::vector<ChatMessage> build_planner_prompt(const PlannerSession& session, const TemplateSet& templates);

/// `[node <name>] <answer>` block followed by the node's sources.
std::string render_node_result(const GraphNode& node);

enum class TurnOutcome { Continue, Finalizing, Aborted };

class Planner {
public:
    Planner(Backends backends, std::shared_ptr<const TemplateSet> templates, PlannerConfig config,
            SearcherConfig searcher_config, EventSink sink = {});

    const PlannerConfig& config() const { return config_; }

    PlannerSession start(const std::string& question) const;

    /// One planner call plus the searcher waves it unlocks.
    TurnOutcome run_turn(PlannerSession& session);

    /// The no-code final-answer call. Adds the END node if the model never did.
    void run_final_turn(PlannerSession& session);

    /// Runs the session to Done or Aborted. Emits session_started first and
    /// session_done last.
    void run(PlannerSession& session);

    /// Convenience wrapper around start() and run().
    PlannerSession run_session(const std::string& question);

private:
    void emit(EventKind kind, nlohmann::json payload);
    void warn(PlannerSession& s, const std::string& message);
    void abort(PlannerSession& s, const std::string& message);
    void set_state(const std::string& name, NodeState from, NodeState to);
    void emit_node_added(const GraphNode& node);
    std::optional<Completion> call_llm(PlannerSession& s, const std::vector<ChatMessage>& prompt, bool final);
    std::vector<std::string> run_waves(PlannerSession& s);

    Backends backends_;
    std::shared_ptr<const TemplateSet> templates_;
    PlannerConfig config_;
    SearcherConfig searcher_config_;
    EventSink sink_;
};

/// Writes trace.json, snapshot.txt, events.jsonl and searchers/<node>.json.
void write_trace(const std::filesystem::path& dir, const PlannerSession& session,
                 const std::vector<AgentEvent>& events);

} // namespace deepsearch
