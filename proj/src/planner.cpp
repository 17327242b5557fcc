#include "deepsearch/planner.hpp"

#include "deepsearch/util.hpp"

#include <fstream>
#include <mutex>
#include <set>
#include <stdexcept>

namespace deepsearch {

using nlohmann::json;

namespace {

constexpr std::string_view kBestEffortNote =
    "The planning budget is used up. Answer as well as you can from the results gathered so far, and say so where "
    "they are not enough.";

json response_json(const NodeResponse& r) {
    json cites = json::array();
    for (const auto& c : r.citations) cites.push_back({{"url", c.url}, {"title", c.title}});
    return {{"answer", r.answer_text}, {"citations", cites}, {"transcript_digest", r.transcript_digest}};
}

json node_added_payload(const GraphNode& n) {
    return {{"name", n.name},
            {"kind", to_string(n.kind)},
            {"state", to_string(n.state)},
            {"seq", n.seq},
            {"content_digest", sha256_hex(n.content)}};
}

} // namespace

void PlannerConfig::validate() const {
    if (max_turns == 0) throw std::invalid_argument("planner.max_turns must be at least 1");
    if (max_nodes == 0) throw std::invalid_argument("planner.max_nodes must be at least 1");
    if (max_concurrent_searchers == 0) throw std::invalid_argument("planner.max_concurrent_searchers must be at least 1");
    if (searcher_timeout.count() <= 0) throw std::invalid_argument("planner.searcher_timeout_s must be positive");
}

std::string_view to_string(SessionStatus s) {
    switch (s) {
    case SessionStatus::Active: return "Active";
    case SessionStatus::Finalizing: return "Finalizing";
    case SessionStatus::Done: return "Done";
    case SessionStatus::Aborted: return "Aborted";
    }
    return "?";
}

json TurnRecord::to_json() const {
    json j{{"index", index},
           {"assistant", assistant},
           {"code", code ? json(*code) : json(nullptr)},
           {"diagnostics", diagnostics},
           {"completed", completed},
           {"tool_message", tool_message},
           {"final", final},
           {"duration_ms", duration.count()}};
    if (prompt_tokens) j["prompt_tokens"] = *prompt_tokens;
    if (completion_tokens) j["completion_tokens"] = *completion_tokens;
    return j;
}

PlannerSession::PlannerSession(std::string question, PlannerConfig config)
    : question_(std::move(question)), config_(std::move(config)), graph_(question_) {
    config_.validate();
}

std::optional<NodeResponse> PlannerSession::final_answer() const {
    auto end = graph_.end_name();
    if (!end) return std::nullopt;
    const auto& n = graph_.node(*end);
    if (n.state != NodeState::Done) return std::nullopt;
    return n.response;
}

std::string PlannerSession::snapshot() const {
    std::shared_lock lock(*lock_);
    return graph_.snapshot();
}

SessionStatus PlannerSession::status_now() const {
    std::shared_lock lock(*lock_);
    return status_;
}

json PlannerSession::trace_json() const {
    std::shared_lock lock(*lock_);
    json nodes = json::array();
    for (const auto& name : graph_.order()) {
        const auto& n = graph_.node(name);
        json jn{{"name", n.name},
                {"kind", to_string(n.kind)},
                {"state", to_string(n.state)},
                {"seq", n.seq},
                {"content", n.content},
                {"predecessors", graph_.predecessors(n.name)}};
        if (n.response) jn["response"] = response_json(*n.response);
        if (n.error) jn["error"] = *n.error;
        nodes.push_back(std::move(jn));
    }
    json edges = json::array();
    for (const auto& [from, to] : graph_.edges()) edges.push_back({from, to});
    json turns = json::array();
    for (const auto& t : turns_) turns.push_back(t.to_json());

    json j{{"question", question_},
           {"status", to_string(status_)},
           {"best_effort", best_effort_},
           {"llm_calls", llm_calls_},
           {"config",
            {{"max_turns", config_.max_turns},
             {"max_nodes", config_.max_nodes},
             {"max_concurrent_searchers", config_.max_concurrent_searchers},
             {"searcher_timeout_ms", config_.searcher_timeout.count()}}},
           {"turns", turns},
           {"final_turn", final_turn_ ? final_turn_->to_json() : json(nullptr)},
           {"graph", {{"snapshot", graph_.snapshot()}, {"nodes", nodes}, {"edges", edges}}},
           {"warnings", warnings_},
           {"error", error_ ? json(*error_) : json(nullptr)}};
    auto end = graph_.end_name();
    if (end && graph_.node(*end).state == NodeState::Done && graph_.node(*end).response)
        j["final_answer"] = response_json(*graph_.node(*end).response);
    else
        j["final_answer"] = nullptr;
    return j;
}

std::string render_node_result(const GraphNode& node) {
    std::string out = "[node " + node.name + "] ";
    if (node.state == NodeState::Failed) {
        out += "(no answer: " + node.error.value_or("failed") + ")\n";
        return out;
    }
    out += node.response ? node.response->answer_text : std::string{};
    out += "\n";
    if (node.response && !node.response->citations.empty()) {
        out += "Sources:\n";
        for (std::size_t i = 0; i < node.response->citations.size(); ++i) {
            const auto& c = node.response->citations[i];
            out += "[" + std::to_string(i + 1) + "] " + c.title + " <" + c.url + ">\n";
        }
    }
    return out;
}

std::vector<ChatMessage> build_planner_prompt(const PlannerSession& session, const TemplateSet& templates) {
    auto status = session.status();
    if (status != SessionStatus::Active && status != SessionStatus::Finalizing)
        throw std::logic_error("prompt requested for a session that is " + std::string{to_string(status)});
    std::vector<ChatMessage> messages;
    messages.push_back({"system", templates.render("planner.system", {{"max_nodes", std::to_string(session.config().max_nodes)}})});
    messages.push_back({"user", session.question()});
    for (const auto& t : session.turns()) {
        messages.push_back({"assistant", t.assistant});
        messages.push_back({"user", t.tool_message});
    }
    if (status == SessionStatus::Finalizing) {
        std::string text = templates.render("planner.finalize", {});
        if (session.best_effort()) {
            if (!text.empty() && text.back() != '\n') text += "\n";
            text += kBestEffortNote;
        }
        messages.push_back({"user", std::move(text)});
    }
    return messages;
}

Planner::Planner(Backends backends, std::shared_ptr<const TemplateSet> templates, PlannerConfig config,
                 SearcherConfig searcher_config, EventSink sink)
    : backends_(std::move(backends)), templates_(std::move(templates)), config_(std::move(config)),
      searcher_config_(std::move(searcher_config)), sink_(std::move(sink)) {
    config_.validate();
    if (!backends_.llm || !backends_.fetcher || backends_.engines.empty())
        throw std::invalid_argument("planner needs an LLM, a fetcher and at least one search engine");
    if (!templates_) throw std::invalid_argument("planner needs a template set");
}

PlannerSession Planner::start(const std::string& question) const { return PlannerSession(question, config_); }

void Planner::emit(EventKind kind, json payload) {
    if (sink_) sink_(kind, std::move(payload));
}

void Planner::warn(PlannerSession& s, const std::string& message) {
    {
        std::unique_lock lock(*s.lock_);
        s.warnings_.push_back(message);
    }
    emit(EventKind::warning, {{"message", message}});
}

void Planner::abort(PlannerSession& s, const std::string& message) {
    {
        std::unique_lock lock(*s.lock_);
        s.status_ = SessionStatus::Aborted;
        s.error_ = message;
    }
    emit(EventKind::error, {{"message", message}});
}

void Planner::set_state(const std::string& name, NodeState from, NodeState to) {
    emit(EventKind::node_state_changed, {{"name", name}, {"from", to_string(from)}, {"to", to_string(to)}});
}

void Planner::emit_node_added(const GraphNode& node) { emit(EventKind::node_added, node_added_payload(node)); }

std::optional<Completion> Planner::call_llm(PlannerSession& s, const std::vector<ChatMessage>& prompt, bool final) {
    const std::size_t budget = config_.max_turns + (final ? 1 : 0);
    TokenSink on_token;
    if (final) on_token = [this](std::string_view delta) { emit(EventKind::final_answer_delta, {{"text", delta}}); };
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (s.llm_calls_ >= budget) break;
        {
            std::unique_lock lock(*s.lock_);
            ++s.llm_calls_;
        }
        try {
            return backends_.llm->generate(prompt, config_.llm_params, Deadline::never(), on_token);
        } catch (const BackendError& e) {
            warn(s, std::string{"planner call failed: "} + e.what());
        }
    }
    return std::nullopt;
}

std::vector<std::string> Planner::run_waves(PlannerSession& s) {
    std::vector<std::string> completed;
    for (;;) {
        std::vector<std::string> wave;
        for (const auto& name : s.graph_.ready_nodes())
            if (s.graph_.node(name).kind == NodeKind::Search) wave.push_back(name);
        if (wave.empty()) break;

        std::vector<SearcherContext> contexts;
        for (const auto& name : wave) {
            {
                std::unique_lock lock(*s.lock_);
                s.graph_.mark_running(name);
            }
            set_state(name, NodeState::Pending, NodeState::Running);
            contexts.push_back(build_searcher_context(s.graph_, name));
        }

        std::vector<SearcherOutcome> outcomes(wave.size());
        parallel_for(wave.size(), config_.max_concurrent_searchers, [&](std::size_t i) {
            auto deadline = Deadline::after(config_.searcher_timeout);
            try {
                outcomes[i] = run_searcher(contexts[i], backends_, *templates_, searcher_config_, deadline);
            } catch (const std::exception& e) {
                outcomes[i].error = std::string{"searcher crashed: "} + e.what();
                outcomes[i].transcript.node = contexts[i].node_name;
                outcomes[i].transcript.error = outcomes[i].error;
            }
        });

        // Results are recorded in seq order regardless of completion order so
        // that graph state and events are the same at any concurrency.
        for (std::size_t i = 0; i < wave.size(); ++i) {
            const auto& name = wave[i];
            auto& out = outcomes[i];
            {
                std::unique_lock lock(*s.lock_);
                if (out.response)
                    s.graph_.record_result(name, *out.response);
                else
                    s.graph_.record_failure(name, out.error);
                s.transcripts_[name] = out.transcript;
            }
            if (out.response) {
                set_state(name, NodeState::Running, NodeState::Done);
                auto payload = response_json(*out.response);
                payload["name"] = name;
                emit(EventKind::node_response, std::move(payload));
            } else {
                set_state(name, NodeState::Running, NodeState::Failed);
                warn(s, "node " + name + " failed: " + out.error);
            }
            completed.push_back(name);
        }
    }
    return completed;
}

TurnOutcome Planner::run_turn(PlannerSession& s) {
    if (s.status_ != SessionStatus::Active) throw std::logic_error("run_turn on a session that is not Active");
    auto started = std::chrono::steady_clock::now();
    TurnRecord turn;
    turn.index = s.turns_.size();

    auto prompt = build_planner_prompt(s, *templates_);
    auto completion = call_llm(s, prompt, false);
    if (!completion) {
        abort(s, "planner LLM failed on turn " + std::to_string(turn.index));
        return TurnOutcome::Aborted;
    }
    turn.assistant = completion->text;
    turn.prompt_tokens = completion->prompt_tokens;
    turn.completion_tokens = completion->completion_tokens;
    emit(EventKind::planner_thought, {{"turn", turn.index}, {"text", turn.assistant}});

    std::string feedback;
    turn.code = extract_code(turn.assistant);
    if (!turn.code) {
        feedback = "No code block was found in your reply, so the graph is unchanged. Add nodes with "
                   "graph.add_node and graph.add_edge in a fenced code block, or add the \"response\" node "
                   "when the results are sufficient.\n";
    } else {
        auto parsed = parse_actions(*turn.code);
        for (const auto& d : parsed.diagnostics) turn.diagnostics.push_back(render_diagnostic(*turn.code, d));
        emit(EventKind::code_parsed,
             {{"turn", turn.index}, {"actions", parsed.actions.size()}, {"diagnostics", turn.diagnostics}});
        if (parsed.has_errors()) {
            feedback = "Your code was rejected and no statement was applied:\n";
            for (const auto& d : turn.diagnostics) feedback += d + "\n";
        } else {
            ApplyResult applied;
            {
                std::unique_lock lock(*s.lock_);
                applied = apply_actions(s.graph_, parsed.actions, {config_.max_nodes});
            }
            for (const auto& a : applied.applied) {
                if (const auto* n = std::get_if<AddNode>(&a.op))
                    emit_node_added(s.graph_.node(n->name));
                else if (const auto* e = std::get_if<AddEdge>(&a.op))
                    emit(EventKind::edge_added, {{"from", e->from}, {"to", e->to}});
            }
            for (const auto& d : applied.diagnostics) {
                auto line = render_diagnostic(*turn.code, d);
                turn.diagnostics.push_back(line);
                feedback += line + "\n";
                if (d.severity == Severity::Warning)
                    warn(s, line);
                else
                    emit(EventKind::error, {{"message", line}});
            }
            if (applied.aborted) feedback += "Statements after the rejected edge were not applied.\n";
        }
    }

    turn.completed = run_waves(s);
    if (!turn.completed.empty()) {
        feedback += "Results:\n";
        for (const auto& name : turn.completed) feedback += render_node_result(s.graph_.node(name));
    } else if (feedback.empty()) {
        feedback = "No new results.\n";
    }
    turn.tool_message = std::move(feedback);
    turn.duration = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

    auto end = s.graph_.end_name();
    bool end_ready = false;
    if (end)
        for (const auto& r : s.graph_.ready_nodes())
            if (r == *end) end_ready = true;
    {
        std::unique_lock lock(*s.lock_);
        s.turns_.push_back(std::move(turn));
        if (end_ready) s.status_ = SessionStatus::Finalizing;
    }
    return end_ready ? TurnOutcome::Finalizing : TurnOutcome::Continue;
}

void Planner::run_final_turn(PlannerSession& s) {
    if (s.status_ != SessionStatus::Finalizing) throw std::logic_error("final turn on a session that is not Finalizing");
    auto started = std::chrono::steady_clock::now();
    const std::string end_name{kEndName};

    if (!s.graph_.end_name()) {
        auto sinks = s.graph_.sinks();
        {
            std::unique_lock lock(*s.lock_);
            s.graph_.add_node(end_name, "final answer");
            for (const auto& from : sinks) s.graph_.add_edge(from, end_name);
        }
        warn(s, "the planner never added the \"response\" node; it was added with edges from every leaf");
        emit_node_added(s.graph_.node(end_name));
        for (const auto& from : sinks) emit(EventKind::edge_added, {{"from", from}, {"to", end_name}});
    } else {
        for (const auto& sink : s.graph_.sinks())
            warn(s, "leaf node " + sink + " is not connected to the \"response\" node");
    }

    {
        std::unique_lock lock(*s.lock_);
        s.graph_.mark_running(end_name);
    }
    set_state(end_name, NodeState::Pending, NodeState::Running);

    TurnRecord turn;
    turn.index = s.turns_.size();
    turn.final = true;
    auto prompt = build_planner_prompt(s, *templates_);
    auto completion = call_llm(s, prompt, true);
    if (!completion) {
        {
            std::unique_lock lock(*s.lock_);
            s.graph_.record_failure(end_name, "final answer call failed");
        }
        set_state(end_name, NodeState::Running, NodeState::Failed);
        abort(s, "planner LLM failed on the final answer");
        return;
    }
    turn.assistant = completion->text;
    turn.prompt_tokens = completion->prompt_tokens;
    turn.completion_tokens = completion->completion_tokens;
    if (extract_code(turn.assistant)) warn(s, "the final answer contains code; it was kept as text");

    NodeResponse response;
    response.answer_text = trim(turn.assistant);
    std::set<std::string> seen;
    for (const auto& name : s.graph_.order()) {
        const auto& n = s.graph_.node(name);
        if (n.kind != NodeKind::Search || !n.response) continue;
        for (const auto& c : n.response->citations)
            if (seen.insert(c.url).second) response.citations.push_back(c);
    }
    json prompt_json = json::array();
    for (const auto& m : prompt) prompt_json.push_back({{"role", m.role}, {"content", m.content}});
    response.transcript_digest = sha256_hex(prompt_json.dump() + "\n" + turn.assistant);
    turn.duration = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

    {
        std::unique_lock lock(*s.lock_);
        s.graph_.record_result(end_name, response);
        s.final_turn_ = std::move(turn);
        s.status_ = SessionStatus::Done;
    }
    set_state(end_name, NodeState::Running, NodeState::Done);
    auto payload = response_json(response);
    payload["name"] = end_name;
    emit(EventKind::node_response, payload);
    payload.erase("name");
    emit(EventKind::final_answer_done, std::move(payload));
}

void Planner::run(PlannerSession& s) {
    emit(EventKind::session_started, {{"question", s.question_}});
    emit_node_added(s.graph_.root());
    try {
        while (s.status_ == SessionStatus::Active) {
            if (s.llm_calls_ >= config_.max_turns) {
                {
                    std::unique_lock lock(*s.lock_);
                    s.best_effort_ = true;
                    s.status_ = SessionStatus::Finalizing;
                }
                warn(s, "turn budget of " + std::to_string(config_.max_turns) + " exhausted; finalizing");
                break;
            }
            run_turn(s);
        }
        if (s.status_ == SessionStatus::Finalizing) run_final_turn(s);
    } catch (const std::exception& e) {
        abort(s, std::string{"session failed: "} + e.what());
    }
    json done{{"status", to_string(s.status_)}};
    if (s.error_) done["error"] = *s.error_;
    emit(EventKind::session_done, std::move(done));
}

PlannerSession Planner::run_session(const std::string& question) {
    auto session = start(question);
    run(session);
    return session;
}

void write_trace(const std::filesystem::path& dir, const PlannerSession& session, const std::vector<AgentEvent>& events) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "searchers");
    auto write = [](const fs::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << text;
    };
    write(dir / "trace.json", session.trace_json().dump(2) + "\n");
    write(dir / "snapshot.txt", session.snapshot());
    std::string lines;
    for (const auto& e : events) lines += e.to_line() + "\n";
    write(dir / "events.jsonl", lines);
    for (const auto& [name, t] : session.transcripts()) write(dir / "searchers" / (name + ".json"), t.to_json().dump(2) + "\n");
}

} // namespace deepsearch
