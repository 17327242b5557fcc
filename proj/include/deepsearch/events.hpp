#pragma once

#include "deepsearch/graph.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace deepsearch {

enum class EventKind {
    session_started,
    planner_thought,
    code_parsed,
    node_added,
    edge_added,
    node_state_changed,
    node_response,
    final_answer_delta,
    final_answer_done,
    warning,
    error,
    session_done,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view s);

struct AgentEvent {
    std::uint64_t seq = 0;
    std::string session_id;
    EventKind kind = EventKind::warning;
    nlohmann::json payload = nlohmann::json::object();
    std::string timestamp;

    nlohmann::json to_json() const;
    /// Throws std::invalid_argument on a record that is not an event.
    static AgentEvent from_json(const nlohmann::json& j);

    /// One-line JSON record.
    std::string to_line() const { return to_json().dump(); }
    /// `id: <seq>\nevent: <kind>\ndata: <record>\n\n`
    std::string to_sse() const;
};

/// Called by the planner for every event it produces, in order.
using EventSink = std::function<void(EventKind, nlohmann::json)>;

inline constexpr std::size_t kDefaultEventBufferCap = 10000;

/// Per-session append-only event buffer. Publishing never waits on readers;
/// once the cap is reached further events are dropped and readers see the
/// log as overflowed.
class EventLog {
public:
    explicit EventLog(std::string session_id, std::size_t cap = kDefaultEventBufferCap);

    /// Assigns seq (starting at 1) and timestamp. Returns the seq, or 0 when
    /// the event was dropped because the buffer is full.
    std::uint64_t publish(EventKind kind, nlohmann::json payload);

    /// Marks the stream complete; wakes all readers.
    void close();

    /// Frees buffered events. Subsequent reads report `purged`.
    void purge();

    struct Batch {
        std::vector<AgentEvent> events;
        bool closed = false;      // no more events will ever follow
        bool overflowed = false;  // the buffer cap was hit; the stream is incomplete
        bool purged = false;
    };

    /// Events with seq > after_seq, waiting up to `wait` for at least one.
    Batch read_after(std::uint64_t after_seq, std::chrono::milliseconds wait) const;

    std::vector<AgentEvent> events() const;
    const std::string& session_id() const { return session_id_; }
    bool closed() const;
    bool overflowed() const;
    bool purged() const;

    EventSink sink() {
        return [this](EventKind kind, nlohmann::json payload) { publish(kind, std::move(payload)); };
    }

private:
    std::string session_id_;
    std::size_t cap_;
    mutable std::mutex mutex_;
    mutable std::condition_variable cv_;
    std::vector<AgentEvent> events_;
    std::uint64_t next_seq_ = 1;
    bool closed_ = false;
    bool overflowed_ = false;
    bool purged_ = false;
};

/// Folds node_added / edge_added / node_state_changed events into the graph
/// structure they describe.
GraphSkeleton reconstruct_skeleton(const std::vector<AgentEvent>& events);

/// Reads a line-delimited event log.
std::vector<AgentEvent> parse_event_lines(std::string_view text);

/// Single-line human-readable rendering, used by `replay`.
std::string describe_event(const AgentEvent& e);

} // namespace deepsearch
