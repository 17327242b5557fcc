#include "deepsearch/events.hpp"

#include "deepsearch/util.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <stdexcept>

namespace deepsearch {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 12> kKindNames{
    "session_started", "planner_thought", "code_parsed",     "node_added",   "edge_added", "node_state_changed",
    "node_response",   "final_answer_delta", "final_answer_done", "warning", "error",      "session_done",
};

} // namespace

std::string_view to_string(EventKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<EventKind> parse_event_kind(std::string_view s) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i)
        if (kKindNames[i] == s) return static_cast<EventKind>(i);
    return std::nullopt;
}

json AgentEvent::to_json() const {
    return {{"seq", seq}, {"session_id", session_id}, {"kind", to_string(kind)}, {"payload", payload}, {"timestamp", timestamp}};
}

AgentEvent AgentEvent::from_json(const json& j) {
    try {
        AgentEvent e;
        e.seq = j.at("seq").get<std::uint64_t>();
        e.session_id = j.at("session_id").get<std::string>();
        auto kind = parse_event_kind(j.at("kind").get<std::string>());
        if (!kind) throw std::invalid_argument("unknown event kind");
        e.kind = *kind;
        e.payload = j.value("payload", json::object());
        e.timestamp = j.value("timestamp", std::string{});
        return e;
    } catch (const json::exception& ex) {
        throw std::invalid_argument(std::string{"malformed event: "} + ex.what());
    }
}

std::string AgentEvent::to_sse() const {
    return "id: " + std::to_string(seq) + "\nevent: " + std::string{to_string(kind)} + "\ndata: " + to_line() + "\n\n";
}

EventLog::EventLog(std::string session_id, std::size_t cap) : session_id_(std::move(session_id)), cap_(cap) {}

std::uint64_t EventLog::publish(EventKind kind, json payload) {
    std::uint64_t seq = 0;
    {
        std::lock_guard lock(mutex_);
        if (closed_ || purged_) return 0;
        if (events_.size() >= cap_) {
            overflowed_ = true;
        } else {
            AgentEvent e;
            e.seq = seq = next_seq_++;
            e.session_id = session_id_;
            e.kind = kind;
            e.payload = std::move(payload);
            e.timestamp = iso_timestamp();
            events_.push_back(std::move(e));
        }
    }
    cv_.notify_all();
    return seq;
}

void EventLog::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    cv_.notify_all();
}

void EventLog::purge() {
    {
        std::lock_guard lock(mutex_);
        purged_ = true;
        closed_ = true;
        events_.clear();
        events_.shrink_to_fit();
    }
    cv_.notify_all();
}

EventLog::Batch EventLog::read_after(std::uint64_t after_seq, std::chrono::milliseconds wait) const {
    std::unique_lock lock(mutex_);
    auto has_new = [&] { return purged_ || closed_ || (!events_.empty() && events_.back().seq > after_seq); };
    cv_.wait_for(lock, wait, has_new);
    Batch batch;
    batch.purged = purged_;
    batch.overflowed = overflowed_;
    auto first = std::upper_bound(events_.begin(), events_.end(), after_seq,
                                  [](std::uint64_t s, const AgentEvent& e) { return s < e.seq; });
    batch.events.assign(first, events_.end());
    batch.closed = closed_;
    return batch;
}

std::vector<AgentEvent> EventLog::events() const {
    std::lock_guard lock(mutex_);
    return events_;
}

bool EventLog::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

bool EventLog::overflowed() const {
    std::lock_guard lock(mutex_);
    return overflowed_;
}

bool EventLog::purged() const {
    std::lock_guard lock(mutex_);
    return purged_;
}

GraphSkeleton reconstruct_skeleton(const std::vector<AgentEvent>& events) {
    std::map<std::string, GraphSkeleton::Node> nodes;
    std::set<std::pair<std::string, std::string>> edges;
    for (const auto& e : events) {
        const auto& p = e.payload;
        switch (e.kind) {
        case EventKind::node_added: {
            GraphSkeleton::Node n;
            n.name = p.at("name").get<std::string>();
            n.kind = parse_node_kind(p.at("kind").get<std::string>()).value_or(NodeKind::Search);
            n.state = parse_node_state(p.at("state").get<std::string>()).value_or(NodeState::Pending);
            n.seq = p.at("seq").get<std::uint64_t>();
            n.digest8 = p.at("content_digest").get<std::string>().substr(0, 8);
            nodes[n.name] = std::move(n);
            break;
        }
        case EventKind::edge_added:
            edges.emplace(p.at("from").get<std::string>(), p.at("to").get<std::string>());
            break;
        case EventKind::node_state_changed: {
            auto it = nodes.find(p.at("name").get<std::string>());
            if (it != nodes.end())
                it->second.state = parse_node_state(p.at("to").get<std::string>()).value_or(it->second.state);
            break;
        }
        default: break;
        }
    }
    GraphSkeleton sk;
    for (auto& [name, n] : nodes) sk.nodes.push_back(std::move(n));
    std::sort(sk.nodes.begin(), sk.nodes.end(), [](const auto& a, const auto& b) { return a.seq < b.seq; });
    sk.edges.assign(edges.begin(), edges.end());
    return sk;
}

std::vector<AgentEvent> parse_event_lines(std::string_view text) {
    std::vector<AgentEvent> out;
    std::size_t lineno = 0;
    for (const auto& line : split_lines(text)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(AgentEvent::from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw std::invalid_argument("event line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::string describe_event(const AgentEvent& e) {
    const auto& p = e.payload;
    std::string head = "#" + std::to_string(e.seq) + " " + std::string{to_string(e.kind)};
    auto str = [&](const char* key) { return p.contains(key) && p[key].is_string() ? p[key].get<std::string>() : std::string{}; };
    switch (e.kind) {
    case EventKind::session_started: return head + " question=" + json(str("question")).dump();
    case EventKind::planner_thought: return head + " turn=" + p.value("turn", json(0)).dump() + "\n" + str("text");
    case EventKind::code_parsed:
        return head + " turn=" + p.value("turn", json(0)).dump() + " actions=" + p.value("actions", json(0)).dump() +
               " diagnostics=" + p.value("diagnostics", json::array()).dump();
    case EventKind::node_added: return head + " " + str("name") + " (" + str("kind") + ")";
    case EventKind::edge_added: return head + " " + str("from") + " -> " + str("to");
    case EventKind::node_state_changed: return head + " " + str("name") + " " + str("from") + " -> " + str("to");
    case EventKind::node_response: return head + " " + str("name") + ": " + str("answer");
    case EventKind::final_answer_delta: return head + " " + json(str("text")).dump();
    case EventKind::final_answer_done: return head + "\n" + str("answer");
    case EventKind::warning:
    case EventKind::error: return head + " " + str("message");
    case EventKind::session_done: return head + " status=" + str("status");
    }
    return head;
}

} // namespace deepsearch
