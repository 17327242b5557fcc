#pragma once

#include "deepsearch/config.hpp"
#include "deepsearch/events.hpp"
#include "deepsearch/planner.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace deepsearch {

class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

/// Question text for a follow-up session: the earlier answer as context,
/// then the new question.
std::string follow_up_question(const std::string& prior_answer, const std::string& question);

/// Seq to resume after, from `Last-Event-Seq`, `Last-Event-ID` or the
/// `last_event_seq` query parameter (in that order). 0 when absent.
std::uint64_t resume_point(const std::optional<std::string>& last_event_seq, const std::optional<std::string>& last_event_id,
                           const std::optional<std::string>& query_param);

class Service {
public:
    Service(EngineConfig config, Backends backends, std::shared_ptr<const TemplateSet> templates);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Starts a session on its own thread and returns its id. Throws
    /// ServiceError with the HTTP status to report.
    std::string ask(const std::string& question, const std::optional<std::string>& follow_up_of = std::nullopt);

    /// Drops a finished session's events and trace; later reads get 409.
    void purge(const std::string& id);

    std::shared_ptr<EventLog> events(const std::string& id) const;
    nlohmann::json trace(const std::string& id) const;

    /// Blocks until the session has emitted session_done or the wait expires.
    bool wait(const std::string& id, std::chrono::milliseconds timeout) const;

    /// Binds to host:port (port 0 picks a free one) and returns the port.
    int bind(const std::string& host, int port);
    /// Serves requests until stop(); call after bind().
    void listen();
    void stop();

    httplib::Server& http() { return *server_; }

private:
    struct Session {
        std::string id;
        std::string question;
        std::optional<std::string> follow_up_of;
        std::shared_ptr<EventLog> log;
        std::shared_ptr<PlannerSession> planner;
        bool purged = false;
    };

    void routes();
    std::shared_ptr<Session> find(const std::string& id) const;
    void evict_locked();

    EngineConfig config_;
    Backends backends_;
    std::shared_ptr<const TemplateSet> templates_;
    std::unique_ptr<httplib::Server> server_;

    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::deque<std::string> order_;
    std::uint64_t next_id_ = 1;
    std::vector<std::jthread> workers_;
};

/// Loads nothing itself: builds backends from the config and serves until
/// the process is stopped.
void serve(const EngineConfig& config);

} // namespace deepsearch
