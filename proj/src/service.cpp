#include "deepsearch/service.hpp"

#include "deepsearch/util.hpp"

#include <httplib.h>

#include <charconv>
#include <cstdio>
#include <iostream>

namespace deepsearch {

using nlohmann::json;

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}}.dump(), "application/json");
}

std::optional<std::string> header(const httplib::Request& req, const char* name) {
    if (!req.has_header(name)) return std::nullopt;
    return req.get_header_value(name);
}

} // namespace

std::string follow_up_question(const std::string& prior_answer, const std::string& question) {
    return "Earlier answer in this conversation:\n" + prior_answer + "\n\nFollow-up question: " + question;
}

std::uint64_t resume_point(const std::optional<std::string>& last_event_seq, const std::optional<std::string>& last_event_id,
                           const std::optional<std::string>& query_param) {
    for (const auto* v : {&last_event_seq, &last_event_id, &query_param}) {
        if (!*v) continue;
        auto text = trim(**v);
        std::uint64_t seq = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seq);
        if (ec != std::errc{} || ptr != text.data() + text.size())
            throw ServiceError(400, "resume position must be a non-negative integer, got '" + text + "'");
        return seq;
    }
    return 0;
}

Service::Service(EngineConfig config, Backends backends, std::shared_ptr<const TemplateSet> templates)
    : config_(std::move(config)), backends_(std::move(backends)), templates_(std::move(templates)),
      server_(std::make_unique<httplib::Server>()) {
    routes();
}

Service::~Service() {
    stop();
    for (auto& w : workers_)
        if (w.joinable()) w.join();
}

std::string Service::ask(const std::string& question, const std::optional<std::string>& follow_up_of) {
    if (trim(question).empty()) throw ServiceError(400, "question must not be empty");
    std::string text = question;
    if (follow_up_of) {
        auto prior = find(*follow_up_of);
        if (!prior) throw ServiceError(404, "unknown session " + *follow_up_of);
        if (prior->purged) throw ServiceError(409, "session " + *follow_up_of + " was purged");
        if (prior->planner->status_now() != SessionStatus::Done)
            throw ServiceError(409, "session " + *follow_up_of + " has no final answer yet");
        text = follow_up_question(prior->planner->final_answer()->answer_text, question);
    }

    auto s = std::make_shared<Session>();
    s->question = question;
    s->follow_up_of = follow_up_of;
    {
        std::lock_guard lock(mutex_);
        char id[32];
        std::snprintf(id, sizeof id, "s%06llu", static_cast<unsigned long long>(next_id_++));
        s->id = id;
    }
    s->log = std::make_shared<EventLog>(s->id, config_.event_buffer_cap);
    auto log = s->log;
    auto planner = std::make_shared<Planner>(backends_, templates_, config_.planner, config_.searcher,
                                             [log](EventKind kind, json payload) { log->publish(kind, std::move(payload)); });
    s->planner = std::make_shared<PlannerSession>(planner->start(text));

    std::lock_guard lock(mutex_);
    sessions_[s->id] = s;
    order_.push_back(s->id);
    evict_locked();
    auto trace_dir = config_.trace_dir;
    workers_.emplace_back([s, planner, trace_dir] {
        planner->run(*s->planner);
        if (!trace_dir.empty()) {
            try {
                write_trace(trace_dir / s->id, *s->planner, s->log->events());
            } catch (const std::exception& e) {
                std::cerr << "warning: trace for " << s->id << " not written: " << e.what() << "\n";
            }
        }
        s->log->close();
    });
    return s->id;
}

void Service::evict_locked() {
    std::size_t live = 0;
    for (const auto& id : order_)
        if (!sessions_.at(id)->purged) ++live;
    for (auto it = order_.begin(); live > config_.max_sessions && it != order_.end(); ++it) {
        auto& s = sessions_.at(*it);
        if (s->purged || !s->log->closed()) continue;
        s->log->purge();
        s->planner.reset();
        s->purged = true;
        --live;
    }
}

void Service::purge(const std::string& id) {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(404, "unknown session " + id);
    auto& s = it->second;
    if (s->purged) return;
    if (!s->log->closed()) throw ServiceError(409, "session " + id + " is still running");
    s->log->purge();
    s->planner.reset();
    s->purged = true;
}

std::shared_ptr<Service::Session> Service::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::shared_ptr<EventLog> Service::events(const std::string& id) const {
    auto s = find(id);
    if (!s) throw ServiceError(404, "unknown session " + id);
    std::lock_guard lock(mutex_);
    if (s->purged) throw ServiceError(409, "session " + id + " was purged");
    return s->log;
}

json Service::trace(const std::string& id) const {
    auto s = find(id);
    if (!s) throw ServiceError(404, "unknown session " + id);
    std::shared_ptr<PlannerSession> planner;
    std::shared_ptr<EventLog> log;
    {
        std::lock_guard lock(mutex_);
        if (s->purged) throw ServiceError(409, "session " + id + " was purged");
        planner = s->planner;
        log = s->log;
    }
    auto j = planner->trace_json();
    j["session_id"] = s->id;
    j["asked"] = s->question;
    j["follow_up_of"] = s->follow_up_of ? json(*s->follow_up_of) : json(nullptr);
    j["finished"] = log->closed();
    return j;
}

bool Service::wait(const std::string& id, std::chrono::milliseconds timeout) const {
    auto log = events(id);
    auto until = std::chrono::steady_clock::now() + timeout;
    std::uint64_t after = 0;
    while (std::chrono::steady_clock::now() < until) {
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(until - std::chrono::steady_clock::now());
        auto batch = log->read_after(after, std::max(remaining, std::chrono::milliseconds(1)));
        if (!batch.events.empty()) after = batch.events.back().seq;
        if (batch.closed || batch.purged) return true;
    }
    return log->closed();
}

void Service::routes() {
    auto& srv = *server_;

    srv.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
        std::size_t count = 0;
        {
            std::lock_guard lock(mutex_);
            count = sessions_.size();
        }
        res.set_content(json{{"status", "ok"}, {"sessions", count}}.dump(), "application/json");
    });

    srv.Post("/v1/ask", [this](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::parse_error&) {
            return send_error(res, 400, "request body must be JSON");
        }
        if (!body.is_object() || !body.contains("question") || !body["question"].is_string())
            return send_error(res, 400, "field 'question' (string) is required");
        std::optional<std::string> follow_up;
        if (body.contains("follow_up_of") && !body["follow_up_of"].is_null()) {
            if (!body["follow_up_of"].is_string()) return send_error(res, 400, "field 'follow_up_of' must be a string");
            follow_up = body["follow_up_of"].get<std::string>();
        }
        try {
            auto id = ask(body["question"].get<std::string>(), follow_up);
            res.set_content(json{{"session_id", id}}.dump(), "application/json");
        } catch (const ServiceError& e) {
            send_error(res, e.status(), e.what());
        }
    });

    srv.Get(R"(/v1/sessions/([A-Za-z0-9_-]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
        std::shared_ptr<EventLog> log;
        std::uint64_t after = 0;
        try {
            log = events(req.matches[1]);
            std::optional<std::string> q;
            if (req.has_param("last_event_seq")) q = req.get_param_value("last_event_seq");
            after = resume_point(header(req, "Last-Event-Seq"), header(req, "Last-Event-ID"), q);
        } catch (const ServiceError& e) {
            return send_error(res, e.status(), e.what());
        }
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [log, after](std::size_t, httplib::DataSink& sink) mutable {
            auto batch = log->read_after(after, std::chrono::milliseconds(250));
            std::string out;
            for (const auto& e : batch.events) {
                out += e.to_sse();
                after = e.seq;
            }
            bool finished = false;
            if (batch.purged) {
                out += "event: error\ndata: " + json{{"error", "session purged"}}.dump() + "\n\n";
                finished = true;
            } else if (batch.overflowed) {
                out += "event: error\ndata: " + json{{"error", "event buffer overflow; the session continues"}}.dump() + "\n\n";
                finished = true;
            } else if (batch.closed) {
                finished = true;
            }
            if (!out.empty() && !sink.write(out.data(), out.size())) return false;
            if (finished) sink.done();
            return true;
        });
    });

    srv.Get(R"(/v1/sessions/([A-Za-z0-9_-]+)/trace)", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            res.set_content(trace(req.matches[1]).dump(2), "application/json");
        } catch (const ServiceError& e) {
            send_error(res, e.status(), e.what());
        }
    });

    srv.Delete(R"(/v1/sessions/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            purge(req.matches[1]);
            res.set_content(json{{"purged", std::string(req.matches[1])}}.dump(), "application/json");
        } catch (const ServiceError& e) {
            send_error(res, e.status(), e.what());
        }
    });
}

int Service::bind(const std::string& host, int port) {
    if (port == 0) return server_->bind_to_any_port(host);
    if (!server_->bind_to_port(host, port)) return -1;
    return port;
}

void Service::listen() { server_->listen_after_bind(); }

void Service::stop() {
    if (server_ && server_->is_running()) server_->stop();
}

void serve(const EngineConfig& config) {
    Service service(config, make_backends(config), load_templates(config));
    auto colon = config.bind.rfind(':');
    auto host = config.bind.substr(0, colon);
    int port = std::stoi(config.bind.substr(colon + 1));
    int bound = service.bind(host, port);
    if (bound < 0) throw std::runtime_error("cannot bind " + config.bind);
    std::cerr << "listening on " << host << ":" << bound << "\n";
    service.listen();
}

} // namespace deepsearch
