#include "deepsearch/service.hpp"

#include "scenarios.hpp"
#include "support.hpp"

#include <doctest.h>
#include <httplib.h>

#include <thread>

using namespace deepsearch;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

struct Frame {
    std::optional<std::uint64_t> id;
    std::string event;
    json data;
};

std::vector<Frame> parse_sse(const std::string& body) {
    std::vector<Frame> frames;
    std::size_t pos = 0;
    while (pos < body.size()) {
        auto end = body.find("\n\n", pos);
        if (end == std::string::npos) break;
        Frame f;
        for (const auto& line : split_lines(body.substr(pos, end - pos))) {
            if (line.rfind("id: ", 0) == 0) f.id = std::stoull(line.substr(4));
            if (line.rfind("event: ", 0) == 0) f.event = line.substr(7);
            if (line.rfind("data: ", 0) == 0) f.data = json::parse(line.substr(6));
        }
        frames.push_back(std::move(f));
        pos = end + 2;
    }
    return frames;
}

struct Harness {
    std::unique_ptr<Service> service;
    std::jthread thread;
    int port = 0;

    explicit Harness(std::string script = testsupport::read_file(testsupport::fixture_dir() / "three_turn/script.jsonl"),
                     std::size_t cap = kDefaultEventBufferCap, std::chrono::milliseconds llm_latency = 0ms) {
        EngineConfig config;
        config.event_buffer_cap = cap;
        auto llm = std::make_shared<ScriptedLlm>(ScriptedLlm::parse(script, llm_latency));
        service = std::make_unique<Service>(config, testsupport::fixture_backends(testsupport::corpus("three_turn/corpus.jsonl"), llm),
                                            testsupport::templates());
        port = service->bind("127.0.0.1", 0);
        REQUIRE(port > 0);
        thread = std::jthread([this] { service->listen(); });
        service->http().wait_until_ready();
    }
    ~Harness() {
        service->stop();
        thread.join();
    }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(30, 0);
        return c;
    }

    std::string ask(const json& body) {
        auto res = client().Post("/v1/ask", body.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        return json::parse(res->body)["session_id"].get<std::string>();
    }

    std::vector<Frame> stream(const std::string& id, const httplib::Headers& headers = {}, const std::string& query = "") {
        auto res = client().Get("/v1/sessions/" + id + "/events" + query, headers);
        REQUIRE(res);
        REQUIRE(res->status == 200);
        CHECK(res->get_header_value("Content-Type") == "text/event-stream");
        return parse_sse(res->body);
    }
};

std::string example_question() { return trim(testsupport::read_file(testsupport::fixture_dir() / "three_turn/question.txt")); }

} // namespace

TEST_CASE("resume point precedence") {
    CHECK(resume_point(std::nullopt, std::nullopt, std::nullopt) == 0);
    CHECK(resume_point("5", "7", "9") == 5);
    CHECK(resume_point(std::nullopt, "7", "9") == 7);
    CHECK(resume_point(std::nullopt, std::nullopt, "9") == 9);
    CHECK_THROWS_AS(resume_point("x", std::nullopt, std::nullopt), ServiceError);
    CHECK(follow_up_question("A.", "Q?") == "Earlier answer in this conversation:\nA.\n\nFollow-up question: Q?");
}

TEST_CASE("ask, stream and resume over HTTP") {
    Harness h;
    auto health = h.client().Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body)["status"] == "ok");

    auto id = h.ask({{"question", example_question()}});
    CHECK(id == "s000001");
    auto frames = h.stream(id);
    REQUIRE(frames.size() > 10);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        CHECK(frames[i].id == i + 1);
        CHECK(frames[i].event == frames[i].data["kind"]);
        CHECK(frames[i].data["session_id"] == id);
    }
    CHECK(frames.front().event == "session_started");
    CHECK(frames.back().event == "session_done");
    CHECK(frames.back().data["payload"]["status"] == "Done");

    std::vector<AgentEvent> events;
    for (const auto& f : frames) events.push_back(AgentEvent::from_json(f.data));
    CHECK(reconstruct_skeleton(events).render() ==
          testsupport::read_file(testsupport::fixture_dir() / "three_turn/golden_snapshot.txt"));

    auto resumed = h.stream(id, {{"Last-Event-Seq", "5"}});
    REQUIRE_FALSE(resumed.empty());
    CHECK(resumed.front().id == 6u);
    CHECK(resumed.size() == frames.size() - 5);
    CHECK(h.stream(id, {{"Last-Event-ID", "7"}}).front().id == 8u);
    CHECK(h.stream(id, {}, "?last_event_seq=9").front().id == 10u);

    auto trace = h.client().Get("/v1/sessions/" + id + "/trace");
    REQUIRE(trace);
    CHECK(trace->status == 200);
    auto tj = json::parse(trace->body);
    CHECK(tj["status"] == "Done");
    CHECK(tj["session_id"] == id);
    CHECK(tj["finished"] == true);
    CHECK(tj["graph"]["snapshot"] == testsupport::read_file(testsupport::fixture_dir() / "three_turn/golden_snapshot.txt"));
}

TEST_CASE("a live stream delivers events as they happen") {
    Harness h(testsupport::read_file(testsupport::fixture_dir() / "three_turn/script.jsonl"), kDefaultEventBufferCap, 100ms);
    auto id = h.ask({{"question", example_question()}});
    std::vector<std::pair<Clock::time_point, std::string>> chunks;
    auto res = h.client().Get("/v1/sessions/" + id + "/events", [&](const char* data, std::size_t len) {
        chunks.emplace_back(Clock::now(), std::string(data, len));
        return true;
    });
    REQUIRE(res);
    CHECK(chunks.size() > 2);
    CHECK(chunks.back().first - chunks.front().first > 300ms);
    std::string all;
    for (const auto& [t, c] : chunks) all += c;
    CHECK(parse_sse(all).back().event == "session_done");
}

TEST_CASE("request errors") {
    Harness h;
    auto c = h.client();
    auto bad_json = c.Post("/v1/ask", "{nope", "application/json");
    REQUIRE(bad_json);
    CHECK(bad_json->status == 400);
    CHECK(c.Post("/v1/ask", json{{"question", "   "}}.dump(), "application/json")->status == 400);
    CHECK(c.Post("/v1/ask", json{{"q", "x"}}.dump(), "application/json")->status == 400);
    CHECK(c.Post("/v1/ask", json{{"question", "x"}, {"follow_up_of", "s999999"}}.dump(), "application/json")->status == 404);
    CHECK(c.Get("/v1/sessions/s999999/events")->status == 404);
    CHECK(c.Get("/v1/sessions/s999999/trace")->status == 404);
    CHECK(c.Delete("/v1/sessions/s999999")->status == 404);

    auto id = h.ask({{"question", example_question()}});
    CHECK(c.Get("/v1/sessions/" + id + "/events", {{"Last-Event-Seq", "abc"}})->status == 400);
    REQUIRE(h.service->wait(id, 30s));
    auto del = c.Delete("/v1/sessions/" + id);
    REQUIRE(del);
    CHECK(del->status == 200);
    CHECK(c.Get("/v1/sessions/" + id + "/events")->status == 409);
    CHECK(c.Get("/v1/sessions/" + id + "/trace")->status == 409);
    CHECK(c.Post("/v1/ask", json{{"question", "x"}, {"follow_up_of", id}}.dump(), "application/json")->status == 409);
}

TEST_CASE("follow-up questions carry the earlier answer") {
    auto spec = scenario::chain();
    Harness h(testsupport::read_file(testsupport::fixture_dir() / "three_turn/script.jsonl"));
    auto first = h.ask({{"question", example_question()}});
    REQUIRE(h.service->wait(first, 30s));
    auto second = h.ask({{"question", "And when was it founded?"}, {"follow_up_of", first}});
    CHECK(second == "s000002");
    REQUIRE(h.service->wait(second, 30s));
    auto trace = h.service->trace(second);
    CHECK(trace["follow_up_of"] == first);
    CHECK(trace["asked"] == "And when was it founded?");
    auto prior = h.service->trace(first)["final_answer"]["answer"].get<std::string>();
    CHECK(trace["question"] == follow_up_question(prior, "And when was it founded?"));
}

TEST_CASE("follow-up of an unfinished session is refused") {
    Harness h(testsupport::read_file(testsupport::fixture_dir() / "three_turn/script.jsonl"), kDefaultEventBufferCap, 300ms);
    auto id = h.ask({{"question", example_question()}});
    auto res = h.client().Post("/v1/ask", json{{"question", "x"}, {"follow_up_of", id}}.dump(), "application/json");
    CHECK(res->status == 409);
    CHECK(h.client().Delete("/v1/sessions/" + id)->status == 409);
    REQUIRE(h.service->wait(id, 30s));
}

TEST_CASE("overflowed streams end with an error frame") {
    Harness h(testsupport::read_file(testsupport::fixture_dir() / "three_turn/script.jsonl"), 5);
    auto id = h.ask({{"question", example_question()}});
    REQUIRE(h.service->wait(id, 30s));
    auto frames = h.stream(id);
    REQUIRE(frames.size() == 6);
    CHECK(frames[4].id == 5u);
    CHECK(frames[5].event == "error");
    CHECK_FALSE(frames[5].id);
    CHECK(frames[5].data["error"].get<std::string>().find("overflow") != std::string::npos);
}

TEST_CASE("old finished sessions are evicted") {
    EngineConfig config;
    config.max_sessions = 2;
    Service service(config,
                    testsupport::fixture_backends(testsupport::corpus("three_turn/corpus.jsonl"),
                                                  testsupport::script("three_turn/script.jsonl")),
                    testsupport::templates());
    std::vector<std::string> ids;
    for (int i = 0; i < 4; ++i) {
        ids.push_back(service.ask(example_question()));
        REQUIRE(service.wait(ids.back(), 30s));
    }
    try {
        service.events(ids[0]);
        FAIL("expected eviction");
    } catch (const ServiceError& e) {
        CHECK(e.status() == 409);
    }
    CHECK(service.events(ids[3])->closed());
}
