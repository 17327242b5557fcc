#include "deepsearch/events.hpp"
#include "deepsearch/planner.hpp"

#include "scenarios.hpp"
#include "support.hpp"

#include <doctest.h>

#include <thread>

using namespace deepsearch;
using nlohmann::json;
using namespace std::chrono_literals;

TEST_CASE("sequence numbers and record format") {
    EventLog log("s000001");
    CHECK(log.publish(EventKind::session_started, {{"question", "Q"}}) == 1);
    CHECK(log.publish(EventKind::warning, {{"message", "m"}}) == 2);
    auto events = log.events();
    REQUIRE(events.size() == 2);
    auto j = events[1].to_json();
    CHECK(j["seq"] == 2);
    CHECK(j["session_id"] == "s000001");
    CHECK(j["kind"] == "warning");
    CHECK(j["payload"]["message"] == "m");
    CHECK(j["timestamp"].get<std::string>().size() == 24);
    CHECK(AgentEvent::from_json(j).to_json() == j);
    CHECK_THROWS_AS(AgentEvent::from_json(json{{"seq", 1}, {"kind", "nope"}}), std::invalid_argument);
    CHECK(events[0].to_sse() == "id: 1\nevent: session_started\ndata: " + events[0].to_line() + "\n\n");
    CHECK(events[0].to_line().find('\n') == std::string::npos);

    for (int k = 0; k <= static_cast<int>(EventKind::session_done); ++k) {
        auto kind = static_cast<EventKind>(k);
        CHECK(parse_event_kind(to_string(kind)) == kind);
    }
}

TEST_CASE("buffer cap drops later events") {
    EventLog log("s", 3);
    for (int i = 0; i < 3; ++i) CHECK(log.publish(EventKind::warning, {{"message", std::to_string(i)}}) == static_cast<std::uint64_t>(i + 1));
    CHECK(log.publish(EventKind::warning, {{"message", "dropped"}}) == 0);
    CHECK(log.overflowed());
    auto batch = log.read_after(1, 0ms);
    CHECK(batch.events.size() == 2);
    CHECK(batch.overflowed);
    CHECK_FALSE(batch.closed);
}

TEST_CASE("read_after waits for new events and reports close") {
    EventLog log("s");
    log.publish(EventKind::warning, {{"message", "a"}});
    auto start = Clock::now();
    auto empty = log.read_after(1, 50ms);
    CHECK(empty.events.empty());
    CHECK(Clock::now() - start >= 40ms);

    std::jthread producer([&] {
        std::this_thread::sleep_for(30ms);
        log.publish(EventKind::warning, {{"message", "b"}});
        log.close();
    });
    auto batch = log.read_after(1, 5000ms);
    REQUIRE(batch.events.size() == 1);
    CHECK(batch.events[0].seq == 2);
    producer.join();
    auto last = log.read_after(2, 5000ms);
    CHECK(last.closed);
    CHECK(last.events.empty());
    CHECK(log.publish(EventKind::warning, {}) == 0);
}

TEST_CASE("purge clears events") {
    EventLog log("s");
    log.publish(EventKind::warning, {{"message", "a"}});
    log.purge();
    auto batch = log.read_after(0, 1000ms);
    CHECK(batch.purged);
    CHECK(batch.closed);
    CHECK(batch.events.empty());
    CHECK(log.events().empty());
}

TEST_CASE("line files round trip and describe") {
    EventLog log("s");
    log.publish(EventKind::node_added, {{"name", "a"}, {"kind", "Search"}, {"state", "Pending"}, {"seq", 1}, {"content_digest", sha256_hex("x")}});
    log.publish(EventKind::edge_added, {{"from", "root"}, {"to", "a"}});
    log.publish(EventKind::node_state_changed, {{"name", "a"}, {"from", "Pending"}, {"to", "Running"}});
    std::string text;
    for (const auto& e : log.events()) text += e.to_line() + "\n";
    auto parsed = parse_event_lines(text);
    REQUIRE(parsed.size() == 3);
    CHECK(describe_event(parsed[1]) == "#2 edge_added root -> a");
    CHECK(describe_event(parsed[2]) == "#3 node_state_changed a Pending -> Running");
    CHECK_THROWS_AS(parse_event_lines("{\"seq\":1}\nnot json"), std::invalid_argument);
    auto sk = reconstruct_skeleton(parsed);
    REQUIRE(sk.nodes.size() == 1);
    CHECK(sk.nodes[0].state == NodeState::Running);
    CHECK(sk.nodes[0].digest8 == content_digest8("x"));
}

TEST_CASE("event log alone reconstructs the final graph") {
    for (auto spec : {scenario::six_node(), scenario::chain()}) {
        EventLog log("s");
        Planner planner(testsupport::fixture_backends(testsupport::corpus("three_turn/corpus.jsonl"),
                                                      testsupport::script_text(scenario::three_turn_script(spec))),
                        testsupport::templates(), {}, {}, log.sink());
        auto session = planner.run_session(spec.question);
        CHECK(reconstruct_skeleton(log.events()).render() == session.snapshot());
        std::uint64_t expect = 1;
        for (const auto& e : log.events()) CHECK(e.seq == expect++);
    }
}
