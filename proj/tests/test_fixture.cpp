#include "deepsearch/fixture.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <random>
#include <set>

using namespace deepsearch;

namespace {

std::set<std::string> words(const std::string& s) {
    std::set<std::string> out;
    std::string cur;
    for (char c : s + " ") {
        unsigned char u = static_cast<unsigned char>(c);
        if (u < 0x80 && std::isalnum(u)) {
            cur += static_cast<char>(std::tolower(u));
        } else if (!cur.empty()) {
            out.insert(cur);
            cur.clear();
        }
    }
    return out;
}

/// Scores every document with the overlap ratio and sorts by (score desc, id).
std::vector<std::string> exhaustive_search(const FixtureCorpus& corpus, const std::string& query, std::size_t k) {
    auto q = words(query);
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& d : corpus.documents()) {
        auto dw = words(d.title + " " + d.summary + " " + d.body);
        double hit = 0;
        for (const auto& w : q) hit += dw.count(w);
        if (!q.empty() && hit > 0) scored.emplace_back(hit / static_cast<double>(q.size()), d.url);
    }
    std::vector<std::pair<double, std::string>> ids;
    for (auto& [score, url] : scored) {
        const auto* doc = corpus.find_by_url(url);
        ids.emplace_back(score, doc->id);
    }
    std::sort(ids.begin(), ids.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::string> out;
    for (const auto& [score, id] : ids)
        if (out.size() < k) out.push_back(id);
    return out;
}

const std::string kSmallCorpus = R"({"id":"d1","url":"https://Example.com/one/","title":"Alpha","summary":"first doc","body":"alpha beta gamma"}
{"id":"d2","url":"https://example.com/two","title":"Beta","summary":"second doc","body":"beta delta"}
{"id":"d3","url":"https://example.com/three","title":"Gamma","summary":"third","body":""}
)";

} // namespace

TEST_CASE("corpus loading and validation") {
    auto c = FixtureCorpus::parse(kSmallCorpus);
    CHECK(c.documents().size() == 3);
    CHECK(c.documents()[0].url == "https://example.com/one");
    CHECK(c.find_by_url("https://EXAMPLE.com/one#x") == &c.documents()[0]);
    CHECK(c.find_by_url("https://example.com/four") == nullptr);
    CHECK_THROWS_AS(FixtureCorpus::parse(R"({"id":"d1","url":"u","title":"t","summary":""})"), FixtureError);
    CHECK_THROWS_AS(FixtureCorpus::parse(kSmallCorpus + R"({"id":"d1","url":"https://x.org","title":"t","summary":"s","body":""})"),
                    FixtureError);
    CHECK_THROWS_AS(FixtureCorpus::parse(kSmallCorpus + R"({"id":"d9","url":"https://example.com/one","title":"t","summary":"s","body":""})"),
                    FixtureError);
    CHECK_THROWS_AS(FixtureCorpus::parse("not json"), FixtureError);
}

TEST_CASE("fixture search ranking") {
    auto c = FixtureCorpus::parse(kSmallCorpus);
    auto hits = fixture_search(c, "beta gamma", 10);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].url == "https://example.com/one");
    CHECK(hits[0].rank == 1);
    CHECK(hits[1].title == "Beta");
    CHECK(hits[2].title == "Gamma");
    CHECK(hits[2].rank == 3);
    CHECK(hits[0].source_engine == "fixture");
    CHECK(fixture_search(c, "zzz", 10).empty());
    CHECK(fixture_search(c, "", 10).empty());
    CHECK(fixture_search(c, "beta", 1).size() == 1);
}

TEST_CASE("fixture search matches the exhaustive oracle") {
    auto c = testsupport::corpus("three_turn/corpus.jsonl");
    std::set<std::string> vocab;
    for (const auto& d : c->documents())
        for (const auto& w : words(d.title + " " + d.summary + " " + d.body)) vocab.insert(w);
    vocab.insert("nonexistentword");
    std::vector<std::string> v(vocab.begin(), vocab.end());
    std::mt19937 rng(3);
    for (int i = 0; i < 300; ++i) {
        std::string q;
        for (int n = std::uniform_int_distribution<int>(1, 6)(rng); n > 0; --n)
            q += v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)] + (n % 2 ? " " : ", ");
        std::size_t k = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
        auto hits = fixture_search(*c, q, k);
        std::vector<std::string> ids;
        for (const auto& h : hits) ids.push_back(c->find_by_url(h.url)->id);
        CAPTURE(q);
        CHECK(ids == exhaustive_search(*c, q, k));
    }
}

TEST_CASE("fetcher") {
    auto c = std::make_shared<const FixtureCorpus>(FixtureCorpus::parse(kSmallCorpus));
    FixtureFetcher f(c);
    CHECK(f.fetch("https://example.com/two/", Deadline::never()).content == "beta delta");
    try {
        f.fetch("https://example.com/none", Deadline::never());
        FAIL("expected FetchError");
    } catch (const FetchError& e) {
        CHECK(e.status() == 404);
    }
    FixtureFetcher small(c, {}, 4);
    CHECK(small.fetch("https://example.com/one", Deadline::never()).content == "alph");
    FixtureFetcher slow(c, std::chrono::milliseconds(200));
    CHECK_THROWS_AS(slow.fetch("https://example.com/one", Deadline::after(std::chrono::milliseconds(20))), TimeoutError);
    FixtureSearch engine(c, "alt", std::chrono::milliseconds(200));
    CHECK_THROWS_AS(engine.search("beta", 3, Deadline::after(std::chrono::milliseconds(20))), TimeoutError);
    CHECK(engine.id() == "alt");
}

TEST_CASE("scripted LLM rules") {
    auto llm = testsupport::script_text(R"({"matcher_kind":"turn","matcher_value":"1","response":"second turn"}
{"matcher_kind":"contains","matcher_value":"weather","response":"sunny"}
{"match":[{"kind":"role","value":"system:planner"},{"kind":"turn","value":"0"}],"response":"planning"}
{"matcher_kind":"contains","matcher_value":"explode","error":"boom"}
{"matcher_kind":"default","response":"fallback"}
)");
    std::vector<ChatMessage> m{{"user", "what is the weather"}};
    CHECK(llm->respond(m) == "sunny");
    m = {{"system", "you are the planner"}, {"user", "hello"}};
    CHECK(llm->respond(m) == "planning");
    m.push_back({"assistant", "x"});
    m.push_back({"user", "more"});
    CHECK(llm->respond(m) == "second turn");
    m = {{"user", "explode now"}};
    CHECK_THROWS_AS(llm->respond(m), LlmBackendError);
    m = {{"user", "anything"}};
    CHECK(llm->respond(m) == "fallback");

    std::string streamed;
    m = {{"user", "weather please"}};
    auto c = llm->generate(m, {}, Deadline::never(), [&](std::string_view d) { streamed += d; });
    CHECK(c.text == "sunny");
    CHECK(streamed == "sunny");
    CHECK(llm->calls() == 1);

    auto strict = testsupport::script_text(R"({"matcher_kind":"substring","matcher_value":"x","response":"a b  c"})");
    m = {{"user", "y"}};
    CHECK_THROWS_AS(strict->respond(m), ScriptExhausted);
    m = {{"user", "x"}};
    std::vector<std::string> deltas;
    strict->generate(m, {}, Deadline::never(), [&](std::string_view d) { deltas.emplace_back(d); });
    CHECK(deltas == std::vector<std::string>{"a ", "b  ", "c"});

    CHECK_THROWS_AS(ScriptedLlm::parse(R"({"matcher_kind":"regex","matcher_value":"x","response":"r"})"), FixtureError);
    CHECK_THROWS_AS(ScriptedLlm::parse(""), FixtureError);
    CHECK_THROWS_AS(ScriptedLlm::parse("{\"matcher_kind\":\"default\",\"response\":\"a\"}\n{\"matcher_kind\":\"default\",\"response\":\"b\"}"),
                    FixtureError);
}
