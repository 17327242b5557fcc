#pragma once

#include "deepsearch/backends.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepsearch {

/// Malformed corpus or script file.
class FixtureError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CorpusDocument {
    std::string id;
    std::string url;  // normalized at load
    std::string title;
    std::string summary;
    std::string body;
};

/// Immutable set of documents backing the fixture search engine and fetcher.
class FixtureCorpus {
public:
    FixtureCorpus() = default;
    /// Validates uniqueness of ids and urls and non-empty fields (body may be empty).
    explicit FixtureCorpus(std::vector<CorpusDocument> docs);

    /// One JSON record per line with fields id, url, title, summary, body.
    static FixtureCorpus load(const std::filesystem::path& path);
    static FixtureCorpus parse(std::string_view jsonl);

    const std::vector<CorpusDocument>& documents() const { return docs_; }
    const CorpusDocument* find_by_url(std::string_view url) const;

private:
    std::vector<CorpusDocument> docs_;
    std::map<std::string, std::size_t, std::less<>> by_url_;
};

/// Token-overlap retrieval: score = |Q ∩ D| / |Q| over lowercased
/// alphanumeric token sets, where D covers title, summary and body. Zero
/// scores are dropped; ties break on document id.
std::vector<SearchHit> fixture_search(const FixtureCorpus& corpus, std::string_view query, std::size_t k,
                                      const std::string& engine_id = "fixture");

class FixtureSearch final : public SearchBackend {
public:
    FixtureSearch(std::shared_ptr<const FixtureCorpus> corpus, std::string id = "fixture",
                  std::chrono::milliseconds latency = {});

    std::string id() const override { return id_; }
    std::vector<SearchHit> search(std::string_view query, std::size_t k, const Deadline& deadline) override;

    std::size_t calls() const { return calls_.load(); }

private:
    std::shared_ptr<const FixtureCorpus> corpus_;
    std::string id_;
    std::chrono::milliseconds latency_;
    std::atomic<std::size_t> calls_{0};
};

/// Serves corpus bodies by URL.
class FixtureFetcher final : public PageFetcher {
public:
    explicit FixtureFetcher(std::shared_ptr<const FixtureCorpus> corpus, std::chrono::milliseconds latency = {},
                            std::size_t max_fetch_bytes = kDefaultMaxFetchBytes);

    FetchedPage fetch(std::string_view url, const Deadline& deadline) override;

    std::size_t calls() const { return calls_.load(); }

private:
    std::shared_ptr<const FixtureCorpus> corpus_;
    std::chrono::milliseconds latency_;
    std::size_t max_fetch_bytes_;
    std::atomic<std::size_t> calls_{0};
};

struct ScriptMatcher {
    enum class Kind { Turn, Contains, Role };
    Kind kind = Kind::Contains;
    std::string value;

    bool accepts(std::span<const ChatMessage> messages) const;
};

/// A rule fires when all of its matchers accept. `error` makes the rule
/// raise LlmBackendError instead of answering.
struct ScriptRule {
    std::vector<ScriptMatcher> matchers;
    std::string response;
    std::optional<std::string> error;
};

class ScriptExhausted : public LlmBackendError {
public:
    ScriptExhausted() : LlmBackendError(0, "ScriptExhausted: no rule matched and no default response") {}
};

/// Deterministic LLM stand-in resolving each call against ordered rules.
class ScriptedLlm final : public LlmBackend {
public:
    ScriptedLlm(std::vector<ScriptRule> rules, std::optional<std::string> default_response,
                std::chrono::milliseconds latency = {});
    ScriptedLlm(ScriptedLlm&& other) noexcept
        : rules_(std::move(other.rules_)), default_(std::move(other.default_)), latency_(other.latency_),
          calls_(other.calls_.load()) {}

    /// Line-delimited JSON records:
    ///   {"matcher_kind": "turn|contains|role", "matcher_value": "...", "response": "..."}
    ///   {"matcher_kind": "default", "response": "..."}
    /// A record may instead carry "match": [{"kind": ..., "value": ...}, ...]
    /// for a conjunction, and "error": "..." to inject a backend failure.
    static ScriptedLlm load(const std::filesystem::path& path, std::chrono::milliseconds latency = {});
    static ScriptedLlm parse(std::string_view jsonl, std::chrono::milliseconds latency = {});

    /// The rule outcome for these messages, without latency or streaming.
    std::string respond(std::span<const ChatMessage> messages) const;

    Completion generate(std::span<const ChatMessage> messages, const GenerationParams& params,
                        const Deadline& deadline, const TokenSink& on_token = {}) override;

    std::size_t calls() const { return calls_.load(); }
    void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

private:
    std::vector<ScriptRule> rules_;
    std::optional<std::string> default_;
    std::chrono::milliseconds latency_;
    std::atomic<std::size_t> calls_{0};
};

} // namespace deepsearch
