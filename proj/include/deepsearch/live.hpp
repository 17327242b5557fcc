#pragma once

#include "deepsearch/backends.hpp"

#include <atomic>
#include <chrono>
#include <string>
#include <string_view>

namespace deepsearch {

/// Chat-completion endpoint settings. `endpoint` is the full URL, e.g.
/// https://api.example.com/v1/chat/completions.
struct LiveLlmConfig {
    std::string endpoint;
    std::string api_key;
    std::string model = "gpt-4o";
    std::chrono::milliseconds timeout{60000};
    int max_retries = 2;
    std::chrono::milliseconds initial_backoff{500};
    bool stream = true;
};

struct LiveSearchConfig {
    std::string endpoint;  // Bing-compatible web search URL
    std::string api_key;
    std::string engine_id = "bing";
    std::chrono::milliseconds timeout{15000};
};

struct LiveFetcherConfig {
    std::chrono::milliseconds timeout{15000};
    std::size_t max_fetch_bytes = kDefaultMaxFetchBytes;
    std::string user_agent = "deepsearch/0.1";
};

/// Splits "scheme://host[:port]/path?query" into the origin and the rest.
struct UrlParts {
    std::string origin;
    std::string path;  // starts with '/', includes the query
};
UrlParts split_url(std::string_view url);

bool is_retryable_status(int status);

std::string chat_request_body(std::span<const ChatMessage> messages, const GenerationParams& params,
                              const std::string& model, bool stream);

/// Non-streamed chat-completion response body to a Completion. Throws
/// LlmBackendError on malformed JSON.
Completion parse_chat_response(std::string_view body);

/// Incremental decoder for a streamed chat completion (`data: {...}` lines
/// terminated by `data: [DONE]`).
class ChatStreamDecoder {
public:
    void feed(std::string_view bytes, const TokenSink& sink);
    bool saw_events() const { return saw_events_; }
    bool done() const { return done_; }
    const std::string& text() const { return text_; }
    const std::optional<int>& prompt_tokens() const { return prompt_tokens_; }
    const std::optional<int>& completion_tokens() const { return completion_tokens_; }

private:
    void line(std::string_view line, const TokenSink& sink);

    std::string buffer_;
    std::string text_;
    std::optional<int> prompt_tokens_;
    std::optional<int> completion_tokens_;
    bool saw_events_ = false;
    bool done_ = false;
};

class LiveChatLlm final : public LlmBackend {
public:
    explicit LiveChatLlm(LiveLlmConfig config);

    /// DS_LLM_ENDPOINT / DS_LLM_KEY; throws std::runtime_error if unset.
    static LiveLlmConfig config_from_env();

    Completion generate(std::span<const ChatMessage> messages, const GenerationParams& params,
                        const Deadline& deadline, const TokenSink& on_token = {}) override;

private:
    LiveLlmConfig config_;
    UrlParts url_;
};

/// Maps a Bing-shaped web search response (webPages.value[]) to hits.
/// Throws SearchBackendError on malformed JSON.
std::vector<SearchHit> parse_bing_response(std::string_view body, std::size_t k, const std::string& engine_id);

class LiveSearch final : public SearchBackend {
public:
    explicit LiveSearch(LiveSearchConfig config);

    /// DS_SEARCH_ENDPOINT / DS_SEARCH_KEY; throws std::runtime_error if unset.
    static LiveSearchConfig config_from_env();

    std::string id() const override { return config_.engine_id; }
    std::vector<SearchHit> search(std::string_view query, std::size_t k, const Deadline& deadline) override;

private:
    LiveSearchConfig config_;
    UrlParts url_;
};

class LiveFetcher final : public PageFetcher {
public:
    explicit LiveFetcher(LiveFetcherConfig config = {});
    FetchedPage fetch(std::string_view url, const Deadline& deadline) override;

private:
    LiveFetcherConfig config_;
};

} // namespace deepsearch
