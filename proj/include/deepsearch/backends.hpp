#pragma once

#include "deepsearch/util.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deepsearch {

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

struct GenerationParams {
    double temperature = 0.0;
    int max_tokens = 2048;
    std::vector<std::string> stop;
};

struct Completion {
    std::string text;
    std::optional<int> prompt_tokens;
    std::optional<int> completion_tokens;
    int retries = 0;
};

/// Receives incremental text; the concatenation of all deltas equals the
/// final Completion::text.
using TokenSink = std::function<void(std::string_view)>;

class BackendError : public std::runtime_error {
public:
    BackendError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
    /// HTTP status when one was received, 0 otherwise.
    int status() const noexcept { return status_; }

private:
    int status_;
};

class LlmBackendError : public BackendError {
    using BackendError::BackendError;
};

class SearchBackendError : public BackendError {
    using BackendError::BackendError;
};

class FetchError : public BackendError {
    using BackendError::BackendError;
};

/// A call ran past its deadline.
class TimeoutError : public BackendError {
public:
    explicit TimeoutError(const std::string& what) : BackendError(0, what) {}
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual Completion generate(std::span<const ChatMessage> messages, const GenerationParams& params,
                                const Deadline& deadline, const TokenSink& on_token = {}) = 0;
};

struct SearchHit {
    std::string url;  // normalized
    std::string title;
    std::string summary;
    std::string source_engine;
    int rank = 1;  // 1-based, per engine
    bool operator==(const SearchHit&) const = default;
};

class SearchBackend {
public:
    virtual ~SearchBackend() = default;
    virtual std::string id() const = 0;
    /// At most k hits, best first.
    virtual std::vector<SearchHit> search(std::string_view query, std::size_t k, const Deadline& deadline) = 0;
};

struct FetchedPage {
    std::string content;
    std::string content_type;
};

inline constexpr std::size_t kDefaultMaxFetchBytes = 2 * 1024 * 1024;

class PageFetcher {
public:
    virtual ~PageFetcher() = default;
    /// Never returns more than the fetcher's byte limit; throws FetchError or
    /// TimeoutError on failure.
    virtual FetchedPage fetch(std::string_view url, const Deadline& deadline) = 0;
};

/// The three seams every agent talks through. All implementations must be
/// safe to call from many threads at once.
struct Backends {
    std::shared_ptr<LlmBackend> llm;
    std::vector<std::shared_ptr<SearchBackend>> engines;
    std::shared_ptr<PageFetcher> fetcher;
};

/// Index of the assistant turn a conversation is at: the number of assistant
/// messages it already holds.
std::size_t turn_index(std::span<const ChatMessage> messages);

} // namespace deepsearch
