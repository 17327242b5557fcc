#include "deepsearch/live.hpp"

#include "deepsearch/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <thread>

namespace deepsearch {

using nlohmann::json;

UrlParts split_url(std::string_view url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) throw std::invalid_argument("not an absolute URL: " + std::string{url});
    auto path_start = url.find_first_of("/?", scheme_end + 3);
    if (path_start == std::string_view::npos) return {std::string{url}, "/"};
    std::string path{url.substr(path_start)};
    if (path[0] == '?') path.insert(path.begin(), '/');
    return {std::string{url.substr(0, path_start)}, path};
}

bool is_retryable_status(int status) {
    return status == 408 || status == 429 || status == 500 || status == 502 || status == 503 || status == 504;
}

std::string chat_request_body(std::span<const ChatMessage> messages, const GenerationParams& params,
                              const std::string& model, bool stream) {
    json body;
    body["model"] = model;
    body["messages"] = json::array();
    for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_tokens;
    if (!params.stop.empty()) body["stop"] = params.stop;
    body["stream"] = stream;
    return body.dump();
}

namespace {

void read_usage(const json& j, std::optional<int>& prompt, std::optional<int>& completion) {
    auto usage = j.find("usage");
    if (usage == j.end() || !usage->is_object()) return;
    if (auto p = usage->find("prompt_tokens"); p != usage->end() && p->is_number_integer()) prompt = p->get<int>();
    if (auto c = usage->find("completion_tokens"); c != usage->end() && c->is_number_integer()) completion = c->get<int>();
}

} // namespace

Completion parse_chat_response(std::string_view body) {
    try {
        auto j = json::parse(body);
        Completion c;
        const auto& content = j.at("choices").at(0).at("message").at("content");
        c.text = content.is_string() ? content.get<std::string>() : std::string{};
        read_usage(j, c.prompt_tokens, c.completion_tokens);
        return c;
    } catch (const json::exception& e) {
        throw LlmBackendError(0, std::string{"malformed chat completion: "} + e.what());
    }
}

void ChatStreamDecoder::feed(std::string_view bytes, const TokenSink& sink) {
    buffer_.append(bytes);
    std::size_t start = 0;
    while (true) {
        auto nl = buffer_.find('\n', start);
        if (nl == std::string::npos) break;
        std::string_view l{buffer_.data() + start, nl - start};
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
        line(l, sink);
        start = nl + 1;
    }
    buffer_.erase(0, start);
}

void ChatStreamDecoder::line(std::string_view l, const TokenSink& sink) {
    if (l.substr(0, 5) != "data:") return;
    saw_events_ = true;
    auto payload = trim(l.substr(5));
    if (payload == "[DONE]") {
        done_ = true;
        return;
    }
    json j;
    try {
        j = json::parse(payload);
    } catch (const json::exception& e) {
        throw LlmBackendError(0, std::string{"malformed stream chunk: "} + e.what());
    }
    read_usage(j, prompt_tokens_, completion_tokens_);
    auto choices = j.find("choices");
    if (choices == j.end() || !choices->is_array() || choices->empty()) return;
    const auto& choice = (*choices)[0];
    auto delta = choice.find("delta");
    if (delta == choice.end() || !delta->is_object()) return;
    auto content = delta->find("content");
    if (content == delta->end() || !content->is_string()) return;
    auto piece = content->get<std::string>();
    if (piece.empty()) return;
    text_ += piece;
    if (sink) sink(piece);
}

LiveChatLlm::LiveChatLlm(LiveLlmConfig config) : config_(std::move(config)), url_(split_url(config_.endpoint)) {}

LiveLlmConfig LiveChatLlm::config_from_env() {
    LiveLlmConfig c;
    const char* endpoint = std::getenv("DS_LLM_ENDPOINT");
    const char* key = std::getenv("DS_LLM_KEY");
    if (!endpoint || !*endpoint) throw std::runtime_error("DS_LLM_ENDPOINT is not set");
    if (!key || !*key) throw std::runtime_error("DS_LLM_KEY is not set");
    c.endpoint = endpoint;
    c.api_key = key;
    return c;
}

namespace {

void apply_timeouts(httplib::Client& cli, std::chrono::milliseconds budget) {
    auto ms = std::max<long long>(budget.count(), 1);
    cli.set_connection_timeout(ms / 1000, (ms % 1000) * 1000);
    cli.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
    cli.set_write_timeout(ms / 1000, (ms % 1000) * 1000);
}

std::chrono::milliseconds call_budget(std::chrono::milliseconds configured, const Deadline& deadline) {
    return std::min(configured, deadline.remaining());
}

} // namespace

Completion LiveChatLlm::generate(std::span<const ChatMessage> messages, const GenerationParams& params,
                                 const Deadline& outer, const TokenSink& on_token) {
    const bool stream = config_.stream && static_cast<bool>(on_token);
    const std::string body = chat_request_body(messages, params, config_.model, stream);
    auto backoff = config_.initial_backoff;

    for (int attempt = 0;; ++attempt) {
        if (outer.expired()) throw TimeoutError("chat completion deadline exceeded");
        httplib::Client cli(url_.origin);
        apply_timeouts(cli, call_budget(config_.timeout, outer));

        httplib::Request req;
        req.method = "POST";
        req.path = url_.path;
        req.headers = {{"Authorization", "Bearer " + config_.api_key}, {"Accept", stream ? "text/event-stream" : "application/json"}};
        req.body = body;
        req.set_header("Content-Type", "application/json");

        int status = 0;
        std::string raw;
        ChatStreamDecoder decoder;
        req.response_handler = [&](const httplib::Response& r) {
            status = r.status;
            return true;
        };
        req.content_receiver = [&](const char* data, std::size_t len, std::uint64_t, std::uint64_t) {
            raw.append(data, len);
            if (status == 200 && stream) decoder.feed({data, len}, on_token);
            return true;
        };

        httplib::Response res;
        httplib::Error err = httplib::Error::Success;
        bool ok = cli.send(req, res, err);

        bool retryable = !ok || is_retryable_status(status);
        if (ok && status == 200) {
            Completion c;
            if (stream && decoder.saw_events()) {
                decoder.feed("\n", on_token);
                c.text = decoder.text();
                c.prompt_tokens = decoder.prompt_tokens();
                c.completion_tokens = decoder.completion_tokens();
            } else {
                c = parse_chat_response(raw);
                if (on_token && !c.text.empty()) on_token(c.text);
            }
            c.retries = attempt;
            return c;
        }
        std::string message = ok ? "HTTP " + std::to_string(status) + ": " + raw.substr(0, 512)
                                 : "transport error: " + httplib::to_string(err);
        if (!retryable || attempt >= config_.max_retries) {
            if (!ok && outer.expired()) throw TimeoutError("chat completion timed out: " + message);
            throw LlmBackendError(status, message);
        }
        if (!sleep_within(backoff, outer)) throw TimeoutError("chat completion deadline exceeded during backoff");
        backoff *= 2;
    }
}

std::vector<SearchHit> parse_bing_response(std::string_view body, std::size_t k, const std::string& engine_id) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw SearchBackendError(0, std::string{"malformed search response: "} + e.what());
    }
    if (!j.is_object()) throw SearchBackendError(0, "malformed search response: not an object");
    std::vector<SearchHit> hits;
    auto pages = j.find("webPages");
    if (pages == j.end() || !pages->is_object()) return hits;
    auto values = pages->find("value");
    if (values == pages->end() || !values->is_array()) return hits;
    int index = 0;
    for (const auto& item : *values) {
        ++index;
        if (hits.size() >= k) break;
        if (!item.is_object()) continue;
        auto url = item.find("url");
        if (url == item.end() || !url->is_string()) continue;
        SearchHit hit;
        hit.url = normalize_url(url->get<std::string>());
        hit.title = item.value("name", std::string{});
        hit.summary = item.value("snippet", std::string{});
        hit.source_engine = engine_id;
        hit.rank = index;
        if (auto pos = item.find("position"); pos != item.end() && pos->is_number_integer() && pos->get<int>() >= 1)
            hit.rank = pos->get<int>();
        hits.push_back(std::move(hit));
    }
    return hits;
}

LiveSearch::LiveSearch(LiveSearchConfig config) : config_(std::move(config)), url_(split_url(config_.endpoint)) {}

LiveSearchConfig LiveSearch::config_from_env() {
    LiveSearchConfig c;
    const char* endpoint = std::getenv("DS_SEARCH_ENDPOINT");
    const char* key = std::getenv("DS_SEARCH_KEY");
    if (!endpoint || !*endpoint) throw std::runtime_error("DS_SEARCH_ENDPOINT is not set");
    if (!key || !*key) throw std::runtime_error("DS_SEARCH_KEY is not set");
    c.endpoint = endpoint;
    c.api_key = key;
    return c;
}

std::vector<SearchHit> LiveSearch::search(std::string_view query, std::size_t k, const Deadline& deadline) {
    if (deadline.expired()) throw TimeoutError("search deadline exceeded");
    httplib::Client cli(url_.origin);
    apply_timeouts(cli, call_budget(config_.timeout, deadline));
    httplib::Params params{{"q", std::string{query}}, {"count", std::to_string(k)}};
    httplib::Headers headers{{"Ocp-Apim-Subscription-Key", config_.api_key}};
    auto res = cli.Get(url_.path, params, headers);
    if (!res) {
        if (deadline.expired()) throw TimeoutError("search timed out");
        throw SearchBackendError(0, "transport error: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) throw SearchBackendError(res->status, "search HTTP " + std::to_string(res->status));
    return parse_bing_response(res->body, k, config_.engine_id);
}

LiveFetcher::LiveFetcher(LiveFetcherConfig config) : config_(std::move(config)) {}

FetchedPage LiveFetcher::fetch(std::string_view url, const Deadline& deadline) {
    if (deadline.expired()) throw TimeoutError("fetch deadline exceeded");
    UrlParts parts;
    try {
        parts = split_url(url);
    } catch (const std::invalid_argument& e) {
        throw FetchError(0, e.what());
    }
    httplib::Client cli(parts.origin);
    apply_timeouts(cli, call_budget(config_.timeout, deadline));
    cli.set_follow_location(true);

    FetchedPage page;
    int status = 0;
    bool truncated = false;
    httplib::Headers headers{{"User-Agent", config_.user_agent}};
    auto res = cli.Get(
        parts.path, headers,
        [&](const httplib::Response& r) {
            status = r.status;
            page.content_type = r.get_header_value("Content-Type");
            return true;
        },
        [&](const char* data, std::size_t len) {
            std::size_t room = config_.max_fetch_bytes - page.content.size();
            page.content.append(data, std::min(room, len));
            if (len >= room) {
                truncated = true;
                return false;
            }
            return true;
        });
    if (!res && !(truncated && res.error() == httplib::Error::Canceled)) {
        if (deadline.expired()) throw TimeoutError("fetch timed out: " + std::string{url});
        throw FetchError(0, "transport error: " + httplib::to_string(res.error()));
    }
    if (status < 200 || status >= 300) throw FetchError(status, "fetch HTTP " + std::to_string(status));
    return page;
}

} // namespace deepsearch
