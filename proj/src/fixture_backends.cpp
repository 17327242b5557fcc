#include "deepsearch/fixture.hpp"

#include "deepsearch/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace deepsearch {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FixtureError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string required_string(const json& record, const char* field, std::size_t line, bool allow_empty = false) {
    auto it = record.find(field);
    if (it == record.end() || !it->is_string())
        throw FixtureError("line " + std::to_string(line) + ": missing string field '" + field + "'");
    auto value = it->get<std::string>();
    if (value.empty() && !allow_empty)
        throw FixtureError("line " + std::to_string(line) + ": field '" + field + "' is empty");
    return value;
}

template <typename Fn>
void for_each_record(std::string_view jsonl, Fn&& fn) {
    std::size_t lineno = 0;
    for (const auto& raw : split_lines(jsonl)) {
        ++lineno;
        auto line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw FixtureError("line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!record.is_object()) throw FixtureError("line " + std::to_string(lineno) + ": record is not an object");
        fn(record, lineno);
    }
}

} // namespace

FixtureCorpus::FixtureCorpus(std::vector<CorpusDocument> docs) : docs_(std::move(docs)) {
    std::set<std::string, std::less<>> ids;
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        auto& d = docs_[i];
        if (d.id.empty() || d.url.empty() || d.title.empty() || d.summary.empty())
            throw FixtureError("document " + std::to_string(i) + " has an empty required field");
        d.url = normalize_url(d.url);
        if (!ids.insert(d.id).second) throw FixtureError("duplicate document id '" + d.id + "'");
        if (!by_url_.emplace(d.url, i).second) throw FixtureError("duplicate document url '" + d.url + "'");
    }
}

FixtureCorpus FixtureCorpus::parse(std::string_view jsonl) {
    std::vector<CorpusDocument> docs;
    for_each_record(jsonl, [&](const json& r, std::size_t line) {
        docs.push_back({required_string(r, "id", line), required_string(r, "url", line), required_string(r, "title", line),
                        required_string(r, "summary", line), required_string(r, "body", line, true)});
    });
    return FixtureCorpus{std::move(docs)};
}

FixtureCorpus FixtureCorpus::load(const std::filesystem::path& path) { return parse(read_file(path)); }

const CorpusDocument* FixtureCorpus::find_by_url(std::string_view url) const {
    auto it = by_url_.find(normalize_url(url));
    return it == by_url_.end() ? nullptr : &docs_[it->second];
}

std::vector<SearchHit> fixture_search(const FixtureCorpus& corpus, std::string_view query, std::size_t k,
                                      const std::string& engine_id) {
    auto qtokens = tokenize(query);
    std::set<std::string> qset(qtokens.begin(), qtokens.end());
    if (qset.empty() || k == 0) return {};

    struct Scored {
        std::size_t overlap;
        const CorpusDocument* doc;
    };
    std::vector<Scored> scored;
    for (const auto& doc : corpus.documents()) {
        std::set<std::string> dset;
        for (const auto* field : {&doc.title, &doc.summary, &doc.body})
            for (auto& t : tokenize(*field)) dset.insert(std::move(t));
        std::size_t overlap = 0;
        for (const auto& t : qset) overlap += dset.count(t);
        if (overlap > 0) scored.push_back({overlap, &doc});
    }
    // Scores share the denominator |Q|, so overlap counts order them exactly.
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.overlap != b.overlap) return a.overlap > b.overlap;
        return a.doc->id < b.doc->id;
    });
    if (scored.size() > k) scored.resize(k);

    std::vector<SearchHit> hits;
    int rank = 1;
    for (const auto& s : scored) hits.push_back({s.doc->url, s.doc->title, s.doc->summary, engine_id, rank++});
    return hits;
}

FixtureSearch::FixtureSearch(std::shared_ptr<const FixtureCorpus> corpus, std::string id, std::chrono::milliseconds latency)
    : corpus_(std::move(corpus)), id_(std::move(id)), latency_(latency) {}

std::vector<SearchHit> FixtureSearch::search(std::string_view query, std::size_t k, const Deadline& deadline) {
    ++calls_;
    if (!sleep_within(latency_, deadline)) throw TimeoutError("search '" + std::string{query} + "' timed out");
    return fixture_search(*corpus_, query, k, id_);
}

FixtureFetcher::FixtureFetcher(std::shared_ptr<const FixtureCorpus> corpus, std::chrono::milliseconds latency,
                               std::size_t max_fetch_bytes)
    : corpus_(std::move(corpus)), latency_(latency), max_fetch_bytes_(max_fetch_bytes) {}

FetchedPage FixtureFetcher::fetch(std::string_view url, const Deadline& deadline) {
    ++calls_;
    if (!sleep_within(latency_, deadline)) throw TimeoutError("fetch " + std::string{url} + " timed out");
    const auto* doc = corpus_->find_by_url(url);
    if (!doc) throw FetchError(404, "not in corpus: " + std::string{url});
    FetchedPage page{doc->body, "text/html"};
    if (page.content.size() > max_fetch_bytes_) page.content.resize(max_fetch_bytes_);
    return page;
}

bool ScriptMatcher::accepts(std::span<const ChatMessage> messages) const {
    switch (kind) {
    case Kind::Turn: return std::to_string(turn_index(messages)) == value;
    case Kind::Contains: return !messages.empty() && messages.back().content.find(value) != std::string::npos;
    case Kind::Role: {
        auto colon = value.find(':');
        std::string role = value.substr(0, colon);
        std::string needle = colon == std::string::npos ? std::string{} : value.substr(colon + 1);
        return std::any_of(messages.begin(), messages.end(), [&](const ChatMessage& m) {
            return m.role == role && m.content.find(needle) != std::string::npos;
        });
    }
    }
    return false;
}

ScriptedLlm::ScriptedLlm(std::vector<ScriptRule> rules, std::optional<std::string> default_response,
                         std::chrono::milliseconds latency)
    : rules_(std::move(rules)), default_(std::move(default_response)), latency_(latency) {}

namespace {

ScriptMatcher::Kind matcher_kind(const std::string& s, std::size_t line) {
    if (s == "turn") return ScriptMatcher::Kind::Turn;
    if (s == "contains" || s == "substring") return ScriptMatcher::Kind::Contains;
    if (s == "role") return ScriptMatcher::Kind::Role;
    throw FixtureError("line " + std::to_string(line) + ": unknown matcher kind '" + s + "'");
}

} // namespace

ScriptedLlm ScriptedLlm::parse(std::string_view jsonl, std::chrono::milliseconds latency) {
    std::vector<ScriptRule> rules;
    std::optional<std::string> fallback;
    for_each_record(jsonl, [&](const json& r, std::size_t line) {
        ScriptRule rule;
        if (auto e = r.find("error"); e != r.end() && e->is_string()) rule.error = e->get<std::string>();
        if (!rule.error) rule.response = required_string(r, "response", line, true);
        if (auto m = r.find("match"); m != r.end()) {
            if (!m->is_array()) throw FixtureError("line " + std::to_string(line) + ": 'match' must be an array");
            for (const auto& item : *m)
                rule.matchers.push_back({matcher_kind(required_string(item, "kind", line), line),
                                         required_string(item, "value", line, true)});
        } else {
            auto kind = required_string(r, "matcher_kind", line);
            if (kind == "default") {
                if (fallback) throw FixtureError("line " + std::to_string(line) + ": second default record");
                fallback = rule.response;
                return;
            }
            rule.matchers.push_back({matcher_kind(kind, line), required_string(r, "matcher_value", line, true)});
        }
        rules.push_back(std::move(rule));
    });
    if (rules.empty() && !fallback) throw FixtureError("script has no rules");
    return ScriptedLlm{std::move(rules), std::move(fallback), latency};
}

ScriptedLlm ScriptedLlm::load(const std::filesystem::path& path, std::chrono::milliseconds latency) {
    return parse(read_file(path), latency);
}

std::string ScriptedLlm::respond(std::span<const ChatMessage> messages) const {
    for (const auto& rule : rules_) {
        bool all = std::all_of(rule.matchers.begin(), rule.matchers.end(),
                               [&](const ScriptMatcher& m) { return m.accepts(messages); });
        if (!all) continue;
        if (rule.error) throw LlmBackendError(500, *rule.error);
        return rule.response;
    }
    if (default_) return *default_;
    throw ScriptExhausted{};
}

Completion ScriptedLlm::generate(std::span<const ChatMessage> messages, const GenerationParams&, const Deadline& deadline,
                                 const TokenSink& on_token) {
    ++calls_;
    if (!sleep_within(latency_, deadline)) throw TimeoutError("scripted generation timed out");
    Completion c;
    c.text = respond(messages);
    if (on_token) {
        // Word-sized chunks, each carrying its trailing whitespace.
        std::size_t i = 0;
        while (i < c.text.size()) {
            std::size_t j = i;
            while (j < c.text.size() && !std::isspace(static_cast<unsigned char>(c.text[j]))) ++j;
            while (j < c.text.size() && std::isspace(static_cast<unsigned char>(c.text[j]))) ++j;
            on_token(std::string_view{c.text}.substr(i, j - i));
            i = j;
        }
    }
    return c;
}

} // namespace deepsearch
