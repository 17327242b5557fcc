#include "deepsearch/searcher.hpp"

#include "deepsearch/text.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <mutex>
#include <set>

namespace deepsearch {

using nlohmann::json;

std::string_view to_string(SearcherErrc code) {
    switch (code) {
    case SearcherErrc::Timeout: return "Timeout";
    case SearcherErrc::AllEnginesFailed: return "AllEnginesFailed";
    case SearcherErrc::LlmBackendError: return "LlmBackendError";
    }
    return "?";
}

namespace {

constexpr std::size_t kQuestionChars = 1000;
constexpr std::size_t kTitleChars = 200;
constexpr std::size_t kUrlChars = 400;
constexpr std::size_t kSnippetChars = 300;

std::string clip(std::string_view s, std::size_t chars) { return std::string{utf8_prefix(s, chars)}; }

TemplateVars context_vars(const SearcherContext& ctx, const SearcherConfig& config) {
    auto root = clip(ctx.root_question, config.context_char_budget / 2);
    auto parents = render_parent_answers(ctx, config.context_char_budget - utf8_length(root));
    return {{"root_question", root}, {"parent_answers", parents}, {"question", clip(ctx.node_question, kQuestionChars)}};
}

json hit_json(const SearchHit& h) {
    return {{"url", h.url}, {"title", h.title}, {"summary", h.summary}, {"engine", h.source_engine}, {"rank", h.rank}};
}

} // namespace

json SearcherTranscript::to_json() const {
    json j;
    j["node"] = node;
    j["stages"] = stages;
    j["queries"] = queries;
    j["hits"] = json::array();
    for (const auto& list : hits) {
        json l{{"query", list.query}, {"engine", list.engine}, {"failed", list.failed}, {"hits", json::array()}};
        for (const auto& h : list.hits) l["hits"].push_back(hit_json(h));
        j["hits"].push_back(std::move(l));
    }
    j["merged"] = json::array();
    for (const auto& h : merged) j["merged"].push_back(hit_json(h));
    j["selected"] = selected;
    j["pages"] = json::array();
    for (const auto& p : pages)
        j["pages"].push_back(
            {{"url", p.url}, {"title", p.title}, {"truncated", p.truncated}, {"chars", p.chars}, {"digest", p.digest}});
    j["summary"] = {{"prompt_digest", sha256_hex(summary_prompt)}, {"prompt", summary_prompt}, {"answer", answer}};
    j["citations"] = json::array();
    for (const auto& c : citations) j["citations"].push_back({{"url", c.url}, {"title", c.title}});
    j["notes"] = notes;
    j["error"] = error ? json(*error) : json(nullptr);
    return j;
}

std::string SearcherTranscript::digest() const { return sha256_hex(to_json().dump()); }

SearcherContext build_searcher_context(const ThoughtGraph& graph, const std::string& node) {
    const auto& n = graph.node(node);
    if (n.state != NodeState::Running)
        throw GraphError(GraphErrc::InvalidTransition, "searcher context requested for node '" + node + "' that is " +
                                                           std::string{to_string(n.state)});
    SearcherContext ctx;
    ctx.node_name = node;
    ctx.root_question = graph.question();
    ctx.node_question = n.content;
    for (const auto& parent : graph.predecessors(node)) {
        const auto& p = graph.node(parent);
        if (p.kind == NodeKind::Start) continue;
        if (p.state == NodeState::Done && p.response) {
            ctx.parent_answers.push_back({parent, p.response->answer_text, false});
        } else if (p.state == NodeState::Failed) {
            ctx.parent_answers.push_back({parent, "(no answer: " + p.error.value_or("search failed") + ")", true});
        } else {
            ctx.parent_answers.push_back({parent, "(no answer yet)", true});
        }
    }
    return ctx;
}

std::string render_parent_answers(const SearcherContext& ctx, std::size_t char_budget) {
    if (ctx.parent_answers.empty()) return {};
    std::string block = "Findings from earlier steps:\n";
    for (const auto& p : ctx.parent_answers) block += "[node " + p.node + "] " + p.text + "\n";
    return clip(block, char_budget);
}

std::vector<std::string> parse_query_lines(std::string_view reply, std::size_t max_variants) {
    std::vector<std::string> out;
    for (const auto& raw : split_lines(reply)) {
        if (out.size() >= max_variants) break;
        std::string_view line = raw;
        std::size_t i = 0;
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        // Bullets and "1." / "2)" numbering.
        if (i < line.size() && (line[i] == '-' || line[i] == '*')) ++i;
        std::size_t digits = i;
        while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
        if (digits > i && digits < line.size() && (line[digits] == '.' || line[digits] == ')')) i = digits + 1;
        auto q = trim(line.substr(i));
        if (q.size() >= 2 && (q.front() == '"' || q.front() == '\'') && q.back() == q.front()) q = q.substr(1, q.size() - 2);
        q = trim(q);
        if (!q.empty()) out.push_back(std::move(q));
    }
    return out;
}

std::vector<std::string> rewrite_queries(const SearcherContext& ctx, LlmBackend& llm, const TemplateSet& templates,
                                         const SearcherConfig& config, const Deadline& deadline,
                                         std::vector<std::string>* notes) {
    std::vector<std::string> variants;
    auto vars = context_vars(ctx, config);
    vars["max_variants"] = std::to_string(config.max_query_variants);
    std::vector<ChatMessage> messages{{"user", templates.render("searcher.rewrite", vars)}};
    try {
        auto reply = llm.generate(messages, config.llm_params, deadline);
        variants = parse_query_lines(reply.text, config.max_query_variants);
    } catch (const BackendError& e) {
        if (notes) notes->push_back(std::string{"rewrite failed, using the sub-question only: "} + e.what());
    }
    variants.push_back(ctx.node_question);
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& q : variants)
        if (seen.insert(q).second) out.push_back(std::move(q));
    return out;
}

std::vector<HitList> fan_out_search(const std::vector<std::string>& queries,
                                    const std::vector<std::shared_ptr<SearchBackend>>& engines, std::size_t k,
                                    const Deadline& deadline, std::vector<std::string>* notes) {
    const std::size_t pairs = queries.size() * engines.size();
    std::vector<HitList> lists(pairs);
    std::vector<std::string> pair_notes(pairs);
    parallel_for(pairs, pairs, [&](std::size_t i) {
        const auto& query = queries[i / engines.size()];
        auto& engine = *engines[i % engines.size()];
        auto& list = lists[i];
        list.query = query;
        list.engine = engine.id();
        try {
            list.hits = engine.search(query, k, deadline);
            if (list.hits.size() > k) list.hits.resize(k);
        } catch (const std::exception& e) {
            list.failed = true;
            pair_notes[i] = "search '" + query + "' on " + list.engine + " failed: " + e.what();
        }
    });
    bool any_ok = false;
    for (std::size_t i = 0; i < pairs; ++i) {
        if (!lists[i].failed) any_ok = true;
        if (notes && !pair_notes[i].empty()) notes->push_back(std::move(pair_notes[i]));
    }
    if (!any_ok) {
        if (deadline.expired()) throw SearcherError(SearcherErrc::Timeout, "every search call timed out");
        throw SearcherError(SearcherErrc::AllEnginesFailed, "every search call failed");
    }
    return lists;
}

std::vector<SearchHit> merge_hits(const std::vector<std::vector<SearchHit>>& lists, std::size_t cap) {
    std::map<std::string, SearchHit> by_url;
    for (const auto& list : lists) {
        for (const auto& hit : list) {
            auto url = normalize_url(hit.url);
            auto [it, inserted] = by_url.try_emplace(url, hit);
            auto& merged = it->second;
            if (inserted) {
                merged.url = url;
                continue;
            }
            std::string title = std::min(merged.title, hit.title);
            if (hit.rank < merged.rank) {
                merged = hit;
                merged.url = url;
            }
            merged.title = std::move(title);
        }
    }
    std::vector<SearchHit> out;
    out.reserve(by_url.size());
    for (auto& [url, hit] : by_url) out.push_back(std::move(hit));
    std::stable_sort(out.begin(), out.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.rank != b.rank) return a.rank < b.rank;
        return a.url < b.url;
    });
    if (out.size() > cap) out.resize(cap);
    return out;
}

std::vector<std::size_t> parse_selection(std::string_view reply, std::size_t hit_count, std::size_t max_pages) {
    std::vector<std::size_t> out;
    std::set<std::size_t> seen;
    std::size_t i = 0;
    while (i < reply.size() && out.size() < max_pages) {
        if (!std::isdigit(static_cast<unsigned char>(reply[i]))) {
            ++i;
            continue;
        }
        std::size_t value = 0;
        bool overflow = false;
        while (i < reply.size() && std::isdigit(static_cast<unsigned char>(reply[i]))) {
            if (value > 1'000'000) overflow = true;
            value = value * 10 + static_cast<std::size_t>(reply[i] - '0');
            ++i;
        }
        if (overflow || value < 1 || value > hit_count) continue;
        if (seen.insert(value).second) out.push_back(value);
    }
    return out;
}

std::vector<std::string> select_pages(const SearcherContext& ctx, const std::vector<SearchHit>& merged, LlmBackend& llm,
                                      const TemplateSet& templates, const SearcherConfig& config,
                                      const Deadline& deadline, std::vector<std::string>* notes,
                                      std::string* prompt_out) {
    const std::size_t listing_budget = config.max_pages_to_read * config.page_char_budget;
    std::string listing;
    std::size_t listed = 0;
    for (const auto& h : merged) {
        std::string entry = "[" + std::to_string(listed + 1) + "] " + clip(h.title, kTitleChars) + "\nURL: " +
                            clip(h.url, kUrlChars) + "\n" + clip(h.summary, kSnippetChars) + "\n";
        if (utf8_length(listing) + utf8_length(entry) > listing_budget) break;
        listing += entry;
        ++listed;
    }
    auto vars = context_vars(ctx, config);
    vars["hits"] = listing;
    vars["max_pages"] = std::to_string(config.max_pages_to_read);
    std::vector<ChatMessage> messages{{"user", templates.render("searcher.select", vars)}};
    if (prompt_out) *prompt_out = messages[0].content;

    std::vector<std::size_t> picked;
    try {
        auto reply = llm.generate(messages, config.llm_params, deadline);
        picked = parse_selection(reply.text, listed, config.max_pages_to_read);
        if (picked.empty() && notes) notes->push_back("selection reply named no valid result, using top results");
    } catch (const BackendError& e) {
        if (notes) notes->push_back(std::string{"selection failed, using top results: "} + e.what());
    }
    std::vector<std::string> urls;
    if (picked.empty()) {
        for (std::size_t i = 0; i < merged.size() && urls.size() < config.max_pages_to_read; ++i) urls.push_back(merged[i].url);
    } else {
        for (auto idx : picked) urls.push_back(merged[idx - 1].url);
    }
    return urls;
}

std::vector<PageDocument> fetch_pages(const std::vector<std::string>& urls, const std::vector<SearchHit>& merged,
                                      PageFetcher& fetcher, const SearcherConfig& config, const Deadline& deadline,
                                      std::vector<std::string>* notes) {
    std::vector<std::optional<PageDocument>> slots(urls.size());
    std::vector<std::string> slot_notes(urls.size());
    parallel_for(urls.size(), urls.size(), [&](std::size_t i) {
        try {
            auto raw = fetcher.fetch(urls[i], deadline.tightened(config.fetch_timeout));
            auto type = to_lower_ascii(raw.content_type);
            std::string text = type.find("text/plain") != std::string::npos ? collapse_whitespace(raw.content)
                                                                              : html_to_text(raw.content);
            PageDocument doc;
            doc.url = urls[i];
            for (const auto& h : merged)
                if (h.url == urls[i]) doc.title = h.title;
            auto prefix = utf8_prefix(text, config.page_char_budget);
            doc.truncated = prefix.size() < text.size();
            doc.body_text = std::string{prefix};
            slots[i] = std::move(doc);
        } catch (const std::exception& e) {
            slot_notes[i] = "fetch " + urls[i] + " failed: " + e.what();
        }
    });
    std::vector<PageDocument> pages;
    for (std::size_t i = 0; i < urls.size(); ++i) {
        if (slots[i]) pages.push_back(std::move(*slots[i]));
        if (notes && !slot_notes[i].empty()) notes->push_back(std::move(slot_notes[i]));
    }
    return pages;
}

std::string summarize_prompt(const SearcherContext& ctx, const std::vector<PageDocument>& pages,
                             const TemplateSet& templates, const SearcherConfig& config) {
    std::string block;
    const std::size_t count = std::min(pages.size(), config.max_pages_to_read);
    for (std::size_t i = 0; i < count; ++i) {
        const auto& p = pages[i];
        block += "[" + std::to_string(i + 1) + "] " + clip(p.title, kTitleChars) + "\nURL: " + clip(p.url, kUrlChars) +
                 "\n" + clip(p.body_text, config.page_char_budget) + "\n\n";
    }
    auto vars = context_vars(ctx, config);
    vars["pages"] = block;
    return templates.render("searcher.summarize", vars);
}

std::vector<std::size_t> parse_citations(std::string_view answer, std::size_t page_count) {
    std::vector<std::size_t> out;
    std::set<std::size_t> seen;
    std::size_t i = 0;
    while ((i = answer.find('[', i)) != std::string_view::npos) {
        auto close = answer.find(']', i);
        if (close == std::string_view::npos) break;
        auto inner = answer.substr(i + 1, close - i - 1);
        bool well_formed = !inner.empty() && std::all_of(inner.begin(), inner.end(), [](char c) {
            return std::isdigit(static_cast<unsigned char>(c)) || c == ',' || c == ' ';
        });
        if (well_formed)
            for (auto idx : parse_selection(inner, page_count, page_count))
                if (seen.insert(idx).second) out.push_back(idx);
        i = well_formed ? close + 1 : i + 1;
    }
    return out;
}

NodeResponse summarize(const SearcherContext& ctx, const std::vector<PageDocument>& pages, LlmBackend& llm,
                       const TemplateSet& templates, const SearcherConfig& config, const Deadline& deadline,
                       std::string* prompt_out) {
    auto prompt = summarize_prompt(ctx, pages, templates, config);
    if (prompt_out) *prompt_out = prompt;
    NodeResponse response;
    if (pages.empty()) {
        response.answer_text = "No evidence was found on the web for: " + ctx.node_question;
        return response;
    }
    std::vector<ChatMessage> messages{{"user", prompt}};
    auto reply = llm.generate(messages, config.llm_params, deadline);
    response.answer_text = trim(reply.text);
    const std::size_t count = std::min(pages.size(), config.max_pages_to_read);
    auto cited = parse_citations(response.answer_text, count);
    if (cited.empty())
        for (std::size_t i = 1; i <= count; ++i) cited.push_back(i);
    for (auto idx : cited) response.citations.push_back({pages[idx - 1].url, pages[idx - 1].title});
    return response;
}

SearcherOutcome run_searcher(const SearcherContext& ctx, const Backends& backends, const TemplateSet& templates,
                             const SearcherConfig& config, const Deadline& deadline) {
    SearcherOutcome outcome;
    auto& t = outcome.transcript;
    t.node = ctx.node_name;

    auto fail = [&](SearcherErrc code, const std::string& message) {
        outcome.error_code = code;
        outcome.error = std::string{to_string(code)} + ": " + message;
        t.error = outcome.error;
        return outcome;
    };

    try {
        t.queries = rewrite_queries(ctx, *backends.llm, templates, config, deadline, &t.notes);
        if (deadline.expired()) return fail(SearcherErrc::Timeout, "deadline passed during query rewrite");
        t.stages.push_back("rewrite");

        t.hits = fan_out_search(t.queries, backends.engines, config.hits_per_query, deadline, &t.notes);
        std::vector<std::vector<SearchHit>> lists;
        for (const auto& l : t.hits) lists.push_back(l.hits);
        t.merged = merge_hits(lists, config.merged_hit_cap);
        if (deadline.expired()) return fail(SearcherErrc::Timeout, "deadline passed during search");
        t.stages.push_back("search");

        std::vector<PageDocument> pages;
        if (!t.merged.empty()) {
            t.selected = select_pages(ctx, t.merged, *backends.llm, templates, config, deadline, &t.notes);
            if (deadline.expired()) return fail(SearcherErrc::Timeout, "deadline passed during page selection");
            pages = fetch_pages(t.selected, t.merged, *backends.fetcher, config, deadline, &t.notes);
            if (deadline.expired()) return fail(SearcherErrc::Timeout, "deadline passed while fetching pages");
            for (const auto& p : pages)
                t.pages.push_back({p.url, p.title, p.truncated, utf8_length(p.body_text), sha256_hex(p.body_text)});
            t.stages.push_back("select");
        }

        auto response = summarize(ctx, pages, *backends.llm, templates, config, deadline, &t.summary_prompt);
        t.answer = response.answer_text;
        t.citations = response.citations;
        t.stages.push_back("summarize");
        response.transcript_digest = t.digest();
        outcome.response = std::move(response);
        return outcome;
    } catch (const SearcherError& e) {
        return fail(e.code(), e.what());
    } catch (const TimeoutError& e) {
        return fail(SearcherErrc::Timeout, e.what());
    } catch (const BackendError& e) {
        return fail(SearcherErrc::LlmBackendError, e.what());
    }
}

} // namespace deepsearch
