#include "deepsearch/eval.hpp"

#include "deepsearch/util.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace deepsearch {

using nlohmann::json;

namespace {

std::vector<std::string> string_list(const json& j, const char* key, std::size_t line, bool required) {
    if (!j.contains(key)) {
        if (required) throw MalformedRecord(line, std::string{"missing field '"} + key + "'");
        return {};
    }
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw MalformedRecord(line, std::string{"field '"} + key + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& v : arr) {
        if (!v.is_string()) throw MalformedRecord(line, std::string{"field '"} + key + "' must be an array of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) return false;
    return true;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

} // namespace

std::vector<QAItem> parse_dataset(std::string_view jsonl) {
    std::vector<QAItem> items;
    std::set<std::string> ids;
    std::size_t lineno = 0;
    for (const auto& line : split_lines(jsonl)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw MalformedRecord(lineno, std::string{"invalid JSON: "} + e.what());
        }
        if (!j.is_object()) throw MalformedRecord(lineno, "record must be a JSON object");
        QAItem item;
        for (const char* key : {"id", "question"}) {
            if (!j.contains(key) || !j.at(key).is_string() || trim(j.at(key).get<std::string>()).empty())
                throw MalformedRecord(lineno, std::string{"missing or empty field '"} + key + "'");
        }
        item.id = j.at("id").get<std::string>();
        item.question = j.at("question").get<std::string>();
        item.answers = string_list(j, "answers", lineno, true);
        if (item.answers.empty()) throw MalformedRecord(lineno, "at least one answer is required");
        item.tags = string_list(j, "tags", lineno, false);
        if (!ids.insert(item.id).second) throw MalformedRecord(lineno, "duplicate id '" + item.id + "'");
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<QAItem> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read dataset " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return parse_dataset(os.str());
}

std::string normalize_answer(std::string_view text) {
    std::string cleaned;
    for (char c : text) {
        auto u = static_cast<unsigned char>(c);
        if (u < 0x80 && std::ispunct(u)) continue;
        cleaned += u < 0x80 ? static_cast<char>(std::tolower(u)) : c;
    }
    std::istringstream words(cleaned);
    std::vector<std::string> parts;
    for (std::string w; words >> w;) parts.push_back(w);
    if (parts.size() > 1 && (parts[0] == "a" || parts[0] == "an" || parts[0] == "the")) parts.erase(parts.begin());
    return join(parts, " ");
}

bool exact_match(std::string_view prediction, const std::vector<std::string>& gold_answers) {
    auto pred = normalize_answer(prediction);
    if (pred.empty()) return false;
    return std::any_of(gold_answers.begin(), gold_answers.end(), [&](const auto& g) { return normalize_answer(g) == pred; });
}

JudgeVerdict llm_judge(const std::string& question, const std::string& prediction,
                       const std::vector<std::string>& gold_answers, LlmBackend& llm, const TemplateSet& templates) {
    auto system = templates.render("judge.system",
                                   {{"question", question}, {"gold_answers", join(gold_answers, " | ")}, {"prediction", prediction}});
    std::vector<ChatMessage> messages{{"system", system}, {"user", "Question: " + question + "\nPrediction: " + prediction}};
    JudgeVerdict verdict;
    std::string last;
    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            last = llm.generate(messages, {0.0, 16, {}}, Deadline::after(std::chrono::seconds(120))).text;
        } catch (const BackendError& e) {
            last = std::string{"<error: "} + e.what() + ">";
            continue;
        }
        std::size_t i = 0;
        while (i < last.size() && !std::isalpha(static_cast<unsigned char>(last[i]))) ++i;
        std::size_t j = i;
        while (j < last.size() && std::isalpha(static_cast<unsigned char>(last[j]))) ++j;
        auto word = std::string_view(last).substr(i, j - i);
        if (word == "CORRECT") return {true, std::nullopt};
        if (word == "INCORRECT") return {false, std::nullopt};
    }
    verdict.warning = "judge reply not understood after retry: " + json(last).dump();
    return verdict;
}

ReactStep parse_react_reply(std::string_view reply) {
    static const std::regex action_re(R"re(^search\(\s*(?:"((?:[^"\\]|\\.)*)"|'((?:[^'\\]|\\.)*)')\s*\)\s*$)re");
    ReactStep step;
    auto lines = split_lines(reply);
    bool decided = false;
    std::vector<std::string> loose;
    for (std::size_t i = 0; i < lines.size() && !decided; ++i) {
        auto line = trim(lines[i]);
        if (starts_with_ci(line, "Thought:")) {
            step.thought = trim(std::string_view(line).substr(8));
        } else if (starts_with_ci(line, "Final Answer:")) {
            std::string answer = trim(std::string_view(line).substr(13));
            for (std::size_t k = i + 1; k < lines.size(); ++k) answer += "\n" + lines[k];
            step.final_answer = trim(answer);
            decided = true;
        } else if (starts_with_ci(line, "Action:")) {
            auto action = trim(std::string_view(line).substr(7));
            std::smatch m;
            if (std::regex_match(action, m, action_re)) {
                auto q = trim(m[1].matched ? m[1].str() : m[2].str());
                if (!q.empty()) step.query = q;
            }
            decided = true;
        } else if (!line.empty() && step.thought.empty()) {
            loose.push_back(line);
        }
    }
    if (step.thought.empty()) step.thought = join(loose, " ");
    return step;
}

ReactResult react_agent(const std::string& question, const Backends& backends, const TemplateSet& templates,
                        std::size_t max_steps, std::size_t top_k) {
    if (max_steps == 0) throw std::invalid_argument("react max_steps must be at least 1");
    if (backends.engines.empty()) throw std::invalid_argument("react agent needs a search engine");
    ReactResult result;
    std::vector<ChatMessage> messages{
        {"system", templates.render("react.system", {{"max_steps", std::to_string(max_steps)}})},
        {"user", question},
    };
    std::string last_thought;
    for (std::size_t step = 0; step < max_steps; ++step) {
        auto reply = backends.llm->generate(messages, {0.0, 1024, {"Observation:"}}, Deadline::never()).text;
        ++result.steps;
        auto parsed = parse_react_reply(reply);
        if (!parsed.thought.empty()) last_thought = parsed.thought;
        if (parsed.final_answer) {
            result.prediction = *parsed.final_answer;
            return result;
        }
        messages.push_back({"assistant", reply});
        std::string observation = "Observation: ";
        if (!parsed.query) {
            observation += "invalid action";
            result.notes.push_back("step " + std::to_string(step + 1) + ": invalid action");
        } else {
            ++result.searches;
            try {
                auto hits = backends.engines.front()->search(*parsed.query, top_k, Deadline::after(std::chrono::seconds(30)));
                if (hits.empty()) observation += "no results";
                for (std::size_t i = 0; i < hits.size(); ++i)
                    observation += "\n[" + std::to_string(i + 1) + "] " + hits[i].title + " (" + hits[i].url + "): " + hits[i].summary;
            } catch (const BackendError& e) {
                observation += std::string{"search failed: "} + e.what();
                result.notes.push_back(observation);
            }
        }
        messages.push_back({"user", observation});
    }
    result.flagged = true;
    result.prediction = last_thought;
    result.notes.push_back("step budget exhausted without a final answer");
    return result;
}

std::string_view to_string(AgentKind kind) {
    switch (kind) {
    case AgentKind::NoSearch: return "nosearch";
    case AgentKind::React: return "react";
    case AgentKind::MindSearch: return "mindsearch";
    }
    return "?";
}

std::optional<AgentKind> parse_agent_kind(std::string_view s) {
    if (s == "nosearch") return AgentKind::NoSearch;
    if (s == "react") return AgentKind::React;
    if (s == "mindsearch") return AgentKind::MindSearch;
    return std::nullopt;
}

std::string_view display_name(AgentKind kind) {
    switch (kind) {
    case AgentKind::NoSearch: return "w/o Search Engine";
    case AgentKind::React: return "ReAct Search";
    case AgentKind::MindSearch: return "MindSearch";
    }
    return "?";
}

json ItemResult::to_json() const {
    return {{"type", "item"},         {"id", id},           {"agent", to_string(agent)},   {"prediction", prediction},
            {"verdict", verdict},     {"latency_ms", latency.count()}, {"pages_read", pages_read}, {"tags", tags},
            {"flagged", flagged},     {"notes", notes}};
}

double EvalReport::macro_average() const {
    if (tag_order.empty()) return overall.accuracy();
    double sum = 0;
    for (const auto& tag : tag_order) sum += by_tag.at(tag).accuracy();
    return sum / static_cast<double>(tag_order.size());
}

json EvalReport::aggregate_json() const {
    json tags = json::object();
    for (const auto& tag : tag_order) {
        const auto& s = by_tag.at(tag);
        tags[tag] = {{"correct", s.correct}, {"total", s.total}, {"accuracy", s.accuracy()}};
    }
    return {{"type", "aggregate"},
            {"agent", to_string(agent)},
            {"scoring", scoring == Scoring::Judge ? "judge" : "em"},
            {"correct", overall.correct},
            {"total", overall.total},
            {"accuracy", overall.accuracy()},
            {"tag_average", macro_average()},
            {"by_tag", tags}};
}

std::string EvalReport::to_jsonl() const {
    std::string out;
    for (const auto& item : items) out += item.to_json().dump() + "\n";
    out += aggregate_json().dump() + "\n";
    return out;
}

EvalReport run_eval(const std::vector<QAItem>& items, const EvalOptions& options, const Backends& backends,
                    std::shared_ptr<const TemplateSet> templates) {
    if (items.empty()) throw std::invalid_argument("dataset is empty");
    if (!templates) throw std::invalid_argument("run_eval needs templates");
    auto judge = options.judge ? options.judge : backends.llm;

    EvalReport report;
    report.agent = options.agent;
    report.scoring = options.scoring;
    report.items.resize(items.size());

    parallel_for(items.size(), std::max<std::size_t>(options.width, 1), [&](std::size_t i) {
        const auto& item = items[i];
        auto& r = report.items[i];
        r.id = item.id;
        r.agent = options.agent;
        r.tags = item.tags;
        auto started = std::chrono::steady_clock::now();
        bool answered = false;
        try {
            switch (options.agent) {
            case AgentKind::NoSearch: {
                std::vector<ChatMessage> messages{{"user", item.question}};
                r.prediction = trim(backends.llm->generate(messages, {0.0, 1024, {}}, Deadline::never()).text);
                answered = true;
                break;
            }
            case AgentKind::React: {
                auto rr = react_agent(item.question, backends, *templates, options.react_max_steps, options.react_top_k);
                r.prediction = rr.prediction;
                r.flagged = rr.flagged;
                r.notes = rr.notes;
                answered = true;
                break;
            }
            case AgentKind::MindSearch: {
                Planner planner(backends, templates, options.planner, options.searcher);
                auto session = planner.run_session(item.question);
                for (const auto& [name, t] : session.transcripts()) r.pages_read += t.pages.size();
                if (auto answer = session.final_answer()) {
                    r.prediction = answer->answer_text;
                    answered = true;
                } else {
                    r.notes.push_back("session " + std::string{to_string(session.status())} + ": " +
                                      session.error().value_or("no final answer"));
                }
                r.flagged = session.best_effort();
                break;
            }
            }
        } catch (const std::exception& e) {
            r.notes.push_back(std::string{"agent failed: "} + e.what());
        }
        r.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
        if (!answered) return;
        if (options.scoring == Scoring::Judge) {
            auto v = llm_judge(item.question, r.prediction, item.answers, *judge, *templates);
            r.verdict = v.correct;
            if (v.warning) r.notes.push_back(*v.warning);
        } else {
            r.verdict = exact_match(r.prediction, item.answers);
        }
    });

    for (const auto& r : report.items) {
        ++report.overall.total;
        if (r.verdict) ++report.overall.correct;
        for (const auto& tag : r.tags) {
            if (!report.by_tag.count(tag)) report.tag_order.push_back(tag);
            auto& s = report.by_tag[tag];
            ++s.total;
            if (r.verdict) ++s.correct;
        }
    }
    return report;
}

std::string render_table(const std::vector<EvalReport>& reports) {
    std::vector<std::string> tags;
    for (const auto& r : reports)
        for (const auto& t : r.tag_order)
            if (std::find(tags.begin(), tags.end(), t) == tags.end()) tags.push_back(t);

    std::vector<std::string> header{"Model"};
    header.insert(header.end(), tags.begin(), tags.end());
    header.push_back("AVG");
    std::vector<std::vector<std::string>> rows;
    auto percent = [](double accuracy) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f", 100.0 * accuracy);
        return std::string{buf};
    };
    for (const auto& r : reports) {
        std::vector<std::string> row{std::string{display_name(r.agent)}};
        for (const auto& t : tags) {
            auto it = r.by_tag.find(t);
            row.push_back(it == r.by_tag.end() ? "-" : percent(it->second.accuracy()));
        }
        row.push_back(percent(r.macro_average()));
        rows.push_back(std::move(row));
    }

    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
    }
    auto line = [&](const std::vector<std::string>& cols) {
        std::string out;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (c) out += " | ";
            std::string pad(width[c] - cols[c].size(), ' ');
            out += c == 0 ? cols[c] + pad : pad + cols[c];
        }
        return out + "\n";
    };
    std::string out = line(header);
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c) out += "-+-";
        out += std::string(width[c], '-');
    }
    out += "\n";
    for (const auto& row : rows) out += line(row);
    return out;
}

} // namespace deepsearch
