#include "deepsearch/config.hpp"

#include "deepsearch/fixture.hpp"
#include "deepsearch/live.hpp"
#include "deepsearch/util.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace deepsearch {

namespace fs = std::filesystem;

namespace {

std::size_t parse_count(const std::string& key, const std::string& value, std::size_t lo, std::size_t hi) {
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    if (out < lo || out > hi)
        throw ConfigError(key + ": " + value + " is outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return out;
}

std::string parse_backend(const std::string& key, const std::string& value) {
    if (value != "fixture" && value != "live") throw ConfigError(key + ": expected fixture or live, got '" + value + "'");
    return value;
}

fs::path resolve(const fs::path& base, const std::string& value) {
    fs::path p(value);
    return p.is_absolute() || base.empty() ? p : base / p;
}

using Setter = std::function<void(EngineConfig&, const std::string& key, const std::string& value, const fs::path& base)>;

Setter count_of(std::size_t EngineConfig::*field, std::size_t lo, std::size_t hi) {
    return [=](EngineConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.*field = parse_count(k, v, lo, hi); };
}

template <typename Member>
Setter nested_count(Member get, std::size_t lo, std::size_t hi) {
    return [=](EngineConfig& c, const std::string& k, const std::string& v, const fs::path&) { get(c) = parse_count(k, v, lo, hi); };
}

Setter millis(std::chrono::milliseconds EngineConfig::*field, std::size_t hi) {
    return [=](EngineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
        c.*field = std::chrono::milliseconds(parse_count(k, v, 0, hi));
    };
}

Setter path_of(fs::path EngineConfig::*field) {
    return [=](EngineConfig& c, const std::string&, const std::string& v, const fs::path& base) { c.*field = resolve(base, v); };
}

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table{
        {"backend.llm", [](EngineConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.llm_backend = parse_backend(k, v); }},
        {"backend.search", [](EngineConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.search_backend = parse_backend(k, v); }},
        {"backend.fetch", [](EngineConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.fetch_backend = parse_backend(k, v); }},
        {"fixture.corpus", path_of(&EngineConfig::corpus)},
        {"fixture.script", path_of(&EngineConfig::script)},
        {"fixture.llm_latency_ms", millis(&EngineConfig::llm_latency, 600000)},
        {"fixture.search_latency_ms", millis(&EngineConfig::search_latency, 600000)},
        {"fixture.fetch_latency_ms", millis(&EngineConfig::fetch_latency, 600000)},
        {"fixture.engines",
         [](EngineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
             c.fixture_engines.clear();
             std::stringstream ss(v);
             std::string id;
             while (std::getline(ss, id, ',')) {
                 id = trim(id);
                 if (id.empty()) throw ConfigError(k + ": empty engine id");
                 c.fixture_engines.push_back(id);
             }
             if (c.fixture_engines.empty()) throw ConfigError(k + ": at least one engine is required");
         }},
        {"templates.dir", path_of(&EngineConfig::templates_dir)},
        {"planner.max_turns", nested_count([](EngineConfig& c) -> std::size_t& { return c.planner.max_turns; }, 1, 100)},
        {"planner.max_nodes", nested_count([](EngineConfig& c) -> std::size_t& { return c.planner.max_nodes; }, 1, 512)},
        {"planner.max_concurrent_searchers",
         nested_count([](EngineConfig& c) -> std::size_t& { return c.planner.max_concurrent_searchers; }, 1, 64)},
        {"planner.searcher_timeout_s",
         [](EngineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
             c.planner.searcher_timeout = std::chrono::seconds(parse_count(k, v, 1, 3600));
         }},
        {"searcher.max_query_variants",
         nested_count([](EngineConfig& c) -> std::size_t& { return c.searcher.max_query_variants; }, 1, 16)},
        {"searcher.hits_per_query", nested_count([](EngineConfig& c) -> std::size_t& { return c.searcher.hits_per_query; }, 1, 50)},
        {"searcher.merged_hit_cap", nested_count([](EngineConfig& c) -> std::size_t& { return c.searcher.merged_hit_cap; }, 1, 200)},
        {"searcher.max_pages_to_read",
         nested_count([](EngineConfig& c) -> std::size_t& { return c.searcher.max_pages_to_read; }, 1, 32)},
        {"searcher.page_char_budget",
         nested_count([](EngineConfig& c) -> std::size_t& { return c.searcher.page_char_budget; }, 100, 200000)},
        {"searcher.context_char_budget",
         nested_count([](EngineConfig& c) -> std::size_t& { return c.searcher.context_char_budget; }, 100, 100000)},
        {"searcher.fetch_timeout_ms",
         [](EngineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
             c.searcher.fetch_timeout = std::chrono::milliseconds(parse_count(k, v, 1, 600000));
         }},
        {"live.model",
         [](EngineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
             if (v.empty()) throw ConfigError(k + ": empty model name");
             c.live_model = v;
         }},
        {"service.bind",
         [](EngineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
             auto colon = v.rfind(':');
             if (colon == std::string::npos || colon == 0) throw ConfigError(k + ": expected host:port, got '" + v + "'");
             parse_count(k, v.substr(colon + 1), 0, 65535);
             c.bind = v;
         }},
        {"service.event_buffer_cap", count_of(&EngineConfig::event_buffer_cap, 16, 10000000)},
        {"service.trace_dir", path_of(&EngineConfig::trace_dir)},
        {"service.max_sessions", count_of(&EngineConfig::max_sessions, 1, 100000)},
        {"eval.width", count_of(&EngineConfig::eval_width, 1, 64)},
        {"eval.react_max_steps", count_of(&EngineConfig::react_max_steps, 1, 50)},
        {"eval.react_top_k", count_of(&EngineConfig::react_top_k, 1, 20)},
    };
    return table;
}

} // namespace

EngineConfig parse_config(std::string_view text, const fs::path& base_dir) {
    EngineConfig config;
    std::size_t lineno = 0;
    for (const auto& raw : split_lines(text)) {
        ++lineno;
        auto line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        auto where = "line " + std::to_string(lineno) + ": ";
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        auto key = trim(std::string_view(line).substr(0, eq));
        auto value = trim(std::string_view(line).substr(eq + 1));
        auto it = setters().find(key);
        if (it == setters().end()) throw ConfigError(where + "unknown key '" + key + "'");
        try {
            it->second(config, key, value, base_dir);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return config;
}

EngineConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    auto config = parse_config(os.str(), path.parent_path());
    validate_config(config);
    return config;
}

void validate_config(const EngineConfig& config) {
    auto require_file = [](const fs::path& p, const char* key) {
        if (p.empty()) throw ConfigError(std::string{key} + " is required by the fixture backend");
        if (!fs::is_regular_file(p)) throw ConfigError(std::string{key} + ": file not found: " + p.string());
    };
    if (config.llm_backend == "fixture") require_file(config.script, "fixture.script");
    if (config.search_backend == "fixture" || config.fetch_backend == "fixture") require_file(config.corpus, "fixture.corpus");
    if (!fs::is_directory(config.templates_dir))
        throw ConfigError("templates.dir: directory not found: " + config.templates_dir.string());
    try {
        TemplateSet::load(config.templates_dir);
    } catch (const MissingTemplate& e) {
        throw ConfigError("missing template " + e.name() + " in " + config.templates_dir.string());
    }
    try {
        config.planner.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

std::shared_ptr<const TemplateSet> load_templates(const EngineConfig& config) {
    try {
        return std::make_shared<const TemplateSet>(TemplateSet::load(config.templates_dir));
    } catch (const MissingTemplate& e) {
        throw ConfigError("missing template " + e.name() + " in " + config.templates_dir.string());
    }
}

Backends make_backends(const EngineConfig& config) {
    Backends b;
    std::shared_ptr<const FixtureCorpus> corpus;
    auto get_corpus = [&] {
        if (!corpus) {
            try {
                corpus = std::make_shared<const FixtureCorpus>(FixtureCorpus::load(config.corpus));
            } catch (const FixtureError& e) {
                throw ConfigError(std::string{"fixture.corpus: "} + e.what());
            }
        }
        return corpus;
    };
    try {
        if (config.llm_backend == "fixture") {
            try {
                b.llm = std::make_shared<ScriptedLlm>(ScriptedLlm::load(config.script, config.llm_latency));
            } catch (const FixtureError& e) {
                throw ConfigError(std::string{"fixture.script: "} + e.what());
            }
        } else {
            auto live = LiveChatLlm::config_from_env();
            live.model = config.live_model;
            b.llm = std::make_shared<LiveChatLlm>(std::move(live));
        }
        if (config.search_backend == "fixture") {
            for (const auto& id : config.fixture_engines)
                b.engines.push_back(std::make_shared<FixtureSearch>(get_corpus(), id, config.search_latency));
        } else {
            b.engines.push_back(std::make_shared<LiveSearch>(LiveSearch::config_from_env()));
        }
        if (config.fetch_backend == "fixture") {
            b.fetcher = std::make_shared<FixtureFetcher>(get_corpus(), config.fetch_latency);
        } else {
            LiveFetcherConfig fc;
            fc.timeout = config.searcher.fetch_timeout;
            b.fetcher = std::make_shared<LiveFetcher>(fc);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
    }
    return b;
}

} // namespace deepsearch
