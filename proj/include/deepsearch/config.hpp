#pragma once

#include "deepsearch/backends.hpp"
#include "deepsearch/planner.hpp"
#include "deepsearch/searcher.hpp"
#include "deepsearch/templates.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepsearch {

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EngineConfig {
    // "fixture" or "live", per seam
    std::string llm_backend = "live";
    std::string search_backend = "live";
    std::string fetch_backend = "live";

    std::filesystem::path corpus;
    std::filesystem::path script;
    std::chrono::milliseconds llm_latency{0};
    std::chrono::milliseconds search_latency{0};
    std::chrono::milliseconds fetch_latency{0};
    std::vector<std::string> fixture_engines{"fixture"};

    std::filesystem::path templates_dir = "templates";

    PlannerConfig planner;
    SearcherConfig searcher;

    std::string live_model = "gpt-4o";

    std::string bind = "127.0.0.1:8080";
    std::size_t event_buffer_cap = kDefaultEventBufferCap;
    std::filesystem::path trace_dir;  // empty: traces are not persisted
    std::size_t max_sessions = 256;

    std::size_t eval_width = 4;
    std::size_t react_max_steps = 6;
    std::size_t react_top_k = 3;
};

/// Parses `key = value` lines (`#` starts a comment). Relative paths are
/// resolved against `base_dir`. Throws ConfigError on unknown keys, bad
/// values and out-of-range numbers. Does not touch the filesystem.
EngineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);

/// Reads and parses a config file, then validates it.
EngineConfig load_config(const std::filesystem::path& path);

/// Checks that referenced files exist and every template loads. Throws
/// ConfigError naming the first problem.
void validate_config(const EngineConfig& config);

std::shared_ptr<const TemplateSet> load_templates(const EngineConfig& config);

/// Builds the backends the config selects. Live seams read their endpoints
/// from DS_LLM_ENDPOINT, DS_LLM_KEY, DS_SEARCH_ENDPOINT and DS_SEARCH_KEY.
Backends make_backends(const EngineConfig& config);

} // namespace deepsearch
