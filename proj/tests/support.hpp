#pragma once

#include "deepsearch/backends.hpp"
#include "deepsearch/fixture.hpp"
#include "deepsearch/templates.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace testsupport {

inline std::filesystem::path template_dir() { return DS_TEMPLATE_DIR; }
inline std::filesystem::path fixture_dir() { return DS_FIXTURE_DIR; }

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline std::shared_ptr<const deepsearch::TemplateSet> templates() {
    static auto set = std::make_shared<const deepsearch::TemplateSet>(deepsearch::TemplateSet::load(template_dir()));
    return set;
}

inline std::shared_ptr<const deepsearch::FixtureCorpus> corpus(const std::string& rel) {
    return std::make_shared<const deepsearch::FixtureCorpus>(deepsearch::FixtureCorpus::load(fixture_dir() / rel));
}

/// Fixture backends over one corpus with a scripted LLM.
inline deepsearch::Backends fixture_backends(std::shared_ptr<const deepsearch::FixtureCorpus> c,
                                             std::shared_ptr<deepsearch::LlmBackend> llm) {
    deepsearch::Backends b;
    b.llm = std::move(llm);
    b.engines.push_back(std::make_shared<deepsearch::FixtureSearch>(c));
    b.fetcher = std::make_shared<deepsearch::FixtureFetcher>(c);
    return b;
}

inline std::shared_ptr<deepsearch::ScriptedLlm> script(const std::string& rel) {
    return std::make_shared<deepsearch::ScriptedLlm>(deepsearch::ScriptedLlm::load(fixture_dir() / rel));
}

inline std::shared_ptr<deepsearch::ScriptedLlm> script_text(std::string_view jsonl) {
    return std::make_shared<deepsearch::ScriptedLlm>(deepsearch::ScriptedLlm::parse(jsonl));
}

} // namespace testsupport
