#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace deepsearch {

inline constexpr std::array<std::string_view, 7> kTemplateNames{
    "planner.system", "planner.finalize", "searcher.rewrite", "searcher.select",
    "searcher.summarize", "react.system", "judge.system",
};

class MissingTemplate : public std::runtime_error {
public:
    explicit MissingTemplate(std::string name)
        : std::runtime_error("missing template '" + name + "'"), name_(std::move(name)) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

using TemplateVars = std::map<std::string, std::string, std::less<>>;

/// Named prompt templates. Placeholders are written `{{name}}`; unknown
/// placeholders are left as-is.
class TemplateSet {
public:
    TemplateSet() = default;

    /// Loads every name in kTemplateNames from files of the same name in `dir`.
    static TemplateSet load(const std::filesystem::path& dir);

    void set(std::string name, std::string text) { templates_[std::move(name)] = std::move(text); }
    const std::string& get(std::string_view name) const;
    std::string render(std::string_view name, const TemplateVars& vars) const;

private:
    std::map<std::string, std::string, std::less<>> templates_;
};

std::string render_template(std::string_view text, const TemplateVars& vars);

} // namespace deepsearch
