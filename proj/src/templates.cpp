#include "deepsearch/templates.hpp"

#include <fstream>
#include <sstream>

namespace deepsearch {

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
    TemplateSet set;
    for (auto name : kTemplateNames) {
        std::ifstream in(dir / std::string{name}, std::ios::binary);
        if (!in) throw MissingTemplate(std::string{name});
        std::ostringstream os;
        os << in.rdbuf();
        set.set(std::string{name}, os.str());
    }
    return set;
}

const std::string& TemplateSet::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw MissingTemplate(std::string{name});
    return it->second;
}

std::string TemplateSet::render(std::string_view name, const TemplateVars& vars) const {
    return render_template(get(name), vars);
}

std::string render_template(std::string_view text, const TemplateVars& vars) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        auto open = text.find("{{", i);
        if (open == std::string_view::npos) break;
        auto close = text.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        out.append(text.substr(i, open - i));
        auto key = text.substr(open + 2, close - open - 2);
        if (auto it = vars.find(key); it != vars.end())
            out += it->second;
        else
            out.append(text.substr(open, close + 2 - open));
        i = close + 2;
    }
    out.append(text.substr(i));
    return out;
}

} // namespace deepsearch
