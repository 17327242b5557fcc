#include "deepsearch/text.hpp"

#include "deepsearch/util.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>

namespace deepsearch {

std::string normalize_url(std::string_view raw) {
    std::string url = trim(raw);
    if (auto hash = url.find('#'); hash != std::string::npos) url.erase(hash);

    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        while (url.size() > 1 && url.back() == '/') url.pop_back();
        return url;
    }
    std::string scheme = to_lower_ascii(std::string_view{url}.substr(0, scheme_end));
    std::string_view rest = std::string_view{url}.substr(scheme_end + 3);

    auto authority_end = rest.find_first_of("/?");
    std::string_view authority = rest.substr(0, authority_end);
    std::string_view path_and_query = authority_end == std::string_view::npos ? std::string_view{} : rest.substr(authority_end);

    std::string userinfo;
    if (auto at = authority.rfind('@'); at != std::string_view::npos) {
        userinfo = std::string{authority.substr(0, at + 1)};
        authority = authority.substr(at + 1);
    }
    std::string host{authority};
    std::string port;
    // Bracketed IPv6 literals keep their colons.
    auto colon = host.rfind(':');
    if (colon != std::string::npos && host.find(']', colon) == std::string::npos) {
        port = host.substr(colon + 1);
        host.erase(colon);
    }
    host = to_lower_ascii(host);
    if ((scheme == "http" && port == "80") || (scheme == "https" && port == "443")) port.clear();

    auto q = path_and_query.find('?');
    std::string path{path_and_query.substr(0, q)};
    std::string query{q == std::string_view::npos ? std::string_view{} : path_and_query.substr(q)};
    while (!path.empty() && path.back() == '/') path.pop_back();

    std::string out = scheme + "://" + userinfo + host;
    if (!port.empty()) out += ":" + port;
    out += path;
    out += query;
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)) && static_cast<unsigned char>(c) < 0x80) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

namespace {

constexpr std::array<std::string_view, 6> kDroppedElements{"script", "style", "noscript", "template", "svg", "iframe"};

constexpr std::array<std::string_view, 37> kBlockElements{
    "address", "article", "aside", "blockquote", "br", "dd", "div", "dl", "dt", "fieldset", "figcaption", "figure", "footer",
    "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "li", "main", "nav", "ol", "p", "pre", "section", "table",
    "tbody", "td", "th", "thead", "tr", "ul", "title"};

template <std::size_t N>
bool one_of(const std::array<std::string_view, N>& set, std::string_view name) {
    return std::find(set.begin(), set.end(), name) != set.end();
}

void append_utf8(std::string& out, unsigned long cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// Decodes the entity starting at html[i] == '&'. Returns bytes consumed, 0 if
// it is not a recognised entity.
std::size_t decode_entity(std::string_view html, std::size_t i, std::string& out) {
    auto semi = html.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) return 0;
    std::string_view name = html.substr(i + 1, semi - i - 1);
    struct Named {
        std::string_view name;
        std::string_view text;
    };
    static constexpr std::array<Named, 8> kNamed{{{"amp", "&"}, {"lt", "<"}, {"gt", ">"}, {"quot", "\""},
                                                   {"apos", "'"}, {"nbsp", " "}, {"mdash", "\xE2\x80\x94"},
                                                   {"ndash", "\xE2\x80\x93"}}};
    for (const auto& n : kNamed)
        if (n.name == name) {
            out += n.text;
            return semi - i + 1;
        }
    if (name.size() >= 2 && name[0] == '#') {
        int base = 10;
        std::string_view digits = name.substr(1);
        if (digits[0] == 'x' || digits[0] == 'X') {
            base = 16;
            digits.remove_prefix(1);
        }
        unsigned long cp = 0;
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), cp, base);
        if (ec != std::errc{} || p != digits.data() + digits.size()) return 0;
        append_utf8(out, cp);
        return semi - i + 1;
    }
    return 0;
}

// Index just past the '>' closing a tag that starts at `i`, honouring quoted
// attribute values.
std::size_t tag_end(std::string_view html, std::size_t i) {
    char quote = 0;
    for (std::size_t k = i; k < html.size(); ++k) {
        char c = html[k];
        if (quote) {
            if (c == quote) quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '>') {
            return k + 1;
        }
    }
    return html.size();
}

} // namespace

std::string html_to_text(std::string_view html) {
    std::string out;
    out.reserve(html.size());
    std::size_t i = 0;
    while (i < html.size()) {
        char c = html[i];
        if (c == '&') {
            if (auto n = decode_entity(html, i, out)) {
                i += n;
                continue;
            }
            out.push_back(c);
            ++i;
            continue;
        }
        if (c != '<') {
            out.push_back(c);
            ++i;
            continue;
        }
        if (html.substr(i, 4) == "<!--") {
            auto end = html.find("-->", i + 4);
            i = end == std::string_view::npos ? html.size() : end + 3;
            out.push_back(' ');
            continue;
        }
        std::size_t j = i + 1;
        bool closing = j < html.size() && html[j] == '/';
        if (closing) ++j;
        if (j >= html.size() || !(std::isalpha(static_cast<unsigned char>(html[j])) || html[j] == '!' || html[j] == '?')) {
            out.push_back(c);
            ++i;
            continue;
        }
        std::size_t name_start = j;
        while (j < html.size() && (std::isalnum(static_cast<unsigned char>(html[j])) || html[j] == '-')) ++j;
        std::string name = to_lower_ascii(html.substr(name_start, j - name_start));
        std::size_t after = tag_end(html, i);

        if (!closing && one_of(kDroppedElements, name)) {
            std::string close = "</" + name;
            std::size_t k = after;
            while (true) {
                k = html.find('<', k);
                if (k == std::string_view::npos) {
                    after = html.size();
                    break;
                }
                if (to_lower_ascii(html.substr(k, close.size())) == close) {
                    after = tag_end(html, k);
                    break;
                }
                ++k;
            }
            out.push_back(' ');
        } else if (one_of(kBlockElements, name)) {
            out.push_back(' ');
        }
        i = after;
    }
    return collapse_whitespace(out);
}

} // namespace deepsearch
