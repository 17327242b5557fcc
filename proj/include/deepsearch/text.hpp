#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace deepsearch {

/// Conservative URL normalization used to merge search hits: lowercases the
/// scheme and host, drops the fragment, a default port (80/443) and a
/// trailing slash on the path. Query strings are left untouched.
std::string normalize_url(std::string_view url);

/// Reduces an HTML document to plain text. Script, style and similar
/// elements are removed with their content, block-level tags become word
/// breaks, common entities are decoded and whitespace is collapsed.
std::string html_to_text(std::string_view html);

/// Collapses runs of whitespace into single spaces and trims the ends.
std::string collapse_whitespace(std::string_view s);

/// Lowercased ASCII alphanumeric runs, in order of appearance.
std::vector<std::string> tokenize(std::string_view text);

} // namespace deepsearch
