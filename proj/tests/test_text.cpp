#include "deepsearch/searcher.hpp"
#include "deepsearch/text.hpp"
#include "deepsearch/util.hpp"

#include "generators.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace deepsearch;

TEST_CASE("normalize_url") {
    CHECK(normalize_url("HTTP://Example.COM:80/a/b/#frag") == "http://example.com/a/b");
    CHECK(normalize_url("https://example.com:443/") == "https://example.com");
    CHECK(normalize_url("https://example.com:8443/x") == "https://example.com:8443/x");
    CHECK(normalize_url("https://example.com/Path?q=A&b=2#x") == "https://example.com/Path?q=A&b=2");
    CHECK(normalize_url("https://example.com/a/?q=1") == "https://example.com/a?q=1");
    CHECK(normalize_url("  https://example.com/a  ") == "https://example.com/a");
    CHECK(normalize_url("http://[::1]:8080/x") == "http://[::1]:8080/x");
    CHECK(normalize_url("https://User@Host.org/p") == "https://User@host.org/p");
}

TEST_CASE("html_to_text") {
    CHECK(html_to_text("<p>a</p><script>x</script><p>b</p>") == "a b");
    CHECK(html_to_text("<html><head><title>T</title><style>p{color:red}</style></head><body>Hi<br>there</body></html>") ==
          "T Hi there");
    CHECK(html_to_text("a &amp; b &lt;c&gt; &#65;&#x42; &unknown;") == "a & b <c> AB &unknown;");
    CHECK(html_to_text("x<!-- hidden -->y") == "x y");
    CHECK(html_to_text("<a href=\"x>y\">link</a> text") == "link text");
    CHECK(html_to_text("1 < 2 and <b>bold</b>") == "1 < 2 and bold");
    CHECK(html_to_text("<SCRIPT>var a = '</p>';</SCRIPT>after") == "after");
    CHECK(html_to_text("   \n\t  ") == "");
    CHECK(html_to_text("no tags at all") == "no tags at all");
}

TEST_CASE("tokenize and whitespace") {
    CHECK(tokenize("Hello, World! 2024 e-mail") == std::vector<std::string>{"hello", "world", "2024", "e", "mail"});
    CHECK(tokenize("caf\xc3\xa9") == std::vector<std::string>{"caf"});
    CHECK(tokenize("").empty());
    CHECK(collapse_whitespace("  a \n\t b  ") == "a b");
}

TEST_CASE("utf8 helpers") {
    std::string s = "a\xc3\xa9\xe6\x9d\xb1z";
    CHECK(utf8_length(s) == 4);
    CHECK(utf8_prefix(s, 2) == "a\xc3\xa9");
    CHECK(utf8_prefix(s, 10) == s);
    CHECK(utf8_length("\xff\xfe") == 2);
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("merge_hits agrees with the group-by oracle") {
    std::mt19937_64 rng(5);
    for (int batch = 0; batch < 500; ++batch) {
        auto [lists, cap] = gen::random_hit_batch(rng);
        CHECK(merge_hits(lists, cap) == oracle::group_by_merge(lists, cap));
    }
}
