#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "slopguard/banlist.hpp"
#include "slopguard/errors.hpp"

using namespace slopguard;

namespace {

std::vector<text_span> spans_for_tokens(const std::vector<std::string>& tokens) {
    std::vector<text_span> spans;
    size_t at = 0;
    for (const auto& t : tokens) {
        spans.push_back({at, at + t.size()});
        at += t.size();
    }
    return spans;
}

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) out += t;
    return out;
}

}  // namespace

TEST_SUITE("banlist") {

TEST_CASE("phrase needs word boundaries on word-char edges") {
    banlist bl = compile_banlist({"cat"}, {}, {}, {});
    CHECK(collect_matches(bl, "the cat sat").size() == 1);
    CHECK(collect_matches(bl, "concatenate cation").empty());
    CHECK(collect_matches(bl, "cat-flap").size() == 1);
    CHECK(collect_matches(bl, "Cat").size() == 1);  // case-insensitive
}

TEST_CASE("phrase edge characters that are non-word lift the boundary check") {
    banlist bl = compile_banlist({"cat["}, {}, {}, {});
    auto m = collect_matches(bl, "cat[morecat]");
    REQUIRE(m.size() == 1);
    CHECK(m[0].span.begin == 0);
    CHECK(m[0].span.end == 4);
    // left edge is still a word char, so a preceding word char blocks it
    CHECK(collect_matches(bl, "bobcat[morecat]").empty());
}

TEST_CASE("ngram matches the stopword-filtered content stream") {
    banlist bl = compile_banlist({}, {{"voice", "barely", "whisper"}}, {}, {});
    std::string t = "Her voice was barely above a whisper now.";
    auto m = collect_matches(bl, t);
    REQUIRE(m.size() == 1);
    CHECK(m[0].kind == pattern_kind::ngram);
    // span covers "voice was barely above a whisper"
    CHECK(t.substr(m[0].span.begin, m[0].span.end - m[0].span.begin) ==
          "voice was barely above a whisper");
}

TEST_CASE("ngram does not match when an extra content word interrupts") {
    banlist bl = compile_banlist({}, {{"voice", "barely", "whisper"}}, {}, {});
    CHECK(collect_matches(bl, "voice cracked barely above a whisper").empty());
}

TEST_CASE("ngram validation rejects stopwords and short words") {
    CHECK_THROWS_AS(compile_banlist({}, {{"the", "whisper"}}, {}, {}), data_error);
    CHECK_THROWS_AS(compile_banlist({}, {{"ab", "whisper"}}, {}, {}), data_error);
    CHECK_THROWS_AS(compile_banlist({}, {{"whisper"}}, {}, {}), data_error);
    CHECK_THROWS_AS(compile_banlist({""}, {}, {}, {}), data_error);
    CHECK_THROWS_AS(compile_banlist({}, {}, {"("}, {}), data_error);
}

TEST_CASE("whitelist removes entries at compile time") {
    banlist bl = compile_banlist({"tapestry", "testament"}, {{"voice", "whisper"}}, {},
                                 {"Tapestry", "voice whisper"});
    REQUIRE(bl.entries.size() == 1);
    CHECK(bl.entries[0].display == "phrase:testament");
}

TEST_CASE("regex patterns are case-sensitive and verbatim") {
    banlist bl = compile_banlist({}, {}, {R"(\bnot\s+\w+, but\b)"}, {});
    CHECK(collect_matches(bl, "it was not calm, but wild").size() == 1);
    CHECK(collect_matches(bl, "it was Not calm, but wild").empty());
}

TEST_CASE("scan returns the earliest match and honors the ignore set") {
    banlist bl = compile_banlist({"tapestry", "silence"}, {}, {}, {});
    std::vector<std::string> tokens = {" the", " silence", " and", " the", " tapestry"};
    std::string text = join(tokens);
    auto spans = spans_for_tokens(tokens);

    ignore_set none;
    auto v = scan(bl, text, spans, none);
    REQUIRE(v.has_value());
    CHECK(v->start_token == 1);
    CHECK(bl.entries[v->pattern_id].phrase == "silence");

    ignore_set ignored{{1, v->pattern_id}};
    auto v2 = scan(bl, text, spans, ignored);
    REQUIRE(v2.has_value());
    CHECK(v2->start_token == 4);
    CHECK(bl.entries[v2->pattern_id].phrase == "tapestry");
}

TEST_CASE("scan finds patterns straddling token boundaries") {
    banlist bl = compile_banlist({"tapestry"}, {}, {}, {});
    std::vector<std::string> tokens = {" tap", "est", "ry", " of"};
    std::string text = join(tokens);
    auto spans = spans_for_tokens(tokens);
    auto v = scan(bl, text, spans, {});
    REQUIRE(v.has_value());
    CHECK(v->start_token == 0);  // match starts inside token 0
}

TEST_CASE("earliest-match ties prefer the longest match") {
    banlist bl = compile_banlist({"tape", "tapestry"}, {}, {}, {});
    std::vector<std::string> tokens = {" tapestry"};
    auto spans = spans_for_tokens(tokens);
    auto v = scan(bl, join(tokens), spans, {});
    REQUIRE(v.has_value());
    CHECK(bl.entries[v->pattern_id].phrase == "tapestry");
}

TEST_CASE("char_to_token maps byte positions to containing spans") {
    std::vector<std::string> tokens = {" ab", " cd"};
    auto spans = spans_for_tokens(tokens);
    CHECK(char_to_token(spans, 0) == 0);
    CHECK(char_to_token(spans, 2) == 0);
    CHECK(char_to_token(spans, 3) == 1);
    CHECK(char_to_token(spans, 5) == 1);
    CHECK_THROWS_AS(char_to_token(spans, 6), internal_error);
}

TEST_CASE("json round-trip keeps every entry") {
    banlist bl = compile_banlist({"tapestry"}, {{"voice", "whisper"}}, {R"(\bnot\b)"},
                                 {"night"});
    std::string path = (std::filesystem::temp_directory_path() / "bl_rt.json").string();
    save_banlist_json(bl, path);
    banlist back = load_banlist_json(path);
    REQUIRE(back.entries.size() == bl.entries.size());
    for (size_t i = 0; i < back.entries.size(); ++i) {
        CHECK(back.entries[i].display == bl.entries[i].display);
    }
    CHECK(back.whitelist == bl.whitelist);
    std::filesystem::remove(path);
}

TEST_CASE("extend_banlist appends and drops duplicates") {
    banlist bl = compile_banlist({"tapestry"}, {}, {}, {});
    banlist ext = extend_banlist(bl, {"tapestry", "testament"}, {{"voice", "whisper"}});
    CHECK(ext.entries.size() == 3);
    banlist again = extend_banlist(ext, {"testament"}, {{"voice", "whisper"}});
    CHECK(again.entries.size() == 3);
}

TEST_CASE("collect_matches on an empty banlist is empty") {
    banlist bl;
    CHECK(collect_matches(bl, "anything at all").empty());
}

}
