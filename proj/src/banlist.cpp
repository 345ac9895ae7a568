#include "slopguard/banlist.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "slopguard/errors.hpp"
#include "slopguard/text.hpp"

namespace slopguard {

namespace {

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (size_t i = 0; i < words.size(); ++i) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

// Word-boundary test for one side of a phrase match.  A side passes when
// there is no adjacent character, the adjacent character is not a word
// character, or the phrase itself ends in a non-word character on that side.
bool side_ok(std::string_view text, size_t adjacent, bool has_adjacent, char phrase_edge) {
    if (!is_word_char(static_cast<unsigned char>(phrase_edge))) return true;
    if (!has_adjacent) return true;
    return !is_word_char(static_cast<unsigned char>(text[adjacent]));
}

}  // namespace

banlist compile_banlist(const std::vector<std::string>& phrases,
                        const std::vector<std::vector<std::string>>& ngrams,
                        const std::vector<std::string>& regex_sources,
                        const std::vector<std::string>& whitelist,
                        size_t min_word_len, bool ngram_remove_stopwords) {
    banlist bl;
    bl.min_word_len = min_word_len;
    bl.ngram_remove_stopwords = ngram_remove_stopwords;

    std::unordered_set<std::string> allow;
    for (const auto& w : whitelist) {
        std::string lw = to_lower(w);
        allow.insert(lw);
        bl.whitelist.push_back(std::move(lw));
    }

    std::unordered_set<std::string> seen;

    for (const auto& raw : phrases) {
        std::string p = to_lower(raw);
        if (p.empty()) throw data_error("banlist: empty phrase entry");
        if (allow.count(p) || !seen.insert("p:" + p).second) continue;
        pattern_entry e;
        e.kind = pattern_kind::phrase;
        e.display = "phrase:" + p;
        e.phrase = std::move(p);
        bl.entries.push_back(std::move(e));
    }

    for (const auto& raw : ngrams) {
        if (raw.size() < 2 || raw.size() > 3)
            throw data_error("banlist: n-gram \"" + join_words(raw) +
                             "\" must have 2 or 3 words");
        std::vector<std::string> words;
        for (const auto& w : raw) {
            std::string lw = to_lower(w);
            if (lw.size() < min_word_len)
                throw data_error("banlist: n-gram word \"" + lw + "\" shorter than " +
                                 std::to_string(min_word_len) + " characters");
            if (ngram_remove_stopwords && is_stopword(lw))
                throw data_error("banlist: n-gram \"" + join_words(raw) +
                                 "\" contains stopword \"" + lw + "\"");
            for (char c : lw)
                if (!is_word_char(static_cast<unsigned char>(c)))
                    throw data_error("banlist: n-gram word \"" + lw +
                                     "\" contains non-word character");
            words.push_back(std::move(lw));
        }
        std::string joined = join_words(words);
        if (allow.count(joined) || !seen.insert("n:" + joined).second) continue;
        pattern_entry e;
        e.kind = pattern_kind::ngram;
        e.display = "ngram:" + joined;
        e.ngram = std::move(words);
        bl.entries.push_back(std::move(e));
    }

    for (const auto& src : regex_sources) {
        if (src.empty()) throw data_error("banlist: empty regex entry");
        if (allow.count(to_lower(src)) || !seen.insert("r:" + src).second) continue;
        pattern_entry e;
        e.kind = pattern_kind::regex;
        e.display = "regex:" + src;
        e.regex_source = src;
        bl.entries.push_back(std::move(e));
    }

    // compile phase
    std::string alternation;
    for (size_t i = 0; i < bl.entries.size(); ++i) {
        const pattern_entry& e = bl.entries[i];
        switch (e.kind) {
            case pattern_kind::phrase:
                bl.phrase_ac.add(e.phrase, static_cast<int>(i));
                break;
            case pattern_kind::ngram:
                break;
            case pattern_kind::regex: {
                try {
                    bl.regexes.emplace_back(e.regex_source, std::regex::ECMAScript);
                } catch (const std::regex_error& err) {
                    throw data_error("banlist: regex \"" + e.regex_source +
                                     "\" failed to compile: " + err.what());
                }
                bl.regex_ids.push_back(static_cast<int>(i));
                if (!alternation.empty()) alternation.push_back('|');
                alternation += "(?:" + e.regex_source + ")";
                break;
            }
        }
    }
    bl.phrase_ac.build();
    if (!alternation.empty())
        bl.regex_gate.emplace(alternation, std::regex::ECMAScript);
    return bl;
}

std::vector<pattern_match> collect_matches(const banlist& bl, std::string_view text) {
    std::vector<pattern_match> out;
    if (bl.empty() || text.empty()) return out;

    const std::string lower = to_lower(text);

    bl.phrase_ac.find_all(lower, [&](int id, size_t begin, size_t end) {
        const std::string& p = bl.entries[id].phrase;
        if (!side_ok(text, begin - 1, begin > 0, p.front())) return;
        if (!side_ok(text, end, end < text.size(), p.back())) return;
        out.push_back({pattern_kind::phrase, id, {begin, end}});
    });

    bool any_ngrams = false;
    for (const auto& e : bl.entries) any_ngrams |= e.kind == pattern_kind::ngram;
    if (any_ngrams) {
        const std::vector<word_span> stream =
            content_words(text, bl.min_word_len, bl.ngram_remove_stopwords);
        for (size_t id = 0; id < bl.entries.size(); ++id) {
            const pattern_entry& e = bl.entries[id];
            if (e.kind != pattern_kind::ngram) continue;
            const size_t k = e.ngram.size();
            if (stream.size() < k) continue;
            for (size_t i = 0; i + k <= stream.size(); ++i) {
                bool hit = true;
                for (size_t j = 0; j < k && hit; ++j) hit = stream[i + j].text == e.ngram[j];
                if (hit)
                    out.push_back({pattern_kind::ngram, static_cast<int>(id),
                                   {stream[i].begin, stream[i + k - 1].end}});
            }
        }
    }

    if (bl.regex_gate) {
        std::cmatch gate;
        if (std::regex_search(text.data(), text.data() + text.size(), gate, *bl.regex_gate)) {
            // Walk each expression separately so ties and occurrence order stay
            // well defined; leftmost non-overlapping matches per expression.
            for (size_t r = 0; r < bl.regexes.size(); ++r) {
                const char* base = text.data();
                const char* end = text.data() + text.size();
                const char* cur = base;
                std::cmatch m;
                while (cur < end &&
                       std::regex_search(cur, end, m, bl.regexes[r],
                                         cur == base
                                             ? std::regex_constants::match_default
                                             : std::regex_constants::match_prev_avail)) {
                    size_t b = static_cast<size_t>(cur - base) + m.position(0);
                    size_t len = static_cast<size_t>(m.length(0));
                    out.push_back({pattern_kind::regex, bl.regex_ids[r], {b, b + len}});
                    cur = base + b + (len > 0 ? len : 1);
                }
            }
        }
    }
    return out;
}

size_t char_to_token(const std::vector<text_span>& token_spans, size_t pos) {
    for (size_t i = 0; i < token_spans.size(); ++i)
        if (pos >= token_spans[i].begin && pos < token_spans[i].end) return i;
    throw internal_error("char_to_token: position " + std::to_string(pos) +
                         " outside every token span");
}

std::optional<violation> scan(const banlist& bl, std::string_view text,
                              const std::vector<text_span>& token_spans,
                              const ignore_set& ignored) {
    std::optional<violation> best;
    for (const pattern_match& m : collect_matches(bl, text)) {
        size_t tok = char_to_token(token_spans, m.span.begin);
        if (ignored.count({tok, m.pattern_id})) continue;
        bool better = false;
        if (!best) {
            better = true;
        } else if (m.span.begin != best->span.begin) {
            better = m.span.begin < best->span.begin;
        } else {
            size_t blen = best->span.end - best->span.begin;
            size_t mlen = m.span.end - m.span.begin;
            better = mlen != blen ? mlen > blen
                                  : static_cast<int>(m.kind) < static_cast<int>(best->kind);
        }
        if (better) best = violation{m.kind, m.pattern_id, m.span, tok};
    }
    return best;
}

banlist load_banlist_json(const std::string& path, size_t min_word_len) {
    std::ifstream in(path);
    if (!in) throw data_error("banlist: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw data_error("banlist: " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw data_error("banlist: " + path + " must hold a JSON object");
    static const std::unordered_set<std::string> known = {"slop_phrases", "ngrams",
                                                          "regex_patterns", "whitelist"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key))
            throw data_error("banlist: " + path + " has unknown key \"" + key + "\"");

    auto strings = [&](const char* key) {
        std::vector<std::string> v;
        if (j.contains(key)) {
            if (!j[key].is_array())
                throw data_error("banlist: key \"" + std::string(key) + "\" must be a list");
            for (const auto& item : j[key]) v.push_back(item.get<std::string>());
        }
        return v;
    };

    std::vector<std::vector<std::string>> ngrams;
    for (const auto& s : strings("ngrams")) {
        std::istringstream words(s);
        std::vector<std::string> tuple;
        std::string w;
        while (words >> w) tuple.push_back(w);
        ngrams.push_back(std::move(tuple));
    }
    return compile_banlist(strings("slop_phrases"), ngrams, strings("regex_patterns"),
                           strings("whitelist"), min_word_len);
}

void save_banlist_json(const banlist& bl, const std::string& path) {
    nlohmann::json j;
    j["slop_phrases"] = nlohmann::json::array();
    j["ngrams"] = nlohmann::json::array();
    j["regex_patterns"] = nlohmann::json::array();
    j["whitelist"] = bl.whitelist;
    for (const auto& e : bl.entries) {
        switch (e.kind) {
            case pattern_kind::phrase: j["slop_phrases"].push_back(e.phrase); break;
            case pattern_kind::ngram: j["ngrams"].push_back(join_words(e.ngram)); break;
            case pattern_kind::regex: j["regex_patterns"].push_back(e.regex_source); break;
        }
    }
    std::ofstream out(path);
    if (!out) throw data_error("banlist: cannot write " + path);
    out << j.dump(2) << "\n";
}

banlist extend_banlist(const banlist& bl,
                       const std::vector<std::string>& phrases,
                       const std::vector<std::vector<std::string>>& ngrams) {
    std::vector<std::string> all_phrases, all_regexes;
    std::vector<std::vector<std::string>> all_ngrams;
    for (const auto& e : bl.entries) {
        switch (e.kind) {
            case pattern_kind::phrase: all_phrases.push_back(e.phrase); break;
            case pattern_kind::ngram: all_ngrams.push_back(e.ngram); break;
            case pattern_kind::regex: all_regexes.push_back(e.regex_source); break;
        }
    }
    all_phrases.insert(all_phrases.end(), phrases.begin(), phrases.end());
    all_ngrams.insert(all_ngrams.end(), ngrams.begin(), ngrams.end());
    return compile_banlist(all_phrases, all_ngrams, all_regexes, bl.whitelist,
                           bl.min_word_len, bl.ngram_remove_stopwords);
}

}  // namespace slopguard
