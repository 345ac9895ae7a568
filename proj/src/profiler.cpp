#include "slopguard/profiler.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "slopguard/errors.hpp"
#include "slopguard/text.hpp"

namespace slopguard {

const char* gram_kind_name(gram_kind k) {
    switch (k) {
        case gram_kind::word: return "word";
        case gram_kind::bigram: return "bigram";
        case gram_kind::trigram: return "trigram";
    }
    throw internal_error("unknown gram kind");
}

size_t gram_arity(gram_kind k) {
    switch (k) {
        case gram_kind::word: return 1;
        case gram_kind::bigram: return 2;
        case gram_kind::trigram: return 3;
    }
    throw internal_error("unknown gram kind");
}

double freq_table::per_million(const std::string& pattern) const {
    if (total == 0) return 0.0;
    auto it = entries.find(pattern);
    if (it == entries.end()) return 0.0;
    return static_cast<double>(it->second.count) / static_cast<double>(total) * 1e6;
}

freq_table count_patterns(const std::vector<corpus_doc>& corpus, gram_kind kind,
                          int min_word_len, bool remove_stopwords) {
    if (corpus.empty()) throw data_error("profiler: empty corpus");

    freq_table table;
    table.kind = kind;
    table.min_word_len = min_word_len;
    table.stopwords_removed = remove_stopwords;

    const size_t arity = gram_arity(kind);
    for (const auto& doc : corpus) {
        std::vector<word_span> words = content_words(doc.text, min_word_len, remove_stopwords);
        if (words.size() + 1 <= arity) continue;
        size_t slots = words.size() + 1 - arity;
        table.total += slots;
        for (size_t i = 0; i < slots; ++i) {
            std::string key = words[i].text;
            for (size_t j = 1; j < arity; ++j) {
                key += ' ';
                key += words[i + j].text;
            }
            freq_entry& e = table.entries[key];
            e.count += 1;
            e.prompts.insert(doc.prompt_id);
        }
    }
    return table;
}

freq_table merge_tables(const freq_table& a, const freq_table& b) {
    if (a.kind != b.kind || a.min_word_len != b.min_word_len ||
        a.stopwords_removed != b.stopwords_removed) {
        throw internal_error("profiler: merging tables with different settings");
    }
    freq_table out = a;
    out.total += b.total;
    for (const auto& [pattern, entry] : b.entries) {
        freq_entry& e = out.entries[pattern];
        e.count += entry.count;
        e.prompts.insert(entry.prompts.begin(), entry.prompts.end());
    }
    return out;
}

baseline_table load_baseline_tsv(const std::string& path, gram_kind kind) {
    std::ifstream in(path);
    if (!in) throw data_error("profiler: cannot open baseline: " + path);
    baseline_table out;
    out.kind = kind;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno += 1;
        if (line.empty() || line[0] == '#') continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            std::ostringstream msg;
            msg << path << ":" << lineno << ": expected pattern<TAB>per_million";
            throw data_error(msg.str());
        }
        std::string pattern = to_lower(line.substr(0, tab));
        double value = 0.0;
        try {
            value = std::stod(line.substr(tab + 1));
        } catch (const std::exception&) {
            std::ostringstream msg;
            msg << path << ":" << lineno << ": bad frequency value";
            throw data_error(msg.str());
        }
        if (value < 0.0) {
            std::ostringstream msg;
            msg << path << ":" << lineno << ": negative frequency";
            throw data_error(msg.str());
        }
        out.per_million[pattern] = value;
    }
    return out;
}

std::vector<profile_entry> compute_ratios(const freq_table& llm, const baseline_table& human) {
    if (llm.kind != human.kind) {
        throw internal_error("profiler: ratio of tables with different kinds");
    }
    std::vector<profile_entry> nodict;
    std::vector<profile_entry> dict;
    for (const auto& [pattern, entry] : llm.entries) {
        profile_entry pe;
        pe.pattern = pattern;
        pe.kind = llm.kind;
        pe.count = entry.count;
        pe.n_prompts = static_cast<int>(entry.prompts.size());
        pe.f_llm = llm.per_million(pattern);
        auto it = human.per_million.find(pattern);
        if (it != human.per_million.end() && it->second > 0.0) {
            pe.dict = true;
            pe.f_human = it->second;
            pe.ratio = pe.f_llm / it->second;
            dict.push_back(std::move(pe));
        } else {
            pe.dict = false;
            nodict.push_back(std::move(pe));
        }
    }
    std::sort(nodict.begin(), nodict.end(), [](const profile_entry& a, const profile_entry& b) {
        if (a.f_llm != b.f_llm) return a.f_llm > b.f_llm;
        return a.pattern < b.pattern;
    });
    std::sort(dict.begin(), dict.end(), [](const profile_entry& a, const profile_entry& b) {
        if (*a.ratio != *b.ratio) return *a.ratio > *b.ratio;
        return a.pattern < b.pattern;
    });
    std::vector<profile_entry> out = std::move(nodict);
    out.insert(out.end(), dict.begin(), dict.end());
    return out;
}

namespace {

std::vector<std::string> top_patterns(const std::vector<profile_entry>& ranked, size_t n,
                                      int min_prompts) {
    std::vector<std::string> out;
    for (const auto& e : ranked) {
        if (out.size() >= n) break;
        if (e.n_prompts < min_prompts) continue;
        out.push_back(e.pattern);
    }
    return out;
}

}  // namespace

slop_profile build_profile(const freq_table& words, const freq_table& bigrams,
                           const freq_table& trigrams, const baseline_table& word_baseline,
                           const baseline_table& ngram_baseline, const fingerprint_sizes& sizes,
                           int min_ngram_prompts) {
    if (words.kind != gram_kind::word || bigrams.kind != gram_kind::bigram ||
        trigrams.kind != gram_kind::trigram) {
        throw internal_error("profiler: table kinds mixed up");
    }
    baseline_table bigram_base = ngram_baseline;
    bigram_base.kind = gram_kind::bigram;
    baseline_table trigram_base = ngram_baseline;
    trigram_base.kind = gram_kind::trigram;

    slop_profile p;
    p.words = compute_ratios(words, word_baseline);
    p.bigrams = compute_ratios(bigrams, bigram_base);
    p.trigrams = compute_ratios(trigrams, trigram_base);
    p.fingerprint.words = top_patterns(p.words, sizes.words, 0);
    p.fingerprint.bigrams = top_patterns(p.bigrams, sizes.bigrams, min_ngram_prompts);
    p.fingerprint.trigrams = top_patterns(p.trigrams, sizes.trigrams, min_ngram_prompts);
    return p;
}

namespace {

std::vector<std::string> split_on_spaces(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

struct pick_state {
    std::set<std::string> taken;  // across classes and kinds, for dedup
};

void pick(const std::vector<profile_entry>& ranked, bool want_dict, int quota,
          const std::set<std::string>& whitelisted, const std::set<std::string>& banned,
          uint64_t min_count, int min_prompts, pick_state& st,
          std::vector<const profile_entry*>& out) {
    if (quota <= 0) return;
    int picked = 0;
    for (const auto& e : ranked) {
        if (picked >= quota) break;
        if (e.dict != want_dict) continue;
        if (e.count < min_count) continue;
        if (e.kind != gram_kind::word && e.n_prompts < min_prompts) continue;
        if (whitelisted.count(e.pattern) > 0) continue;
        if (banned.count(e.pattern) > 0) continue;
        if (st.taken.count(e.pattern) > 0) continue;
        st.taken.insert(e.pattern);
        out.push_back(&e);
        picked += 1;
    }
}

}  // namespace

banlist_additions build_banlist(const slop_profile& profile, const banlist_quotas& quotas,
                                const std::vector<std::string>& whitelist,
                                const banlist& already, uint64_t min_count,
                                int min_ngram_prompts) {
    std::set<std::string> wl;
    for (const auto& w : whitelist) wl.insert(to_lower(w));

    std::set<std::string> banned;
    for (const auto& e : already.entries) {
        if (e.kind == pattern_kind::phrase) banned.insert(e.phrase);
        if (e.kind == pattern_kind::ngram) {
            std::string joined;
            for (size_t i = 0; i < e.ngram.size(); ++i) {
                if (i) joined += ' ';
                joined += e.ngram[i];
            }
            banned.insert(joined);
        }
    }

    pick_state st;
    std::vector<const profile_entry*> words, bigrams, trigrams;
    // nodict blocks sit ahead of dict blocks inside each ranked list, so a
    // single forward walk per class keeps the intended order
    pick(profile.words, false, quotas.nodict_words, wl, banned, min_count, min_ngram_prompts,
         st, words);
    pick(profile.words, true, quotas.dict_words, wl, banned, min_count, min_ngram_prompts, st,
         words);
    pick(profile.bigrams, false, quotas.nodict_bigrams, wl, banned, min_count,
         min_ngram_prompts, st, bigrams);
    pick(profile.bigrams, true, quotas.dict_bigrams, wl, banned, min_count, min_ngram_prompts,
         st, bigrams);
    pick(profile.trigrams, false, quotas.nodict_trigrams, wl, banned, min_count,
         min_ngram_prompts, st, trigrams);
    pick(profile.trigrams, true, quotas.dict_trigrams, wl, banned, min_count,
         min_ngram_prompts, st, trigrams);

    banlist_additions out;
    for (const auto* e : words) out.words.push_back(e->pattern);
    for (const auto* e : bigrams) out.ngrams.push_back(split_on_spaces(e->pattern));
    for (const auto* e : trigrams) out.ngrams.push_back(split_on_spaces(e->pattern));
    return out;
}

namespace {

void accumulate_rank_distance(const std::vector<std::string>& a,
                              const std::vector<std::string>& b, double& sum, size_t& n) {
    std::map<std::string, size_t> rank_a, rank_b;
    for (size_t i = 0; i < a.size(); ++i) rank_a[a[i]] = i + 1;
    for (size_t i = 0; i < b.size(); ++i) rank_b[b[i]] = i + 1;
    size_t absent_a = a.size() + 1;
    size_t absent_b = b.size() + 1;
    std::set<std::string> all;
    for (const auto& p : a) all.insert(p);
    for (const auto& p : b) all.insert(p);
    for (const auto& p : all) {
        auto ia = rank_a.find(p);
        auto ib = rank_b.find(p);
        double ra = static_cast<double>(ia == rank_a.end() ? absent_a : ia->second);
        double rb = static_cast<double>(ib == rank_b.end() ? absent_b : ib->second);
        sum += std::abs(ra - rb);
        n += 1;
    }
}

}  // namespace

double fingerprint_distance(const slop_fingerprint& a, const slop_fingerprint& b) {
    double sum = 0.0;
    size_t n = 0;
    accumulate_rank_distance(a.words, b.words, sum, n);
    accumulate_rank_distance(a.bigrams, b.bigrams, sum, n);
    accumulate_rank_distance(a.trigrams, b.trigrams, sum, n);
    if (n == 0) return 0.0;
    return sum / static_cast<double>(n);
}

std::string distance_matrix_csv(const std::vector<std::string>& names,
                                const std::vector<slop_fingerprint>& fingerprints) {
    if (names.size() != fingerprints.size()) {
        throw internal_error("profiler: names and fingerprints differ in length");
    }
    std::ostringstream out;
    out << "model";
    for (const auto& n : names) out << "," << n;
    out << "\n";
    for (size_t i = 0; i < names.size(); ++i) {
        out << names[i];
        for (size_t j = 0; j < names.size(); ++j) {
            double d = i == j ? 0.0 : fingerprint_distance(fingerprints[i], fingerprints[j]);
            out << "," << d;
        }
        out << "\n";
    }
    return out.str();
}

std::vector<corpus_doc> load_corpus_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("profiler: cannot open corpus: " + path);
    std::vector<corpus_doc> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno += 1;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            std::ostringstream msg;
            msg << path << ":" << lineno << ": bad JSON: " << e.what();
            throw data_error(msg.str());
        }
        if (!j.is_object() || !j.contains("prompt_id") || !j.contains("text") ||
            !j["text"].is_string()) {
            std::ostringstream msg;
            msg << path << ":" << lineno << ": expected {prompt_id, text}";
            throw data_error(msg.str());
        }
        corpus_doc doc;
        if (j["prompt_id"].is_string()) {
            doc.prompt_id = j["prompt_id"].get<std::string>();
        } else if (j["prompt_id"].is_number_integer()) {
            doc.prompt_id = std::to_string(j["prompt_id"].get<int64_t>());
        } else {
            std::ostringstream msg;
            msg << path << ":" << lineno << ": prompt_id must be a string or integer";
            throw data_error(msg.str());
        }
        doc.text = j["text"].get<std::string>();
        out.push_back(std::move(doc));
    }
    return out;
}

void save_corpus_jsonl(const std::vector<corpus_doc>& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("profiler: cannot open for writing: " + path);
    for (const auto& doc : corpus) {
        nlohmann::ordered_json j;
        j["prompt_id"] = doc.prompt_id;
        j["text"] = doc.text;
        out << j.dump() << "\n";
    }
    if (!out) throw data_error("profiler: write failed: " + path);
}

namespace {

nlohmann::ordered_json entries_to_json(const std::vector<profile_entry>& entries) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        nlohmann::ordered_json j;
        j["pattern"] = e.pattern;
        j["f_llm"] = e.f_llm;
        if (e.f_human.has_value()) j["f_human"] = *e.f_human;
        if (e.ratio.has_value()) j["ratio"] = *e.ratio;
        j["class"] = e.dict ? "dict" : "nodict";
        j["count"] = e.count;
        j["n_prompts"] = e.n_prompts;
        arr.push_back(std::move(j));
    }
    return arr;
}

}  // namespace

std::string profile_to_json(const slop_profile& profile) {
    nlohmann::ordered_json j;
    j["words"] = entries_to_json(profile.words);
    j["bigrams"] = entries_to_json(profile.bigrams);
    j["trigrams"] = entries_to_json(profile.trigrams);
    nlohmann::ordered_json fp;
    fp["words"] = profile.fingerprint.words;
    fp["bigrams"] = profile.fingerprint.bigrams;
    fp["trigrams"] = profile.fingerprint.trigrams;
    j["fingerprint"] = std::move(fp);
    return j.dump(2);
}

}  // namespace slopguard
