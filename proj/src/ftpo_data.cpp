#include "slopguard/ftpo_data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "slopguard/errors.hpp"
#include "slopguard/rng.hpp"

namespace slopguard {

bool ftpo_sample::operator==(const ftpo_sample& other) const {
    auto tok_eq = [](const gen_token& a, const gen_token& b) {
        return a.text == b.text && a.id == b.id;
    };
    if (prompt_text != other.prompt_text) return false;
    if (!tok_eq(rejected, other.rejected)) return false;
    if (chosen.size() != other.chosen.size()) return false;
    for (size_t i = 0; i < chosen.size(); ++i) {
        if (!tok_eq(chosen[i], other.chosen[i])) return false;
    }
    return source.pattern == other.source.pattern &&
           source.generation_id == other.source.generation_id &&
           source.position == other.source.position;
}

namespace {

// would appending this token to the prefix start a banned match inside the
// token's own bytes
bool starts_banned(const banlist& bl, const std::string& prefix, const std::string& token) {
    std::string text = prefix + token;
    std::vector<pattern_match> ms = collect_matches(bl, text);
    for (const auto& m : ms) {
        if (m.span.begin >= prefix.size() && m.span.begin < text.size()) return true;
    }
    return false;
}

}  // namespace

std::optional<ftpo_sample> capture_sample(const backtrack_event& ev, const std::string& prompt,
                                          const banlist& bl,
                                          const std::string& generation_id,
                                          int min_chosen_tokens) {
    if (ev.let_through) return std::nullopt;

    ftpo_sample s;
    s.prompt_text = prompt + ev.generated_prefix;
    s.rejected = ev.rejected;
    s.source.pattern = ev.pattern;
    s.source.generation_id = generation_id;
    s.source.position = ev.position;

    std::set<std::string> seen;
    for (const auto& c : ev.chosen) {
        if (c.text == ev.rejected.text) continue;
        if (!seen.insert(c.text).second) continue;
        if (starts_banned(bl, s.prompt_text, c.text)) continue;
        s.chosen.push_back(c);
    }
    if (static_cast<int>(s.chosen.size()) < min_chosen_tokens) return std::nullopt;
    return s;
}

std::vector<ftpo_sample> regularize_dataset(const std::vector<ftpo_sample>& samples,
                                            double rejected_strength, double chosen_strength,
                                            uint64_t seed) {
    if (!(rejected_strength >= 0.0 && rejected_strength <= 1.0) ||
        !(chosen_strength >= 0.0 && chosen_strength <= 1.0)) {
        throw config_error("regularization strengths must lie in [0, 1]");
    }
    if (samples.empty()) return {};

    // group sizes by rejected text; the smallest group is the uniform target
    std::map<std::string, size_t> group_size;
    for (const auto& s : samples) group_size[s.rejected.text] += 1;
    size_t n_min = samples.size();
    for (const auto& [text, n] : group_size) n_min = std::min(n_min, n);

    // global frequency ranks of chosen-token texts, 1 = most common;
    // ties resolve lexicographically so ranks are stable
    std::map<std::string, size_t> chosen_count;
    for (const auto& s : samples) {
        for (const auto& c : s.chosen) chosen_count[c.text] += 1;
    }
    std::vector<std::pair<std::string, size_t>> by_freq(chosen_count.begin(),
                                                        chosen_count.end());
    std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::map<std::string, size_t> rank_of;
    for (size_t i = 0; i < by_freq.size(); ++i) rank_of[by_freq[i].first] = i + 1;

    std::vector<double> mean_rank(samples.size(), 1.0);
    double max_mean_rank = 1.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        double sum = 0.0;
        for (const auto& c : samples[i].chosen) {
            sum += static_cast<double>(rank_of[c.text]);
        }
        mean_rank[i] = sum / static_cast<double>(samples[i].chosen.size());
        max_mean_rank = std::max(max_mean_rank, mean_rank[i]);
    }

    std::mt19937_64 rng(derive_seed(seed, stream_regularize));
    std::vector<ftpo_sample> kept;
    for (size_t i = 0; i < samples.size(); ++i) {
        // always burn both draws so a sample's outcome is independent of
        // earlier decisions
        double u_rej = next_uniform(rng);
        double u_cho = next_uniform(rng);

        size_t n = group_size[samples[i].rejected.text];
        double p_rej =
            std::pow(static_cast<double>(n_min) / static_cast<double>(n), rejected_strength);
        double p_cho = std::pow(mean_rank[i] / max_mean_rank, chosen_strength);
        if (u_rej < p_rej && u_cho < p_cho) kept.push_back(samples[i]);
    }
    return kept;
}

namespace {

nlohmann::ordered_json token_to_json(const gen_token& t) {
    nlohmann::ordered_json j;
    j["text"] = t.text;
    if (t.id.has_value()) j["id"] = *t.id;
    return j;
}

gen_token token_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
        throw data_error(std::string("dataset: ") + what + " must be {text, id?}");
    }
    gen_token t;
    t.text = j["text"].get<std::string>();
    if (j.contains("id") && !j["id"].is_null()) {
        if (!j["id"].is_number_integer()) {
            throw data_error(std::string("dataset: ") + what + " id must be an integer");
        }
        t.id = j["id"].get<int>();
    }
    return t;
}

}  // namespace

std::string sample_to_jsonl(const ftpo_sample& s) {
    nlohmann::ordered_json j;
    j["prompt_text"] = s.prompt_text;
    j["rejected"] = token_to_json(s.rejected);
    nlohmann::ordered_json ch = nlohmann::ordered_json::array();
    for (const auto& c : s.chosen) ch.push_back(token_to_json(c));
    j["chosen"] = std::move(ch);
    nlohmann::ordered_json src;
    src["pattern"] = s.source.pattern;
    src["generation_id"] = s.source.generation_id;
    src["position"] = s.source.position;
    j["source"] = std::move(src);
    return j.dump();
}

ftpo_sample sample_from_jsonl(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("dataset: bad JSON: ") + e.what());
    }
    if (!j.is_object()) throw data_error("dataset: line is not an object");
    if (!j.contains("prompt_text") || !j["prompt_text"].is_string()) {
        throw data_error("dataset: missing prompt_text");
    }
    if (!j.contains("rejected") || !j.contains("chosen") || !j["chosen"].is_array()) {
        throw data_error("dataset: missing rejected or chosen");
    }

    ftpo_sample s;
    s.prompt_text = j["prompt_text"].get<std::string>();
    s.rejected = token_from_json(j["rejected"], "rejected");
    std::set<std::string> seen;
    for (const auto& c : j["chosen"]) {
        gen_token t = token_from_json(c, "chosen entry");
        if (t.text == s.rejected.text) {
            throw data_error("dataset: rejected token listed among chosen");
        }
        if (!seen.insert(t.text).second) {
            throw data_error("dataset: duplicate chosen token");
        }
        s.chosen.push_back(std::move(t));
    }
    if (s.chosen.empty()) throw data_error("dataset: chosen list is empty");
    if (j.contains("source") && j["source"].is_object()) {
        const auto& src = j["source"];
        if (src.contains("pattern") && src["pattern"].is_string()) {
            s.source.pattern = src["pattern"].get<std::string>();
        }
        if (src.contains("generation_id") && src["generation_id"].is_string()) {
            s.source.generation_id = src["generation_id"].get<std::string>();
        }
        if (src.contains("position") && src["position"].is_number_unsigned()) {
            s.source.position = src["position"].get<size_t>();
        }
    }
    return s;
}

void write_dataset(const std::vector<ftpo_sample>& samples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("dataset: cannot open for writing: " + path);
    for (const auto& s : samples) out << sample_to_jsonl(s) << "\n";
    if (!out) throw data_error("dataset: write failed: " + path);
}

std::vector<ftpo_sample> read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("dataset: cannot open: " + path);
    std::vector<ftpo_sample> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno += 1;
        if (line.empty()) continue;
        try {
            out.push_back(sample_from_jsonl(line));
        } catch (const data_error& e) {
            std::ostringstream msg;
            msg << path << ":" << lineno << ": " << e.what();
            throw data_error(msg.str());
        }
    }
    return out;
}

}  // namespace slopguard
