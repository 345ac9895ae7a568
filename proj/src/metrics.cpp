#include "slopguard/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "slopguard/errors.hpp"
#include "slopguard/text.hpp"

namespace slopguard {

namespace {

struct match_density {
    uint64_t matches = 0;
    uint64_t bytes = 0;

    double per_1000() const {
        if (bytes == 0) return 0.0;
        return static_cast<double>(matches) / static_cast<double>(bytes) * 1000.0;
    }
};

match_density banned_density(const std::vector<std::string>& corpus, const banlist& bl) {
    match_density d;
    for (const auto& text : corpus) {
        d.bytes += text.size();
        d.matches += collect_matches(bl, text).size();
    }
    return d;
}

}  // namespace

suppression_report suppression_rate(const std::vector<std::string>& baseline_corpus,
                                    const std::vector<std::string>& treated_corpus,
                                    const banlist& bl) {
    if (baseline_corpus.empty() || treated_corpus.empty()) {
        throw data_error("metrics: suppression needs non-empty corpora");
    }
    suppression_report r;
    r.baseline_per_1000 = banned_density(baseline_corpus, bl).per_1000();
    r.treated_per_1000 = banned_density(treated_corpus, bl).per_1000();
    if (r.baseline_per_1000 == 0.0) {
        r.baseline_zero = true;
        r.percent = 0.0;
        return r;
    }
    r.percent = 100.0 * (1.0 - r.treated_per_1000 / r.baseline_per_1000);
    r.percent = std::clamp(r.percent, 0.0, 100.0);
    return r;
}

namespace {

// probability that a type with count k is missed by a draw of `draw` from N,
// as the product form of C(N-k, draw) / C(N, draw)
double miss_probability(uint64_t n_total, uint64_t k, uint64_t draw) {
    if (n_total < k + draw) return 0.0;  // cannot avoid the type
    double p = 1.0;
    for (uint64_t i = 0; i < draw; ++i) {
        p *= static_cast<double>(n_total - k - i) / static_cast<double>(n_total - i);
    }
    return p;
}

}  // namespace

diversity_report diversity(const std::vector<std::string>& corpus, size_t mattr_window,
                           size_t hdd_draw) {
    if (corpus.empty()) throw data_error("metrics: empty corpus");
    if (mattr_window == 0 || hdd_draw == 0) {
        throw config_error("metrics: window and draw sizes must be positive");
    }

    std::vector<std::string> stream;  // concatenated across documents
    std::map<std::string, uint64_t> type_counts;
    std::set<std::string> uni, bi, tri;
    uint64_t slots1 = 0, slots2 = 0, slots3 = 0;

    for (const auto& text : corpus) {
        std::vector<word_span> words = split_words(text);
        for (size_t i = 0; i < words.size(); ++i) {
            stream.push_back(words[i].text);
            type_counts[words[i].text] += 1;
            slots1 += 1;
            uni.insert(words[i].text);
            if (i + 1 < words.size()) {
                slots2 += 1;
                bi.insert(words[i].text + ' ' + words[i + 1].text);
            }
            if (i + 2 < words.size()) {
                slots3 += 1;
                tri.insert(words[i].text + ' ' + words[i + 1].text + ' ' + words[i + 2].text);
            }
        }
    }
    if (stream.empty()) throw data_error("metrics: corpus holds no words");

    diversity_report r;
    r.total_words = stream.size();

    // MATTR: mean type-token ratio over every full window, maintained
    // incrementally; short texts fall back to one whole-text window
    if (stream.size() < mattr_window) {
        std::set<std::string> types(stream.begin(), stream.end());
        r.mattr = static_cast<double>(types.size()) / static_cast<double>(stream.size());
        r.mattr_full_text = true;
    } else {
        std::map<std::string, uint64_t> window_counts;
        size_t distinct = 0;
        double ttr_sum = 0.0;
        size_t windows = 0;
        for (size_t i = 0; i < stream.size(); ++i) {
            if (window_counts[stream[i]]++ == 0) distinct += 1;
            if (i + 1 >= mattr_window) {
                ttr_sum += static_cast<double>(distinct) / static_cast<double>(mattr_window);
                windows += 1;
                const std::string& oldest = stream[i + 1 - mattr_window];
                if (--window_counts[oldest] == 0) {
                    window_counts.erase(oldest);
                    distinct -= 1;
                }
            }
        }
        r.mattr = ttr_sum / static_cast<double>(windows);
    }

    r.root_ttr = static_cast<double>(type_counts.size()) /
                 std::sqrt(static_cast<double>(stream.size()));

    uint64_t draw = std::min<uint64_t>(hdd_draw, stream.size());
    double hdd_sum = 0.0;
    for (const auto& [type, count] : type_counts) {
        hdd_sum += 1.0 - miss_probability(stream.size(), count, draw);
    }
    r.hdd = hdd_sum / static_cast<double>(draw);

    r.distinct_1 = slots1 ? static_cast<double>(uni.size()) / static_cast<double>(slots1) : 0.0;
    r.distinct_2 = slots2 ? static_cast<double>(bi.size()) / static_cast<double>(slots2) : 0.0;
    r.distinct_3 = slots3 ? static_cast<double>(tri.size()) / static_cast<double>(slots3) : 0.0;

    r.aggregate =
        (r.mattr + r.root_ttr + r.hdd + r.distinct_1 + r.distinct_2 + r.distinct_3) / 6.0;
    return r;
}

double normalized_aggregate(const diversity_report& treated, const diversity_report& baseline) {
    const double t[6] = {treated.mattr,     treated.root_ttr,   treated.hdd,
                         treated.distinct_1, treated.distinct_2, treated.distinct_3};
    const double b[6] = {baseline.mattr,     baseline.root_ttr,   baseline.hdd,
                         baseline.distinct_1, baseline.distinct_2, baseline.distinct_3};
    double sum = 0.0;
    int n = 0;
    for (int i = 0; i < 6; ++i) {
        if (b[i] == 0.0) continue;
        sum += 100.0 * t[i] / b[i];
        n += 1;
    }
    if (n == 0) return 0.0;
    return sum / static_cast<double>(n);
}

std::string suppression_to_json(const suppression_report& r) {
    nlohmann::ordered_json j;
    j["baseline_per_1000"] = r.baseline_per_1000;
    j["treated_per_1000"] = r.treated_per_1000;
    j["percent"] = r.percent;
    j["baseline_zero"] = r.baseline_zero;
    return j.dump(2);
}

std::string diversity_to_json(const diversity_report& r) {
    nlohmann::ordered_json j;
    j["mattr"] = r.mattr;
    j["root_ttr"] = r.root_ttr;
    j["hdd"] = r.hdd;
    j["distinct_1"] = r.distinct_1;
    j["distinct_2"] = r.distinct_2;
    j["distinct_3"] = r.distinct_3;
    j["aggregate"] = r.aggregate;
    j["mattr_full_text"] = r.mattr_full_text;
    j["total_words"] = r.total_words;
    return j.dump(2);
}

std::string diversity_csv(const std::vector<std::string>& corpus, size_t mattr_window,
                          size_t hdd_draw) {
    std::ostringstream out;
    out << "doc,words,mattr,root_ttr,hdd,distinct_1,distinct_2,distinct_3,aggregate\n";
    for (size_t i = 0; i < corpus.size(); ++i) {
        std::vector<std::string> one = {corpus[i]};
        diversity_report r = diversity(one, mattr_window, hdd_draw);
        out << i << "," << r.total_words << "," << r.mattr << "," << r.root_ttr << ","
            << r.hdd << "," << r.distinct_1 << "," << r.distinct_2 << "," << r.distinct_3
            << "," << r.aggregate << "\n";
    }
    return out.str();
}

}  // namespace slopguard
