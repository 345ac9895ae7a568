#include "slopguard/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <unordered_map>

#include "json.hpp"
#include "slopguard/dist.hpp"
#include "slopguard/errors.hpp"
#include "slopguard/rng.hpp"

namespace slopguard {

namespace {

void validate_dist(const std::vector<std::pair<std::string, double>>& dist,
                   const std::unordered_map<std::string, int>& vocab,
                   const std::string& where) {
    if (dist.size() < 2)
        throw data_error("mock spec: " + where + " needs at least 2 candidates");
    double total = 0.0;
    for (const auto& [tok, p] : dist) {
        if (!(p > 0.0))
            throw data_error("mock spec: " + where + " has non-positive probability for \"" +
                             tok + "\"");
        if (!vocab.count(tok))
            throw data_error("mock spec: " + where + " references \"" + tok +
                             "\" which is not in the vocabulary");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw data_error("mock spec: " + where + " probabilities sum to " +
                         std::to_string(total) + ", expected 1");
}

}  // namespace

void mock_model_spec::validate() const {
    if (vocabulary.empty()) throw data_error("mock spec: empty vocabulary");
    std::unordered_map<std::string, int> vocab;
    for (size_t i = 0; i < vocabulary.size(); ++i) {
        if (vocabulary[i].empty()) throw data_error("mock spec: empty vocabulary token");
        if (!vocab.emplace(vocabulary[i], static_cast<int>(i)).second)
            throw data_error("mock spec: duplicate vocabulary token \"" + vocabulary[i] + "\"");
    }
    validate_dist(default_dist, vocab, "default distribution");
    for (size_t r = 0; r < rules.size(); ++r)
        validate_dist(rules[r].dist, vocab, "rule " + std::to_string(r) + " (context \"" +
                                                rules[r].context + "\")");
    if (!eos_token.empty() && !vocab.count(eos_token))
        throw data_error("mock spec: eos token \"" + eos_token + "\" not in vocabulary");
}

mock_backend::mock_backend(mock_model_spec spec) : spec_(std::move(spec)) {
    spec_.validate();
}

chunk_response mock_backend::next_chunk(const chunk_request& req) {
    std::unordered_map<std::string, int> vocab;
    for (size_t i = 0; i < spec_.vocabulary.size(); ++i)
        vocab.emplace(spec_.vocabulary[i], static_cast<int>(i));

    std::mt19937_64 rng(derive_seed(req.seed, hash_bytes(req.prompt)));

    chunk_response resp;
    std::string text = req.prompt;
    std::string generated;

    for (int step = 0; step < req.max_tokens; ++step) {
        const std::vector<std::pair<std::string, double>>* table = &spec_.default_dist;
        size_t best_len = 0;
        bool found = false;
        for (const auto& rule : spec_.rules) {
            if (!text.ends_with(rule.context)) continue;
            if (!found || rule.context.size() > best_len) {
                table = &rule.dist;
                best_len = rule.context.size();
                found = true;
            }
        }

        std::vector<weighted_token> dist;
        dist.reserve(table->size());
        for (const auto& [tok, p] : *table)
            dist.push_back({tok, vocab.at(tok), p});
        sort_desc(dist);

        // endpoint-style candidate list: raw model distribution, top N
        std::vector<token_candidate> candidates;
        for (size_t i = 0; i < dist.size() && i < static_cast<size_t>(req.top_logprobs); ++i)
            candidates.push_back({dist[i].text, dist[i].id, std::log(dist[i].prob)});

        weighted_token picked;
        if (spec_.deterministic) {
            picked = dist.front();
        } else {
            std::vector<weighted_token> filtered = dist;
            apply_min_p(filtered, req.sampling.min_p);
            renormalize(filtered);
            apply_temperature(filtered, req.sampling.temperature);
            apply_top_k(filtered, req.sampling.top_k);
            apply_top_p(filtered, req.sampling.top_p);
            renormalize(filtered);
            picked = draw(filtered, next_uniform(rng));
        }

        if (!spec_.eos_token.empty() && picked.text == spec_.eos_token) {
            resp.finish = finish_reason::eos;
            normalize_response(resp);
            return resp;
        }

        chunk_token out;
        out.text = picked.text;
        out.id = picked.id;
        out.candidates = std::move(candidates);
        resp.tokens.push_back(std::move(out));
        text += picked.text;
        generated += picked.text;

        bool stopped = false;
        for (const auto& stop : req.stop_sequences)
            if (!stop.empty() && generated.find(stop) != std::string::npos) stopped = true;
        if (stopped) {
            resp.finish = finish_reason::stop;
            normalize_response(resp);
            return resp;
        }
    }
    resp.finish = finish_reason::length;
    normalize_response(resp);
    return resp;
}

mock_model_spec load_mock_spec_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("mock spec: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw data_error("mock spec: " + path + " is not valid JSON: " + e.what());
    }
    mock_model_spec spec;
    spec.vocabulary = j.value("vocabulary", std::vector<std::string>{});
    spec.eos_token = j.value("eos_token", std::string{});
    spec.deterministic = j.value("deterministic", false);
    auto read_dist = [](const nlohmann::json& d) {
        std::vector<std::pair<std::string, double>> out;
        for (const auto& [tok, p] : d.items()) out.emplace_back(tok, p.get<double>());
        // json objects iterate in key order; keep that, validation does not care
        return out;
    };
    if (j.contains("default")) spec.default_dist = read_dist(j["default"]);
    if (j.contains("rules"))
        for (const auto& r : j["rules"])
            spec.rules.push_back({r.at("context").get<std::string>(), read_dist(r.at("dist"))});
    spec.validate();
    return spec;
}

void save_mock_spec_json(const mock_model_spec& spec, const std::string& path) {
    nlohmann::json j;
    j["vocabulary"] = spec.vocabulary;
    if (!spec.eos_token.empty()) j["eos_token"] = spec.eos_token;
    if (spec.deterministic) j["deterministic"] = true;
    nlohmann::json dflt = nlohmann::json::object();
    for (const auto& [tok, p] : spec.default_dist) dflt[tok] = p;
    j["default"] = dflt;
    j["rules"] = nlohmann::json::array();
    for (const auto& r : spec.rules) {
        nlohmann::json d = nlohmann::json::object();
        for (const auto& [tok, p] : r.dist) d[tok] = p;
        j["rules"].push_back({{"context", r.context}, {"dist", d}});
    }
    std::ofstream out(path);
    if (!out) throw data_error("mock spec: cannot write " + path);
    out << j.dump(2) << "\n";
}

}  // namespace slopguard
