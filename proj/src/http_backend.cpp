#include "slopguard/http_backend.hpp"

#include <chrono>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "slopguard/errors.hpp"

namespace slopguard {

namespace {

std::string excerpt(const std::string& body) {
    return body.size() <= 200 ? body : body.substr(0, 200) + "...";
}

}  // namespace

http_backend::http_backend(http_backend_config cfg)
    : cfg_(std::move(cfg)), slots_(std::max(1, cfg_.max_in_flight)) {
    const std::string& url = cfg_.base_url;
    size_t scheme = url.find("://");
    if (scheme == std::string::npos)
        throw config_error("generation_api_base_url must start with http:// or https://");
    size_t path = url.find('/', scheme + 3);
    if (path == std::string::npos) {
        host_ = url;
        path_prefix_ = "";
    } else {
        host_ = url.substr(0, path);
        path_prefix_ = url.substr(path);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

chunk_response parse_completions_reply(const std::string& body, const chunk_request& req) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw backend_reply_error("endpoint reply is not JSON (" + std::string(e.what()) +
                                  "): " + excerpt(body));
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
        throw backend_reply_error("endpoint reply has no choices: " + excerpt(body));
    const nlohmann::json& choice = j["choices"][0];

    if (!choice.contains("logprobs") || choice["logprobs"].is_null())
        throw config_error(
            "endpoint does not return logprobs; token-level candidates are required "
            "(enable logprobs / top_logprobs on the server)");
    const nlohmann::json& lp = choice["logprobs"];
    if (!lp.contains("tokens") || !lp.contains("top_logprobs"))
        throw backend_reply_error("logprobs object lacks tokens/top_logprobs: " +
                                  excerpt(body));

    chunk_response resp;
    const auto& tokens = lp["tokens"];
    const auto& tops = lp["top_logprobs"];
    const auto& token_lps = lp.contains("token_logprobs") ? lp["token_logprobs"]
                                                          : nlohmann::json::array();
    for (size_t i = 0; i < tokens.size(); ++i) {
        chunk_token tok;
        tok.text = tokens[i].get<std::string>();
        if (i < tops.size() && tops[i].is_object()) {
            for (const auto& [cand, val] : tops[i].items())
                tok.candidates.push_back({cand, std::nullopt, val.get<double>()});
        }
        if (tok.candidates.empty()) {
            if (i < token_lps.size() && token_lps[i].is_number())
                tok.candidates.push_back({tok.text, std::nullopt, token_lps[i].get<double>()});
            else
                throw backend_reply_error("position " + std::to_string(i) +
                                          " has no candidates: " + excerpt(body));
        }
        resp.tokens.push_back(std::move(tok));
    }

    std::string reason = choice.value("finish_reason", "length");
    if (reason == "length") {
        resp.finish = finish_reason::length;
    } else {
        // completions endpoints report "stop" for both stop sequences and
        // end-of-sequence; a client-side re-check tells them apart
        std::string text;
        for (const auto& t : resp.tokens) text += t.text;
        bool matched = false;
        for (const auto& s : req.stop_sequences)
            if (!s.empty() && text.find(s) != std::string::npos) matched = true;
        resp.finish = matched ? finish_reason::stop : finish_reason::eos;
    }
    normalize_response(resp);
    return resp;
}

chunk_response http_backend::next_chunk(const chunk_request& req) {
    nlohmann::json payload;
    if (!cfg_.model.empty()) payload["model"] = cfg_.model;
    payload["prompt"] = req.prompt;
    payload["max_tokens"] = req.max_tokens;
    payload["temperature"] = req.sampling.temperature;
    payload["top_p"] = req.sampling.top_p;
    if (req.sampling.top_k > 0) payload["top_k"] = req.sampling.top_k;
    if (req.sampling.min_p > 0) payload["min_p"] = req.sampling.min_p;
    payload["logprobs"] = req.top_logprobs;
    payload["seed"] = req.seed;
    payload["stream"] = false;
    if (!req.stop_sequences.empty()) payload["stop"] = req.stop_sequences;
    const std::string body = payload.dump();
    const std::string path = path_prefix_ + "/completions";

    slots_.acquire();
    struct release_guard {
        std::counting_semaphore<>& s;
        ~release_guard() { s.release(); }
    } guard{slots_};

    std::string last_failure;
    int backoff = cfg_.backoff_initial_ms;
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
        httplib::Client client(host_);
        client.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));
        client.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));
        client.set_write_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));
        httplib::Headers headers;
        if (!cfg_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + cfg_.api_key);

        auto res = client.Post(path, headers, body, "application/json");
        if (res && res->status >= 200 && res->status < 300) {
            chunk_response resp = parse_completions_reply(res->body, req);
            resp.attempts = attempt;
            return resp;
        }
        if (res && res->status >= 400 && res->status < 500)
            throw backend_reply_error("endpoint returned HTTP " + std::to_string(res->status) +
                                      ": " + excerpt(res->body));
        last_failure = res ? "HTTP " + std::to_string(res->status)
                           : "transport: " + httplib::to_string(res.error());
        if (attempt < cfg_.max_attempts) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff = std::min(backoff * 2, cfg_.backoff_cap_ms);
        }
    }
    throw transport_error("request to " + host_ + path + " failed after " +
                              std::to_string(cfg_.max_attempts) + " attempts (" +
                              last_failure + ")",
                          cfg_.max_attempts);
}

}  // namespace slopguard
