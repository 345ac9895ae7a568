#pragma once

// Client for OpenAI-style completion endpoints that expose per-token
// top logprobs (vLLM, llama.cpp server, and friends).  Transport failures
// and 5xx replies are retried with capped exponential backoff; anything the
// server answers with 4xx, or a reply missing logprobs, is fatal.

#include <cstdint>
#include <semaphore>
#include <string>

#include "slopguard/backend.hpp"

namespace slopguard {

struct http_backend_config {
    std::string base_url;       // e.g. "http://localhost:8000/v1"
    std::string api_key;
    std::string model;
    double timeout_seconds = 480.0;
    int max_attempts = 5;
    int backoff_initial_ms = 250;  // doubles per retry, capped
    int backoff_cap_ms = 8000;
    int max_in_flight = 50;
};

class http_backend : public backend {
public:
    explicit http_backend(http_backend_config cfg);
    chunk_response next_chunk(const chunk_request& req) override;

private:
    http_backend_config cfg_;
    std::string host_;       // scheme://host:port
    std::string path_prefix_;
    std::counting_semaphore<> slots_;
};

// Exposed for tests: turns one completions-reply choice into chunk tokens.
chunk_response parse_completions_reply(const std::string& body,
                                       const chunk_request& req);

}  // namespace slopguard
