#pragma once

// Table-driven stand-in for a completion endpoint.  A spec maps context
// suffixes to next-token distributions; the longest suffix matching the
// accumulated text wins, and contexts of equal length resolve in listed
// order.  Everything is a pure function of (spec, request seed, prompt), so
// runs replay bit-identically.

#include <string>
#include <utility>
#include <vector>

#include "slopguard/backend.hpp"

namespace slopguard {

struct mock_rule {
    std::string context;  // suffix of the accumulated text; "" matches anywhere
    std::vector<std::pair<std::string, double>> dist;
};

struct mock_model_spec {
    std::vector<std::string> vocabulary;  // token id = index
    std::vector<mock_rule> rules;
    std::vector<std::pair<std::string, double>> default_dist;
    std::string eos_token;    // "" = never emitted
    bool deterministic = false;  // true: argmax instead of sampling

    // Throws data_error unless every distribution has >= 2 entries, sums to
    // one within 1e-9, and only references vocabulary tokens.
    void validate() const;
};

mock_model_spec load_mock_spec_json(const std::string& path);
void save_mock_spec_json(const mock_model_spec& spec, const std::string& path);

class mock_backend : public backend {
public:
    explicit mock_backend(mock_model_spec spec);
    chunk_response next_chunk(const chunk_request& req) override;

    const mock_model_spec& spec() const { return spec_; }

private:
    mock_model_spec spec_;
};

}  // namespace slopguard
