#pragma once

#include <cstdint>
#include <random>
#include <string_view>

// Seeding scheme used across the toolkit.  Every run has one master seed.
// Independent streams are derived from it with splitmix64 so that adding a
// consumer never shifts the draws seen by another:
//
//   per-prompt seed     = derive_seed(master, prompt_index)
//   backend request     = derive_seed(prompt_seed, stream_backend)
//   resampling draws    = derive_seed(prompt_seed, stream_resample)
//   dataset thinning    = derive_seed(master, stream_regularize)

namespace slopguard {

inline constexpr uint64_t stream_backend    = 0x6261636b656e6421ull;
inline constexpr uint64_t stream_resample   = 0x726573616d706c65ull;
inline constexpr uint64_t stream_regularize = 0x7265677572697a65ull;
inline constexpr uint64_t stream_mock_logit = 0x6d6f636b6c6f6769ull;

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream));
}

// FNV-1a, used to fold strings (e.g. the request prompt) into a seed.
inline uint64_t hash_bytes(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Uniform in [0, 1).  std::uniform_real_distribution is not pinned across
// standard library versions, so draws are built from raw engine output.
inline double next_uniform(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

}  // namespace slopguard
