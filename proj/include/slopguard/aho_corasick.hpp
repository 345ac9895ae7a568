#pragma once

// Aho-Corasick automaton over raw bytes.  Build once per pattern set, then
// stream text through it to report every occurrence of every pattern,
// including overlaps.  Matching is exact; callers wanting case-insensitive
// behaviour lowercase both sides.

#include <cstdint>
#include <queue>
#include <string_view>
#include <utility>
#include <vector>

namespace slopguard {

class aho_corasick {
public:
    void add(std::string_view pattern, int id) {
        int state = 0;
        for (unsigned char c : pattern) {
            int next = edge(state, c);
            if (next < 0) {
                next = static_cast<int>(nodes_.size());
                nodes_.emplace_back();
                nodes_[state].edges.emplace_back(c, next);
            }
            state = next;
        }
        nodes_[state].out.push_back({id, static_cast<uint32_t>(pattern.size())});
        built_ = false;
    }

    void build() {
        std::queue<int> bfs;
        nodes_[0].fail = 0;
        nodes_[0].out_link = -1;
        for (auto [c, next] : nodes_[0].edges) {
            nodes_[next].fail = 0;
            nodes_[next].out_link = -1;
            bfs.push(next);
        }
        while (!bfs.empty()) {
            int state = bfs.front();
            bfs.pop();
            for (auto [c, next] : nodes_[state].edges) {
                int f = nodes_[state].fail;
                int t;
                while ((t = edge(f, c)) < 0 && f != 0) f = nodes_[f].fail;
                if (t < 0) t = 0;
                nodes_[next].fail = t;
                nodes_[next].out_link = nodes_[t].out.empty() ? nodes_[t].out_link : t;
                bfs.push(next);
            }
        }
        built_ = true;
    }

    // f(pattern_id, begin, end) for every occurrence, end exclusive.
    // Occurrences arrive ordered by end position.
    template <typename F>
    void find_all(std::string_view text, F&& f) const {
        if (!built_ || nodes_.size() == 1) return;
        int state = 0;
        for (size_t i = 0; i < text.size(); ++i) {
            unsigned char c = static_cast<unsigned char>(text[i]);
            int t;
            while ((t = edge(state, c)) < 0 && state != 0) state = nodes_[state].fail;
            state = (t < 0) ? 0 : t;
            int s = nodes_[state].out.empty() ? nodes_[state].out_link : state;
            while (s >= 0) {
                for (const auto& hit : nodes_[s].out)
                    f(hit.first, i + 1 - hit.second, i + 1);
                s = nodes_[s].out_link;
            }
        }
    }

    bool empty() const { return nodes_.size() == 1; }

private:
    struct node {
        std::vector<std::pair<unsigned char, int>> edges;
        std::vector<std::pair<int, uint32_t>> out;  // (pattern id, pattern length)
        int fail = 0;
        int out_link = -1;  // nearest suffix state with output
    };

    int edge(int state, unsigned char c) const {
        for (auto [b, next] : nodes_[state].edges)
            if (b == c) return next;
        return -1;
    }

    std::vector<node> nodes_{1};
    bool built_ = false;
};

}  // namespace slopguard
