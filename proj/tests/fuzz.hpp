#pragma once

#include "zvass/core.hpp"

#include <random>

namespace zvass::testing {

struct Rng {
    std::mt19937_64 gen;
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    int operator()(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
};

inline ZVass random_zvass(Rng& r, int d, int k, int states, int transitions, int lo, int hi) {
    ZVass v(Layout{d, k});
    for (int s = 0; s < states; ++s) v.add_state("s" + std::to_string(s));
    for (int t = 0; t < transitions; ++t) {
        Vec u;
        for (int i = 0; i < d + k; ++i) u.emplace_back(r(lo, hi));
        v.add_transition(r(0, states - 1), u, r(0, states - 1), "t" + std::to_string(t));
    }
    return v;
}

// Random walk that stays valid; returns the trace.
inline Trace random_run(Rng& r, const ZVass& v, Configuration start, int steps) {
    Trace tr;
    tr.configs.push_back(start);
    for (int i = 0; i < steps; ++i) {
        std::vector<std::pair<int, Configuration>> opts;
        for (int t = 0; t < v.num_transitions(); ++t) {
            Configuration nx;
            if (fire(v, tr.configs.back(), t, nx) == Fault::None) opts.emplace_back(t, nx);
        }
        if (opts.empty()) break;
        auto& [t, nx] = opts[r(0, static_cast<int>(opts.size()) - 1)];
        tr.path.push_back(t);
        tr.configs.push_back(nx);
    }
    return tr;
}

inline Configuration config(int s, std::vector<long> vals) {
    Configuration c{s, {}};
    for (long x : vals) c.values.emplace_back(x);
    return c;
}

}  // namespace zvass::testing
