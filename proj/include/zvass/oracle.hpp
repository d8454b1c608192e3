#pragma once

#include "zvass/core.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace zvass {

struct Bounds {
    Int nmax = 0;
    Int zabs = 0;
    std::size_t lmax = 0;
};

struct OracleAnswer {
    bool reachable = false;  // false means NotWithinBounds, never "unreachable"
    std::optional<Trace> trace;
    std::size_t explored = 0;
};

class OracleAbort : public ZvassError {
public:
    using ZvassError::ZvassError;
};

// Low-level move used by the search engine: fires iff every guard (counter == value) holds.
struct Move {
    int src = 0;
    int dst = 0;
    std::vector<std::int64_t> update;
    std::vector<std::pair<int, std::int64_t>> guards;
};

// Counters fixed by a (possibly partial) target; used to prune hopeless configurations.
struct PartialTarget {
    int state = -1;  // -1: any state
    std::vector<std::optional<std::int64_t>> values;
};

struct SearchSpec {
    int num_states = 0;
    int d = 0;  // first d counters must stay nonnegative
    std::vector<Move> moves;
    std::vector<std::int64_t> lo, hi;  // box per counter
    std::size_t lmax = 0;
    bool exact_length = false;  // goal only at depth exactly lmax
    std::optional<PartialTarget> prune;
};

struct SearchResult {
    bool found = false;
    std::vector<int> path;  // move indices
    std::size_t explored = 0;
    // Filled by enumerate(): every configuration visited, as (state, values).
    std::vector<std::pair<int, std::vector<std::int64_t>>> visited;
};

class Explorer {
public:
    explicit Explorer(SearchSpec spec);

    // Breadth-first search from start to a configuration satisfying goal.
    SearchResult search(int start_state, const std::vector<std::int64_t>& start,
                        const std::function<bool(int, const std::int64_t*)>& goal);
    // Collects every configuration reachable inside the box within lmax steps.
    SearchResult enumerate(int start_state, const std::vector<std::int64_t>& start);

private:
    SearchResult run(int start_state, const std::vector<std::int64_t>& start,
                     const std::function<bool(int, const std::int64_t*)>* goal, bool collect);
    bool hopeless(int state, const std::int64_t* v) const;

    SearchSpec spec_;
    std::vector<std::vector<int>> out_;
    std::vector<char> reaches_target_;
    std::vector<std::vector<char>> can_inc_, can_dec_;
    std::size_t mem_cap_bytes_ = 0;
};

std::int64_t to_i64(const Int& x);

// Search spec for a ZVASS or counter automaton (zero-tests become guards).
SearchSpec make_spec(const ZVass& sys, const Bounds& b);

OracleAnswer bounded_reach(const ReachQuery& q, const Bounds& b, bool prune = true);

std::vector<Configuration> reach_set(const ZVass& sys, const Configuration& source, const Bounds& b,
                                     const std::optional<PartialTarget>& prune = std::nullopt);

enum class LengthMode { AtMost, Exact };

OracleAnswer length_bounded_ca_reach(const ZVass& ca, const Configuration& src, const Configuration& tgt,
                                     std::size_t L, LengthMode mode = LengthMode::AtMost);

std::size_t env_mem_cap_mb();
int env_threads();

}  // namespace zvass
