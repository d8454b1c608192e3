#pragma once

#include "zvass/core.hpp"
#include "zvass/ctrprog.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace zvass {

enum class Verdict { Reachable, Unreachable, Unknown };

const char* verdict_name(Verdict v);

struct Expected {
    Verdict verdict = Verdict::Unknown;
    std::string basis;  // how the verdict is known: "construction", "trivial", "brute-force", "oracle"
};

struct InstanceBundle {
    ReachQuery query;
    nlohmann::json provenance;  // construction name and parameters
    std::optional<Expected> expected;

    nlohmann::json sidecar() const;
};

// Integer VASS (no natural counters) reachable iff some subset of xs sums to t.
InstanceBundle subset_sum_to_izvass(const std::vector<long>& xs, long t);

struct ThreeCA {
    ZVass automaton;  // d = 3, k = 0, zero-tests allowed
    int initial = 0;
    int final = 0;
};

// Straight-line automaton from ops such as "inc 1", "dec 2", "zero 3".
ThreeCA linear_ca(const std::vector<std::string>& ops);

enum class PairSource { Preloaded, Generated };

struct CaSimulation {
    InstanceBundle bundle;
    std::vector<int> checkpoints;  // simulation state of each automaton state
    int final_entry = 0;           // state where the final check starts
    std::vector<int> final_transitions;  // transitions belonging to the final check
    std::size_t pair_steps = 0;    // 2^n
};

// Preloaded: the source carries z1 = 2^n and z2 = 7^(2^n).
// Generated: a prefix computes the pair from the zero configuration.
CaSimulation ca3_to_zvass2(const ThreeCA& ca, int n, PairSource pairs = PairSource::Preloaded);

// Program computing z1 = 2^n, z2 = 7^(2^n) with every other counter at 0.
CounterProgram pair_program(int n);

struct TowerBundle {
    CounterProgram program;  // counters x, y, z carry the triple; compile with the CA backend
    nlohmann::json interface;
};

TowerBundle tower_instance(int n);

InstanceBundle gallery(const std::string& name);
std::vector<std::string> gallery_names();

// Non-semilinear ZVASS(2,2) with x12 preloaded on the second natural counter.
ReachQuery nonsemilinear(long x12);

}  // namespace zvass
