#pragma once

#include "zvass/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace zvass {

enum class CounterOp { Dec = -1, Nop = 0, Inc = 1, ZeroTest = 2 };

constexpr int kEpsilon = -1;

// Letter 2i is a_{i+1}, letter 2i+1 is b_{i+1}.
struct OcaTransition {
    int src = 0;
    int dst = 0;
    int letter = kEpsilon;
    CounterOp op = CounterOp::Nop;
    int origin = -1;  // transition of the source ZVASS, if any
};

struct Oca {
    int k = 0;  // alphabet has 2k letters
    std::vector<std::string> states;
    std::vector<OcaTransition> transitions;
    int initial = 0;
    std::vector<int> finals;
    int base_states = 0;  // states copied from the source ZVASS come first

    int add_state(std::string name);
    int alphabet_size() const { return 2 * k; }
};

std::string letter_name(int letter);

// Every transition without a Z-effect is first split in two through a fresh state.
Oca zvass1_to_oca(const ZVass& v, int initial, int final_state);

// Adds a prelude loading source values and a postlude unloading target values.
Oca query_to_oca(const ReachQuery& q);

using ParikhVector = std::vector<Int>;

struct LinearSet {
    ParikhVector base;
    std::vector<ParikhVector> periods;
};

using SemilinearSet = std::vector<LinearSet>;

LinearSet z_set(int k);
bool in_z(const ParikhVector& v);

bool semilinear_member(const ParikhVector& v, const SemilinearSet& s);

ParikhVector parikh(const std::vector<int>& word, int k);

struct OcaWitness {
    std::vector<int> word;
    std::vector<int> run;  // OCA transition ids
};

std::optional<OcaWitness> balanced_witness(const Oca& a, std::size_t cap);

// Maps an accepted OCA run back to the ZVASS transitions it simulates.
std::vector<int> decode_run(const Oca& a, const std::vector<int>& run);

std::string serialize_oca(const Oca& a);
Oca parse_oca(const std::string& text);

}  // namespace zvass
