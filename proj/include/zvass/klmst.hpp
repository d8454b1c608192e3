#pragma once

#include "zvass/core.hpp"
#include "zvass/ilp.hpp"
#include "zvass/linalg.hpp"
#include "zvass/oracle.hpp"

#include "json.hpp"

#include <compare>
#include <optional>
#include <string>
#include <vector>

namespace zvass {

class KlmstError : public ZvassError {
public:
    using ZvassError::ZvassError;
};

// One entry per natural counter; nullopt is omega.
using OmegaConfig = std::vector<std::optional<Int>>;

OmegaConfig omega_config(int d);
std::string format_omega(const OmegaConfig& c);

struct Component {
    std::vector<int> states;
    std::vector<int> transitions;
    int entry = 0;
    int exit = 0;
};

struct Boundary {
    int transition = 0;
    OmegaConfig test;
};

struct GeneralisedZVass {
    ZVass system;
    std::vector<Component> components;
    std::vector<Boundary> boundaries;  // boundaries[i] leads from component i to component i + 1
    std::vector<int> origin;           // transition index in the system this one was derived from
    std::vector<int> state_origin;

    int s() const { return static_cast<int>(components.size()) - 1; }
    int component_of_state(int q) const;
    void validate() const;
};

struct GQuery {
    GeneralisedZVass gv;
    Vec source;  // at components.front().entry
    Vec target;  // at components.back().exit
};

// Sets origin and state_origin to the identity.
void reset_origin(GeneralisedZVass& gv);

GQuery parse_generalised(const std::string& text);
GQuery load_generalised(const std::string& path);
std::string serialize_generalised(const GQuery& q);
bool looks_generalised(const std::string& text);

struct SplitResult {
    std::vector<GQuery> queries;
    bool cap_exceeded = false;
};

// One generalised query per path of strongly connected components from source to target.
// Zero-tests between components become tests; a zero-test inside a component throws.
SplitResult split_query(const ReachQuery& q, std::size_t cap = 4096);

// Configurations are over gv.system; boundary tests are checked.
ReplayResult replay_generalised(const GQuery& q, const std::vector<int>& path);
bool reaches_target(const GQuery& q, const std::vector<int>& path);
OracleAnswer oracle_reach(const GQuery& q, const Bounds& b);

// Basis of the span of cycle effects through the given strongly connected fragment.
RatMat cycle_space(const ZVass& sys, const std::vector<int>& states, const std::vector<int>& transitions);
RatMat cycle_space(const GeneralisedZVass& gv, int component);

struct Rank {
    int dimZ = 0;
    std::vector<int> rankN;  // rankN[i] counts states whose natural cycle space has dimension i + 1

    std::strong_ordering operator<=>(const Rank& o) const;
    bool operator==(const Rank& o) const = default;
    std::string str() const;
};

Rank rank(const GeneralisedZVass& gv);

struct KlmstIlp {
    IlpSystem system;
    std::vector<std::vector<int>> x, y;  // entry and exit value variables per component and counter
    std::vector<int> edge_var;           // per transition of gv.system; -1 for boundary transitions
};

KlmstIlp build_ilp(const GQuery& q);

struct KlmstCaps {
    Int value_cap = 12;           // largest value probed for a bounded variable
    std::size_t word_len = 6;     // longest word of bounded transitions per component
    std::size_t words = 200;      // words per component
    std::size_t children = 400;   // children per decomposition
    std::size_t pump_len = 12;    // pump cycle length
    Int pump_slack = 8;           // values explored above the start of a pump search
    std::size_t km_nodes = 20000; // coverability tree nodes
    Int counter_cap = 16;         // largest bound stored into control states
    std::size_t mcap = 8;
    std::size_t nodes = 3000;     // decomposition tree nodes
    std::size_t depth = 40;

    nlohmann::json to_json() const;
};

struct PumpCertificate {
    std::vector<std::vector<int>> up, dwn, diff;
};

enum class Perfectness { Perfect, Violated, Unknown };

// Conditions: 1 ILP feasible, 2 full-support homogeneous solution, 3 omega-tested exits unbounded,
// 4 forward pumpable, 5 backward pumpable, 6 a counter fixed by the control state stays natural.
struct Violation {
    int condition = 0;
    int component = -1;
    std::vector<std::pair<int, std::vector<Int>>> bounded;  // condition 2: transition and value set
    int boundary = -1;                                     // condition 3: boundary index
    int counter = -1;                                      // conditions 3 to 6
    std::vector<Int> values;                               // condition 3 value set
    Int bound = 0;                                         // conditions 4, 5: largest value
    std::vector<int> dead_states;                          // condition 6

    nlohmann::json evidence(const GQuery& q) const;
};

struct PerfectCheck {
    Perfectness status = Perfectness::Unknown;
    Violation violation;
    PumpCertificate cert;
    KlmstIlp ilp;
    Vec solution;
    Vec homogeneous;  // positive on every variable that is unbounded
    std::string reason;
};

PerfectCheck check_perfect(const GQuery& q, const KlmstCaps& caps = {});

struct Decomposition {
    std::vector<GQuery> children;
    bool refining = true;  // condition 3 and 6 steps only clean and keep the rank
    bool cap_exceeded = false;
    std::string report;
};

Decomposition decompose(const GQuery& q, const Violation& v, const KlmstCaps& caps = {});

// Path over q.gv.system, or nullopt when no m in [mmin, mcap] gives a run.
std::optional<std::vector<int>> run_from_perfect(const GQuery& q, const PerfectCheck& pc, std::size_t mcap,
                                                 std::size_t mmin = 0);

enum class KlmstVerdict { Reach, NonReach, Unknown };

const char* klmst_verdict_name(KlmstVerdict v);

struct KlmstResult {
    KlmstVerdict verdict = KlmstVerdict::Unknown;
    std::optional<std::vector<int>> path;  // over the input system
    std::vector<std::string> caps_hit;
    nlohmann::json tree;
    std::size_t nodes = 0;
    std::size_t refining_edges = 0;
    std::size_t cleaning_edges = 0;
    std::size_t perfect_nodes = 0;
    std::size_t perfect_runs = 0;
};

// Rank is checked on every decomposition edge: strictly smaller after refining steps, never larger
// after cleaning steps. A breach throws KlmstError.
KlmstResult klmst_decide(const GQuery& q, const KlmstCaps& caps = {});
KlmstResult klmst_decide(const ReachQuery& q, const KlmstCaps& caps = {});

// Integer-only systems: Parikh flow with the effect equation, plus connectivity cuts.
Tri zvass0_reach(const ReachQuery& q, std::size_t node_cap = 2000);

}  // namespace zvass
