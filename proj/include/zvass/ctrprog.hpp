#pragma once

#include "zvass/core.hpp"
#include "zvass/oracle.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace zvass {

using Env = std::map<std::string, Int>;

// c0 + c1 * var
struct Amount {
    Int c0 = 0;
    Int c1 = 0;
    std::string var;

    Amount() = default;
    Amount(long v) : c0(v) {}
    Amount(Int v) : c0(std::move(v)) {}
    static Amount of(const std::string& var, Int coef = 1, Int base = 0);
    Int eval(const Env& env) const;
    std::string str() const;
};

enum class TestMode { Auto, Shadow, Native, Budget };

struct Instr {
    enum Kind { Add, Sub, Transfer, Loop, Guess, ZeroTest, Macro, For, Mark };
    Kind kind = Add;
    std::string counter;               // Add, Sub, ZeroTest; source of Transfer
    Amount amount;                     // Add, Sub
    std::vector<std::string> targets;  // Transfer
    std::vector<Instr> body;           // Loop, Guess, For
    std::string label;                 // Loop, Mark
    std::string var;                   // Guess, For
    Int lo = 0, hi = 0;                // Guess, For (inclusive)
    TestMode mode = TestMode::Auto;
    std::string macro;
    std::vector<std::string> args;

    bool operator==(const Instr& o) const;
};

namespace cp {
Instr add(const std::string& c, Amount a);
Instr sub(const std::string& c, Amount a);
Instr transfer(const std::string& from, std::vector<std::string> to);
Instr loop(std::vector<Instr> body, std::string label = {});
Instr guess(const std::string& var, Int lo, Int hi, std::vector<Instr> body);
Instr ztest(const std::string& c, TestMode m = TestMode::Auto);
Instr call(const std::string& name, std::vector<std::string> args, TestMode m = TestMode::Auto);
Instr for_each(const std::string& var, Int lo, Int hi, std::vector<Instr> body);
Instr mark(const std::string& label);
}  // namespace cp

struct CounterDecl {
    std::string name;
    bool nat = true;
};

struct CounterProgram {
    std::vector<CounterDecl> counters;
    std::vector<Instr> body;
    std::string budget;  // counter decremented by budget-mode tests (optional)

    void declare(const std::string& name, bool nat);
    bool declared(const std::string& name) const;
};

class ProgramError : public ZvassError {
public:
    using ZvassError::ZvassError;
};

struct Expansion {
    std::vector<Instr> body;
    std::vector<CounterDecl> fresh;  // mangled auxiliary counters
};

// Macros: move, copy, weak-mult, exact-mult, mult, residue, 16-triple, final-check,
// exp-amplifier, double-exp-triple.  `serial` makes auxiliary names unique.
Expansion expand_macro(const std::string& name, const std::vector<std::string>& args, int serial = 0,
                       TestMode mode = TestMode::Auto);

enum class Backend { ZVass, CA };

struct ShadowInfo {
    int counter;      // index of the shadow counter
    int tested;       // counter it copies
    int transition;   // index of the test point (first transition emitted after it)
    std::string name;
};

// Structure of the emitted automaton, used to drive witness runs.
struct CompiledNode {
    enum Kind { Step, Test, Loop, Guess };
    Kind kind = Step;
    std::vector<int> transitions;  // Step, Test: fired in order
    std::string label;             // Loop
    int exit_transition = -1;      // Loop
    std::vector<std::vector<CompiledNode>> children;  // Loop: one body; Guess: one per branch
};

struct CompiledUnit {
    ZVass system;
    int entry = 0;
    int exit = 0;
    std::vector<ShadowInfo> shadows;
    std::vector<std::string> counter_names;  // per counter index
    std::map<std::string, int> counter_index;
    std::set<int> program_counters;           // declared by the program (not auxiliary, not shadow)
    std::map<std::string, std::vector<int>> marks;  // label -> states
    std::vector<CompiledNode> tree;

    int counter(const std::string& name) const;
    // Source configuration: named values, everything else 0; shadows copy their tested counter.
    Configuration source(const std::map<std::string, Int>& values) const;
    bool manifest_ok(const Configuration& c) const;
};

CompiledUnit compile(const CounterProgram& p, Backend backend);

// Reference small-step semantics, set-based, values boxed by `b` (lmax ignored).
using Valuation = std::map<std::string, Int>;
std::set<std::vector<Int>> interpret(const CounterProgram& p, const Valuation& init, const Bounds& b,
                                     const std::vector<std::string>& observe);

// Accepting final valuations of a compiled unit within bounds, projected to `observe`.
std::set<std::vector<Int>> compiled_finals(const CompiledUnit& u, const Valuation& init, const Bounds& b,
                                           const std::vector<std::string>& observe,
                                           const std::map<std::string, Int>& fixed = {});

struct GadgetSpec {
    std::string name;
    CounterProgram program;
    Backend backend = Backend::ZVass;
    std::vector<Valuation> inputs;
    std::vector<std::string> observe;
    // Expected accepted finals (projected to observe) for an input, within bounds.
    std::function<std::set<std::vector<Int>>(const Valuation&)> expected;
    std::map<std::string, Int> fixed;  // counters required at the exit (besides the manifest)
    Bounds bounds;
};

struct GadgetReport {
    std::string name;
    std::size_t inputs = 0;
    std::size_t finals = 0;
    std::vector<std::string> counterexamples;
    std::vector<std::string> lines;  // per input: observed finals
    bool ok() const { return counterexamples.empty(); }
};

GadgetReport verify_gadget(const GadgetSpec& spec);

// Named specs used by the CLI and tests; params are gadget specific.
GadgetSpec gadget_spec(const std::string& name, const std::map<std::string, long>& params);
std::vector<std::string> gadget_names();

// Counters x, y<n>, z<n> carry the triple; y<i>, z<i>, u plus auxiliaries end at 0.
CounterProgram double_exp_triple(long a, long n);

struct Amplifier {
    CounterProgram program;
    long b = 0;
};

Amplifier amplifier_step(long b);

// Drives a compiled unit along the program structure, choosing loop counts via policy.
// Unlabelled loops iterate greedily while the body can run.
using LoopPolicy = std::map<std::string, Int>;
// Zero-tests outside loops are always emitted, so a bad policy shows up as a replay fault.
std::vector<int> build_witness(const CompiledUnit& u, const Valuation& init, const LoopPolicy& policy);

CounterProgram parse_program(const std::string& text);
std::string format_program(const CounterProgram& p);

}  // namespace zvass
