#include "zvass/ctrprog.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace zvass {

Amount Amount::of(const std::string& var, Int coef, Int base) {
    Amount a;
    a.var = var;
    a.c1 = std::move(coef);
    a.c0 = std::move(base);
    return a;
}

Int Amount::eval(const Env& env) const {
    if (var.empty() || c1 == 0) return c0;
    auto it = env.find(var);
    if (it == env.end()) throw ProgramError("unbound variable " + var);
    return c0 + c1 * it->second;
}

std::string Amount::str() const {
    if (var.empty() || c1 == 0) return c0.str();
    std::string t = (c1 == 1 ? std::string() : c1.str() + "*") + var;
    if (c0 == 0) return t;
    return c0.str() + (c1 < 0 ? "" : "+") + t;
}

static bool same_amount(const Amount& a, const Amount& b) {
    return a.c0 == b.c0 && a.c1 == b.c1 && (a.c1 == 0 || a.var == b.var);
}

// Labels are driver metadata and do not take part in equality.
bool Instr::operator==(const Instr& o) const {
    return kind == o.kind && counter == o.counter && same_amount(amount, o.amount) && targets == o.targets &&
           body == o.body && var == o.var && lo == o.lo && hi == o.hi && mode == o.mode && macro == o.macro &&
           args == o.args;
}

namespace cp {
Instr add(const std::string& c, Amount a) {
    Instr i;
    i.kind = Instr::Add;
    i.counter = c;
    i.amount = std::move(a);
    return i;
}
Instr sub(const std::string& c, Amount a) {
    Instr i = add(c, std::move(a));
    i.kind = Instr::Sub;
    return i;
}
Instr transfer(const std::string& from, std::vector<std::string> to) {
    Instr i;
    i.kind = Instr::Transfer;
    i.counter = from;
    i.targets = std::move(to);
    return i;
}
Instr loop(std::vector<Instr> body, std::string label) {
    Instr i;
    i.kind = Instr::Loop;
    i.body = std::move(body);
    i.label = std::move(label);
    return i;
}
Instr guess(const std::string& var, Int lo, Int hi, std::vector<Instr> body) {
    Instr i;
    i.kind = Instr::Guess;
    i.var = var;
    i.lo = std::move(lo);
    i.hi = std::move(hi);
    i.body = std::move(body);
    return i;
}
Instr ztest(const std::string& c, TestMode m) {
    Instr i;
    i.kind = Instr::ZeroTest;
    i.counter = c;
    i.mode = m;
    return i;
}
Instr call(const std::string& name, std::vector<std::string> args, TestMode m) {
    Instr i;
    i.kind = Instr::Macro;
    i.macro = name;
    i.args = std::move(args);
    i.mode = m;
    return i;
}
Instr for_each(const std::string& var, Int lo, Int hi, std::vector<Instr> body) {
    Instr i = guess(var, std::move(lo), std::move(hi), std::move(body));
    i.kind = Instr::For;
    return i;
}
Instr mark(const std::string& label) {
    Instr i;
    i.kind = Instr::Mark;
    i.label = label;
    return i;
}
}  // namespace cp

void CounterProgram::declare(const std::string& name, bool nat) {
    for (auto& c : counters)
        if (c.name == name) {
            if (c.nat != nat) throw ProgramError("counter " + name + " redeclared with another type");
            return;
        }
    counters.push_back({name, nat});
}

bool CounterProgram::declared(const std::string& name) const {
    return std::any_of(counters.begin(), counters.end(), [&](const CounterDecl& c) { return c.name == name; });
}

// ---------------------------------------------------------------------------
// macros

namespace {

using namespace cp;

struct Frac {
    Int a, b;
};

Int parse_int(const std::string& s) {
    try {
        if (s.empty()) throw 0;
        std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
        if (i == s.size()) throw 0;
        for (std::size_t j = i; j < s.size(); ++j)
            if (!std::isdigit(static_cast<unsigned char>(s[j]))) throw 0;
        return Int(s[0] == '+' ? s.substr(1) : s);
    } catch (...) {
        throw ProgramError("expected an integer, got '" + s + "'");
    }
}

Frac parse_frac(const std::string& s) {
    auto slash = s.find('/');
    Frac f;
    if (slash == std::string::npos) {
        f.a = parse_int(s);
        f.b = 1;
    } else {
        f.a = parse_int(s.substr(0, slash));
        f.b = parse_int(s.substr(slash + 1));
    }
    if (f.a <= 0 || f.b <= 0) throw ProgramError("ratio must be positive: " + s);
    return f;
}

void arity(const std::string& name, const std::vector<std::string>& args, std::size_t lo, std::size_t hi) {
    if (args.size() < lo || args.size() > hi)
        throw ProgramError("ArityMismatch: " + name + " takes " + std::to_string(lo) +
                           (hi != lo ? ".." + std::to_string(hi) : std::string()) + " arguments, got " +
                           std::to_string(args.size()));
}

std::vector<Instr> with_mode(std::vector<Instr> body, TestMode m) {
    if (m == TestMode::Auto) return body;
    for (auto& i : body) {
        if (i.kind == Instr::ZeroTest && i.mode == TestMode::Auto) i.mode = m;
        if (i.kind == Instr::Macro && i.mode == TestMode::Auto) i.mode = m;
        if (!i.body.empty()) i.body = with_mode(std::move(i.body), m);
    }
    return body;
}

Int tower(long n) {
    Int t = 1;
    for (long i = 0; i < n; ++i) {
        if (t > 1 << 20) throw ProgramError("Tower value too large");
        t = Int(1) << static_cast<unsigned>(t);
    }
    return t;
}

std::string fresh(const std::string& base, int serial) { return base + "#" + std::to_string(serial); }

Expansion double_exp_body(const Int& a, long n, const std::string& pre) {
    if (a < 2 || n < 0) throw ProgramError("double-exp-triple needs A >= 2 and n >= 0");
    Expansion e;
    auto y = [&](long i) { return pre + "y" + std::to_string(i); };
    auto z = [&](long i) { return pre + "z" + std::to_string(i); };
    const std::string u = pre + "u";
    e.fresh = {{"x", true}, {"xbar", true}, {u, false}};
    for (long i = 0; i <= n; ++i) {
        e.fresh.push_back({y(i), false});
        e.fresh.push_back({z(i), false});
    }
    auto& b = e.body;
    b.push_back(add("x", a));
    for (long i = 0; i <= n; ++i) b.push_back(loop({add(y(i), 1), add(z(i), Int(2 * a))}, "C" + std::to_string(i)));
    b.push_back(mark("guessed"));
    for (long i = 0; i < n; ++i) {
        b.push_back(call("copy", {"x", u}));
        std::vector<std::string> margs = {"x", "xbar", y(i), z(i), u};
        for (long j = i + 1; j <= n; ++j) margs.push_back(z(j));
        b.push_back(call("mult", margs));
        b.push_back(ztest(y(i)));
        b.push_back(ztest(z(i)));
        b.push_back(loop({sub("x", 1)}));
        b.push_back(ztest("x"));
        b.push_back(loop({transfer(u, {"x"})}));
        b.push_back(ztest(u));
        b.push_back(mark("round" + std::to_string(i)));
    }
    b.push_back(call("exact-mult", {z(n), "1/2"}));
    return e;
}

}  // namespace

Expansion expand_macro(const std::string& name, const std::vector<std::string>& args, int serial, TestMode mode) {
    Expansion e;
    auto& b = e.body;
    if (name == "move") {
        arity(name, args, 2, 2);
        b = {loop({transfer(args[0], {args[1]})}), ztest(args[0])};
    } else if (name == "copy") {
        arity(name, args, 2, 3);
        std::string aux = args.size() == 3 ? args[2] : fresh("copy", serial);
        if (args.size() == 2) e.fresh.push_back({aux, false});
        b = {loop({transfer(args[0], {args[1], aux})}), ztest(args[0]), loop({transfer(aux, {args[0]})}), ztest(aux)};
    } else if (name == "weak-mult") {
        arity(name, args, 3, 3);
        Frac f = parse_frac(args[2]);
        b = {loop({transfer(args[0], {args[1]})}), loop({sub(args[1], f.b), add(args[0], f.a)})};
    } else if (name == "exact-mult") {
        arity(name, args, 2, 3);
        std::string y = args.size() == 3 ? args[1] : fresh("em", serial);
        if (args.size() == 2) e.fresh.push_back({y, false});
        Frac f = parse_frac(args.back());
        b = {loop({transfer(args[0], {y})}), ztest(args[0]), loop({sub(y, f.b), add(args[0], f.a)}), ztest(y)};
    } else if (name == "mult") {
        arity(name, args, 5, 64);
        const std::string &x = args[0], &xb = args[1], &y = args[2], &z = args[3];
        std::size_t k = args.size() - 4;
        std::vector<std::string> v;
        for (std::size_t i = 0; i < k; ++i) {
            v.push_back(fresh("v" + std::to_string(i + 1), serial));
            e.fresh.push_back({v.back(), false});
        }
        for (std::size_t i = 0; i < k; ++i)
            b.push_back(loop({loop({transfer(x, {xb}), sub(z, 1), add(v[i], 1)}),
                              loop({transfer(xb, {x}), sub(z, 1)}), sub(y, 1), sub(args[4 + i], 1)}));
        for (std::size_t i = 0; i < k; ++i) b.push_back(ztest(args[4 + i]));
        for (std::size_t i = 0; i < k; ++i) b.push_back(loop({transfer(v[i], {args[4 + i]})}));
        for (std::size_t i = 0; i < k; ++i) b.push_back(ztest(v[i]));
    } else if (name == "residue") {
        arity(name, args, 3, 3);
        Int B = parse_int(args[2]);
        if (B < 2) throw ProgramError("residue modulus must be at least 2");
        std::string r = fresh("r", serial);
        b = {guess(r, 1, B - 1,
                   {sub(args[0], Amount::of(r)), loop({sub(args[0], B), add(args[1], B)}),
                    loop({sub(args[1], B), add(args[0], Int(7 * B))}), add(args[0], Amount::of(r, 7))})};
    } else if (name == "16-triple") {
        arity(name, args, 3, 4);
        b = {add(args[0], 16), loop({add(args[1], 2), add(args[2], 32)}, args.size() == 4 ? args[3] : "T")};
    } else if (name == "final-check") {
        arity(name, args, 7, 7);
        const std::string &x = args[0], &xb = args[1], &z1 = args[5], &z2 = args[6];
        b = {ztest(xb), ztest(args[2]), ztest(args[3]), ztest(args[4]),
             loop({call("weak-mult", {x, xb, "7"}), sub(z1, 1)}), ztest(z1), loop({sub(x, 1), sub(z2, 1)}),
             ztest(x), ztest(z2)};
    } else if (name == "exp-amplifier") {
        arity(name, args, 5, 6);
        const std::string &x = args[0], &y = args[1], &z = args[2], &budget = args[4];
        Int B = parse_int(args[3]);
        if (B <= 0 || B % 8 != 0) throw ProgramError("BNotDivisibleBy8: " + B.str());
        std::string tag = args.size() == 6 ? args[5] : std::string();
        std::string x1 = fresh("x1", serial), x2 = fresh("x2", serial), xp = fresh("xp", serial),
                    yp = fresh("yp", serial), zp = fresh("zp", serial), u = fresh("u", serial);
        e.fresh = {{x1, true}, {x2, true}, {xp, false}, {yp, false}, {zp, false}, {u, false}};
        b = {add(budget, Int(B / 2)),
             add(xp, 1),
             loop({add(yp, 2), add(zp, 2)}, "C" + tag),
             call("move", {xp, x1}),
             loop({call("exact-mult", {x1, x2, "256"}, TestMode::Budget), add(u, 1)}, "K1" + tag),
             call("move", {x1, xp}),
             call("move", {zp, x1}),
             loop({call("exact-mult", {x1, x2, "256"}, TestMode::Budget), sub(u, 1)}, "K2" + tag),
             call("move", {x1, zp}),
             loop({sub(y, 2), sub(z, Int(2 * B))}),
             ztest(budget),
             ztest(y),
             ztest(z),
             ztest(u),
             loop({sub(x, 1)}),
             ztest(x),
             call("move", {xp, x}),
             call("move", {yp, y}),
             call("move", {zp, z})};
    } else if (name == "tower-triple") {
        arity(name, args, 1, 1);
        long n = static_cast<long>(parse_int(args[0]));
        if (n < 3) throw ProgramError("NTooSmall: tower-triple needs n >= 3");
        e.fresh = {{"x", true}, {"y", true}, {"z", true}, {"budget", false}};
        b = {call("16-triple", {"x", "y", "z", "C3"})};
        for (long r = 4; r <= n; ++r)
            b.push_back(call("exp-amplifier", {"x", "y", "z", tower(r - 1).str(), "budget", std::to_string(r)}));
    } else if (name == "double-exp-triple") {
        arity(name, args, 2, 3);
        e = double_exp_body(parse_int(args[0]), static_cast<long>(parse_int(args[1])),
                            args.size() == 3 ? args[2] : std::string());
    } else {
        throw ProgramError("UnknownMacro: " + name);
    }
    e.body = with_mode(std::move(e.body), mode);
    return e;
}

// ---------------------------------------------------------------------------
// compilation

namespace {

std::string subst(const std::string& name, const Env& env) {
    std::string s = name;
    for (const auto& [var, val] : env) {
        std::string key = "{" + var + "}";
        for (auto p = s.find(key); p != std::string::npos; p = s.find(key)) s.replace(p, key.size(), val.str());
    }
    return s;
}

// Instruction tree after macro expansion, unrolling and evaluation.
struct RInstr {
    enum Kind { Step, Test, Loop, Guess, Mark };
    Kind kind = Step;
    std::vector<std::pair<std::string, Int>> delta;  // Step
    std::string counter;                            // Test
    TestMode mode = TestMode::Auto;                 // Test: Shadow, Native or Budget
    std::string label;
    std::vector<std::vector<RInstr>> children;
};

struct Resolver {
    const CounterProgram& prog;
    Backend backend;
    std::vector<CounterDecl> counters;
    int serial = 0;

    bool known(const std::string& c) const {
        return std::any_of(counters.begin(), counters.end(), [&](const CounterDecl& d) { return d.name == c; });
    }
    bool is_nat(const std::string& c) const {
        for (auto& d : counters)
            if (d.name == c) return d.nat;
        return false;
    }
    std::string use(const std::string& raw, const Env& env) const {
        std::string c = subst(raw, env);
        if (!known(c)) throw ProgramError("UndeclaredCounter: " + c);
        return c;
    }
    void add_decl(const CounterDecl& d) {
        for (auto& c : counters)
            if (c.name == d.name) {
                if (c.nat != d.nat) throw ProgramError("counter " + d.name + " redeclared with another type");
                return;
            }
        counters.push_back(d);
    }

    std::vector<RInstr> block(const std::vector<Instr>& body, const Env& env, int loop_depth, TestMode inherited) {
        std::vector<RInstr> out;
        for (const Instr& in : body) one(in, env, loop_depth, inherited, out);
        return out;
    }

    void one(const Instr& in, const Env& env, int depth, TestMode inherited, std::vector<RInstr>& out) {
        switch (in.kind) {
            case Instr::Add:
            case Instr::Sub: {
                RInstr r;
                Int a = in.amount.eval(env);
                r.delta.push_back({use(in.counter, env), in.kind == Instr::Add ? a : Int(-a)});
                out.push_back(std::move(r));
                break;
            }
            case Instr::Transfer: {
                RInstr r;
                r.delta.push_back({use(in.counter, env), -1});
                for (auto& t : in.targets) r.delta.push_back({use(t, env), 1});
                out.push_back(std::move(r));
                break;
            }
            case Instr::Loop: {
                RInstr r;
                r.kind = RInstr::Loop;
                r.label = subst(in.label, env);
                r.children.push_back(block(in.body, env, depth + 1, inherited));
                out.push_back(std::move(r));
                break;
            }
            case Instr::Guess: {
                RInstr r;
                r.kind = RInstr::Guess;
                for (Int v = in.lo; v <= in.hi; ++v) {
                    Env e2 = env;
                    e2[in.var] = v;
                    r.children.push_back(block(in.body, e2, depth + 1, inherited));
                }
                out.push_back(std::move(r));
                break;
            }
            case Instr::For: {
                for (Int v = in.lo; v <= in.hi; ++v) {
                    Env e2 = env;
                    e2[in.var] = v;
                    for (const Instr& b : in.body) one(b, e2, depth, inherited, out);
                }
                break;
            }
            case Instr::ZeroTest: {
                RInstr r;
                r.kind = RInstr::Test;
                r.counter = use(in.counter, env);
                TestMode m = in.mode == TestMode::Auto ? inherited : in.mode;
                if (m == TestMode::Auto)
                    m = (backend == Backend::CA && is_nat(r.counter)) ? TestMode::Native : TestMode::Shadow;
                if (m != TestMode::Shadow && backend == Backend::ZVass)
                    throw ProgramError("NativeTestInZvassBackend: zero-test of " + r.counter);
                if (m != TestMode::Shadow && !is_nat(r.counter))
                    throw ProgramError("native zero-test on integer counter " + r.counter);
                if (m == TestMode::Shadow && depth > 0) throw ProgramError("ShadowTestInsideLoop: " + r.counter);
                if (m == TestMode::Budget && (prog.budget.empty() || !known(prog.budget)))
                    throw ProgramError("budget-mode zero-test without a declared budget counter");
                r.mode = m;
                out.push_back(std::move(r));
                break;
            }
            case Instr::Macro: {
                std::vector<std::string> args;
                for (auto& a : in.args) args.push_back(subst(a, env));
                Expansion ex = expand_macro(in.macro, args, serial++, in.mode);
                for (auto& d : ex.fresh) add_decl(d);
                for (const Instr& b : ex.body) one(b, env, depth, in.mode == TestMode::Auto ? inherited : in.mode, out);
                break;
            }
            case Instr::Mark: {
                RInstr r;
                r.kind = RInstr::Mark;
                r.label = subst(in.label, env);
                out.push_back(std::move(r));
                break;
            }
        }
    }
};

int count_shadows(const std::vector<RInstr>& b) {
    int n = 0;
    for (auto& r : b) {
        if (r.kind == RInstr::Test && r.mode == TestMode::Shadow) ++n;
        for (auto& c : r.children) n += count_shadows(c);
    }
    return n;
}

struct Emitter {
    int dim = 0;
    int d = 0;
    std::map<std::string, int> index;
    std::vector<std::string> names;
    std::string budget;
    std::vector<std::string> states;
    std::vector<Transition> trans;
    std::vector<ShadowInfo> shadows;
    int next_shadow = 0;
    std::vector<std::pair<std::string, int>> marks;

    int new_state() {
        states.push_back("p" + std::to_string(states.size()));
        return static_cast<int>(states.size()) - 1;
    }
    int emit(int src, Vec update, std::optional<int> zt = std::nullopt) {
        int dst = new_state();
        Transition t;
        t.name = "t" + std::to_string(trans.size());
        t.src = src;
        t.dst = dst;
        t.update = std::move(update);
        t.ztest = zt;
        trans.push_back(std::move(t));
        return static_cast<int>(trans.size()) - 1;
    }
    void redirect(int from, int to) {
        if (from == to) return;
        for (auto& t : trans)
            if (t.dst == from) t.dst = to;
        for (auto& m : marks)
            if (m.second == from) m.second = to;
    }

    int block(const std::vector<RInstr>& body, int cur, std::vector<CompiledNode>& nodes) {
        for (const RInstr& r : body) cur = one(r, cur, nodes);
        return cur;
    }

    // A body opening with a loop would share its head state with the enclosing construct.
    int entry(const std::vector<RInstr>& body, int cur, std::vector<CompiledNode>& nodes) {
        for (const RInstr& r : body) {
            if (r.kind == RInstr::Mark) continue;
            if (r.kind != RInstr::Loop && r.kind != RInstr::Guess) return cur;
            CompiledNode n;
            n.transitions = {emit(cur, zero_vec(dim))};
            nodes.push_back(std::move(n));
            return trans[nodes.back().transitions[0]].dst;
        }
        return cur;
    }

    int one(const RInstr& r, int cur, std::vector<CompiledNode>& nodes) {
        switch (r.kind) {
            case RInstr::Step: {
                Vec u = zero_vec(dim);
                for (auto& [c, v] : r.delta) u[index.at(c)] += v;
                int t = emit(cur, std::move(u));
                CompiledNode n;
                n.transitions = {t};
                nodes.push_back(std::move(n));
                return trans[t].dst;
            }
            case RInstr::Test: {
                int c = index.at(r.counter);
                if (r.mode == TestMode::Shadow) {
                    int s = static_cast<int>(index.size()) + next_shadow++;
                    for (auto& t : trans) t.update[s] = t.update[c];
                    shadows.push_back({s, c, static_cast<int>(trans.size()), "shadow:" + r.counter});
                    return cur;
                }
                CompiledNode n;
                n.kind = CompiledNode::Test;
                int t = emit(cur, zero_vec(dim), c);
                n.transitions.push_back(t);
                cur = trans[t].dst;
                if (r.mode == TestMode::Budget) {
                    Vec u = zero_vec(dim);
                    u[index.at(budget)] = -1;
                    int t2 = emit(cur, std::move(u));
                    n.transitions.push_back(t2);
                    cur = trans[t2].dst;
                }
                nodes.push_back(std::move(n));
                return cur;
            }
            case RInstr::Loop: {
                if (r.children[0].empty()) return cur;
                CompiledNode n;
                n.kind = CompiledNode::Loop;
                n.label = r.label;
                n.children.emplace_back();
                int e = block(r.children[0], entry(r.children[0], cur, n.children[0]), n.children[0]);
                redirect(e, cur);
                n.exit_transition = emit(cur, zero_vec(dim));
                int out = trans[n.exit_transition].dst;
                nodes.push_back(std::move(n));
                return out;
            }
            case RInstr::Guess: {
                CompiledNode n;
                n.kind = CompiledNode::Guess;
                int join = new_state();
                for (auto& br : r.children) {
                    n.children.emplace_back();
                    int e = block(br, entry(br, cur, n.children.back()), n.children.back());
                    if (e == cur) {
                        Transition t;
                        t.name = "t" + std::to_string(trans.size());
                        t.src = cur;
                        t.dst = join;
                        t.update = zero_vec(dim);
                        trans.push_back(std::move(t));
                        CompiledNode s;
                        s.transitions = {static_cast<int>(trans.size()) - 1};
                        n.children.back().push_back(std::move(s));
                    } else {
                        redirect(e, join);
                    }
                }
                nodes.push_back(std::move(n));
                return join;
            }
            case RInstr::Mark:
                marks.push_back({r.label, cur});
                return cur;
        }
        return cur;
    }
};

}  // namespace

int CompiledUnit::counter(const std::string& name) const {
    auto it = counter_index.find(name);
    if (it == counter_index.end()) throw ProgramError("UndeclaredCounter: " + name);
    return it->second;
}

Configuration CompiledUnit::source(const std::map<std::string, Int>& values) const {
    Configuration c{entry, zero_vec(system.layout().dim())};
    for (auto& [n, v] : values) c.values[counter(n)] = v;
    for (auto& s : shadows) c.values[s.counter] = c.values[s.tested];
    return c;
}

bool CompiledUnit::manifest_ok(const Configuration& c) const {
    if (c.state != exit) return false;
    for (auto& s : shadows)
        if (c.values[s.counter] != 0) return false;
    return true;
}

CompiledUnit compile(const CounterProgram& p, Backend backend) {
    Resolver res{p, backend, {}};
    for (auto& c : p.counters) res.add_decl(c);
    std::vector<RInstr> body = res.block(p.body, {}, 0, TestMode::Auto);

    CompiledUnit u;
    Emitter em;
    for (int pass = 0; pass < 2; ++pass)
        for (auto& c : res.counters)
            if (c.nat == (pass == 0)) {
                em.index[c.name] = static_cast<int>(em.names.size());
                em.names.push_back(c.name);
            }
    em.d = static_cast<int>(std::count_if(res.counters.begin(), res.counters.end(),
                                          [](const CounterDecl& c) { return c.nat; }));
    int nshadow = count_shadows(body);
    em.dim = static_cast<int>(em.names.size()) + nshadow;
    em.budget = p.budget;
    int entry = em.new_state();
    int exit = em.block(body, entry, u.tree);

    // drop states orphaned by redirection
    std::vector<char> used(em.states.size(), 0);
    used[entry] = used[exit] = 1;
    for (auto& t : em.trans) used[t.src] = used[t.dst] = 1;
    for (auto& m : em.marks) used[m.second] = 1;
    std::vector<int> renum(em.states.size(), -1);
    ZVass sys(Layout{em.d, em.dim - em.d});
    for (std::size_t s = 0; s < em.states.size(); ++s)
        if (used[s]) renum[s] = sys.add_state("p" + std::to_string(sys.num_states()));
    for (auto& t : em.trans) {
        t.src = renum[t.src];
        t.dst = renum[t.dst];
        sys.add_transition(t);
    }
    u.system = std::move(sys);
    u.entry = renum[entry];
    u.exit = renum[exit];
    u.shadows = em.shadows;
    u.counter_names = em.names;
    for (auto& s : u.shadows) u.counter_names.push_back(s.name);
    u.counter_index = em.index;
    for (auto& c : p.counters) u.program_counters.insert(em.index.at(c.name));
    for (auto& [l, s] : em.marks) u.marks[l].push_back(renum[s]);
    return u;
}

// ---------------------------------------------------------------------------
// reference interpreter

namespace {

using Val = std::map<std::string, Int>;  // zero entries are erased

struct Interp {
    const CounterProgram& prog;
    Bounds b;
    std::map<std::string, bool> nat;
    int serial = 0;

    bool in_box(const std::string& c, const Int& v) const {
        auto it = nat.find(c);
        if (it == nat.end()) throw ProgramError("UndeclaredCounter: " + c);
        if (it->second) return v >= 0 && v <= b.nmax;
        return abs(v) <= b.zabs;
    }
    static Int get(const Val& v, const std::string& c) {
        auto it = v.find(c);
        return it == v.end() ? Int(0) : it->second;
    }
    static void put(Val& v, const std::string& c, const Int& x) {
        if (x == 0)
            v.erase(c);
        else
            v[c] = x;
    }
    bool update(Val& v, const std::string& c, const Int& delta) const {
        Int x = get(v, c) + delta;
        if (!in_box(c, x)) return false;
        put(v, c, x);
        return true;
    }

    std::set<Val> block(const std::vector<Instr>& body, std::set<Val> s, const Env& env, TestMode inherited) {
        for (const Instr& in : body) {
            if (s.empty()) break;
            s = one(in, std::move(s), env, inherited);
        }
        return s;
    }

    std::set<Val> one(const Instr& in, std::set<Val> s, const Env& env, TestMode inherited) {
        std::set<Val> out;
        switch (in.kind) {
            case Instr::Add:
            case Instr::Sub: {
                Int a = in.amount.eval(env);
                if (in.kind == Instr::Sub) a = -a;
                std::string c = subst(in.counter, env);
                for (Val v : s)
                    if (update(v, c, a)) out.insert(std::move(v));
                return out;
            }
            case Instr::Transfer: {
                std::string c = subst(in.counter, env);
                std::map<std::string, Int> net{{c, -1}};
                for (auto& t : in.targets) net[subst(t, env)] += 1;
                for (Val v : s) {
                    bool ok = true;
                    for (auto& [n, dlt] : net) ok = ok && update(v, n, dlt);
                    if (ok) out.insert(std::move(v));
                }
                return out;
            }
            case Instr::Loop: {
                out = s;
                std::set<Val> frontier = std::move(s);
                while (!frontier.empty()) {
                    std::set<Val> next;
                    for (auto& v : block(in.body, frontier, env, inherited))
                        if (!out.count(v)) next.insert(v);
                    out.insert(next.begin(), next.end());
                    frontier = std::move(next);
                }
                return out;
            }
            case Instr::Guess:
                for (Int r = in.lo; r <= in.hi; ++r) {
                    Env e2 = env;
                    e2[in.var] = r;
                    auto part = block(in.body, s, e2, inherited);
                    out.insert(part.begin(), part.end());
                }
                return out;
            case Instr::For:
                for (Int r = in.lo; r <= in.hi; ++r) {
                    Env e2 = env;
                    e2[in.var] = r;
                    s = block(in.body, std::move(s), e2, inherited);
                }
                return s;
            case Instr::ZeroTest: {
                std::string c = subst(in.counter, env);
                TestMode m = in.mode == TestMode::Auto ? inherited : in.mode;
                for (Val v : s) {
                    if (get(v, c) != 0) continue;
                    if (m == TestMode::Budget && !update(v, prog.budget, -1)) continue;
                    out.insert(std::move(v));
                }
                return out;
            }
            case Instr::Macro: {
                std::vector<std::string> args;
                for (auto& a : in.args) args.push_back(subst(a, env));
                Expansion ex = expand_macro(in.macro, args, 100000 + serial++, in.mode);
                for (auto& d : ex.fresh) nat.emplace(d.name, d.nat);
                return block(ex.body, std::move(s), env, in.mode == TestMode::Auto ? inherited : in.mode);
            }
            case Instr::Mark:
                return s;
        }
        return out;
    }
};

}  // namespace

std::set<std::vector<Int>> interpret(const CounterProgram& p, const Valuation& init, const Bounds& b,
                                     const std::vector<std::string>& observe) {
    Interp in{p, b, {}};
    for (auto& c : p.counters) in.nat[c.name] = c.nat;
    Val v;
    for (auto& [c, x] : init) {
        if (!in.in_box(c, x)) return {};
        Interp::put(v, c, x);
    }
    std::set<std::vector<Int>> out;
    for (auto& f : in.block(p.body, {v}, {}, TestMode::Auto)) {
        std::vector<Int> row;
        for (auto& c : observe) row.push_back(Interp::get(f, c));
        out.insert(std::move(row));
    }
    return out;
}

std::set<std::vector<Int>> compiled_finals(const CompiledUnit& u, const Valuation& init, const Bounds& b,
                                           const std::vector<std::string>& observe,
                                           const std::map<std::string, Int>& fixed) {
    Configuration src = u.source(init);
    PartialTarget pt;
    pt.state = u.exit;
    pt.values.assign(src.values.size(), std::nullopt);
    for (auto& s : u.shadows) pt.values[s.counter] = 0;
    for (auto& [n, v] : fixed) pt.values[u.counter(n)] = to_i64(v);
    std::set<std::vector<Int>> out;
    for (auto& c : reach_set(u.system, src, b, pt)) {
        if (!u.manifest_ok(c)) continue;
        bool ok = true;
        for (auto& [n, v] : fixed) ok = ok && c.values[u.counter(n)] == v;
        if (!ok) continue;
        std::vector<Int> row;
        for (auto& n : observe) row.push_back(c.values[u.counter(n)]);
        out.insert(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// gadget harness

namespace {

std::string row_str(const std::vector<Int>& r) {
    std::string s = "(";
    for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i].str();
    return s + ")";
}

std::string val_str(const Valuation& v) {
    std::string s;
    for (auto& [n, x] : v) s += (s.empty() ? "" : " ") + n + "=" + x.str();
    return s.empty() ? "{}" : s;
}

long param(const std::map<std::string, long>& p, const std::string& k, long dflt) {
    auto it = p.find(k);
    return it == p.end() ? dflt : it->second;
}

}  // namespace

GadgetReport verify_gadget(const GadgetSpec& spec) {
    GadgetReport rep;
    rep.name = spec.name;
    CompiledUnit u = compile(spec.program, spec.backend);
    for (const Valuation& in : spec.inputs) {
        ++rep.inputs;
        auto got = compiled_finals(u, in, spec.bounds, spec.observe, spec.fixed);
        auto want = spec.expected(in);
        rep.finals += got.size();
        std::string line = val_str(in) + " ->";
        for (auto& r : got) line += " " + row_str(r);
        rep.lines.push_back(line);
        for (auto& r : got)
            if (!want.count(r)) rep.counterexamples.push_back(val_str(in) + ": unexpected final " + row_str(r));
        for (auto& r : want)
            if (!got.count(r)) rep.counterexamples.push_back(val_str(in) + ": missing final " + row_str(r));
    }
    return rep;
}

std::vector<std::string> gadget_names() {
    return {"move", "copy", "exact-mult", "weak-mult", "mult", "residue", "16-triple", "double-exp-triple"};
}

GadgetSpec gadget_spec(const std::string& name, const std::map<std::string, long>& params) {
    GadgetSpec g;
    g.name = name;
    auto& p = g.program;
    if (name == "move" || name == "copy") {
        long tmax = param(params, "max", 5);
        p.declare("a", true);
        p.declare("b", true);
        p.body = {cp::call(name, {"a", "b"})};
        g.observe = {"a", "b"};
        for (long t = 0; t <= tmax; ++t) g.inputs.push_back({{"a", t}});
        bool mv = name == "move";
        g.expected = [mv](const Valuation& in) {
            Int a = in.at("a");
            return std::set<std::vector<Int>>{mv ? std::vector<Int>{0, a} : std::vector<Int>{a, a}};
        };
        g.bounds = {tmax, tmax, 100000};
    } else if (name == "exact-mult" || name == "weak-mult") {
        long a = param(params, "a", 3), b = param(params, "b", 2), xmax = param(params, "max", 6);
        p.declare("x", true);
        p.declare("y", true);
        p.body = {cp::call(name, {"x", "y", std::to_string(a) + "/" + std::to_string(b)})};
        g.observe = {"x", "y"};
        for (long v = 0; v <= xmax; ++v) g.inputs.push_back({{"x", v}});
        long top = xmax * std::max(a, b) + 1;
        g.bounds = {top, top, 1000000};
        bool exact = name == "exact-mult";
        g.expected = [exact, a, b](const Valuation& in) {
            long v = static_cast<long>(in.at("x"));
            std::set<std::vector<Int>> s;
            if (exact) {
                if (v % b == 0) s.insert({Int(v / b * a), Int(0)});
                return s;
            }
            for (long m = 0; m <= v; ++m)
                for (long k = 0; k * b <= m; ++k) s.insert({Int(v - m + k * a), Int(m - k * b)});
            return s;
        };
    } else if (name == "mult") {
        long B = param(params, "B", 2), k = param(params, "k", 1), cmax = param(params, "max", 3);
        p.declare("x", true);
        p.declare("xbar", true);
        p.declare("y", false);
        p.declare("z", false);
        std::vector<std::string> args = {"x", "xbar", "y", "z"};
        for (long i = 1; i <= k; ++i) {
            p.declare("u" + std::to_string(i), false);
            args.push_back("u" + std::to_string(i));
        }
        p.body = {cp::call("mult", args)};
        g.observe = {"x", "u1"};
        for (long i = 2; i <= k; ++i) g.observe.push_back("u" + std::to_string(i));
        g.fixed = {{"y", 0}, {"z", 0}, {"xbar", 0}};
        std::vector<long> cs(static_cast<std::size_t>(k), 0);
        long top = 0;
        while (true) {
            long sum = 0;
            for (long c : cs) sum += c;
            for (long C = std::max(0L, sum - 1); C <= sum + 1; ++C) {
                Valuation in{{"x", B}, {"y", C}, {"z", 2 * B * C}};
                for (long i = 0; i < k; ++i) in["u" + std::to_string(i + 1)] = cs[static_cast<std::size_t>(i)];
                g.inputs.push_back(in);
                top = std::max({top, 2 * B * C, B * cmax, C});
            }
            std::size_t i = 0;
            while (i < cs.size() && cs[i] == cmax) cs[i++] = 0;
            if (i == cs.size()) break;
            ++cs[i];
        }
        g.bounds = {B, top + 2, 1000000};
        g.expected = [B, k](const Valuation& in) {
            std::set<std::vector<Int>> s;
            Int sum = 0;
            for (long i = 1; i <= k; ++i) sum += in.at("u" + std::to_string(i));
            if (sum != in.at("y")) return s;
            std::vector<Int> row{Int(B)};
            for (long i = 1; i <= k; ++i) row.push_back(B * in.at("u" + std::to_string(i)));
            s.insert(row);
            return s;
        };
    } else if (name == "residue") {
        long B = param(params, "B", 3), xmax = param(params, "max", 6);
        p.declare("x", true);
        p.declare("xbar", true);
        p.body = {cp::call("residue", {"x", "xbar", std::to_string(B)})};
        g.observe = {"x", "xbar"};
        for (long v = 0; v <= xmax; ++v) g.inputs.push_back({{"x", v}});
        g.bounds = {7 * xmax + 7 * B, 7 * xmax + 7 * B, 1000000};
        g.expected = [B](const Valuation& in) {
            long v = static_cast<long>(in.at("x"));
            std::set<std::vector<Int>> s;
            for (long r = 1; r < B && r <= v; ++r)
                for (long j = 0; j * B <= v - r; ++j)
                    for (long m = 0; m <= j; ++m) s.insert({Int(v - r - j * B + 7 * m * B + 7 * r), Int((j - m) * B)});
            return s;
        };
    } else if (name == "16-triple") {
        long cmax = param(params, "max", 3);
        p.declare("x", true);
        p.declare("y", true);
        p.declare("z", true);
        p.body = {cp::call("16-triple", {"x", "y", "z"})};
        g.observe = {"x", "y", "z"};
        g.inputs = {{}};
        g.bounds = {32 * cmax, 32 * cmax, 1000000};
        g.expected = [cmax](const Valuation&) {
            std::set<std::vector<Int>> s;
            for (long c = 0; c <= cmax; ++c) s.insert({16, Int(2 * c), Int(32 * c)});
            return s;
        };
    } else if (name == "double-exp-triple") {
        long A = param(params, "A", 2), n = param(params, "n", 0), bmax = param(params, "max", 2);
        p = double_exp_triple(A, n);
        std::string yn = "y" + std::to_string(n), zn = "z" + std::to_string(n);
        g.observe = {"x", yn, zn};
        for (auto& c : p.counters)
            if (c.name != "x" && c.name != yn && c.name != zn) g.fixed[c.name] = 0;
        g.inputs = {{}};
        // largest absolute value on the faithful run producing B
        auto peak = [A, n](long b) {
            std::vector<Int> C(static_cast<std::size_t>(n + 1));
            C[static_cast<std::size_t>(n)] = b;
            Int top = 0, Ai = 1;
            for (long i = n - 1; i >= 0; --i) {
                Ai = 1;
                for (long j = 0; j < (1L << i); ++j) Ai *= A;
                Int tail = 0;
                for (long j = i + 1; j <= n; ++j) tail += C[static_cast<std::size_t>(j)];
                C[static_cast<std::size_t>(i)] = Ai + 2 * Ai * tail;
            }
            for (long j = 0; j <= n; ++j) {
                Ai = 1;
                for (long e = 0; e < (1L << j); ++e) Ai *= A;
                top = std::max(top, Int(2 * Ai * C[static_cast<std::size_t>(j)]));
            }
            return top;
        };
        Int An = 1;
        for (long j = 0; j < (1L << n); ++j) An *= A;
        Int top = peak(bmax);
        g.bounds = {An, top, 10000000};
        g.expected = [An, peak, top](const Valuation&) {
            std::set<std::vector<Int>> s;
            for (long b = 0; peak(b) <= top; ++b) s.insert({An, Int(b), Int(b * An)});
            return s;
        };
    } else {
        throw ProgramError("UnknownGadget: " + name);
    }
    return g;
}

CounterProgram double_exp_triple(long a, long n) {
    CounterProgram p;
    Expansion e = double_exp_body(Int(a), n, "");
    for (auto& d : e.fresh) p.declare(d.name, d.nat);
    p.body = std::move(e.body);
    return p;
}

Amplifier amplifier_step(long b) {
    if (b <= 0 || b % 8 != 0) throw ProgramError("BNotDivisibleBy8: " + std::to_string(b));
    Amplifier a;
    a.b = b;
    auto& p = a.program;
    p.declare("x", true);
    p.declare("y", true);
    p.declare("z", true);
    p.declare("budget", false);
    p.budget = "budget";
    p.body = {cp::call("exp-amplifier", {"x", "y", "z", std::to_string(b), "budget"})};
    return a;
}

// ---------------------------------------------------------------------------
// witness driver

namespace {

struct Driver {
    const CompiledUnit& u;
    const LoopPolicy& policy;
    std::vector<char> checked;  // counters kept nonnegative while probing loops

    // Fires t on v. Strict mode reports failure; otherwise the update is applied regardless.
    bool fire(std::vector<Int>& v, int t, bool strict) const {
        const Transition& tr = u.system.transition(t);
        if (tr.ztest && v[*tr.ztest] != 0 && strict) return false;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (tr.update[i] == 0) continue;
            v[i] += tr.update[i];
            if (strict && checked[i] && v[i] < 0) return false;
        }
        return true;
    }

    bool block(const std::vector<CompiledNode>& nodes, std::vector<Int>& v, std::vector<int>& path,
               bool strict) const {
        for (auto& n : nodes)
            if (!node(n, v, path, strict)) return false;
        return true;
    }

    bool node(const CompiledNode& n, std::vector<Int>& v, std::vector<int>& path, bool strict) const {
        switch (n.kind) {
            case CompiledNode::Step:
            case CompiledNode::Test:
                for (int t : n.transitions) {
                    if (!fire(v, t, strict)) return false;
                    path.push_back(t);
                }
                return true;
            case CompiledNode::Loop: {
                auto it = n.label.empty() ? policy.end() : policy.find(n.label);
                if (it != policy.end()) {
                    for (Int i = 0; i < it->second; ++i)
                        if (!block(n.children[0], v, path, strict)) return false;
                } else {
                    for (long iter = 0;; ++iter) {
                        if (iter > 50000000) throw ProgramError("unbounded loop while building witness");
                        std::vector<Int> w = v;
                        std::size_t mark = path.size();
                        if (!block(n.children[0], w, path, true) || w == v) {
                            path.resize(mark);
                            break;
                        }
                        v = std::move(w);
                    }
                }
                path.push_back(n.exit_transition);
                return true;
            }
            case CompiledNode::Guess: {
                for (auto& br : n.children) {
                    std::vector<Int> w = v;
                    std::size_t mark = path.size();
                    if (block(br, w, path, true)) {
                        v = std::move(w);
                        return true;
                    }
                    path.resize(mark);
                }
                return block(n.children.front(), v, path, strict);
            }
        }
        return true;
    }
};

}  // namespace

std::vector<int> build_witness(const CompiledUnit& u, const Valuation& init, const LoopPolicy& policy) {
    Driver dr{u, policy, std::vector<char>(u.system.layout().dim(), 0)};
    for (std::size_t i = 0; i < u.counter_index.size(); ++i) dr.checked[i] = 1;
    std::vector<Int> v = u.source(init).values;
    std::vector<int> path;
    dr.block(u.tree, v, path, false);
    return path;
}

// ---------------------------------------------------------------------------
// .cp text format

namespace {

struct Tok {
    std::string text;
    int line, col;
};

std::vector<Tok> tokenize(const std::string& s) {
    std::vector<Tok> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto adv = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            if (s[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < s.size()) {
        char c = s[i];
        if (c == '#') {
            while (i < s.size() && s[i] != '\n') adv(1);
        } else if (c == '\n' || c == ';') {
            out.push_back({";", line, col});
            adv(1);
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            adv(1);
        } else if (c == '{' || c == '}') {
            out.push_back({std::string(1, c), line, col});
            adv(1);
        } else {
            std::size_t j = i;
            while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])) && s[j] != ';' && s[j] != '{' &&
                   s[j] != '}' && s[j] != '#')
                ++j;
            out.push_back({s.substr(i, j - i), line, col});
            adv(j - i);
        }
    }
    out.push_back({"", line, col});
    return out;
}

bool is_ident(const std::string& s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == '{' || c == '}' ||
               c == '#';
    });
}

bool is_macro(const std::string& s) {
    static const std::set<std::string> names = {"move",          "copy",        "weak-mult",     "exact-mult",
                                                "mult",          "residue",     "16-triple",     "final-check",
                                                "exp-amplifier", "tower-triple", "double-exp-triple"};
    return names.count(s) > 0;
}

struct CpParser {
    std::vector<Tok> toks;
    std::size_t pos = 0;
    CounterProgram prog;

    [[noreturn]] void fail(const Tok& t, const std::string& msg) { throw ParseError(t.line, t.col, msg); }
    const Tok& peek() const { return toks[pos]; }
    const Tok& next() { return toks[pos++]; }
    void skip_seps() {
        while (peek().text == ";") ++pos;
    }

    Amount amount(const Tok& t) {
        const std::string& s = t.text;
        try {
            std::size_t i = 0;
            Amount a;
            auto read_int = [&](Int& out) {
                std::size_t j = i;
                if (j < s.size() && (s[j] == '-' || s[j] == '+')) ++j;
                std::size_t k = j;
                while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
                if (k == j) return false;
                out = parse_int(s.substr(i, k - i));
                i = k;
                return true;
            };
            Int first;
            if (read_int(first)) {
                if (i == s.size()) return Amount(first);
                if (s[i] == '*') {
                    ++i;
                    a.c1 = first;
                    a.var = s.substr(i);
                } else {
                    a.c0 = first;
                    Int k = 1;
                    if (s[i] == '+' || s[i] == '-') {
                        bool neg = s[i] == '-';
                        ++i;
                        std::size_t st = i;
                        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
                        if (i > st) {
                            k = parse_int(s.substr(st, i - st));
                            if (i >= s.size() || s[i] != '*') throw 0;
                            ++i;
                        }
                        if (neg) k = -k;
                    } else {
                        throw 0;
                    }
                    a.c1 = k;
                    a.var = s.substr(i);
                }
            } else {
                a.c1 = 1;
                a.var = s;
            }
            if (!is_ident(a.var)) throw 0;
            return a;
        } catch (...) {
            fail(t, "bad amount '" + s + "'");
        }
    }

    std::pair<Int, Int> range(const Tok& t) {
        auto p = t.text.find("..");
        if (p == std::string::npos) fail(t, "expected a range lo..hi");
        try {
            return {parse_int(t.text.substr(0, p)), parse_int(t.text.substr(p + 2))};
        } catch (const ProgramError&) {
            fail(t, "bad range '" + t.text + "'");
        }
    }

    std::vector<Instr> block(bool nested) {
        std::vector<Instr> out;
        while (true) {
            skip_seps();
            const Tok& t = peek();
            if (t.text.empty()) {
                if (nested) fail(t, "missing '}'");
                return out;
            }
            if (t.text == "}") {
                if (!nested) fail(t, "unexpected '}'");
                ++pos;
                return out;
            }
            statement(out);
        }
    }

    std::vector<Tok> rest_of_line() {
        std::vector<Tok> r;
        while (peek().text != ";" && peek().text != "}" && peek().text != "{" && !peek().text.empty())
            r.push_back(next());
        return r;
    }

    std::vector<Instr> braced() {
        if (peek().text != "{") fail(peek(), "expected '{'");
        ++pos;
        return block(true);
    }

    void statement(std::vector<Instr>& out) {
        Tok head = next();
        const std::string& kw = head.text;
        if (kw == "nat" || kw == "int") {
            auto names = rest_of_line();
            if (names.empty()) fail(head, "expected counter names");
            for (auto& n : names) {
                if (!is_ident(n.text)) fail(n, "bad counter name '" + n.text + "'");
                try {
                    prog.declare(n.text, kw == "nat");
                } catch (const ProgramError& e) {
                    fail(n, e.what());
                }
            }
        } else if (kw == "budget") {
            auto a = rest_of_line();
            if (a.size() != 1) fail(head, "budget takes one counter");
            prog.budget = a[0].text;
        } else if (kw == "add" || kw == "sub") {
            auto a = rest_of_line();
            if (a.size() != 2) fail(head, kw + " takes a counter and an amount");
            out.push_back(kw == "add" ? cp::add(a[0].text, amount(a[1])) : cp::sub(a[0].text, amount(a[1])));
        } else if (kw == "loop") {
            std::string label;
            if (peek().text != "{") label = next().text;
            out.push_back(cp::loop(braced(), label));
        } else if (kw == "guess" || kw == "for") {
            Tok var = next();
            if (!is_ident(var.text)) fail(var, "expected a variable name");
            auto [lo, hi] = range(next());
            auto body = braced();
            out.push_back(kw == "guess" ? cp::guess(var.text, lo, hi, body) : cp::for_each(var.text, lo, hi, body));
        } else if (kw == "ztest") {
            auto a = rest_of_line();
            if (a.empty() || a.size() > 2) fail(head, "ztest takes a counter and an optional mode");
            TestMode m = TestMode::Auto;
            if (a.size() == 2) {
                if (a[1].text == "shadow")
                    m = TestMode::Shadow;
                else if (a[1].text == "native")
                    m = TestMode::Native;
                else if (a[1].text == "budget")
                    m = TestMode::Budget;
                else
                    fail(a[1], "unknown zero-test mode '" + a[1].text + "'");
            }
            out.push_back(cp::ztest(a[0].text, m));
        } else if (kw == "mark") {
            auto a = rest_of_line();
            if (a.size() != 1) fail(head, "mark takes one label");
            out.push_back(cp::mark(a[0].text));
        } else if (kw == "call" || is_macro(kw)) {
            std::string name = kw == "call" ? next().text : kw;
            std::vector<std::string> args;
            TestMode m = TestMode::Auto;
            for (auto& a : rest_of_line()) {
                if (a.text == "@budget")
                    m = TestMode::Budget;
                else if (a.text == "@native")
                    m = TestMode::Native;
                else if (a.text == "@shadow")
                    m = TestMode::Shadow;
                else
                    args.push_back(a.text);
            }
            out.push_back(cp::call(name, args, m));
        } else if (peek().text == "->") {
            ++pos;
            auto dsts = rest_of_line();
            if (dsts.empty()) fail(head, "transfer needs at least one target");
            std::vector<std::string> names;
            for (auto& d : dsts) names.push_back(d.text);
            out.push_back(cp::transfer(kw, names));
        } else {
            fail(head, "unknown statement '" + kw + "'");
        }
    }
};

void format_block(const std::vector<Instr>& body, int indent, std::ostringstream& os) {
    std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    auto mode = [](TestMode m) -> std::string {
        switch (m) {
            case TestMode::Shadow: return " shadow";
            case TestMode::Native: return " native";
            case TestMode::Budget: return " budget";
            default: return "";
        }
    };
    for (auto& in : body) {
        switch (in.kind) {
            case Instr::Add: os << pad << "add " << in.counter << " " << in.amount.str() << "\n"; break;
            case Instr::Sub: os << pad << "sub " << in.counter << " " << in.amount.str() << "\n"; break;
            case Instr::Transfer:
                os << pad << in.counter << " ->";
                for (auto& t : in.targets) os << " " << t;
                os << "\n";
                break;
            case Instr::Loop:
            case Instr::Guess:
            case Instr::For:
                if (in.kind == Instr::Loop)
                    os << pad << "loop" << (in.label.empty() ? "" : " " + in.label) << " {\n";
                else
                    os << pad << (in.kind == Instr::Guess ? "guess " : "for ") << in.var << " " << in.lo << ".."
                       << in.hi << " {\n";
                format_block(in.body, indent + 1, os);
                os << pad << "}\n";
                break;
            case Instr::ZeroTest: os << pad << "ztest " << in.counter << mode(in.mode) << "\n"; break;
            case Instr::Macro:
                os << pad << "call " << in.macro;
                for (auto& a : in.args) os << " " << a;
                if (in.mode != TestMode::Auto) os << " @" << mode(in.mode).substr(1);
                os << "\n";
                break;
            case Instr::Mark: os << pad << "mark " << in.label << "\n"; break;
        }
    }
}

}  // namespace

CounterProgram parse_program(const std::string& text) {
    CpParser p;
    p.toks = tokenize(text);
    p.prog.body = p.block(false);
    return p.prog;
}

std::string format_program(const CounterProgram& p) {
    std::ostringstream os;
    std::string nats, ints;
    for (auto& c : p.counters) (c.nat ? nats : ints) += " " + c.name;
    if (!nats.empty()) os << "nat" << nats << "\n";
    if (!ints.empty()) os << "int" << ints << "\n";
    if (!p.budget.empty()) os << "budget " << p.budget << "\n";
    format_block(p.body, 0, os);
    return os.str();
}

}  // namespace zvass
