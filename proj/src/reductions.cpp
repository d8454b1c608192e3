#include "zvass/reductions.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace zvass {

using nlohmann::json;

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Reachable: return "reachable";
        case Verdict::Unreachable: return "unreachable";
        default: return "unknown";
    }
}

json InstanceBundle::sidecar() const {
    json j;
    j["schema"] = "zvass.bundle/1";
    j["provenance"] = provenance;
    if (expected) j["expected"] = {{"verdict", verdict_name(expected->verdict)}, {"basis", expected->basis}};
    j["layout"] = {{"d", query.system.layout().d}, {"k", query.system.layout().k}};
    j["states"] = query.system.num_states();
    j["transitions"] = query.system.num_transitions();
    return j;
}

InstanceBundle subset_sum_to_izvass(const std::vector<long>& xs, long t) {
    if (xs.empty()) throw ZvassError("subset sum needs at least one element");
    long sum = 0;
    for (long x : xs) {
        if (x < 0) throw ZvassError("subset sum elements must be natural");
        sum += x;
    }
    if (t < 0) throw ZvassError("subset sum target must be natural");
    int d = 0;
    while ((1L << d) <= std::max(sum, t)) ++d;
    d = std::max(d, 1);

    const int n = static_cast<int>(xs.size());
    ZVass v(Layout{0, d});
    for (int i = 0; i <= n; ++i) v.add_state("q" + std::to_string(i));
    for (int i = 0; i < n; ++i) {
        Vec bits = zero_vec(d);
        for (int j = 0; j < d; ++j) bits[j] = (xs[i] >> j) & 1;
        v.add_transition(i, bits, i + 1, "select" + std::to_string(i + 1));
        v.add_transition(i, zero_vec(d), i + 1, "skip" + std::to_string(i + 1));
    }
    for (int j = 0; j + 1 < d; ++j) {
        Vec u = zero_vec(d);
        u[j] = -2;
        u[j + 1] = 1;
        v.add_transition(n, u, n, "carry" + std::to_string(j + 1));
    }
    InstanceBundle b;
    b.query.system = std::move(v);
    b.query.source = {0, zero_vec(d)};
    b.query.target = {n, zero_vec(d)};
    for (int j = 0; j < d; ++j) b.query.target.values[j] = (t >> j) & 1;
    b.provenance = {{"construction", "subset-sum"}, {"xs", xs}, {"t", t}, {"d", d}};
    bool hit = false;
    if (n <= 24)
        for (long mask = 0; mask < (1L << n) && !hit; ++mask) {
            long s = 0;
            for (int i = 0; i < n; ++i)
                if (mask >> i & 1) s += xs[i];
            hit = s == t;
        }
    if (n <= 24) b.expected = Expected{hit ? Verdict::Reachable : Verdict::Unreachable, "brute-force"};
    return b;
}

ThreeCA linear_ca(const std::vector<std::string>& ops) {
    ThreeCA ca;
    ca.automaton = ZVass(Layout{3, 0});
    ca.automaton.add_state("c0");
    for (std::size_t i = 0; i < ops.size(); ++i) {
        ca.automaton.add_state("c" + std::to_string(i + 1));
        std::istringstream is(ops[i]);
        std::string op;
        int c = 0;
        is >> op;
        int s = static_cast<int>(i), t = static_cast<int>(i + 1);
        if (op == "nop") {
            ca.automaton.add_transition(s, zero_vec(3), t);
            continue;
        }
        if (!(is >> c) || c < 1 || c > 3) throw ZvassError("bad automaton op '" + ops[i] + "'");
        if (op == "zero") {
            ca.automaton.add_ztest(s, c - 1, t);
        } else if (op == "inc" || op == "dec") {
            Vec u = zero_vec(3);
            u[c - 1] = op == "inc" ? 1 : -1;
            ca.automaton.add_transition(s, u, t);
        } else {
            throw ZvassError("bad automaton op '" + ops[i] + "'");
        }
    }
    ca.initial = 0;
    ca.final = static_cast<int>(ops.size());
    return ca;
}

namespace {

const long kBase[3] = {2, 3, 5};

CounterProgram sim_program() {
    CounterProgram p;
    p.declare("x", true);
    p.declare("xbar", true);
    for (const char* c : {"y1", "y2", "y3", "z1", "z2"}) p.declare(c, false);
    return p;
}

Int pow_int(Int b, unsigned long e) {
    Int r = 1;
    while (e--) r *= b;
    return r;
}

// Splices compiled pieces into one system over a shared counter list.
struct Assembly {
    std::vector<std::string> names;
    std::map<std::string, int> index;
    int d = 0;
    ZVass sys;
    struct Shadow {
        int counter, tested;
        std::size_t piece;
    };
    std::vector<Shadow> shadows;
    std::vector<std::size_t> piece_of;  // per transition

    static std::string shadow_name(std::size_t piece, const std::string& s) {
        return "@" + std::to_string(piece) + ":" + s;
    }

    void layout(const std::vector<const CompiledUnit*>& units) {
        for (int pass = 0; pass < 3; ++pass)
            for (std::size_t pi = 0; pi < units.size(); ++pi) {
                const CompiledUnit& u = *units[pi];
                const int dl = u.system.layout().d;
                for (std::size_t c = 0; c < u.counter_names.size(); ++c) {
                    bool shadow = c >= u.counter_index.size();
                    bool nat = static_cast<int>(c) < dl;
                    int kind = nat ? 0 : shadow ? 2 : 1;
                    if (kind != pass) continue;
                    std::string n = shadow ? shadow_name(pi, u.counter_names[c]) : u.counter_names[c];
                    if (index.count(n)) continue;
                    index[n] = static_cast<int>(names.size());
                    names.push_back(n);
                    if (nat) ++d;
                }
            }
        sys = ZVass(Layout{d, static_cast<int>(names.size()) - d});
    }

    int global(std::size_t pi, const CompiledUnit& u, int c) const {
        if (c >= static_cast<int>(u.counter_index.size())) return index.at(shadow_name(pi, u.counter_names[c]));
        return index.at(u.counter_names[c]);
    }

    // Returns the global exit state.
    int splice(std::size_t pi, const CompiledUnit& u, int entry, int exit, const std::string& tag) {
        std::vector<int> st(static_cast<std::size_t>(u.system.num_states()), -1);
        st[u.entry] = entry;
        if (exit >= 0) st[u.exit] = exit;
        for (int s = 0; s < u.system.num_states(); ++s)
            if (st[s] < 0) st[s] = sys.add_state(tag + "." + u.system.state_name(s));
        for (auto& t : u.system.transitions()) {
            Transition g;
            g.name = tag + "." + t.name;
            g.src = st[t.src];
            g.dst = st[t.dst];
            g.update = zero_vec(sys.layout().dim());
            for (std::size_t c = 0; c < t.update.size(); ++c)
                if (t.update[c] != 0) g.update[global(pi, u, static_cast<int>(c))] += t.update[c];
            if (t.ztest) g.ztest = global(pi, u, *t.ztest);
            sys.add_transition(std::move(g));
            piece_of.push_back(pi);
        }
        for (auto& s : u.shadows) shadows.push_back({global(pi, u, s.counter), global(pi, u, s.tested), pi});
        return st[u.exit];
    }

    // Shadows of `piece` also copy every transition of earlier pieces.
    void mirror_earlier(std::size_t piece) {
        std::vector<Transition> ts = sys.transitions();
        ZVass fresh(sys.layout());
        for (auto& s : sys.states()) fresh.add_state(s);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            if (piece_of[i] < piece)
                for (auto& s : shadows)
                    if (s.piece == piece) ts[i].update[s.counter] = ts[i].update[s.tested];
            fresh.add_transition(ts[i]);
        }
        sys = std::move(fresh);
    }
};

CounterProgram step_program(const Transition& t) {
    CounterProgram p = sim_program();
    if (t.ztest) {
        for (auto& u : t.update)
            if (u != 0) throw ZvassError("automaton transition mixes a zero-test with an update");
        int c = *t.ztest;
        p.body = {cp::call("residue", {"x", "xbar", std::to_string(kBase[c])}), cp::sub("z1", 1)};
        return p;
    }
    Int a = 7, b = 1;
    for (int c = 0; c < 3; ++c) {
        if (t.update[c] > 0) a *= pow_int(kBase[c], static_cast<unsigned long>(t.update[c]));
        if (t.update[c] < 0) b *= pow_int(kBase[c], static_cast<unsigned long>(-t.update[c]));
    }
    p.body = {cp::call("weak-mult", {"x", "xbar", a.str() + "/" + b.str()})};
    for (int c = 0; c < 3; ++c)
        if (t.update[c] != 0) p.body.push_back(cp::add("y" + std::to_string(c + 1), t.update[c]));
    p.body.push_back(cp::sub("z1", 1));
    return p;
}

}  // namespace

CounterProgram pair_program(int n) {
    if (n < 0) throw ZvassError("pair exponent must be natural");
    CounterProgram p = sim_program();
    p.body.push_back(cp::add("z1", 1));
    for (int j = 0; j < n; ++j) p.body.push_back(cp::call("exact-mult", {"z1", "2/1"}));
    p.body.push_back(cp::call("double-exp-triple", {"7", std::to_string(n), "p"}));
    std::string yn = "py" + std::to_string(n), zn = "pz" + std::to_string(n);
    p.body.push_back(cp::loop({cp::sub(yn, 1)}));
    p.body.push_back(cp::ztest(yn));
    p.body.push_back(cp::loop({cp::sub(zn, 1)}));
    p.body.push_back(cp::ztest(zn));
    p.body.push_back(cp::call("move", {"x", "z2"}));
    return p;
}

CaSimulation ca3_to_zvass2(const ThreeCA& ca, int n, PairSource pairs) {
    const ZVass& A = ca.automaton;
    if (A.layout().d != 3 || A.layout().k != 0)
        throw ZvassError("WrongCounterCount: expected a three-counter automaton, got d=" +
                         std::to_string(A.layout().d) + " k=" + std::to_string(A.layout().k));
    if (n < 0 || n > 4) throw ZvassError("pair exponent out of range");

    CounterProgram pre = pairs == PairSource::Generated ? pair_program(n) : sim_program();
    pre.body.push_back(cp::add("x", 1));
    std::vector<CompiledUnit> units;
    units.push_back(compile(pre, Backend::ZVass));
    for (auto& t : A.transitions()) units.push_back(compile(step_program(t), Backend::ZVass));
    CounterProgram fin = sim_program();
    fin.body = {cp::call("final-check", {"x", "xbar", "y1", "y2", "y3", "z1", "z2"})};
    units.push_back(compile(fin, Backend::ZVass));

    Assembly as;
    std::vector<const CompiledUnit*> ptrs;
    for (auto& u : units) ptrs.push_back(&u);
    as.layout(ptrs);

    CaSimulation sim;
    int start = as.sys.add_state("start");
    for (int s = 0; s < A.num_states(); ++s) sim.checkpoints.push_back(as.sys.add_state("ca:" + A.state_name(s)));
    as.splice(0, units[0], start, sim.checkpoints[ca.initial], "pre");
    for (int t = 0; t < A.num_transitions(); ++t) {
        const Transition& tr = A.transition(t);
        as.splice(static_cast<std::size_t>(t + 1), units[static_cast<std::size_t>(t + 1)], sim.checkpoints[tr.src],
                  sim.checkpoints[tr.dst], "step" + std::to_string(t));
    }
    std::size_t last = units.size() - 1;
    sim.final_entry = sim.checkpoints[ca.final];
    int first_final = as.sys.num_transitions();
    int done = as.splice(last, units[last], sim.final_entry, -1, "final");
    for (int t = first_final; t < as.sys.num_transitions(); ++t) sim.final_transitions.push_back(t);
    as.mirror_earlier(last);

    ReachQuery& q = sim.bundle.query;
    q.system = as.sys;
    const int dim = q.system.layout().dim();
    q.source = {start, zero_vec(dim)};
    sim.pair_steps = std::size_t(1) << n;
    if (pairs == PairSource::Preloaded) {
        q.source.values[as.index.at("z1")] = Int(1) << n;
        q.source.values[as.index.at("z2")] = pow_int(7, 1UL << n);
    }
    for (auto& s : as.shadows) q.source.values[s.counter] = q.source.values[s.tested];
    q.target = {done, zero_vec(dim)};
    sim.bundle.provenance = {{"construction", "ca-simulation"},
                             {"n", n},
                             {"pairs", pairs == PairSource::Preloaded ? "preloaded" : "generated"},
                             {"counters", as.names},
                             {"automaton", serialize_instance({A, {ca.initial, zero_vec(3)}, {ca.final, zero_vec(3)}})}};
    return sim;
}

TowerBundle tower_instance(int n) {
    if (n < 3) throw ZvassError("NTooSmall: tower instances start at n = 3");
    if (n > 5) throw ZvassError("tower instances beyond n = 5 are not materialised");
    TowerBundle b;
    auto& p = b.program;
    p.declare("x", true);
    p.declare("y", true);
    p.declare("z", true);
    if (n == 3) {
        p.body = {cp::call("16-triple", {"x", "y", "z", "C3"})};
    } else {
        p.declare("budget", false);
        p.budget = "budget";
        p.body = {cp::call("tower-triple", {std::to_string(n)})};
    }
    b.interface = {{"schema", "zvass.tower/1"},
                   {"n", n},
                   {"backend", "ca"},
                   {"output", "(x, y, z) = (Tower(n), 2C, 2 Tower(n) C) for any C >= 0"},
                   {"consumer", "q_I(0, 0, B, 2C, 2BC) for a three-counter integer-extended VASS simulating a "
                                "two-counter automaton with B/2 zero-tests"},
                   {"status", "external gadget required: the triple-consuming zero-test is not generated"}};
    return b;
}

ReachQuery nonsemilinear(long x12) {
    ZVass v(Layout{2, 2});
    int q = v.add_state("q"), p = v.add_state("p");
    auto vec = [](std::initializer_list<long> xs) {
        Vec r;
        for (long x : xs) r.emplace_back(x);
        return r;
    };
    v.add_transition(q, vec({1, -1, 0, 1}), q, "inner");
    v.add_transition(q, vec({0, 0, 1, 0}), p, "enter");
    v.add_transition(p, vec({0, 0, 0, 0}), q, "back");
    v.add_transition(p, vec({-1, 1, 0, 0}), p, "outer");
    ReachQuery r;
    r.system = std::move(v);
    r.source = {q, vec({0, x12, 0, 0})};
    r.target = {p, vec({x12, 0, 1, x12})};
    return r;
}

std::vector<std::string> gallery_names() {
    return {"nonsemilinear-2-2", "np-hard-unary", "exact-mult", "16-triple", "move", "ca-simulation"};
}

InstanceBundle gallery(const std::string& name) {
    InstanceBundle b;
    auto from_program = [&](const CounterProgram& p, const std::map<std::string, Int>& in,
                            const std::map<std::string, Int>& out) {
        CompiledUnit u = compile(p, Backend::ZVass);
        b.query.system = u.system;
        b.query.source = u.source(in);
        b.query.target = {u.exit, zero_vec(u.system.layout().dim())};
        for (auto& [n, v] : out) b.query.target.values[u.counter(n)] = v;
    };
    if (name == "nonsemilinear-2-2") {
        b.query = nonsemilinear(2);
        b.query.target.values = {2, 0, 2, 4};
        b.provenance = {{"construction", "nonsemilinear"}, {"x12", 2}};
        b.expected = Expected{Verdict::Reachable, "oracle"};
    } else if (name == "np-hard-unary") {
        b = subset_sum_to_izvass({3, 5, 6, 9}, 14);
    } else if (name == "exact-mult" || name == "move") {
        CounterProgram p;
        p.declare("x", true);
        p.declare("y", true);
        if (name == "exact-mult") {
            p.body = {cp::call("exact-mult", {"x", "y", "3/2"})};
            from_program(p, {{"x", 4}}, {{"x", 6}});
        } else {
            p.body = {cp::call("move", {"x", "y"})};
            from_program(p, {{"x", 5}}, {{"y", 5}});
        }
        b.provenance = {{"construction", "gadget"}, {"gadget", name}};
        b.expected = Expected{Verdict::Reachable, "oracle"};
    } else if (name == "16-triple") {
        CounterProgram p;
        for (const char* c : {"x", "y", "z"}) p.declare(c, true);
        p.body = {cp::call("16-triple", {"x", "y", "z"})};
        from_program(p, {}, {{"x", 16}, {"y", 4}, {"z", 64}});
        b.provenance = {{"construction", "gadget"}, {"gadget", name}};
        b.expected = Expected{Verdict::Reachable, "trivial"};
    } else if (name == "ca-simulation") {
        CaSimulation s = ca3_to_zvass2(linear_ca({"inc 1", "dec 1"}), 1);
        b = s.bundle;
        b.expected = Expected{Verdict::Reachable, "oracle"};
    } else {
        throw ZvassError("UnknownName: gallery has no instance '" + name + "'");
    }
    return b;
}

}  // namespace zvass
