#include "fuzz.hpp"
#include "zvass/ctrprog.hpp"
#include "zvass/klmst.hpp"
#include "zvass/lps.hpp"
#include "zvass/parikh.hpp"
#include "zvass/reductions.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

using namespace zvass;
using namespace zvass::cp;
using namespace zvass::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    bool known_gap = false;  // failure recorded as unattainable
};

std::vector<Int> row(std::initializer_list<long> xs) {
    std::vector<Int> r;
    for (long x : xs) r.emplace_back(x);
    return r;
}

Configuration exit_config(const CompiledUnit& u, const std::map<std::string, Int>& vals) {
    Configuration c{u.exit, zero_vec(u.system.layout().dim())};
    for (auto& [n, v] : vals) c.values[u.counter(n)] = v;
    return c;
}

Outcome nonsemilinear_boundary() {
    int rows = 0, good = 0;
    std::vector<std::string> bad;
    for (long x12 = 1; x12 <= 3; ++x12) {
        ReachQuery q = nonsemilinear(x12);
        for (long x3 = 0; x3 <= 3; ++x3) {
            ++rows;
            q.target.values = {Int(x12), 0, Int(x3), Int(x12 * x3)};
            bool at = bounded_reach(q, Bounds{6, 32, 200}).reachable;
            q.target.values[3] += 1;
            bool above = bounded_reach(q, Bounds{6, 32, 200}).reachable;
            if (at && !above)
                ++good;
            else
                bad.push_back("(" + std::to_string(x12) + "," + std::to_string(x3) + ")");
        }
    }
    Outcome o;
    o.pass = good == rows;
    o.detail = std::to_string(good) + "/" + std::to_string(rows) + " rows";
    if (!bad.empty()) {
        o.detail += "; failing (x12,x3):";
        for (auto& b : bad) o.detail += " " + b;
        bool only_zero = std::all_of(bad.begin(), bad.end(), [](const std::string& s) { return s[3] == '0'; });
        if (only_zero) {
            o.known_gap = true;
            o.detail += "; with x3 = 0 the control state p is never entered, so x4 = 0 is unreachable";
        }
    }
    return o;
}

Outcome gadgets() {
    std::vector<std::string> bad;
    std::size_t checked = 0;
    for (auto [a, b] : {std::pair{2L, 1L}, {3L, 2L}, {7L, 5L}}) {
        GadgetSpec g = gadget_spec("exact-mult", {{"a", a}, {"b", b}, {"max", 20}});
        CompiledUnit u = compile(g.program, Backend::ZVass);
        for (long x0 = 0; x0 <= 20; ++x0) {
            auto f = compiled_finals(u, {{"x", x0}}, g.bounds, {"x", "y"});
            std::set<std::vector<Int>> want;
            if (x0 % b == 0) want.insert(row({x0 / b * a, 0}));
            ++checked;
            if (f != want) bad.push_back("exact-mult " + std::to_string(a) + "/" + std::to_string(b) + " x0=" +
                                         std::to_string(x0));
        }
        GadgetSpec w = gadget_spec("weak-mult", {{"a", a}, {"b", b}, {"max", 6}});
        CompiledUnit wu = compile(w.program, Backend::ZVass);
        for (long v = 0; v <= 6; ++v) {
            auto f = compiled_finals(wu, {{"x", v}}, w.bounds, {"x", "y"});
            std::set<std::vector<Int>> closed;
            std::set<Int> xs, want_xs;
            for (long m = 0; m <= v; ++m)
                for (long k = 0; k * b <= m; ++k) {
                    closed.insert(row({v - m + k * a, m - k * b}));
                    want_xs.insert(Int(v - m + k * a));
                }
            for (auto& r : f) xs.insert(r[0]);
            ++checked;
            if (f != closed || xs != want_xs)
                bad.push_back("weak-mult " + std::to_string(a) + "/" + std::to_string(b) + " v=" + std::to_string(v));
        }
    }
    for (long B = 1; B <= 3; ++B)
        for (long k = 1; k <= 2; ++k) {
            GadgetReport rep = verify_gadget(gadget_spec("mult", {{"B", B}, {"k", k}, {"max", 3}}));
            checked += rep.inputs;
            if (!rep.ok()) bad.push_back("mult B=" + std::to_string(B) + " k=" + std::to_string(k));
        }
    GadgetSpec t = gadget_spec("16-triple", {{"max", 3}});
    CompiledUnit tu = compile(t.program, Backend::ZVass);
    std::set<std::vector<Int>> want;
    for (long c = 0; c <= 3; ++c) want.insert(row({16, 2 * c, 32 * c}));
    std::set<std::vector<Int>> got;
    for (auto& r : compiled_finals(tu, {}, t.bounds, {"x", "y", "z"}))
        if (r[1] <= 6) got.insert(r);
    ++checked;
    if (got != want) bad.push_back("16-triple");

    Outcome o;
    o.pass = bad.empty();
    o.detail = std::to_string(checked) + " inputs checked";
    for (auto& b : bad) o.detail += "; mismatch " + b;
    return o;
}

Outcome double_exp() {
    const long A = 2;
    std::vector<std::string> bad;
    auto power = [&](long n) {
        Int p = A;
        for (long i = 0; i < n; ++i) p *= p;
        return p;
    };
    for (long n = 0; n <= 1; ++n) {
        CompiledUnit u = compile(double_exp_triple(A, n), Backend::ZVass);
        Bounds b = n == 0 ? Bounds{2, 12, 10000} : Bounds{4, 40, 100000};
        std::string yn = "y" + std::to_string(n), zn = "z" + std::to_string(n);
        std::set<std::vector<Int>> got, want;
        for (auto& r : compiled_finals(u, {}, b, {"x", yn, zn}, {{"u", 0}}))
            if (r[1] <= 2) got.insert(r);
        for (long B = 0; B <= 2; ++B) want.insert({power(n), Int(B), B * power(n)});
        if (got != want) bad.push_back("finals n=" + std::to_string(n));
    }
    std::size_t checks = 0;
    for (long n = 1; n <= 2; ++n) {
        CompiledUnit u = compile(double_exp_triple(A, n), Backend::ZVass);
        for (long B = 0; B <= 2; ++B) {
            std::vector<Int> C(static_cast<std::size_t>(n + 1));
            C[static_cast<std::size_t>(n)] = B;
            for (long i = n - 1; i >= 0; --i) {
                Int later = 0;
                for (long j = i + 1; j <= n; ++j) later += C[static_cast<std::size_t>(j)];
                C[static_cast<std::size_t>(i)] = power(i) * (1 + 2 * later);
            }
            LoopPolicy pol;
            for (long i = 0; i <= n; ++i) pol["C" + std::to_string(i)] = C[static_cast<std::size_t>(i)];
            auto rr = replay(u.system, u.source({}), build_witness(u, {}, pol));
            std::string tag = " n=" + std::to_string(n) + " B=" + std::to_string(B);
            if (!rr.ok() || !u.manifest_ok(rr.trace.configs.back())) {
                bad.push_back("witness" + tag);
                continue;
            }
            Configuration want = exit_config(u, {{"x", power(n)},
                                                 {"y" + std::to_string(n), Int(B)},
                                                 {"z" + std::to_string(n), B * power(n)}});
            if (rr.trace.configs.back() != want) bad.push_back("final" + tag);
            int guessed = u.marks.at("guessed").front();
            for (auto& c : rr.trace.configs) {
                if (c.state != guessed) continue;
                for (long i = 0; i < n; ++i) {
                    Int later = 0;
                    for (long j = i + 1; j <= n; ++j) later += c.values[u.counter("y" + std::to_string(j))];
                    ++checks;
                    if (c.values[u.counter("y" + std::to_string(i))] != power(i) * (1 + 2 * later))
                        bad.push_back("invariant" + tag);
                }
                break;
            }
        }
    }
    Outcome o;
    o.pass = bad.empty() && checks > 0;
    o.detail = "finals exact for n <= 1, witnesses n = 1, 2 with " + std::to_string(checks) + " invariant checks";
    for (auto& b : bad) o.detail += "; " + b;
    return o;
}

Outcome amplifier() {
    std::vector<std::string> bad;
    std::string finals;
    for (long B : {8L, 16L}) {
        Amplifier a = amplifier_step(B);
        CompiledUnit u = compile(a.program, Backend::CA);
        Valuation in{{"x", B}, {"y", 2}, {"z", 2 * B}};
        auto ok = replay(u.system, u.source(in), build_witness(u, in, {{"C", 1}, {"K1", B / 8}, {"K2", B / 8}}), false);
        if (!ok.ok() || !u.manifest_ok(ok.trace.configs.back())) {
            bad.push_back("witness B=" + std::to_string(B));
            continue;
        }
        const Configuration& f = ok.trace.configs.back();
        Int p = Int(1) << static_cast<unsigned>(B);
        finals += " " + f.values[u.counter("x")].str();
        if (f.values[u.counter("x")] != p || f.values[u.counter("y")] != 2 || f.values[u.counter("z")] != 2 * p)
            bad.push_back("value B=" + std::to_string(B));
        if (B != 8) continue;
        auto pert = replay(u.system, u.source(in), build_witness(u, in, {{"C", 1}, {"K1", 2}, {"K2", 0}}), false);
        const Configuration& g = pert.trace.configs.back();
        bool u_failed = false;
        for (auto& s : u.shadows)
            if (g.values[s.counter] != 0 && s.name.rfind("shadow:u#", 0) == 0) u_failed = true;
        if ((pert.ok() && u.manifest_ok(g)) || !u_failed) bad.push_back("perturbed witness accepted");
    }
    Outcome o;
    o.pass = bad.empty();
    o.detail = "x at exit:" + finals + "; K1 != K2 rejected by the u zero-test (B = 8)";
    for (auto& b : bad) o.detail += "; " + b;
    return o;
}

int sim_counter(const CaSimulation& s, const std::string& name) {
    const auto& names = s.bundle.provenance["counters"];
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

Int sim_encoding(const CaSimulation& s, const Configuration& c) {
    Int e = 1;
    const long base[] = {2, 3, 5};
    for (int i = 0; i < 3; ++i)
        for (Int k = 0; k < c.values[sim_counter(s, "y" + std::to_string(i + 1))]; ++k) e *= base[i];
    Int L = Int(s.pair_steps) - c.values[sim_counter(s, "z1")];
    for (Int k = 0; k < L; ++k) e *= 7;
    return e;
}

Outcome ca_simulation() {
    std::vector<ThreeCA> battery;
    for (auto& ops : std::vector<std::vector<std::string>>{
             {"inc 1", "dec 1"}, {"inc 1"}, {"zero 1"}, {}, {"inc 1", "zero 1"}, {"dec 1"},
             {"inc 2", "dec 2"}, {"inc 3", "dec 3"}, {"zero 2", "zero 3"}, {"inc 1", "dec 1", "zero 1"},
             {"nop", "nop"}, {"inc 1", "dec 2"}})
        battery.push_back(linear_ca(ops));
    ThreeCA g;
    g.automaton = ZVass(Layout{3, 0});
    int q0 = g.automaton.add_state("q0"), q1 = g.automaton.add_state("q1"), qf = g.automaton.add_state("qf");
    g.automaton.add_transition(q0, {1, 0, 0}, q1);
    g.automaton.add_transition(q1, {-1, 0, 0}, q0);
    g.automaton.add_ztest(q1, 1, qf);
    g.initial = q0;
    g.final = qf;
    battery.push_back(g);
    g.automaton.add_ztest(q0, 2, qf);
    battery.push_back(g);

    int agree = 0, reach = 0;
    std::size_t checkpoints = 0;
    std::vector<std::string> bad;
    for (std::size_t i = 0; i < battery.size(); ++i) {
        const ThreeCA& ca = battery[i];
        bool base = length_bounded_ca_reach(ca.automaton, {ca.initial, zero_vec(3)}, {ca.final, zero_vec(3)}, 2)
                        .reachable;
        CaSimulation s = ca3_to_zvass2(ca, 1);
        OracleAnswer a = bounded_reach(s.bundle.query, Bounds{60, 80, 2000});
        if (a.reachable == base)
            ++agree;
        else
            bad.push_back("verdict #" + std::to_string(i));
        if (!a.reachable) continue;
        ++reach;
        const Trace& tr = *a.trace;
        // between checkpoints a weak multiplication stays under the larger of the two encodings
        std::vector<std::size_t> at;
        for (std::size_t j = 0; j < tr.configs.size(); ++j)
            if (std::find(s.checkpoints.begin(), s.checkpoints.end(), tr.configs[j].state) != s.checkpoints.end())
                at.push_back(j);
        for (std::size_t j = 0; j < tr.configs.size(); ++j) {
            const Configuration& c = tr.configs[j];
            Int sum = c.values[sim_counter(s, "x")] + c.values[sim_counter(s, "xbar")];
            auto next = std::lower_bound(at.begin(), at.end(), j);
            Int cap = 0;
            if (next != at.end()) cap = sim_encoding(s, tr.configs[*next]);
            if (next != at.begin()) cap = std::max(cap, sim_encoding(s, tr.configs[*std::prev(next)]));
            if (next != at.end() && *next == j) {
                ++checkpoints;
                if (sum != sim_encoding(s, c)) bad.push_back("invariant #" + std::to_string(i));
            }
            if (sum > cap) bad.push_back("step bound #" + std::to_string(i));
            if (j < tr.path.size() && tr.path[j] == s.final_transitions.front()) {
                Int lhs = sum;
                for (Int k = 0; k < c.values[sim_counter(s, "z1")]; ++k) lhs *= 7;
                if (lhs > c.values[sim_counter(s, "z2")]) bad.push_back("final check #" + std::to_string(i));
            }
        }
    }
    Outcome o;
    o.pass = bad.empty() && battery.size() >= 10;
    o.detail = std::to_string(agree) + "/" + std::to_string(battery.size()) + " verdicts agree, " +
               std::to_string(reach) + " witnesses, " + std::to_string(checkpoints) + " checkpoints";
    for (auto& b : bad) o.detail += "; " + b;
    return o;
}

Outcome lps_round_trip() {
    Rng r(2024);
    int runs = 0;
    std::size_t cycles = 0, worst_anchor = 0;
    std::vector<std::string> bad;
    for (int it = 0; it < 300; ++it) {
        int k = r(0, 3), n = r(1, 4);
        ZVass v = random_zvass(r, 1, k, n, r(n, 2 * n + 2), -3, 3);
        Configuration s{0, {Int(r(0, 5))}};
        for (int i = 0; i < k; ++i) s.values.emplace_back(r(-5, 5));
        Trace tr = random_run(r, v, s, r(0, 120));
        ReachQuery q{v, s, tr.configs.back()};
        LinearPathScheme sc = compress_run(q, tr);
        ++runs;
        std::string tag = " run " + std::to_string(it);
        if (!validate(q, sc).ok()) bad.push_back("validate" + tag);

        Vec eff = zero_vec(1 + k), want = zero_vec(1 + k);
        for (int i = 0; i <= k; ++i) want[i] = q.target.values[i] - q.source.values[i];
        std::map<int, std::set<std::vector<int>>> anchors;
        for (const auto& seg : sc.segments) {
            Int times = seg.cycle ? seg.exp : Int(1);
            for (int t : seg.path)
                for (int i = 0; i <= k; ++i) eff[i] += times * v.transitions()[t].update[i];
            if (!seg.cycle) continue;
            ++cycles;
            std::set<int> seen;
            for (int t : seg.path) seen.insert(v.transitions()[t].src);
            if (seen.size() != seg.path.size()) bad.push_back("non-simple cycle" + tag);
            anchors[v.transitions()[seg.path.front()].src].insert(seg.path);
        }
        if (eff != want) bad.push_back("effect" + tag);
        std::size_t nq = static_cast<std::size_t>(n);
        if (sc.underlying_length() >= nq * (2 * nq + 1)) bad.push_back("length" + tag);
        double M = std::max(1.0, v.max_norm().convert_to<double>());
        auto limit = static_cast<std::size_t>(std::ceil(2.0 * (k + 1) * std::log2(4.0 * (k + 1) * M * n)));
        for (auto& [a, cs] : anchors) {
            worst_anchor = std::max(worst_anchor, cs.size());
            if (cs.size() > limit) bad.push_back("anchor count" + tag);
        }
    }
    Outcome o;
    o.pass = bad.empty();
    o.detail = std::to_string(runs) + " runs, " + std::to_string(cycles) + " cycle segments, at most " +
               std::to_string(worst_anchor) + " distinct cycles per anchor";
    for (std::size_t i = 0; i < bad.size() && i < 5; ++i) o.detail += "; " + bad[i];
    return o;
}

Outcome dim1_vs_oracle() {
    Rng r(2024);
    int agree = 0, reach = 0;
    const int total = 100;
    for (int it = 0; it < total; ++it) {
        int k = r(0, 2), n = r(1, 4);
        ZVass v = random_zvass(r, 1, k, n, r(1, 2 * n), -2, 2);
        Configuration s{0, {Int(r(0, 2))}}, t{r(0, n - 1), {Int(r(0, 2))}};
        for (int i = 0; i < k; ++i) {
            s.values.emplace_back(r(-2, 2));
            t.values.emplace_back(r(-2, 2));
        }
        Bounds b{6, 6, 8};
        ReachQuery q{v, s, t};
        bool o = bounded_reach(q, b).reachable;
        Dim1Caps caps;
        caps.skeleton = 8;
        caps.box = b;
        caps.xmax = 8;
        Dim1Result d = solve_dim1(q, caps);
        bool ok = d.found == o;
        if (d.found) ok = ok && validate(q, d.scheme).ok();
        agree += ok;
        reach += o;
    }
    Outcome o;
    o.pass = agree == total;
    o.detail = std::to_string(agree) + "/" + std::to_string(total) + " agree (" + std::to_string(reach) +
               " reachable) under box (6, 6, 8)";
    return o;
}

// Letters emitted for one transition of a ZVASS(1, k) by the one-counter translation.
std::size_t letters(const Transition& t) {
    std::size_t w = 0;
    for (std::size_t i = 1; i < t.update.size(); ++i) w += static_cast<std::size_t>(abs(t.update[i]).convert_to<long>());
    return w == 0 ? 2 : w;
}

bool brute_zero_run(const ZVass& v, int q0, int qf, std::size_t budget) {
    std::set<std::tuple<int, Vec, std::size_t>> seen;
    std::function<bool(const Configuration&, std::size_t)> go = [&](const Configuration& c, std::size_t left) {
        if (c.state == qf && std::all_of(c.values.begin(), c.values.end(), [](const Int& x) { return x == 0; }))
            return true;
        if (!seen.insert({c.state, c.values, left}).second) return false;
        for (int t = 0; t < v.num_transitions(); ++t) {
            std::size_t w = letters(v.transitions()[t]);
            Configuration nx;
            if (w <= left && fire(v, c, t, nx) == Fault::None && go(nx, left - w)) return true;
        }
        return false;
    };
    return go({q0, zero_vec(v.layout().dim())}, budget);
}

Outcome parikh_claim() {
    Rng r(8);
    int agree = 0, yes = 0, replayed = 0;
    const int total = 50;
    const std::size_t c = 12;
    for (int it = 0; it < total; ++it) {
        int k = r(1, 2), n = r(1, 3);
        ZVass v = random_zvass(r, 1, k, n, r(1, 2 * n + 1), -2, 2);
        int q0 = r(0, n - 1), qf = r(0, n - 1);
        bool brute = brute_zero_run(v, q0, qf, c);
        Oca a = zvass1_to_oca(v, q0, qf);
        auto w = balanced_witness(a, c);
        bool ok = brute == w.has_value();
        if (w) {
            ReplayResult rr = replay(v, {q0, zero_vec(1 + k)}, decode_run(a, w->run));
            bool back = rr.ok() && rr.trace.configs.back() == Configuration{qf, zero_vec(1 + k)};
            replayed += back;
            ok = ok && back && w->word.size() <= c;
        }
        agree += ok;
        yes += brute;
    }
    Outcome o;
    o.pass = agree == total && yes > 0 && yes < total;
    o.detail = std::to_string(agree) + "/" + std::to_string(total) + " agree at c = " + std::to_string(c) +
               " letters (" + std::to_string(yes) + " with runs, " + std::to_string(replayed) +
               " witnesses decoded and replayed)";
    return o;
}

bool brute_subset(const std::vector<long>& xs, long t) {
    for (long m = 0; m < (1L << xs.size()); ++m) {
        long s = 0;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (m >> i & 1) s += xs[i];
        if (s == t) return true;
    }
    return false;
}

Outcome subset_sum() {
    int total = 0, agree = 0;
    auto check = [&](const std::vector<long>& xs, long t) {
        InstanceBundle b = subset_sum_to_izvass(xs, t);
        bool want = brute_subset(xs, t);
        Tri z = zvass0_reach(b.query);
        ++total;
        agree += z == (want ? Tri::Yes : Tri::No) && (b.expected->verdict == Verdict::Reachable) == want;
    };
    std::vector<long> xs;
    std::function<void(std::size_t, long)> all = [&](std::size_t len, long from) {
        if (xs.size() == len) {
            long s = 0;
            for (long x : xs) s += x;
            for (long t = 0; t <= s + 1; ++t) check(xs, t);
            return;
        }
        for (long x = from; x <= 15; ++x) {
            xs.push_back(x);
            all(len, x);
            xs.pop_back();
        }
    };
    for (std::size_t len = 1; len <= 3; ++len) all(len, 0);
    int exhaustive = total;
    Rng r(15);
    for (std::size_t len = 4; len <= 8; ++len)
        for (int i = 0; i < 200; ++i) {
            std::vector<long> ys(len);
            for (auto& y : ys) y = r(0, 15);
            long s = 0;
            for (long y : ys) s += y;
            check(ys, r(0, static_cast<int>(s) + 1));
        }
    Outcome o;
    o.pass = agree == total;
    o.detail = std::to_string(agree) + "/" + std::to_string(total) + " agree (" + std::to_string(exhaustive) +
               " exhaustive for |xs| <= 3, sampled for |xs| 4..8)";
    return o;
}

ReachQuery random_query(Rng& r, bool ztests) {
    int d = r(0, 2), k = r(0, 2);
    if (d + k == 0) d = 1;
    int n = r(1, 3);
    ReachQuery q;
    q.system = random_zvass(r, d, k, n, r(1, 5), -2, 2);
    if (ztests && d > 0 && r(0, 2) == 0) q.system.add_ztest(r(0, n - 1), r(0, d - 1), r(0, n - 1), "z");
    Vec s, t;
    for (int i = 0; i < d + k; ++i) {
        s.emplace_back(i < d ? r(0, 2) : r(-2, 2));
        t.emplace_back(i < d ? r(0, 2) : r(-2, 2));
    }
    q.source = {r(0, n - 1), s};
    q.target = {r(0, n - 1), t};
    return q;
}

Outcome klmst_battery() {
    const Bounds box{8, 8, 14};
    KlmstCaps caps;
    std::size_t refining = 0, cleaning = 0, breaches = 0, perfect = 0, perfect_runs = 0;
    std::vector<std::string> bad;

    Rng r(2024);
    int compared = 0;
    for (int round = 0; round < 400 && compared < 60; ++round) {
        ReachQuery rq = random_query(r, true);
        SplitResult split;
        try {
            split = split_query(rq);
        } catch (const KlmstError&) {
            continue;
        }
        for (const auto& g : split.queries) {
            PerfectCheck pc = check_perfect(g, caps);
            if (pc.status == Perfectness::Perfect) {
                ++perfect;
                auto run = run_from_perfect(g, pc, 8);
                if (run && reaches_target(g, *run))
                    ++perfect_runs;
                else
                    bad.push_back("perfect query without run");
            }
            if (pc.status != Perfectness::Violated) continue;
            Decomposition dec = decompose(g, pc.violation, caps);
            if (dec.cap_exceeded) continue;
            Rank rg = rank(g.gv);
            bool any = false;
            for (const auto& c : dec.children) {
                bool fine = dec.refining ? rank(c.gv) < rg : rank(c.gv) <= rg;
                (dec.refining ? refining : cleaning) += 1;
                if (!fine) ++breaches;
                any = any || oracle_reach(c, box).reachable;
            }
            if (oracle_reach(g, box).reachable != any) bad.push_back("decomposition changed a verdict");
            ++compared;
        }
    }
    if (compared < 50) bad.push_back("only " + std::to_string(compared) + " decompositions compared");

    Rng r2(99);
    int conclusive = 0, agree = 0;
    for (int round = 0; round < 80; ++round) {
        ReachQuery q = random_query(r2, true);
        KlmstResult k;
        try {
            k = klmst_decide(q, caps);
        } catch (const KlmstError& e) {
            if (std::string(e.what()).find("RankDidNotDecrease") != std::string::npos) ++breaches;
            bad.push_back(e.what());
            continue;
        }
        refining += k.refining_edges;
        cleaning += k.cleaning_edges;
        perfect += k.perfect_nodes;
        perfect_runs += k.perfect_runs;
        bool o = bounded_reach(q, box).reachable;
        if (k.verdict == KlmstVerdict::Unknown) continue;
        ++conclusive;
        bool ok = !o;
        if (k.verdict == KlmstVerdict::Reach) {
            ReplayResult rr = replay(q.system, q.source, *k.path);
            ok = rr.ok() && rr.trace.configs.back() == q.target;
        }
        agree += ok;
    }
    if (conclusive < 50) bad.push_back("only " + std::to_string(conclusive) + " conclusive");
    if (agree != conclusive) bad.push_back(std::to_string(conclusive - agree) + " disagreements");
    if (breaches) bad.push_back(std::to_string(breaches) + " rank breaches");
    if (perfect_runs != perfect) bad.push_back("perfect nodes without runs");

    Outcome o;
    o.pass = bad.empty();
    o.detail = "(a) " + std::to_string(refining) + " refining edges strictly decrease, " + std::to_string(cleaning) +
               " cleaning edges do not increase; (b) " + std::to_string(compared) + " decompositions; (c) " +
               std::to_string(agree) + "/" + std::to_string(conclusive) + " conclusive agree; (d) " +
               std::to_string(perfect_runs) + "/" + std::to_string(perfect) + " perfect queries replay";
    for (std::size_t i = 0; i < bad.size() && i < 5; ++i) o.detail += "; " + bad[i];
    return o;
}

Outcome ranks() {
    SplitResult s = split_query(nonsemilinear(2));
    std::string a = s.queries.size() == 1 ? rank(s.queries[0].gv).str() : "split";
    std::string b = rank(load_generalised(std::string(ZVASS_SOURCE_DIR) + "/gallery/parity.gzvass").gv).str();
    Outcome o;
    o.pass = a == "(2,[2,0])" && b == "(1,[0,0])";
    o.detail = "nonsemilinear " + a + ", parity " + b;
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        std::string name;
        double budget;
        std::function<Outcome()> run;
    };
    std::vector<Criterion> all = {
        {1, "nonsemilinear boundary", 10, nonsemilinear_boundary},
        {2, "gadget suite", 120, gadgets},
        {3, "doubly-exponential triple", 180, double_exp},
        {4, "amplifier arithmetic", 60, amplifier},
        {5, "automaton simulation", 600, ca_simulation},
        {6, "lps round trip", 120, lps_round_trip},
        {7, "solve_dim1 vs oracle", 300, dim1_vs_oracle},
        {8, "parikh both directions", 180, parikh_claim},
        {9, "subset sum", 60, subset_sum},
        {10, "klmst", 900, klmst_battery},
        {11, "ranks", 1, ranks},
    };
    int unexpected = 0;
    for (auto& c : all) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what(), false};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.budget) {
            if (o.pass) o.detail += "; over time budget";
            o.pass = false;
            o.known_gap = false;
        }
        std::ostringstream line;
        line.setf(std::ios::fixed);
        line.precision(2);
        line << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << " [" << c.name << "] " << o.detail
             << " (" << secs << "s, budget " << c.budget << "s)";
        if (!o.pass && o.known_gap) line << " [known]";
        std::cout << line.str() << std::endl;
        if (!o.pass && !o.known_gap) ++unexpected;
    }
    return unexpected == 0 ? 0 : 1;
}
