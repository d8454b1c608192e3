#include "doctest.h"
#include "fuzz.hpp"
#include "zvass/klmst.hpp"
#include "zvass/reductions.hpp"

#include <fstream>
#include <sstream>

using namespace zvass;
using namespace zvass::testing;

namespace {

Vec vec(std::initializer_list<long> xs) {
    Vec v;
    for (long x : xs) v.emplace_back(x);
    return v;
}

RatVec rat(const Vec& v) {
    RatVec r;
    for (const auto& x : v) r.emplace_back(x);
    return r;
}

GQuery loop_query(Layout l, std::vector<Vec> loops, Vec s, Vec t) {
    std::ostringstream o;
    o << "zvass d=" << l.d << " k=" << l.k << "\nscc V {\n  states q\n";
    for (std::size_t i = 0; i < loops.size(); ++i) {
        o << "  trans l" << i << " q -> q :";
        for (int j = 0; j < l.dim(); ++j) o << (j == l.d ? " ; " : " ") << loops[i][j];
        if (l.k == 0) o << " ;";
        o << "\n";
    }
    auto cfg = [&](const Vec& v) {
        std::string r;
        for (int j = 0; j < l.dim(); ++j) r += (j == l.d ? " ; " : " ") + v[j].str();
        return l.k == 0 ? r + " ;" : r;
    };
    o << "}\ninit q :" << cfg(s) << "\ntarget q :" << cfg(t) << "\n";
    return parse_generalised(o.str());
}

GQuery whole(const ReachQuery& q) {
    SplitResult s = split_query(q);
    REQUIRE(s.queries.size() == 1);
    return s.queries[0];
}

Bounds tiny_box() { return Bounds{8, 8, 14}; }

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

}  // namespace

TEST_CASE("generalised format round trip and validation") {
    GQuery p = load_generalised(std::string(ZVASS_SOURCE_DIR) + "/gallery/parity.gzvass");
    CHECK(p.gv.components.size() == 1);
    CHECK(p.target == vec({0, 0, 1}));
    std::string text = serialize_generalised(p);
    CHECK(serialize_generalised(parse_generalised(text)) == text);
    CHECK(looks_generalised(text));

    const char* chain =
        "zvass d=2 k=0\n"
        "scc A {\n states a\n trans la a -> a : 1 0 ;\n}\n"
        "trans e a -> b : 0 1 ;\n"
        "test e : 3 w\n"
        "scc B {\n states b\n trans lb b -> b : 0 -1 ;\n}\n"
        "init a : 0 0 ;\ntarget b : 3 0 ;\n";
    GQuery c = parse_generalised(chain);
    REQUIRE(c.gv.boundaries.size() == 1);
    CHECK(format_omega(c.gv.boundaries[0].test) == "3 w");
    CHECK(serialize_generalised(parse_generalised(serialize_generalised(c))) == serialize_generalised(c));

    CHECK_THROWS_AS(parse_generalised("zvass d=1 k=0\nscc A {\n states a b\n trans x a -> b : 1 ;\n}\ninit a : 0 ;\ntarget b : 0 ;\n"),
                    KlmstError);
    CHECK_THROWS_AS(parse_generalised("zvass d=1 k=0\nscc A {\n states a\ninit a : 0 ;\ntarget a : 0 ;\n"), ParseError);
    try {
        parse_generalised("zvass d=1 k=0\nscc A {\n states a\n}\ntest e : 1\ninit a : 0 ;\ntarget a : 0 ;\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line == 5);
    }
}

TEST_CASE("cycle spaces") {
    ZVass v(Layout{2, 1});
    int q = v.add_state("q");
    v.add_transition(q, vec({1, -1, 0}), q, "l");
    RatMat b = cycle_space(v, {q}, {0});
    REQUIRE(b.size() == 1);
    CHECK(in_span(b, rat(vec({1, -1, 0}))));

    ZVass w(Layout{1, 0});
    int a = w.add_state("a");
    CHECK(cycle_space(w, {a}, {}).empty());
    int c = w.add_state("c");
    w.add_transition(a, vec({1}), c, "ac");
    CHECK_THROWS_AS(cycle_space(w, {a, c}, {0}), KlmstError);

    GQuery con = whole(nonsemilinear(2));
    RatMat cs = cycle_space(con.gv, 0);
    CHECK(cs.size() == 3);
    for (auto e : {vec({1, -1, 0, 1}), vec({-1, 1, 0, 0}), vec({0, 0, 1, 0})}) CHECK(in_span(cs, rat(e)));
    CHECK_FALSE(in_span(cs, rat(vec({1, 0, 0, 0}))));
}

TEST_CASE("closed walks lie in the cycle space") {
    Rng r(71);
    int checked = 0;
    for (int round = 0; round < 60; ++round) {
        ReachQuery q = random_query(r, false);
        for (const auto& g : split_query(q).queries)
            for (int i = 0; i <= g.gv.s(); ++i) {
                const auto& comp = g.gv.components[i];
                if (comp.transitions.empty()) continue;
                RatMat basis = cycle_space(g.gv, i);
                for (int w = 0; w < 100; ++w) {
                    int start = comp.states[r(0, static_cast<int>(comp.states.size()) - 1)], cur = start;
                    Vec eff = zero_vec(g.gv.system.layout().dim());
                    for (int step = 0; step < 12; ++step) {
                        std::vector<int> out;
                        for (int t : comp.transitions)
                            if (g.gv.system.transition(t).src == cur) out.push_back(t);
                        int t = out[r(0, static_cast<int>(out.size()) - 1)];
                        eff = add(eff, g.gv.system.transition(t).update);
                        cur = g.gv.system.transition(t).dst;
                        if (cur == start) {
                            CHECK(in_span(basis, rat(eff)));
                            ++checked;
                        }
                    }
                }
            }
    }
    CHECK(checked > 500);
}

TEST_CASE("ranks") {
    CHECK(rank(whole(nonsemilinear(2)).gv).str() == "(2,[2,0])");
    GQuery p = load_generalised(std::string(ZVASS_SOURCE_DIR) + "/gallery/parity.gzvass");
    CHECK(rank(p.gv).str() == "(1,[0,0])");
    CHECK(rank(loop_query(Layout{1, 0}, {}, vec({0}), vec({0})).gv).str() == "(0,[0])");

    const char* twin =
        "zvass d=1 k=1\n"
        "scc A {\n states a\n trans la a -> a : 1 ; 1\n trans za a -> a : 0 ; 1\n}\n"
        "trans e a -> b : 0 ; 0\n"
        "scc B {\n states b\n trans lb b -> b : 1 ; 1\n trans zb b -> b : 0 ; 1\n}\n"
        "init a : 0 ; 0\ntarget b : 0 ; 0\n";
    Rank t = rank(parse_generalised(twin).gv);
    CHECK(t.rankN == std::vector<int>{2});
    CHECK(t.dimZ == 1);

    CHECK(Rank{0, {0}} < Rank{1, {0}});
    CHECK(Rank{1, {5, 0}} < Rank{1, {0, 1}});
    CHECK(Rank{1, {1, 1}} > Rank{1, {0, 1}});
}

TEST_CASE("reachability ILP") {
    GQuery up = loop_query(Layout{1, 0}, {vec({1})}, vec({0}), vec({3}));
    KlmstIlp ilp = build_ilp(up);
    CHECK(ilp.system.num_vars() == 3);
    IlpResult r = ilp_solve(ilp.system);
    REQUIRE(r.status == IlpStatus::Feasible);
    CHECK(r.solution[ilp.edge_var[0]] == 3);

    GQuery parity = loop_query(Layout{0, 1}, {vec({2})}, vec({0}), vec({5}));
    CHECK(ilp_solve(build_ilp(parity).system).status == IlpStatus::Infeasible);

    const char* two =
        "zvass d=1 k=0\nscc A {\n states a b\n trans f a -> b : 1 ;\n trans g b -> a : -1 ;\n}\n"
        "init a : 0 ;\ntarget a : 0 ;\n";
    KlmstIlp k2 = build_ilp(parse_generalised(two));
    IlpSystem probe = k2.system;
    probe.rows.push_back(Row{{{k2.edge_var[0], 1}}, Rel::Eq, 4});
    IlpResult r2 = ilp_solve(probe);
    REQUIRE(r2.status == IlpStatus::Feasible);
    CHECK(r2.solution[k2.edge_var[1]] == 4);

    IlpSystem lin;
    int x = lin.add_var("x"), y = lin.add_var("y");
    lin.rows.push_back(Row{{{x, 2}, {y, 3}}, Rel::Eq, 7});
    ValueSet vs = ilp_bounded_values(lin, x, 12);
    CHECK(vs.values == std::vector<Int>{2});
}

TEST_CASE("runs satisfy the ILP") {
    Rng r(5);
    int checked = 0;
    for (int round = 0; round < 300; ++round) {
        ReachQuery rq = random_query(r, false);
        for (auto g : split_query(rq).queries) {
            const auto& gv = g.gv;
            const int d = gv.system.layout().d;
            Configuration start{gv.components.front().entry, g.source};
            Trace tr = random_run(r, gv.system, start, 10);
            int last = gv.components.back().exit;
            for (std::size_t cut = tr.path.size() + 1; cut-- > 0;) {
                if (tr.configs[cut].state != last || gv.component_of_state(tr.configs[0].state) != 0) continue;
                bool through = true;
                for (std::size_t a = 0; a < cut && through; ++a)
                    through = gv.component_of_state(gv.system.transition(tr.path[a]).src) >= 0;
                g.target = tr.configs[cut].values;
                KlmstIlp ilp = build_ilp(g);
                Vec sol = zero_vec(ilp.system.num_vars());
                std::vector<int> comp_of(gv.system.num_transitions(), -1);
                int ci = 0;
                for (int j = 0; j < d; ++j) sol[ilp.x[0][j]] = g.source[j];
                for (std::size_t a = 0; a < cut; ++a) {
                    int t = tr.path[a];
                    if (ilp.edge_var[t] >= 0) {
                        sol[ilp.edge_var[t]] += 1;
                    } else {
                        for (int j = 0; j < d; ++j) {
                            sol[ilp.y[ci][j]] = tr.configs[a].values[j];
                            sol[ilp.x[ci + 1][j]] = tr.configs[a + 1].values[j];
                        }
                        ++ci;
                    }
                }
                for (int j = 0; j < d; ++j) sol[ilp.y[ci][j]] = g.target[j];
                if (ci != gv.s()) break;
                CHECK(ilp.system.satisfied_by(sol));
                ++checked;
                break;
            }
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("perfectness examples") {
    GQuery zloop = loop_query(Layout{0, 1}, {vec({1})}, vec({0}), vec({3}));
    PerfectCheck a = check_perfect(zloop);
    REQUIRE(a.status == Perfectness::Violated);
    CHECK(a.violation.condition == 2);
    REQUIRE(a.violation.bounded.size() == 1);
    CHECK(a.violation.bounded[0].second == std::vector<Int>{3});

    GQuery pm = loop_query(Layout{1, 0}, {vec({1}), vec({-1})}, vec({0}), vec({0}));
    PerfectCheck b = check_perfect(pm);
    REQUIRE(b.status == Perfectness::Perfect);
    CHECK(b.cert.up[0] == std::vector<int>{0});
    CHECK(b.cert.dwn[0] == std::vector<int>{1});
    auto run = run_from_perfect(pm, b, 8);
    REQUIRE(run);
    CHECK(run->empty());
    auto pumped = run_from_perfect(pm, b, 8, 1);
    REQUIRE(pumped);
    CHECK(reaches_target(pm, *pumped));
    CHECK(*pumped == std::vector<int>{0, 1});

    GQuery empty = loop_query(Layout{1, 0}, {}, vec({2}), vec({2}));
    PerfectCheck e = check_perfect(empty);
    REQUIRE(e.status == Perfectness::Perfect);
    auto er = run_from_perfect(empty, e, 8);
    REQUIRE(er);
    CHECK(er->empty());

    const char* forced =
        "zvass d=1 k=0\n"
        "scc A {\n states a\n trans la a -> a : 1 ;\n}\n"
        "trans e a -> b : 0 ;\n"
        "scc B {\n states b\n}\n"
        "init a : 0 ;\ntarget b : 2 ;\n";
    GQuery f = parse_generalised(forced);
    PerfectCheck c = check_perfect(f);
    REQUIRE(c.status == Perfectness::Violated);
    CHECK(c.violation.condition == 2);
    const char* omega =
        "zvass d=1 k=1\n"
        "scc A {\n states a\n trans la a -> a : 1 ; 0\n trans lb a -> a : -1 ; 0\n}\n"
        "trans e a -> b : 0 ; 0\n"
        "scc B {\n states b\n}\n"
        "init a : 0 ; 0\ntarget b : 2 ; 0\n";
    PerfectCheck o = check_perfect(parse_generalised(omega));
    REQUIRE(o.status == Perfectness::Violated);
    CHECK(o.violation.condition == 3);
    CHECK(o.violation.values == std::vector<Int>{2});
}

TEST_CASE("decomposition examples") {
    GQuery zloop = loop_query(Layout{0, 1}, {vec({1})}, vec({0}), vec({3}));
    PerfectCheck a = check_perfect(zloop);
    Decomposition dec = decompose(zloop, a.violation);
    CHECK(dec.refining);
    REQUIRE(dec.children.size() == 1);
    const GQuery& child = dec.children[0];
    CHECK(child.gv.components.size() == 4);
    for (const auto& c : child.gv.components) CHECK(c.transitions.empty());
    CHECK(rank(child.gv).str() == "(0,[])");
    CHECK(rank(child.gv) < rank(zloop.gv));
    CHECK(rank(zloop.gv).str() == "(1,[])");

    const char* omega =
        "zvass d=1 k=0\n"
        "scc A {\n states a\n trans la a -> a : 1 ;\n}\n"
        "trans e a -> b : 0 ;\n"
        "scc B {\n states b\n}\n"
        "init a : 0 ;\ntarget b : 2 ;\n";
    GQuery q = parse_generalised(omega);
    Violation v;
    v.condition = 3;
    v.boundary = 0;
    v.counter = 0;
    v.values = {Int(2), Int(5)};
    Decomposition d3 = decompose(q, v);
    CHECK_FALSE(d3.refining);
    REQUIRE(d3.children.size() == 2);
    CHECK(format_omega(d3.children[0].gv.boundaries[0].test) == "2");
    CHECK(format_omega(d3.children[1].gv.boundaries[0].test) == "5");

    PerfectCheck none = check_perfect(loop_query(Layout{0, 1}, {vec({2})}, vec({0}), vec({1})));
    REQUIRE(none.status == Perfectness::Violated);
    CHECK(none.violation.condition == 1);
    CHECK(decompose(q, none.violation).children.empty());
}

TEST_CASE("pump and rigid-counter decompositions") {
    const char* fwd =
        "zvass d=1 k=0\n"
        "scc A {\n states q p\n trans go q -> p : -2 ;\n trans up p -> p : 1 ;\n trans back p -> q : 0 ;\n"
        " trans down q -> q : -1 ;\n}\n"
        "init q : 0 ;\ntarget q : 0 ;\n";
    GQuery f = parse_generalised(fwd);
    PerfectCheck pf = check_perfect(f);
    REQUIRE(pf.status == Perfectness::Violated);
    CHECK(pf.violation.condition == 4);
    CHECK(pf.violation.bound == 0);
    Decomposition df = decompose(f, pf.violation);
    REQUIRE(df.children.size() == 1);
    CHECK(rank(f.gv).str() == "(0,[2])");
    CHECK(rank(df.children[0].gv).str() == "(0,[0])");
    CHECK(klmst_decide(f).verdict == KlmstVerdict::Reach);
    f.target = vec({1});
    CHECK(klmst_decide(f).verdict == KlmstVerdict::NonReach);

    const char* bwd =
        "zvass d=1 k=0\n"
        "scc A {\n states q p\n trans go q -> p : 0 ;\n trans down p -> p : -1 ;\n trans back p -> q : 2 ;\n"
        " trans up q -> q : 1 ;\n}\n"
        "init q : 5 ;\ntarget q : 0 ;\n";
    GQuery b = parse_generalised(bwd);
    PerfectCheck pb = check_perfect(b);
    REQUIRE(pb.status == Perfectness::Violated);
    CHECK(pb.violation.condition == 5);
    CHECK(decompose(b, pb.violation).children.empty());
    KlmstResult rb = klmst_decide(b);
    CHECK(rb.verdict == KlmstVerdict::NonReach);
    CHECK_FALSE(oracle_reach(b, Bounds{12, 0, 20}).reachable);

    const char* rigid =
        "zvass d=1 k=1\n"
        "scc A {\n states q p\n trans go q -> p : -1 ; 1\n trans back p -> q : 1 ; -1\n}\n"
        "init q : 0 ; 0\ntarget q : 0 ; 0\n";
    GQuery g = parse_generalised(rigid);
    PerfectCheck pg = check_perfect(g);
    REQUIRE(pg.status == Perfectness::Violated);
    CHECK(pg.violation.condition == 6);
    REQUIRE(pg.violation.dead_states.size() == 1);
    CHECK(g.gv.system.state_name(pg.violation.dead_states[0]) == "p");
    Decomposition dg = decompose(g, pg.violation);
    CHECK_FALSE(dg.refining);
    REQUIRE(dg.children.size() == 1);
    CHECK(dg.children[0].gv.system.num_states() == 1);
    KlmstResult rg = klmst_decide(g);
    CHECK(rg.verdict == KlmstVerdict::Reach);
    CHECK(rg.cleaning_edges == 1);
}

TEST_CASE("decomposition preserves oracle verdicts") {
    Rng r(2024);
    KlmstCaps caps;
    int compared = 0, reachable = 0;
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
            if (pc.status != Perfectness::Violated) continue;
            Decomposition dec = decompose(g, pc.violation, caps);
            if (dec.cap_exceeded) continue;
            Rank rg = rank(g.gv);
            bool any = false;
            for (const auto& c : dec.children) {
                CHECK((dec.refining ? rank(c.gv) < rg : rank(c.gv) <= rg));
                any = any || oracle_reach(c, tiny_box()).reachable;
            }
            bool parent = oracle_reach(g, tiny_box()).reachable;
            CHECK(parent == any);
            reachable += parent;
            ++compared;
        }
    }
    CHECK(compared >= 50);
    CHECK(reachable > 0);
}

TEST_CASE("decide examples") {
    GQuery empty = loop_query(Layout{1, 0}, {}, vec({1}), vec({1}));
    KlmstResult a = klmst_decide(empty);
    CHECK(a.verdict == KlmstVerdict::Reach);
    REQUIRE(a.path);
    CHECK(a.path->empty());

    GQuery p = load_generalised(std::string(ZVASS_SOURCE_DIR) + "/gallery/parity.gzvass");
    KlmstResult b = klmst_decide(p);
    CHECK(b.verdict == KlmstVerdict::NonReach);
    CHECK(b.tree["violation"]["condition"] == 1);

    KlmstResult c = klmst_decide(nonsemilinear(2));
    CHECK(c.verdict == KlmstVerdict::Reach);
    REQUIRE(c.path);
    ReachQuery ns = nonsemilinear(2);
    ReplayResult rr = replay(ns.system, ns.source, *c.path);
    REQUIRE(rr.ok());
    CHECK(rr.trace.configs.back() == ns.target);

    ReachQuery bad = nonsemilinear(2);
    bad.target.values = {2, 0, 1, 5};
    KlmstResult d = klmst_decide(bad);
    CHECK(d.verdict != KlmstVerdict::Reach);
}

TEST_CASE("decide agrees with the oracle") {
    Rng r(99);
    int conclusive = 0, reach = 0, nonreach = 0;
    for (int round = 0; round < 80; ++round) {
        ReachQuery q = random_query(r, true);
        KlmstResult k = klmst_decide(q);
        OracleAnswer o = bounded_reach(q, tiny_box());
        if (o.reachable) CHECK(k.verdict != KlmstVerdict::NonReach);
        if (k.verdict == KlmstVerdict::Reach) {
            ReplayResult rr = replay(q.system, q.source, *k.path);
            CHECK(rr.ok());
            CHECK(rr.trace.configs.back() == q.target);
            ++reach;
        }
        if (k.verdict == KlmstVerdict::NonReach) {
            CHECK_FALSE(o.reachable);
            ++nonreach;
        }
        conclusive += k.verdict != KlmstVerdict::Unknown;
    }
    MESSAGE("conclusive " << conclusive << " reach " << reach << " nonreach " << nonreach);
    CHECK(conclusive >= 50);
    CHECK(reach > 0);
    CHECK(nonreach > 0);
}

TEST_CASE("integer-only reachability") {
    Rng r(7);
    int yes = 0, no = 0;
    for (int round = 0; round < 200; ++round) {
        ReachQuery q;
        int n = r(1, 4), k = r(1, 2);
        q.system = random_zvass(r, 0, k, n, r(1, 6), -2, 2);
        Vec s, t;
        for (int i = 0; i < k; ++i) {
            s.emplace_back(r(-2, 2));
            t.emplace_back(r(-3, 3));
        }
        q.source = {r(0, n - 1), s};
        q.target = {r(0, n - 1), t};
        Tri z = zvass0_reach(q);
        OracleAnswer o = bounded_reach(q, Bounds{0, 12, 16});
        if (o.reachable) CHECK(z == Tri::Yes);
        if (z == Tri::No) CHECK_FALSE(o.reachable);
        yes += z == Tri::Yes;
        no += z == Tri::No;
    }
    CHECK(yes > 20);
    CHECK(no > 20);

    for (long t = 0; t <= 12; ++t) {
        InstanceBundle b = subset_sum_to_izvass({2, 3, 7}, t);
        Tri z = zvass0_reach(b.query);
        CHECK(z == (b.expected->verdict == Verdict::Reachable ? Tri::Yes : Tri::No));
    }
}
