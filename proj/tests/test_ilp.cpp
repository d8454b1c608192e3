#include "doctest.h"
#include "zvass/ilp.hpp"
#include "zvass/linalg.hpp"

#include <random>

using namespace zvass;

TEST_CASE("rank and span") {
    std::vector<Vec> cyc{{1, -1, 0, 1}, {-1, 1, 0, 0}, {0, 0, 1, 0}};
    CHECK(rank_of(cyc, 4) == 3);
    RatMat b = span_basis(cyc, 4);
    CHECK(in_span(b, to_rat(Vec{0, 0, 2, 3})));
    CHECK_FALSE(in_span(b, to_rat(Vec{1, 0, 0, 0})));
    RatMat ns = nullspace(RatMat{to_rat({1, 1, 0}), to_rat({0, 0, 1})}, 3);
    REQUIRE(ns.size() == 1);
    CHECK(primitive(ns[0]) == Vec{-1, 1, 0});
}

TEST_CASE("lattice") {
    CHECK_FALSE(lattice_solvable({{2}}, {5}, 1));
    CHECK(lattice_solvable({{2, 3}}, {1}, 2));
    CHECK_FALSE(lattice_solvable({{2, 4}, {1, 1}}, {3, 0}, 2));
    CHECK(lattice_solvable({{1, 1}, {1, -1}}, {4, 0}, 2));
    CHECK_FALSE(lattice_solvable({{1, 1}, {1, -1}}, {3, 0}, 2));
}

TEST_CASE("ilp examples") {
    IlpSystem s;
    int x = s.add_var("x");
    s.rows.push_back(Row{{{x, 1}}, Rel::Eq, 3});
    IlpResult r = ilp_solve(s);
    REQUIRE(r.status == IlpStatus::Feasible);
    CHECK(r.solution == Vec{3});

    IlpSystem u;
    x = u.add_var("x");
    int y = u.add_var("y");
    u.rows.push_back(Row{{{x, 1}, {y, -1}}, Rel::Eq, 0});
    CHECK(ilp_var_unbounded(u, x) == Tri::Yes);
    CHECK(*homogeneous_ray(u, x) == Vec{1, 1});

    IlpSystem t;
    x = t.add_var("x");
    y = t.add_var("y");
    t.rows.push_back(Row{{{x, 2}, {y, 3}}, Rel::Eq, 7});
    r = ilp_solve(t);
    REQUIRE(r.status == IlpStatus::Feasible);
    CHECK(r.solution == Vec{2, 1});
    CHECK(ilp_var_unbounded(t, x) == Tri::No);
    ValueSet vs = ilp_bounded_values(t, x, 7);
    CHECK(vs.values == std::vector<Int>{2});
    CHECK_FALSE(vs.cap_exceeded);

    IlpSystem p;
    x = p.add_var("x");
    p.rows.push_back(Row{{{x, 2}}, Rel::Eq, 5});
    CHECK(ilp_solve(p).status == IlpStatus::Infeasible);
}

TEST_CASE("ilp minimisation") {
    IlpSystem s;
    int x = s.add_var("x"), y = s.add_var("y");
    s.rows.push_back(Row{{{x, 3}, {y, 5}}, Rel::Ge, 11});
    IlpOptions o;
    o.minimize = Vec{1, 1};
    IlpResult r = ilp_solve(s, o);
    REQUIRE(r.status == IlpStatus::Feasible);
    CHECK(r.optimal);
    CHECK(r.solution[0] + r.solution[1] == 3);
}

TEST_CASE("ilp agrees with enumeration") {
    std::mt19937 rng(3);
    auto rnd = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    for (int it = 0; it < 300; ++it) {
        int n = rnd(1, 3), m = rnd(1, 3);
        IlpSystem s;
        for (int v = 0; v < n; ++v) s.add_var("v" + std::to_string(v), Int(6));
        for (int i = 0; i < m; ++i) {
            Row row;
            for (int v = 0; v < n; ++v) row.terms.emplace_back(v, rnd(-3, 3));
            row.rel = static_cast<Rel>(rnd(0, 2));
            row.rhs = rnd(-6, 10);
            s.rows.push_back(row);
        }
        bool brute = false;
        Vec xv(n, 0);
        for (int code = 0; code < 343 && !brute; ++code) {
            int c = code;
            for (int v = 0; v < n; ++v) {
                xv[v] = c % 7;
                c /= 7;
            }
            if (c == 0 && s.satisfied_by(xv)) brute = true;
        }
        IlpResult r = ilp_solve(s);
        REQUIRE(r.status != IlpStatus::Unknown);
        CHECK((r.status == IlpStatus::Feasible) == brute);
        if (r.status == IlpStatus::Feasible) CHECK(s.satisfied_by(r.solution));
    }
}
