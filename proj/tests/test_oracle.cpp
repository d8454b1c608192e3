#include "doctest.h"
#include "zvass/oracle.hpp"

#include <algorithm>
#include <random>

using namespace zvass;

namespace {

Configuration cfg(int s, std::vector<long> vals) {
    Configuration c{s, {}};
    for (long x : vals) c.values.emplace_back(x);
    return c;
}

ReachQuery nonsemilinear() { return load_instance(std::string(ZVASS_SOURCE_DIR) + "/gallery/nonsemilinear.zvass"); }

}  // namespace

TEST_CASE("bounded_reach basics") {
    ReachQuery q = nonsemilinear();
    q.target = q.source;
    OracleAnswer a = bounded_reach(q, Bounds{4, 8, 64});
    REQUIRE(a.reachable);
    CHECK(a.trace->path.empty());

    q.target = cfg(1, {2, 0, 2, 4});
    a = bounded_reach(q, Bounds{4, 8, 64});
    REQUIRE(a.reachable);
    CHECK(replay(q.system, q.source, a.trace->path).trace.configs.back() == q.target);

    q.target = cfg(1, {2, 0, 2, 5});
    CHECK_FALSE(bounded_reach(q, Bounds{4, 8, 64}).reachable);
    CHECK_FALSE(bounded_reach(q, Bounds{6, 32, 300}).reachable);

    q.target = cfg(1, {2, 0, 2, 100});
    CHECK_THROWS_AS(bounded_reach(q, Bounds{4, 8, 64}), ZvassError);
}

TEST_CASE("pruning does not change verdicts or lengths") {
    std::mt19937 rng(11);
    auto r = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    for (int it = 0; it < 200; ++it) {
        int d = r(0, 2), k = r(d == 0 ? 1 : 0, 2);
        ReachQuery q{ZVass(Layout{d, k}), {}, {}};
        int n = r(1, 3);
        for (int s = 0; s < n; ++s) q.system.add_state("s" + std::to_string(s));
        for (int t = 0, m = r(1, 5); t < m; ++t) {
            if (d > 0 && r(0, 5) == 0) {
                q.system.add_ztest(r(0, n - 1), r(0, d - 1), r(0, n - 1));
                continue;
            }
            Vec u;
            for (int i = 0; i < d + k; ++i) u.emplace_back(r(-2, 2));
            q.system.add_transition(r(0, n - 1), u, r(0, n - 1));
        }
        auto rc = [&] {
            Configuration c{r(0, n - 1), {}};
            for (int i = 0; i < d + k; ++i) c.values.emplace_back(i < d ? r(0, 3) : r(-3, 3));
            return c;
        };
        q.source = rc();
        q.target = rc();
        Bounds b{5, 5, 12};
        OracleAnswer x = bounded_reach(q, b, true), y = bounded_reach(q, b, false);
        REQUIRE(x.reachable == y.reachable);
        if (x.reachable) CHECK(x.trace->path.size() == y.trace->path.size());
        Bounds big{7, 7, 16};
        if (x.reachable) CHECK(bounded_reach(q, big).reachable);
    }
}

TEST_CASE("reach_set") {
    ZVass v(Layout{1, 0});
    v.add_state("p");
    auto s = reach_set(v, cfg(0, {2}), Bounds{5, 0, 5});
    REQUIRE(s.size() == 1);
    CHECK(s[0] == cfg(0, {2}));

    ZVass ca(Layout{1, 0});
    ca.add_state("a");
    ca.add_state("b");
    ca.add_ztest(0, 0, 1);
    CHECK(reach_set(ca, cfg(0, {1}), Bounds{5, 0, 5}).size() == 1);
    CHECK(reach_set(ca, cfg(0, {0}), Bounds{5, 0, 5}).size() == 2);
}

TEST_CASE("length_bounded_ca_reach") {
    ZVass ca(Layout{3, 0});
    ca.add_state("a");
    ca.add_state("b");
    ca.add_state("c");
    ca.add_transition(0, {1, 0, 0}, 1);
    ca.add_transition(1, {-1, 0, 0}, 2);
    Configuration s = cfg(0, {0, 0, 0}), t = cfg(2, {0, 0, 0});
    CHECK(length_bounded_ca_reach(ca, s, s, 0).reachable);
    OracleAnswer a = length_bounded_ca_reach(ca, s, t, 2);
    REQUIRE(a.reachable);
    CHECK(a.trace->path.size() == 2);
    CHECK_FALSE(length_bounded_ca_reach(ca, s, t, 1).reachable);
    CHECK(length_bounded_ca_reach(ca, s, t, 2, LengthMode::Exact).reachable);
    CHECK_FALSE(length_bounded_ca_reach(ca, s, t, 3, LengthMode::Exact).reachable);
}
