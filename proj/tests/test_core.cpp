#include "doctest.h"
#include "zvass/core.hpp"

#include <random>

using namespace zvass;

namespace {

ZVass two_counter() {
    ZVass v(Layout{1, 1});
    v.add_state("p");
    v.add_state("q");
    v.add_transition(0, {-1, 2}, 1, "t");
    v.add_transition(1, {2, 3}, 0, "u");
    return v;
}

Configuration cfg(int s, std::vector<long> vals) {
    Configuration c{s, {}};
    for (long x : vals) c.values.emplace_back(x);
    return c;
}

std::string gallery(const char* name) { return std::string(ZVASS_SOURCE_DIR) + "/gallery/" + name; }

}  // namespace

TEST_CASE("fire") {
    ZVass v = two_counter();
    Configuration out;
    CHECK(fire(v, cfg(0, {0, 0}), 0, out) == Fault::NNegViolation);
    REQUIRE(fire(v, cfg(0, {3, -5}), 0, out) == Fault::None);
    CHECK(out == cfg(1, {2, -3}));
    CHECK(fire(v, cfg(1, {3, -5}), 0, out) == Fault::WrongState);

    ReachQuery g = load_instance(gallery("nonsemilinear.zvass"));
    int inner = g.system.transition_id("inner");
    REQUIRE(fire(g.system, cfg(0, {1, 1, 0, 0}), inner, out) == Fault::None);
    CHECK(out == cfg(0, {2, 0, 0, 1}));
}

TEST_CASE("ztest") {
    ZVass v(Layout{1, 0});
    v.add_state("p");
    v.add_ztest(0, 0, 0, "z");
    Configuration out;
    CHECK(fire(v, cfg(0, {1}), 0, out) == Fault::ZeroTestFailed);
    CHECK(fire(v, cfg(0, {0}), 0, out) == Fault::None);
}

TEST_CASE("effect") {
    ZVass v(Layout{1, 1});
    v.add_state("p");
    v.add_state("q");
    v.add_transition(0, {1, -1}, 1);
    v.add_transition(1, {2, 3}, 0);
    CHECK(effect(v, {}) == zero_vec(2));
    CHECK(effect(v, {0, 1}) == Vec{3, 2});
    CHECK_THROWS_AS(effect(v, {0, 0}), ZvassError);
    CHECK(add(effect(v, {0, 1}), effect(v, {0})) == effect(v, {0, 1, 0}));
}

TEST_CASE("replay") {
    ZVass v = two_counter();
    ReplayResult r = replay(v, cfg(0, {2, 0}), {});
    CHECK(r.ok());
    CHECK(r.trace.configs.size() == 1);

    ReachQuery g = load_instance(gallery("nonsemilinear.zvass"));
    int inner = g.system.transition_id("inner"), enter = g.system.transition_id("enter");
    r = replay(g.system, cfg(0, {0, 2, 0, 0}), {inner, inner, enter});
    REQUIRE(r.ok());
    CHECK(r.trace.configs.back() == cfg(1, {2, 0, 1, 2}));

    r = replay(v, cfg(0, {1, 0}), {0, 1, 0, 1, 0, 0});
    CHECK(r.fault == Fault::WrongState);
    CHECK(r.step == 5);
    r = replay(v, cfg(0, {0, 0}), {0});
    CHECK(r.fault == Fault::NNegViolation);
    CHECK(r.step == 0);
}

TEST_CASE("fire agrees with singleton replay") {
    ZVass v = two_counter();
    for (int s = 0; s < 2; ++s)
        for (long a = 0; a < 3; ++a)
            for (int t = 0; t < 2; ++t) {
                Configuration c = cfg(s, {a, -1}), out;
                Fault f = fire(v, c, t, out);
                ReplayResult r = replay(v, c, {t});
                CHECK(f == r.fault);
                if (f == Fault::None) CHECK(r.trace.configs.back() == out);
            }
}

TEST_CASE("parse and serialize") {
    ReachQuery g = load_instance(gallery("nonsemilinear.zvass"));
    CHECK(g.system.num_states() == 2);
    CHECK(g.system.num_transitions() == 4);

    ReachQuery m = parse_instance("zvass d=0 k=1\nstates s\ninit s : ; 0\ntarget s : ; 0\n");
    CHECK(serialize_instance(parse_instance(serialize_instance(m))) == serialize_instance(m));

    try {
        parse_instance("zvass d=1 k=1\nstates p\ninit p : 0 ; 0\ntarget p : 0 ; 0\ntrans bad p -> p : 1 ; 1 2\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("bad") != std::string::npos);
        CHECK(e.line == 5);
    }
    CHECK_THROWS_AS(parse_instance("zvass d=1 k=0\nstates p\ninit p : -1 ;\ntarget p : 0 ;\n"), ParseError);
}

TEST_CASE("random round trip") {
    std::mt19937 rng(7);
    auto r = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    for (int it = 0; it < 1000; ++it) {
        int d = r(0, 3), k = r(d == 0 ? 1 : 0, 3);
        ReachQuery q{ZVass(Layout{d, k}), {}, {}};
        int n = r(1, 4);
        for (int s = 0; s < n; ++s) q.system.add_state("s" + std::to_string(s));
        int m = r(0, 6);
        for (int t = 0; t < m; ++t) {
            if (d > 0 && r(0, 4) == 0) {
                q.system.add_ztest(r(0, n - 1), r(0, d - 1), r(0, n - 1), "z" + std::to_string(t));
                continue;
            }
            Vec u;
            for (int i = 0; i < d + k; ++i) u.emplace_back(r(-1000, 1000));
            q.system.add_transition(r(0, n - 1), u, r(0, n - 1), "t" + std::to_string(t));
        }
        auto rc = [&] {
            Configuration c{r(0, n - 1), {}};
            for (int i = 0; i < d + k; ++i) c.values.emplace_back(i < d ? r(0, 50) : r(-50, 50));
            return c;
        };
        q.source = rc();
        q.target = rc();
        std::string text = serialize_instance(q);
        ReachQuery back = parse_instance(text);
        REQUIRE(serialize_instance(back) == text);
        CHECK(back.source == q.source);
        CHECK(back.target == q.target);
        CHECK(back.system.num_transitions() == m);
    }
}
