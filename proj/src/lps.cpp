#include "zvass/lps.hpp"

#include "zvass/ilp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace zvass {

std::size_t LinearPathScheme::underlying_length() const {
    std::size_t n = 0;
    for (const auto& s : segments)
        if (!s.cycle) n += s.path.size();
    return n;
}

std::size_t LinearPathScheme::skeleton_size() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.path.size();
    return n;
}

std::vector<int> LinearPathScheme::flatten() const {
    std::vector<int> out;
    for (const auto& s : segments) {
        if (!s.cycle) {
            out.insert(out.end(), s.path.begin(), s.path.end());
            continue;
        }
        for (Int i = 0; i < s.exp; ++i) out.insert(out.end(), s.path.begin(), s.path.end());
    }
    return out;
}

const char* lps_error_name(LpsError e) {
    switch (e) {
        case LpsError::None: return "None";
        case LpsError::NNegViolation: return "NNegViolationAt";
        case LpsError::EndpointMismatch: return "EndpointMismatch";
        case LpsError::MalformedScheme: return "MalformedScheme";
    }
    return "?";
}

std::string LpsCheck::describe() const {
    std::ostringstream os;
    os << lps_error_name(error);
    if (error == LpsError::NNegViolation || error == LpsError::MalformedScheme)
        os << "(segment " << segment << ", step " << step << ", " << (last_iteration ? "last" : "first") << ")";
    return os.str();
}

LpsCheck validate(const ReachQuery& q, const LinearPathScheme& s) {
    const ZVass& sys = q.system;
    LpsCheck r;
    Configuration cur = q.source;
    auto run = [&](Configuration c, const std::vector<int>& path, std::size_t seg, bool last) -> std::optional<Configuration> {
        for (std::size_t i = 0; i < path.size(); ++i) {
            Configuration next;
            Fault f = path[i] >= 0 && path[i] < sys.num_transitions() ? fire(sys, c, path[i], next) : Fault::UnknownTransition;
            ++r.checks;
            if (f != Fault::None) {
                r.error = f == Fault::NNegViolation || f == Fault::ZeroTestFailed ? LpsError::NNegViolation
                                                                                 : LpsError::MalformedScheme;
                r.segment = seg;
                r.step = i;
                r.last_iteration = last;
                return std::nullopt;
            }
            c = std::move(next);
        }
        return c;
    };
    for (std::size_t i = 0; i < s.segments.size(); ++i) {
        const Segment& seg = s.segments[i];
        if (!seg.cycle) {
            auto c = run(cur, seg.path, i, false);
            if (!c) return r;
            cur = std::move(*c);
            continue;
        }
        if (seg.path.empty() || seg.exp < 0) {
            r.error = LpsError::MalformedScheme;
            r.segment = i;
            return r;
        }
        for (int t : seg.path)
            if (t < 0 || t >= sys.num_transitions()) {
                r.error = LpsError::MalformedScheme;
                r.segment = i;
                return r;
            }
        Vec eff;
        try {
            eff = effect(sys, seg.path);
        } catch (const ZvassError&) {
            r.error = LpsError::MalformedScheme;
            r.segment = i;
            return r;
        }
        if (sys.transition(seg.path.front()).src != cur.state || sys.transition(seg.path.back()).dst != cur.state) {
            r.error = LpsError::MalformedScheme;
            r.segment = i;
            return r;
        }
        if (seg.exp == 0) continue;
        if (!run(cur, seg.path, i, false)) return r;
        if (seg.exp > 1) {
            Configuration last{cur.state, add(cur.values, scale(eff, seg.exp - 1))};
            if (!run(last, seg.path, i, true)) return r;
        }
        cur.values = add(cur.values, scale(eff, seg.exp));
    }
    r.end = cur;
    if (!(cur == q.target)) r.error = LpsError::EndpointMismatch;
    return r;
}

std::vector<int> rotate_to_minimum(const ZVass& sys, const std::vector<int>& cycle) {
    Int run = 0, best = 0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < cycle.size(); ++i) {
        run += sys.transition(cycle[i]).update[0];
        if (run < best) {
            best = run;
            arg = i + 1;
        }
    }
    if (arg == cycle.size()) arg = 0;
    std::vector<int> out(cycle.begin() + arg, cycle.end());
    out.insert(out.end(), cycle.begin(), cycle.begin() + arg);
    return out;
}

std::size_t reduction_bound(std::size_t dim, const Int& m) {
    if (m <= 0) return 0;
    double x = 4.0 * static_cast<double>(dim) * m.convert_to<double>();
    return static_cast<std::size_t>(std::ceil(2.0 * static_cast<double>(dim) * std::log2(x) - 1e-9));
}

Reduction caratheodory_reduce(const std::vector<Vec>& xs, const Vec& counts) {
    Reduction out;
    if (xs.empty()) return out;
    const std::size_t dim = xs.front().size();
    Vec total = zero_vec(static_cast<int>(dim));
    for (std::size_t i = 0; i < xs.size(); ++i) total = add(total, scale(xs[i], counts[i]));
    if (is_zero(total)) return out;

    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<std::size_t> cand;
    for (std::size_t i : order) {
        if (is_zero(xs[i])) continue;
        bool dup = false;
        for (std::size_t j : cand) dup = dup || xs[j] == xs[i];
        if (!dup) cand.push_back(i);
    }

    auto solve = [&](const std::vector<std::size_t>& sub) -> std::optional<Vec> {
        IlpSystem s;
        for (std::size_t j = 0; j < sub.size(); ++j) s.add_var("n" + std::to_string(j));
        for (std::size_t c = 0; c < dim; ++c) {
            Row row;
            for (std::size_t j = 0; j < sub.size(); ++j)
                if (xs[sub[j]][c] != 0) row.terms.emplace_back(static_cast<int>(j), xs[sub[j]][c]);
            row.rhs = total[c];
            s.rows.push_back(std::move(row));
        }
        IlpOptions o;
        o.node_cap = 2000;
        IlpResult r = ilp_solve(s, o);
        if (r.status != IlpStatus::Feasible) return std::nullopt;
        return r.solution;
    };

    const std::size_t n = cand.size();
    for (std::size_t size = 1; size <= n; ++size) {
        std::vector<std::size_t> idx(size);
        std::iota(idx.begin(), idx.end(), 0);
        for (;;) {
            std::vector<std::size_t> sub;
            for (std::size_t i : idx) sub.push_back(cand[i]);
            if (auto sol = solve(sub)) {
                bool full = std::all_of(sol->begin(), sol->end(), [](const Int& v) { return v > 0; });
                if (full) {
                    out.chosen = sub;
                    out.counts = *sol;
                    return out;
                }
            }
            std::size_t p = size;
            while (p > 0 && idx[p - 1] == n - size + p - 1) --p;
            if (p == 0) break;
            ++idx[p - 1];
            for (std::size_t j = p; j < size; ++j) idx[j] = idx[j - 1] + 1;
        }
    }
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (counts[i] > 0) {
            out.chosen.push_back(i);
            out.counts.push_back(counts[i]);
        }
    return out;
}

LinearPathScheme compress_run(const ReachQuery& q, const Trace& run) {
    const ZVass& sys = q.system;
    if (sys.layout().d != 1) throw InvalidInputRun("compress_run needs exactly one N-counter");
    ReplayResult rr = replay(sys, q.source, run.path);
    if (!rr.ok() || !(rr.trace.configs.back() == q.target)) throw InvalidInputRun("run does not replay from source to target");
    const std::vector<int>& tau = run.path;
    const std::size_t nq = static_cast<std::size_t>(sys.num_states());
    const std::size_t threshold = nq * (2 * nq + 1);

    // Visit positions: position p is the configuration after p transitions.
    std::vector<long> first(nq, -1), last(nq, -1);
    for (std::size_t p = 0; p < rr.trace.configs.size(); ++p) {
        int s = rr.trace.configs[p].state;
        if (first[s] < 0) first[s] = static_cast<long>(p);
        last[s] = static_cast<long>(p);
    }
    std::vector<char> marked(tau.size(), 0);
    for (std::size_t s = 0; s < nq; ++s) {
        if (first[s] > 0) marked[first[s] - 1] = 1;
        if (last[s] > 0) marked[last[s] - 1] = 1;
    }

    // cur holds indices into tau.
    std::vector<std::size_t> cur(tau.size());
    std::iota(cur.begin(), cur.end(), 0);
    std::vector<std::vector<int>> removed;
    auto state_at = [&](std::size_t pos) {
        return pos < cur.size() ? sys.transition(tau[cur[pos]]).src : sys.transition(tau[cur[pos - 1]]).dst;
    };
    while (cur.size() >= threshold && threshold > 0) {
        std::size_t blk = 0;
        for (; blk < 2 * nq + 1; ++blk) {
            bool any = false;
            for (std::size_t i = blk * nq; i < (blk + 1) * nq; ++i) any = any || marked[cur[i]];
            if (!any) break;
        }
        if (blk == 2 * nq + 1) throw ZvassError("internal: every block carries a mark");
        const std::size_t a = blk * nq;
        std::size_t cs = 0, ce = 0;
        bool found = false;
        for (std::size_t e = a + 1; e <= a + nq && !found; ++e)
            for (std::size_t s = e; s-- > a;)
                if (state_at(s) == state_at(e)) {
                    cs = s;
                    ce = e;
                    found = true;
                    break;
                }
        if (!found) throw ZvassError("internal: block without a cycle");
        std::vector<int> cyc;
        for (std::size_t i = cs; i < ce; ++i) cyc.push_back(tau[cur[i]]);
        removed.push_back(std::move(cyc));
        cur.erase(cur.begin() + cs, cur.begin() + ce);
    }

    // Group by (anchor state, sign); keep first-seen order of effects.
    struct Group {
        std::vector<Vec> effects;
        std::vector<std::vector<int>> reps;
        Vec counts;
    };
    std::map<std::pair<int, int>, Group> groups;  // sign 0 = nonnegative N-effect, 1 = negative
    for (const auto& c : removed) {
        std::vector<int> rot = rotate_to_minimum(sys, c);
        Vec eff = effect(sys, rot);
        int anchor = sys.transition(rot.front()).src;
        Group& g = groups[{anchor, eff[0] < 0 ? 1 : 0}];
        auto it = std::find(g.effects.begin(), g.effects.end(), eff);
        if (it == g.effects.end()) {
            g.effects.push_back(eff);
            g.reps.push_back(rot);
            g.counts.push_back(1);
        } else {
            g.counts[it - g.effects.begin()] += 1;
        }
    }

    // Insertion points: after the marked transition (position in cur), or at the start.
    auto insertion = [&](long visit) -> std::size_t {
        if (visit <= 0) return 0;
        std::size_t t = static_cast<std::size_t>(visit - 1);
        auto it = std::find(cur.begin(), cur.end(), t);
        if (it == cur.end()) throw ZvassError("internal: marked transition removed");
        return static_cast<std::size_t>(it - cur.begin()) + 1;
    };
    std::map<std::size_t, std::vector<Segment>> inserts;
    for (int sign = 0; sign < 2; ++sign)
        for (auto& [key, g] : groups) {
            if (key.second != sign) continue;
            Reduction red = caratheodory_reduce(g.effects, g.counts);
            std::vector<std::pair<std::size_t, Int>> picks;
            for (std::size_t j = 0; j < red.chosen.size(); ++j) picks.emplace_back(red.chosen[j], red.counts[j]);
            std::stable_sort(picks.begin(), picks.end(),
                             [&](const auto& x, const auto& y) { return g.effects[x.first][0] > g.effects[y.first][0]; });
            std::size_t pos = insertion(sign == 0 ? first[key.first] : last[key.first]);
            for (const auto& [i, n] : picks) inserts[pos].push_back(Segment{true, g.reps[i], n});
        }

    LinearPathScheme out;
    Segment path{false, {}, 1};
    for (std::size_t pos = 0; pos <= cur.size(); ++pos) {
        auto it = inserts.find(pos);
        if (it != inserts.end()) {
            if (!path.path.empty() || out.segments.empty()) out.segments.push_back(path);
            path.path.clear();
            for (auto& s : it->second) {
                out.segments.push_back(s);
                out.segments.push_back(Segment{false, {}, 1});
            }
            out.segments.pop_back();
        }
        if (pos < cur.size()) path.path.push_back(tau[cur[pos]]);
    }
    if (!path.path.empty() || out.segments.empty() || out.segments.back().cycle) out.segments.push_back(path);
    return out;
}

namespace {

struct Affine {
    Vec base;
    std::vector<Vec> coef;  // one per exponent variable
};

class SkeletonSearch {
public:
    SkeletonSearch(const ReachQuery& q, const Dim1Caps& caps) : q_(q), caps_(caps) {
        const ZVass& sys = q.system;
        const int n = sys.num_states();
        out_.assign(n, {});
        for (int t = 0; t < sys.num_transitions(); ++t) out_[sys.transition(t).src].push_back(t);
        // Distance (in transitions) to the target state.
        dist_.assign(n, -1);
        std::vector<std::vector<int>> rev(n);
        for (const auto& t : sys.transitions()) rev[t.dst].push_back(t.src);
        std::vector<int> bfs{q.target.state};
        dist_[q.target.state] = 0;
        for (std::size_t i = 0; i < bfs.size(); ++i)
            for (int p : rev[bfs[i]])
                if (dist_[p] < 0) {
                    dist_[p] = dist_[bfs[i]] + 1;
                    bfs.push_back(p);
                }
        cycles_.assign(n, {});
        for (int s = 0; s < n; ++s) enumerate_cycles(s);
    }

    std::optional<LinearPathScheme> run(std::size_t size, std::size_t& counter) {
        size_ = size;
        counter_ = &counter;
        skel_.clear();
        return extend(q_.source.state, 0);
    }

private:
    void enumerate_cycles(int anchor) {
        const ZVass& sys = q_.system;
        std::vector<int> path;
        std::vector<char> on(sys.num_states(), 0);
        std::function<void(int)> dfs = [&](int s) {
            if (path.size() >= static_cast<std::size_t>(sys.num_states())) return;
            for (int t : out_[s]) {
                int d = sys.transition(t).dst;
                if (d == anchor) {
                    path.push_back(t);
                    cycles_[anchor].push_back(path);
                    path.pop_back();
                } else if (!on[d]) {
                    on[d] = 1;
                    path.push_back(t);
                    dfs(d);
                    path.pop_back();
                    on[d] = 0;
                }
            }
        };
        on[anchor] = 1;
        dfs(anchor);
    }

    std::optional<LinearPathScheme> extend(int state, std::size_t used) {
        const std::size_t left = size_ - used;
        if (dist_[state] < 0 || static_cast<std::size_t>(dist_[state]) > left) return std::nullopt;
        if (left == 0) {
            if (state != q_.target.state) return std::nullopt;
            ++*counter_;
            return solve();
        }
        for (int t : out_[state]) {
            push_step(t);
            auto r = extend(q_.system.transition(t).dst, used + 1);
            skel_.pop_back();
            if (r) return r;
        }
        for (std::size_t c = 0; c < cycles_[state].size(); ++c) {
            const auto& cyc = cycles_[state][c];
            if (cyc.size() > left) continue;
            if (!skel_.empty() && skel_.back().cycle && skel_.back().index == c && skel_.back().anchor == state) continue;
            skel_.push_back(Item{true, c, state, cyc});
            auto r = extend(state, used + cyc.size());
            skel_.pop_back();
            if (r) return r;
        }
        return std::nullopt;
    }

    struct Item {
        bool cycle;
        std::size_t index;
        int anchor;
        std::vector<int> path;
    };

    void push_step(int t) { skel_.push_back(Item{false, 0, -1, {t}}); }

    std::optional<LinearPathScheme> solve() {
        const ZVass& sys = q_.system;
        const int dim = sys.layout().dim(), d = sys.layout().d;
        std::size_t ncyc = 0;
        for (const auto& it : skel_) ncyc += it.cycle;
        IlpSystem ilp;
        for (std::size_t i = 0; i < ncyc; ++i) ilp.add_var("x" + std::to_string(i + 1), caps_.xmax);
        Affine cur{q_.source.values, std::vector<Vec>(ncyc, zero_vec(dim))};
        auto constrain = [&](const Affine& a) {
            for (int c = 0; c < dim; ++c) {
                Row lo, hi;
                for (std::size_t i = 0; i < ncyc; ++i)
                    if (a.coef[i][c] != 0) {
                        lo.terms.emplace_back(static_cast<int>(i), a.coef[i][c]);
                        hi.terms.emplace_back(static_cast<int>(i), a.coef[i][c]);
                    }
                if (c < d) {
                    lo.rel = Rel::Ge;
                    lo.rhs = -a.base[c];
                    ilp.rows.push_back(lo);
                    if (caps_.box) {
                        hi.rel = Rel::Le;
                        hi.rhs = caps_.box->nmax - a.base[c];
                        ilp.rows.push_back(hi);
                    }
                } else if (caps_.box) {
                    lo.rel = Rel::Ge;
                    lo.rhs = -caps_.box->zabs - a.base[c];
                    hi.rel = Rel::Le;
                    hi.rhs = caps_.box->zabs - a.base[c];
                    ilp.rows.push_back(lo);
                    ilp.rows.push_back(hi);
                }
            }
        };
        std::size_t ci = 0;
        Row length{{}, Rel::Le, 0};
        Int fixed_len = 0;
        for (const auto& it : skel_) {
            if (!it.cycle) {
                cur.base = add(cur.base, sys.transition(it.path[0]).update);
                constrain(cur);
                fixed_len += 1;
                continue;
            }
            Vec eff = effect(sys, it.path);
            ilp.rows.push_back(Row{{{static_cast<int>(ci), 1}}, Rel::Ge, 1});
            length.terms.emplace_back(static_cast<int>(ci), static_cast<long>(it.path.size()));
            // First iteration: prefix sums from the entry value.
            Affine a = cur;
            for (int t : it.path) {
                a.base = add(a.base, sys.transition(t).update);
                constrain(a);
            }
            // Last iteration: entry shifted by (x-1)*eff.
            Affine b = cur;
            b.coef[ci] = add(b.coef[ci], eff);
            b.base = sub(b.base, eff);
            for (int t : it.path) {
                b.base = add(b.base, sys.transition(t).update);
                constrain(b);
            }
            cur.coef[ci] = add(cur.coef[ci], eff);
            ++ci;
        }
        for (int c = 0; c < dim; ++c) {
            Row eq{{}, Rel::Eq, q_.target.values[c] - cur.base[c]};
            for (std::size_t i = 0; i < ncyc; ++i)
                if (cur.coef[i][c] != 0) eq.terms.emplace_back(static_cast<int>(i), cur.coef[i][c]);
            if (eq.terms.empty()) {
                if (eq.rhs != 0) return std::nullopt;
                continue;
            }
            ilp.rows.push_back(std::move(eq));
        }
        if (caps_.box) {
            length.rhs = Int(caps_.box->lmax) - fixed_len;
            if (length.rhs < 0) return std::nullopt;
            if (!length.terms.empty()) ilp.rows.push_back(length);
        }
        Vec xs;
        if (ncyc > 0) {
            for (const auto& r : ilp.rows)
                if (r.terms.empty()) {
                    bool ok = r.rel == Rel::Eq ? r.rhs == 0 : r.rel == Rel::Le ? r.rhs >= 0 : r.rhs <= 0;
                    if (!ok) return std::nullopt;
                }
            std::erase_if(ilp.rows, [](const Row& r) { return r.terms.empty(); });
            IlpResult r = ilp_solve(ilp);
            if (r.status != IlpStatus::Feasible) return std::nullopt;
            xs = r.solution;
        } else {
            for (const auto& r : ilp.rows) {
                bool ok = r.rel == Rel::Eq ? r.rhs == 0 : r.rel == Rel::Le ? r.rhs >= 0 : r.rhs <= 0;
                if (!ok) return std::nullopt;
            }
        }
        LinearPathScheme s;
        Segment path{false, {}, 1};
        ci = 0;
        for (const auto& it : skel_) {
            if (!it.cycle) {
                path.path.push_back(it.path[0]);
                continue;
            }
            s.segments.push_back(path);
            path.path.clear();
            s.segments.push_back(Segment{true, it.path, xs[ci++]});
        }
        s.segments.push_back(path);
        return s;
    }

    const ReachQuery& q_;
    const Dim1Caps& caps_;
    std::vector<std::vector<int>> out_;
    std::vector<int> dist_;
    std::vector<std::vector<std::vector<int>>> cycles_;
    std::vector<Item> skel_;
    std::size_t size_ = 0;
    std::size_t* counter_ = nullptr;
};

}  // namespace

Dim1Result solve_dim1(const ReachQuery& q, const Dim1Caps& caps) {
    if (q.system.layout().d != 1) throw ZvassError("solve_dim1 needs exactly one N-counter");
    if (q.system.has_ztests()) throw ZvassError("solve_dim1 does not handle zero-tests");
    Dim1Result res;
    SkeletonSearch search(q, caps);
    for (std::size_t size = 0; size <= caps.skeleton; ++size) {
        auto s = search.run(size, res.skeletons);
        if (s) {
            if (!validate(q, *s).ok()) throw ZvassError("internal: solve_dim1 produced a non-validating scheme");
            res.found = true;
            res.scheme = std::move(*s);
            return res;
        }
    }
    return res;
}

nlohmann::json scheme_to_json(const LinearPathScheme& s) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& seg : s.segments) {
        if (seg.cycle)
            segs.push_back({{"cycle", seg.path}, {"exp", seg.exp.str()}});
        else
            segs.push_back({{"path", seg.path}});
    }
    return {{"schema", "zvass.lps/1"}, {"segments", segs}};
}

LinearPathScheme scheme_from_json(const nlohmann::json& j) {
    LinearPathScheme s;
    for (const auto& seg : j.at("segments")) {
        Segment x;
        if (seg.contains("cycle")) {
            x.cycle = true;
            x.path = seg.at("cycle").get<std::vector<int>>();
            x.exp = Int(seg.at("exp").get<std::string>());
        } else {
            x.path = seg.at("path").get<std::vector<int>>();
        }
        s.segments.push_back(std::move(x));
    }
    return s;
}

}  // namespace zvass
