#include "zvass/oracle.hpp"

#include <cstdlib>
#include <deque>
#include <limits>

namespace zvass {

std::size_t env_mem_cap_mb() {
    const char* s = std::getenv("ZVASS_MEM_CAP_MB");
    if (!s || !*s) return 4096;
    long v = std::strtol(s, nullptr, 10);
    return v > 0 ? static_cast<std::size_t>(v) : 4096;
}

int env_threads() {
    const char* s = std::getenv("ZVASS_THREADS");
    if (!s || !*s) return 1;
    long v = std::strtol(s, nullptr, 10);
    return v > 0 ? static_cast<int>(v) : 1;
}

std::int64_t to_i64(const Int& x) {
    static const Int lo = std::numeric_limits<std::int64_t>::min() / 4;
    static const Int hi = std::numeric_limits<std::int64_t>::max() / 4;
    if (x < lo || x > hi) throw OracleAbort("value exceeds the oracle's machine-integer range");
    return x.convert_to<std::int64_t>();
}

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    v *= 0x9E3779B97F4A7C15ULL;
    v ^= v >> 29;
    h ^= v + 0x632BE59BD9B4E019ULL + (h << 6) + (h >> 2);
    return h;
}

class Table {
public:
    explicit Table(std::size_t width) : w_(width) { slots_.assign(1024, kEmpty); }

    // Returns (index, inserted).
    std::pair<std::uint32_t, bool> insert(const std::int64_t* key) {
        if ((count_ + 1) * 2 > slots_.size()) grow();
        std::uint64_t h = hash(key);
        std::size_t mask = slots_.size() - 1;
        std::size_t i = h & mask;
        while (slots_[i] != kEmpty) {
            if (equal(slots_[i], key)) return {slots_[i], false};
            i = (i + 1) & mask;
        }
        std::uint32_t idx = static_cast<std::uint32_t>(count_);
        data_.insert(data_.end(), key, key + w_);
        slots_[i] = idx;
        ++count_;
        return {idx, true};
    }

    const std::int64_t* at(std::uint32_t idx) const { return data_.data() + static_cast<std::size_t>(idx) * w_; }
    std::size_t size() const { return count_; }
    std::size_t bytes() const { return data_.capacity() * 8 + slots_.capacity() * 4; }

private:
    static constexpr std::uint32_t kEmpty = 0xFFFFFFFFu;

    std::uint64_t hash(const std::int64_t* k) const {
        std::uint64_t h = 1469598103934665603ULL;
        for (std::size_t i = 0; i < w_; ++i) h = mix(h, static_cast<std::uint64_t>(k[i]));
        return h;
    }
    bool equal(std::uint32_t idx, const std::int64_t* k) const {
        const std::int64_t* a = at(idx);
        for (std::size_t i = 0; i < w_; ++i)
            if (a[i] != k[i]) return false;
        return true;
    }
    void grow() {
        std::vector<std::uint32_t> old(slots_.size() * 2, kEmpty);
        old.swap(slots_);
        std::size_t mask = slots_.size() - 1;
        for (std::uint32_t idx : old) {
            if (idx == kEmpty) continue;
            std::size_t i = hash(at(idx)) & mask;
            while (slots_[i] != kEmpty) i = (i + 1) & mask;
            slots_[i] = idx;
        }
    }

    std::size_t w_;
    std::size_t count_ = 0;
    std::vector<std::int64_t> data_;
    std::vector<std::uint32_t> slots_;
};

}  // namespace

Explorer::Explorer(SearchSpec spec) : spec_(std::move(spec)) {
    const int n = spec_.num_states;
    out_.assign(n, {});
    for (int m = 0; m < static_cast<int>(spec_.moves.size()); ++m) out_[spec_.moves[m].src].push_back(m);
    mem_cap_bytes_ = env_mem_cap_mb() * 1024ULL * 1024ULL;
    if (!spec_.prune) return;
    const PartialTarget& pt = *spec_.prune;
    reaches_target_.assign(n, 1);
    if (pt.state >= 0) {
        std::vector<std::vector<int>> rev(n);
        for (const auto& mv : spec_.moves) rev[mv.dst].push_back(mv.src);
        reaches_target_.assign(n, 0);
        std::deque<int> dq{pt.state};
        reaches_target_[pt.state] = 1;
        while (!dq.empty()) {
            int s = dq.front();
            dq.pop_front();
            for (int p : rev[s])
                if (!reaches_target_[p]) {
                    reaches_target_[p] = 1;
                    dq.push_back(p);
                }
        }
    }
    const int dim = static_cast<int>(spec_.lo.size());
    can_inc_.assign(n, std::vector<char>(dim, 0));
    can_dec_.assign(n, std::vector<char>(dim, 0));
    std::vector<char> seen(n);
    for (int q = 0; q < n; ++q) {
        std::fill(seen.begin(), seen.end(), 0);
        std::deque<int> dq{q};
        seen[q] = 1;
        while (!dq.empty()) {
            int s = dq.front();
            dq.pop_front();
            for (int m : out_[s]) {
                const Move& mv = spec_.moves[m];
                for (int c = 0; c < dim; ++c) {
                    if (mv.update[c] > 0) can_inc_[q][c] = 1;
                    if (mv.update[c] < 0) can_dec_[q][c] = 1;
                }
                if (!seen[mv.dst]) {
                    seen[mv.dst] = 1;
                    dq.push_back(mv.dst);
                }
            }
        }
    }
}

bool Explorer::hopeless(int state, const std::int64_t* v) const {
    if (!spec_.prune) return false;
    if (!reaches_target_[state]) return true;
    const auto& vals = spec_.prune->values;
    for (std::size_t c = 0; c < vals.size(); ++c) {
        if (!vals[c]) continue;
        if (v[c] < *vals[c] && !can_inc_[state][c]) return true;
        if (v[c] > *vals[c] && !can_dec_[state][c]) return true;
    }
    return false;
}

SearchResult Explorer::search(int start_state, const std::vector<std::int64_t>& start,
                              const std::function<bool(int, const std::int64_t*)>& goal) {
    return run(start_state, start, &goal, false);
}

SearchResult Explorer::enumerate(int start_state, const std::vector<std::int64_t>& start) {
    return run(start_state, start, nullptr, true);
}

SearchResult Explorer::run(int start_state, const std::vector<std::int64_t>& start,
                           const std::function<bool(int, const std::int64_t*)>* goal, bool collect) {
    const std::size_t dim = spec_.lo.size();
    const bool exact = spec_.exact_length;
    const std::size_t w = 1 + dim + (exact ? 1 : 0);
    Table table(w);
    std::vector<std::uint32_t> parent;
    std::vector<std::int32_t> via;
    std::vector<std::uint32_t> depth;
    SearchResult res;

    std::vector<std::int64_t> key(w, 0);
    key[0] = start_state;
    for (std::size_t i = 0; i < dim; ++i) key[1 + i] = start[i];

    auto finish = [&](std::uint32_t idx) {
        res.found = true;
        std::vector<int> p;
        while (idx != 0) {
            p.push_back(via[idx]);
            idx = parent[idx];
        }
        res.path.assign(p.rbegin(), p.rend());
    };
    auto is_goal = [&](std::uint32_t idx, const std::int64_t* k) {
        if (!goal) return false;
        if (exact && depth[idx] != spec_.lmax) return false;
        return (*goal)(static_cast<int>(k[0]), k + 1);
    };

    table.insert(key.data());
    parent.push_back(0);
    via.push_back(-1);
    depth.push_back(0);
    if (is_goal(0, key.data())) {
        finish(0);
        res.explored = 1;
        return res;
    }
    if (hopeless(start_state, key.data() + 1)) {
        res.explored = 1;
        return res;
    }

    std::vector<std::int64_t> next(w);
    for (std::size_t head = 0; head < table.size(); ++head) {
        const std::uint32_t cur = static_cast<std::uint32_t>(head);
        if (depth[cur] >= spec_.lmax) continue;
        const std::int64_t* ck = table.at(cur);
        const int st = static_cast<int>(ck[0]);
        for (int m : out_[st]) {
            const Move& mv = spec_.moves[m];
            ck = table.at(cur);
            bool ok = true;
            for (const auto& g : mv.guards)
                if (ck[1 + g.first] != g.second) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            next[0] = mv.dst;
            for (std::size_t i = 0; i < dim; ++i) {
                std::int64_t v = ck[1 + i] + mv.update[i];
                if (v < spec_.lo[i] || v > spec_.hi[i]) {
                    ok = false;
                    break;
                }
                next[1 + i] = v;
            }
            if (!ok) continue;
            if (exact) next[w - 1] = static_cast<std::int64_t>(depth[cur]) + 1;
            if (hopeless(mv.dst, next.data() + 1)) continue;
            auto [idx, inserted] = table.insert(next.data());
            if (!inserted) continue;
            parent.push_back(cur);
            via.push_back(m);
            depth.push_back(depth[cur] + 1);
            if (is_goal(idx, next.data())) {
                finish(idx);
                res.explored = table.size();
                return res;
            }
            if ((table.size() & 0xFFFF) == 0 && table.bytes() + parent.size() * 12 > mem_cap_bytes_)
                throw OracleAbort("oracle memory cap exceeded (ZVASS_MEM_CAP_MB)");
        }
    }
    res.explored = table.size();
    if (collect) {
        res.visited.reserve(table.size());
        for (std::size_t i = 0; i < table.size(); ++i) {
            const std::int64_t* k = table.at(static_cast<std::uint32_t>(i));
            res.visited.emplace_back(static_cast<int>(k[0]), std::vector<std::int64_t>(k + 1, k + 1 + dim));
        }
    }
    return res;
}

SearchSpec make_spec(const ZVass& sys, const Bounds& b) {
    SearchSpec s;
    s.num_states = sys.num_states();
    s.d = sys.layout().d;
    const int dim = sys.layout().dim();
    const std::int64_t nmax = to_i64(b.nmax), zabs = to_i64(b.zabs);
    for (int i = 0; i < dim; ++i) {
        s.lo.push_back(i < s.d ? 0 : -zabs);
        s.hi.push_back(i < s.d ? nmax : zabs);
    }
    s.lmax = b.lmax;
    for (const auto& t : sys.transitions()) {
        Move m;
        m.src = t.src;
        m.dst = t.dst;
        for (const auto& u : t.update) m.update.push_back(to_i64(u));
        if (t.ztest) m.guards.emplace_back(*t.ztest, 0);
        s.moves.push_back(std::move(m));
    }
    return s;
}

namespace {

bool in_box(const ZVass& sys, const Configuration& c, const Bounds& b) {
    const int d = sys.layout().d;
    for (int i = 0; i < sys.layout().dim(); ++i) {
        if (i < d && (c.values[i] < 0 || c.values[i] > b.nmax)) return false;
        if (i >= d && abs(c.values[i]) > b.zabs) return false;
    }
    return true;
}

std::vector<std::int64_t> to_i64_vec(const Vec& v) {
    std::vector<std::int64_t> r;
    r.reserve(v.size());
    for (const auto& x : v) r.push_back(to_i64(x));
    return r;
}

}  // namespace

OracleAnswer bounded_reach(const ReachQuery& q, const Bounds& b, bool prune) {
    if (!in_box(q.system, q.source, b)) throw ZvassError("BoundsExceededAtSource");
    if (!in_box(q.system, q.target, b)) throw ZvassError("BoundsExceededAtTarget");
    SearchSpec spec = make_spec(q.system, b);
    const auto tgt = to_i64_vec(q.target.values);
    if (prune) {
        PartialTarget pt;
        pt.state = q.target.state;
        for (auto v : tgt) pt.values.emplace_back(v);
        spec.prune = pt;
    }
    Explorer ex(std::move(spec));
    const int tstate = q.target.state;
    const std::size_t dim = tgt.size();
    auto goal = [&](int s, const std::int64_t* v) {
        if (s != tstate) return false;
        for (std::size_t i = 0; i < dim; ++i)
            if (v[i] != tgt[i]) return false;
        return true;
    };
    SearchResult r = ex.search(q.source.state, to_i64_vec(q.source.values), goal);
    OracleAnswer a;
    a.explored = r.explored;
    if (r.found) {
        a.reachable = true;
        ReplayResult rr = replay(q.system, q.source, r.path);
        if (!rr.ok()) throw ZvassError("internal: oracle trace does not replay");
        a.trace = std::move(rr.trace);
    }
    return a;
}

std::vector<Configuration> reach_set(const ZVass& sys, const Configuration& source, const Bounds& b,
                                     const std::optional<PartialTarget>& prune) {
    if (!in_box(sys, source, b)) throw ZvassError("BoundsExceededAtSource");
    SearchSpec spec = make_spec(sys, b);
    spec.prune = prune;
    Explorer ex(std::move(spec));
    SearchResult r = ex.enumerate(source.state, to_i64_vec(source.values));
    std::vector<Configuration> out;
    out.reserve(r.visited.size());
    for (auto& [s, vals] : r.visited) {
        Configuration c{s, {}};
        c.values.reserve(vals.size());
        for (auto v : vals) c.values.emplace_back(v);
        out.push_back(std::move(c));
    }
    return out;
}

OracleAnswer length_bounded_ca_reach(const ZVass& ca, const Configuration& src, const Configuration& tgt,
                                     std::size_t L, LengthMode mode) {
    Int reach = 0;
    for (const auto& v : src.values)
        if (abs(v) > reach) reach = abs(v);
    for (const auto& v : tgt.values)
        if (abs(v) > reach) reach = abs(v);
    reach += ca.max_norm() * Int(L);
    Bounds b{reach, reach, L};
    SearchSpec spec = make_spec(ca, b);
    spec.exact_length = mode == LengthMode::Exact;
    Explorer ex(std::move(spec));
    const auto t = to_i64_vec(tgt.values);
    auto goal = [&](int s, const std::int64_t* v) {
        if (s != tgt.state) return false;
        for (std::size_t i = 0; i < t.size(); ++i)
            if (v[i] != t[i]) return false;
        return true;
    };
    SearchResult r = ex.search(src.state, to_i64_vec(src.values), goal);
    OracleAnswer a;
    a.explored = r.explored;
    if (r.found) {
        a.reachable = true;
        ReplayResult rr = replay(ca, src, r.path);
        if (!rr.ok()) throw ZvassError("internal: oracle trace does not replay");
        a.trace = std::move(rr.trace);
    }
    return a;
}

}  // namespace zvass
