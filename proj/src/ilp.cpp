#include "zvass/ilp.hpp"

#include "zvass/linalg.hpp"

#include <sstream>

namespace zvass {

int IlpSystem::add_var(std::string name, std::optional<Int> ub) {
    names.push_back(std::move(name));
    upper.push_back(std::move(ub));
    return num_vars() - 1;
}

bool IlpSystem::satisfied_by(const Vec& x) const {
    if (static_cast<int>(x.size()) != num_vars()) return false;
    for (int v = 0; v < num_vars(); ++v) {
        if (x[v] < 0) return false;
        if (upper[v] && x[v] > *upper[v]) return false;
    }
    for (const auto& r : rows) {
        Int s = 0;
        for (const auto& [v, c] : r.terms) s += c * x[v];
        if (r.rel == Rel::Eq && s != r.rhs) return false;
        if (r.rel == Rel::Le && s > r.rhs) return false;
        if (r.rel == Rel::Ge && s < r.rhs) return false;
    }
    return true;
}

namespace {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpOut {
    LpStatus status = LpStatus::Infeasible;
    std::vector<Rat> x;
    Rat value = 0;
};

class Tableau {
public:
    std::vector<std::vector<Rat>> t;  // rows, last column is rhs
    std::vector<int> basis;
    std::size_t ncols = 0;

    void pivot(std::size_t r, std::size_t c, std::vector<Rat>& d) {
        Rat inv = 1 / t[r][c];
        for (auto& x : t[r])
            if (x != 0) x *= inv;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (i == r || t[i][c] == 0) continue;
            Rat f = t[i][c];
            for (std::size_t j = 0; j <= ncols; ++j)
                if (t[r][j] != 0) t[i][j] -= f * t[r][j];
        }
        if (d[c] != 0) {
            Rat f = d[c];
            for (std::size_t j = 0; j <= ncols; ++j)
                if (t[r][j] != 0) d[j] -= f * t[r][j];
        }
        basis[r] = static_cast<int>(c);
    }

    // Minimises cost over allowed columns with Bland's rule.
    LpStatus run(const std::vector<Rat>& cost, const std::vector<char>& allowed) {
        std::vector<Rat> d(ncols + 1, Rat(0));
        for (std::size_t j = 0; j < ncols; ++j) d[j] = cost[j];
        for (std::size_t r = 0; r < t.size(); ++r) {
            const Rat& cb = cost[basis[r]];
            if (cb == 0) continue;
            for (std::size_t j = 0; j <= ncols; ++j)
                if (t[r][j] != 0) d[j] -= cb * t[r][j];
        }
        for (;;) {
            std::size_t enter = ncols;
            for (std::size_t j = 0; j < ncols; ++j)
                if (allowed[j] && d[j] < 0) {
                    enter = j;
                    break;
                }
            if (enter == ncols) return LpStatus::Optimal;
            std::size_t leave = t.size();
            Rat best;
            for (std::size_t r = 0; r < t.size(); ++r) {
                if (t[r][enter] <= 0) continue;
                Rat ratio = t[r][ncols] / t[r][enter];
                if (leave == t.size() || ratio < best || (ratio == best && basis[r] < basis[leave])) {
                    leave = r;
                    best = ratio;
                }
            }
            if (leave == t.size()) return LpStatus::Unbounded;
            pivot(leave, enter, d);
        }
    }
};

LpOut lp_solve(int n, const std::vector<Row>& rows_in, const std::vector<Rat>* cost) {
    std::vector<Row> rows = rows_in;
    for (auto& r : rows) {
        if (r.rhs < 0) {
            r.rhs = -r.rhs;
            for (auto& tc : r.terms) tc.second = -tc.second;
            if (r.rel == Rel::Le)
                r.rel = Rel::Ge;
            else if (r.rel == Rel::Ge)
                r.rel = Rel::Le;
        }
    }
    const std::size_t m = rows.size();
    std::size_t ns = 0, na = 0;
    for (const auto& r : rows) {
        if (r.rel != Rel::Eq) ++ns;
        if (r.rel != Rel::Le) ++na;
    }
    Tableau tb;
    tb.ncols = n + ns + na;
    tb.t.assign(m, std::vector<Rat>(tb.ncols + 1, Rat(0)));
    tb.basis.assign(m, -1);
    std::size_t si = n, ai = n + ns;
    for (std::size_t i = 0; i < m; ++i) {
        const Row& r = rows[i];
        for (const auto& [v, c] : r.terms) tb.t[i][v] += Rat(c);
        tb.t[i][tb.ncols] = Rat(r.rhs);
        if (r.rel == Rel::Le) {
            tb.t[i][si] = 1;
            tb.basis[i] = static_cast<int>(si++);
        } else {
            if (r.rel == Rel::Ge) tb.t[i][si++] = -1;
            tb.t[i][ai] = 1;
            tb.basis[i] = static_cast<int>(ai++);
        }
    }
    LpOut out;
    std::vector<char> allowed(tb.ncols, 1);
    if (na > 0) {
        std::vector<Rat> c1(tb.ncols, Rat(0));
        for (std::size_t j = n + ns; j < tb.ncols; ++j) c1[j] = 1;
        tb.run(c1, allowed);
        Rat infeas = 0;
        for (std::size_t r = 0; r < m; ++r)
            if (static_cast<std::size_t>(tb.basis[r]) >= n + ns) infeas += tb.t[r][tb.ncols];
        if (infeas > 0) return out;
        for (std::size_t j = n + ns; j < tb.ncols; ++j) allowed[j] = 0;
        std::vector<Rat> dummy(tb.ncols + 1, Rat(0));
        for (std::size_t r = 0; r < tb.t.size();) {
            if (static_cast<std::size_t>(tb.basis[r]) < n + ns) {
                ++r;
                continue;
            }
            std::size_t c = 0;
            while (c < n + ns && tb.t[r][c] == 0) ++c;
            if (c < n + ns) {
                tb.pivot(r, c, dummy);
                ++r;
            } else {
                tb.t.erase(tb.t.begin() + r);
                tb.basis.erase(tb.basis.begin() + r);
            }
        }
    }
    out.status = LpStatus::Optimal;
    if (cost) {
        std::vector<Rat> c2(tb.ncols, Rat(0));
        for (int j = 0; j < n; ++j) c2[j] = (*cost)[j];
        out.status = tb.run(c2, allowed);
    }
    out.x.assign(n, Rat(0));
    for (std::size_t r = 0; r < tb.t.size(); ++r)
        if (tb.basis[r] < n) out.x[tb.basis[r]] = tb.t[r][tb.ncols];
    if (cost)
        for (int j = 0; j < n; ++j) out.value += (*cost)[j] * out.x[j];
    return out;
}

std::vector<Row> bound_rows(const IlpSystem& sys, const Vec& lo, const std::vector<std::optional<Int>>& hi) {
    std::vector<Row> rows = sys.rows;
    for (int v = 0; v < sys.num_vars(); ++v) {
        if (lo[v] > 0) rows.push_back(Row{{{v, 1}}, Rel::Ge, lo[v]});
        if (hi[v]) rows.push_back(Row{{{v, 1}}, Rel::Le, *hi[v]});
    }
    return rows;
}

Int floor_rat(const Rat& r) {
    Int n = numerator(r), d = denominator(r);
    Int q = n / d;
    if (n % d != 0 && n < 0) q -= 1;
    return q;
}

bool equality_lattice_ok(const IlpSystem& sys) {
    std::vector<Vec> a;
    Vec b;
    for (const auto& r : sys.rows) {
        if (r.rel != Rel::Eq) continue;
        Vec row(sys.num_vars(), 0);
        for (const auto& [v, c] : r.terms) row[v] += c;
        a.push_back(std::move(row));
        b.push_back(r.rhs);
    }
    if (a.empty()) return true;
    return lattice_solvable(std::move(a), b, sys.num_vars());
}

}  // namespace

std::optional<std::vector<Rat>> lp_feasible(const IlpSystem& sys, const std::vector<Row>& extra) {
    std::vector<Row> rows = bound_rows(sys, Vec(sys.num_vars(), 0), sys.upper);
    rows.insert(rows.end(), extra.begin(), extra.end());
    LpOut o = lp_solve(sys.num_vars(), rows, nullptr);
    if (o.status == LpStatus::Infeasible) return std::nullopt;
    return o.x;
}

IlpResult ilp_solve(const IlpSystem& sys, const IlpOptions& opt) {
    IlpResult res;
    const int n = sys.num_vars();
    if (!equality_lattice_ok(sys)) {
        res.status = IlpStatus::Infeasible;
        return res;
    }
    std::vector<Rat> cost;
    if (opt.minimize) {
        for (const auto& c : *opt.minimize) cost.emplace_back(c);
        cost.resize(n, Rat(0));
    }
    struct Node {
        Vec lo;
        std::vector<std::optional<Int>> hi;
    };
    std::vector<Node> stack{Node{Vec(n, 0), sys.upper}};
    std::optional<Int> incumbent;
    bool exhausted = true;
    while (!stack.empty()) {
        if (res.nodes >= opt.node_cap) {
            exhausted = false;
            break;
        }
        Node node = std::move(stack.back());
        stack.pop_back();
        ++res.nodes;
        LpOut o = lp_solve(n, bound_rows(sys, node.lo, node.hi), opt.minimize ? &cost : nullptr);
        if (o.status == LpStatus::Infeasible) continue;
        if (o.status == LpStatus::Optimal && opt.minimize && incumbent) {
            Rat v = o.value;
            Int lb = floor_rat(v);
            if (Rat(lb) != v) lb += 1;
            if (lb >= *incumbent) continue;
        }
        int frac = -1;
        for (int v = 0; v < n; ++v)
            if (denominator(o.x[v]) != 1) {
                frac = v;
                break;
            }
        if (frac < 0) {
            Vec x;
            for (const auto& q : o.x) x.push_back(numerator(q));
            if (!opt.minimize) {
                res.status = IlpStatus::Feasible;
                res.solution = std::move(x);
                return res;
            }
            Int val = 0;
            for (int v = 0; v < n; ++v) val += (*opt.minimize)[v] * x[v];
            if (!incumbent || val < *incumbent) {
                incumbent = val;
                res.solution = std::move(x);
            }
            continue;
        }
        Int f = floor_rat(o.x[frac]);
        Node up = node, down = std::move(node);
        up.lo[frac] = f + 1;
        down.hi[frac] = down.hi[frac] ? std::min(*down.hi[frac], f) : f;
        stack.push_back(std::move(up));
        stack.push_back(std::move(down));
    }
    if (incumbent) {
        res.status = IlpStatus::Feasible;
        res.optimal = exhausted;
        return res;
    }
    res.status = exhausted ? IlpStatus::Infeasible : IlpStatus::Unknown;
    return res;
}

IlpSystem homogeneous(const IlpSystem& sys) {
    IlpSystem h;
    h.names = sys.names;
    h.upper.assign(sys.num_vars(), std::nullopt);
    h.rows = sys.rows;
    for (auto& r : h.rows) r.rhs = 0;
    for (int v = 0; v < sys.num_vars(); ++v)
        if (sys.upper[v]) h.rows.push_back(Row{{{v, 1}}, Rel::Eq, 0});
    return h;
}

std::optional<Vec> homogeneous_ray(const IlpSystem& sys, int var) {
    IlpSystem h = homogeneous(sys);
    auto x = lp_feasible(h, {Row{{{var, 1}}, Rel::Ge, 1}});
    if (!x) return std::nullopt;
    return primitive(*x);
}

Tri ilp_var_unbounded(const IlpSystem& sys, int var) {
    IlpResult r = ilp_solve(sys);
    if (r.status == IlpStatus::Infeasible) return Tri::No;
    if (!homogeneous_ray(sys, var)) return Tri::No;
    return r.status == IlpStatus::Feasible ? Tri::Yes : Tri::Unknown;
}

ValueSet ilp_bounded_values(const IlpSystem& sys, int var, const Int& cap) {
    ValueSet out;
    IlpSystem probe = sys;
    probe.rows.push_back(Row{{{var, 1}}, Rel::Eq, 0});
    for (Int v = 0; v <= cap; ++v) {
        probe.rows.back().rhs = v;
        IlpResult r = ilp_solve(probe);
        if (r.status == IlpStatus::Feasible) out.values.push_back(v);
        if (r.status == IlpStatus::Unknown) out.unknown = true;
    }
    probe.rows.back() = Row{{{var, 1}}, Rel::Ge, cap + 1};
    IlpResult r = ilp_solve(probe);
    if (r.status == IlpStatus::Feasible) out.cap_exceeded = true;
    if (r.status == IlpStatus::Unknown) out.unknown = true;
    return out;
}

std::string format_ilp(const IlpSystem& sys) {
    std::ostringstream os;
    for (const auto& r : sys.rows) {
        bool first = true;
        for (const auto& [v, c] : r.terms) {
            if (c == 0) continue;
            if (!first) os << (c < 0 ? " - " : " + ");
            else if (c < 0) os << "-";
            Int a = abs(c);
            if (a != 1) os << a << "*";
            os << sys.names[v];
            first = false;
        }
        if (first) os << "0";
        os << (r.rel == Rel::Eq ? " = " : r.rel == Rel::Le ? " <= " : " >= ") << r.rhs << "\n";
    }
    for (int v = 0; v < sys.num_vars(); ++v)
        if (sys.upper[v]) os << sys.names[v] << " <= " << *sys.upper[v] << "\n";
    return os.str();
}

}  // namespace zvass
