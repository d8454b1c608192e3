#include "zvass/klmst.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace zvass {

using nlohmann::json;

OmegaConfig omega_config(int d) { return OmegaConfig(static_cast<std::size_t>(d)); }

std::string format_omega(const OmegaConfig& c) {
    std::string s;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (i) s += " ";
        s += c[i] ? c[i]->str() : "w";
    }
    return s;
}

namespace {

bool strongly_connected(const ZVass& sys, const std::vector<int>& states, const std::vector<int>& trans) {
    if (states.empty()) return false;
    std::unordered_map<int, int> idx;
    for (std::size_t i = 0; i < states.size(); ++i) idx[states[i]] = static_cast<int>(i);
    std::vector<std::vector<int>> fwd(states.size()), bwd(states.size());
    for (int t : trans) {
        const auto& tr = sys.transition(t);
        auto a = idx.find(tr.src), b = idx.find(tr.dst);
        if (a == idx.end() || b == idx.end()) return false;
        fwd[a->second].push_back(b->second);
        bwd[b->second].push_back(a->second);
    }
    for (const auto* adj : {&fwd, &bwd}) {
        std::vector<char> seen(states.size(), 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        std::size_t n = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v : (*adj)[u])
                if (!seen[v]) {
                    seen[v] = 1;
                    ++n;
                    stack.push_back(v);
                }
        }
        if (n != states.size()) return false;
    }
    return true;
}

// Effect of a spanning-tree path from states[0] to every state of the fragment.
std::unordered_map<int, Vec> potentials(const ZVass& sys, const std::vector<int>& states,
                                        const std::vector<int>& trans) {
    std::unordered_map<int, Vec> pot;
    if (states.empty()) return pot;
    std::unordered_map<int, std::vector<int>> out;
    for (int t : trans) out[sys.transition(t).src].push_back(t);
    pot[states[0]] = zero_vec(sys.layout().dim());
    std::deque<int> queue{states[0]};
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        for (int t : out[u]) {
            const auto& tr = sys.transition(t);
            if (pot.count(tr.dst)) continue;
            pot[tr.dst] = add(pot[u], tr.update);
            queue.push_back(tr.dst);
        }
    }
    return pot;
}

}  // namespace

int GeneralisedZVass::component_of_state(int q) const {
    for (std::size_t i = 0; i < components.size(); ++i)
        for (int x : components[i].states)
            if (x == q) return static_cast<int>(i);
    return -1;
}

void GeneralisedZVass::validate() const {
    const int d = system.layout().d;
    if (components.empty()) throw KlmstError("generalised system has no component");
    if (boundaries.size() + 1 != components.size())
        throw KlmstError("expected one boundary transition between consecutive components");
    if (system.has_ztests()) throw KlmstError("generalised systems carry tests on boundaries, not zero-tests");
    std::vector<int> owner(system.num_states(), -1);
    std::vector<int> role(system.num_transitions(), -1);
    for (std::size_t i = 0; i < components.size(); ++i) {
        const auto& c = components[i];
        for (int q : c.states) {
            if (q < 0 || q >= system.num_states() || owner[q] != -1)
                throw KlmstError("state listed twice or out of range in component " + std::to_string(i));
            owner[q] = static_cast<int>(i);
        }
    }
    for (std::size_t i = 0; i < components.size(); ++i) {
        const auto& c = components[i];
        const int ci = static_cast<int>(i);
        if (owner.at(c.entry) != ci || owner.at(c.exit) != ci)
            throw KlmstError("entry or exit outside component " + std::to_string(i));
        for (int t : c.transitions) {
            const auto& tr = system.transition(t);
            if (owner[tr.src] != ci || owner[tr.dst] != ci || role[t] != -1)
                throw KlmstError("transition " + tr.name + " does not stay inside component " + std::to_string(i));
            role[t] = ci;
        }
        if (!strongly_connected(system, c.states, c.transitions))
            throw KlmstError("NotStronglyConnected: component " + std::to_string(i));
    }
    for (std::size_t b = 0; b < boundaries.size(); ++b) {
        const auto& bd = boundaries[b];
        const auto& tr = system.transition(bd.transition);
        if (tr.src != components[b].exit || tr.dst != components[b + 1].entry || role[bd.transition] != -1)
            throw KlmstError("boundary " + std::to_string(b + 1) + " does not join consecutive components");
        if (static_cast<int>(bd.test.size()) != d) throw KlmstError("test arity mismatch on " + tr.name);
        for (const auto& v : bd.test)
            if (v && *v < 0) throw KlmstError("negative test value on " + tr.name);
        role[bd.transition] = -2;
    }
    for (int t = 0; t < system.num_transitions(); ++t)
        if (role[t] == -1) throw KlmstError("transition " + system.transition(t).name + " belongs to no component");
    if (static_cast<int>(origin.size()) != system.num_transitions() ||
        static_cast<int>(state_origin.size()) != system.num_states())
        throw KlmstError("origin maps do not match the system");
}

void reset_origin(GeneralisedZVass& gv) {
    gv.origin.resize(gv.system.num_transitions());
    std::iota(gv.origin.begin(), gv.origin.end(), 0);
    gv.state_origin.resize(gv.system.num_states());
    std::iota(gv.state_origin.begin(), gv.state_origin.end(), 0);
}

// ---------------------------------------------------------------------------------------------
// Text format

namespace {

struct Tok {
    std::string text;
    int col;
};

std::vector<Tok> split_line(const std::string& line) {
    std::vector<Tok> out;
    std::size_t i = 0;
    while (i < line.size()) {
        char ch = line[i];
        if (ch == '#') break;
        if (std::isspace(static_cast<unsigned char>(ch))) {
            ++i;
            continue;
        }
        if (ch == ':' || ch == '{' || ch == '}') {
            out.push_back({std::string(1, ch), static_cast<int>(i) + 1});
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) && line[j] != ':' &&
               line[j] != '#' && line[j] != '{' && line[j] != '}')
            ++j;
        out.push_back({line.substr(i, j - i), static_cast<int>(i) + 1});
        i = j;
    }
    return out;
}

std::string vec_line(const Layout& l, const Vec& v) {
    std::string s;
    for (int i = 0; i < l.dim(); ++i) {
        if (i == l.d && l.k > 0) s += " ;";
        s += " " + v[i].str();
    }
    if (l.k == 0) s += " ;";
    return s;
}

}  // namespace

bool looks_generalised(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        auto toks = split_line(raw);
        if (!toks.empty() && toks[0].text == "scc") return true;
    }
    return false;
}

GQuery parse_generalised(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    std::ostringstream plain;
    struct Block {
        std::vector<std::string> states;
        int line;
    };
    std::vector<Block> blocks;
    bool inside = false;
    struct TestLine {
        std::string name;
        std::vector<Tok> vals;
        int line, col;
    };
    std::vector<TestLine> tests;
    while (std::getline(in, raw)) {
        ++lineno;
        auto toks = split_line(raw);
        if (toks.empty()) {
            plain << "\n";
            continue;
        }
        const std::string& kw = toks[0].text;
        if (kw == "scc") {
            if (inside) throw ParseError(lineno, toks[0].col, "nested scc block");
            if (toks.size() < 2 || toks.size() > 3 || (toks.size() == 3 && toks[2].text != "{"))
                throw ParseError(lineno, toks[0].col, "expected 'scc <name> {'");
            blocks.push_back({{}, lineno});
            inside = true;
            plain << "\n";
        } else if (kw == "}") {
            if (!inside) throw ParseError(lineno, toks[0].col, "'}' outside an scc block");
            inside = false;
            plain << "\n";
        } else if (kw == "test") {
            if (toks.size() < 3 || toks[2].text != ":") throw ParseError(lineno, toks[0].col, "expected 'test <name> : ...'");
            tests.push_back({toks[1].text, std::vector<Tok>(toks.begin() + 3, toks.end()), lineno, toks[0].col});
            plain << "\n";
        } else if (kw == "ztest") {
            throw ParseError(lineno, toks[0].col, "generalised systems use 'test' lines on boundary transitions");
        } else {
            if (kw == "states") {
                if (!inside) throw ParseError(lineno, toks[0].col, "states must be declared inside an scc block");
                for (std::size_t i = 1; i < toks.size(); ++i) blocks.back().states.push_back(toks[i].text);
            }
            if (kw == "zvass" && inside) throw ParseError(lineno, toks[0].col, "header inside an scc block");
            plain << raw << "\n";
        }
    }
    if (inside) throw ParseError(lineno + 1, 1, "unterminated scc block");
    if (blocks.empty()) throw ParseError(1, 1, "no scc block");
    ReachQuery rq = parse_instance(plain.str());
    const ZVass& sys = rq.system;
    const int d = sys.layout().d;
    const int nb = static_cast<int>(blocks.size());

    GQuery q;
    q.gv.system = sys;
    reset_origin(q.gv);
    std::vector<int> owner(sys.num_states(), -1);
    q.gv.components.resize(nb);
    for (int i = 0; i < nb; ++i)
        for (const auto& name : blocks[i].states) {
            int s = sys.state_id(name);
            owner[s] = i;
            q.gv.components[i].states.push_back(s);
        }
    for (int s = 0; s < sys.num_states(); ++s)
        if (owner[s] < 0) throw KlmstError("state " + sys.state_name(s) + " is in no scc block");
    std::vector<int> boundary(nb > 0 ? nb - 1 : 0, -1);
    for (int t = 0; t < sys.num_transitions(); ++t) {
        const auto& tr = sys.transition(t);
        int a = owner[tr.src], b = owner[tr.dst];
        if (a == b) {
            q.gv.components[a].transitions.push_back(t);
        } else if (b == a + 1) {
            if (boundary[a] >= 0) throw KlmstError("two transitions join scc blocks " + std::to_string(a + 1) + " and " + std::to_string(b + 1));
            boundary[a] = t;
        } else {
            throw KlmstError("transition " + tr.name + " does not join consecutive scc blocks");
        }
    }
    for (int i = 0; i + 1 < nb; ++i) {
        if (boundary[i] < 0) throw KlmstError("no transition joins scc blocks " + std::to_string(i + 1) + " and " + std::to_string(i + 2));
        const auto& tr = sys.transition(boundary[i]);
        q.gv.components[i].exit = tr.src;
        q.gv.components[i + 1].entry = tr.dst;
        q.gv.boundaries.push_back({boundary[i], omega_config(d)});
    }
    if (owner[rq.source.state] != 0) throw KlmstError("init state must lie in the first scc block");
    if (owner[rq.target.state] != nb - 1) throw KlmstError("target state must lie in the last scc block");
    q.gv.components.front().entry = rq.source.state;
    q.gv.components.back().exit = rq.target.state;
    for (const auto& tl : tests) {
        int t = sys.transition_id(tl.name);
        auto it = std::find(boundary.begin(), boundary.end(), t);
        if (t < 0 || it == boundary.end()) throw ParseError(tl.line, tl.col, "test on " + tl.name + ", which is not a boundary transition");
        if (static_cast<int>(tl.vals.size()) != d)
            throw ParseError(tl.line, tl.col, "test arity mismatch: expected " + std::to_string(d) + " entries");
        OmegaConfig& test = q.gv.boundaries[it - boundary.begin()].test;
        for (int j = 0; j < d; ++j) {
            const Tok& v = tl.vals[j];
            if (v.text == "w") continue;
            bool digits = !v.text.empty() && std::all_of(v.text.begin(), v.text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
            if (!digits) throw ParseError(tl.line, v.col, "expected a natural or 'w', got '" + v.text + "'");
            test[j] = Int(v.text);
        }
    }
    q.source = rq.source.values;
    q.target = rq.target.values;
    q.gv.validate();
    return q;
}

GQuery load_generalised(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ZvassError("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_generalised(ss.str());
}

std::string serialize_generalised(const GQuery& q) {
    const auto& gv = q.gv;
    const ZVass& sys = gv.system;
    const Layout& l = sys.layout();
    std::map<std::string, int> seen;
    for (const auto& t : sys.transitions()) ++seen[t.name];
    auto tname = [&](int t) {
        const auto& n = sys.transition(t).name;
        return seen[n] == 1 ? n : "t" + std::to_string(t);
    };
    auto trans = [&](int t) {
        const auto& tr = sys.transition(t);
        return "trans " + tname(t) + " " + sys.state_name(tr.src) + " -> " + sys.state_name(tr.dst) + " :" +
               vec_line(l, tr.update) + "\n";
    };
    std::ostringstream o;
    o << "zvass d=" << l.d << " k=" << l.k << "\n";
    if (sys.encoding == Encoding::Binary) o << "encoding binary\n";
    for (std::size_t i = 0; i < gv.components.size(); ++i) {
        const auto& c = gv.components[i];
        o << "scc V" << i << " {\n  states";
        for (int s : c.states) o << " " << sys.state_name(s);
        o << "\n";
        for (int t : c.transitions) o << "  " << trans(t);
        o << "}\n";
        if (i < gv.boundaries.size()) {
            const auto& b = gv.boundaries[i];
            o << trans(b.transition);
            if (std::any_of(b.test.begin(), b.test.end(), [](const auto& v) { return v.has_value(); }))
                o << "test " << tname(b.transition) << " : " << format_omega(b.test) << "\n";
        }
    }
    o << "init " << sys.state_name(gv.components.front().entry) << " :" << vec_line(l, q.source) << "\n";
    o << "target " << sys.state_name(gv.components.back().exit) << " :" << vec_line(l, q.target) << "\n";
    return o.str();
}

// ---------------------------------------------------------------------------------------------
// Splitting into component paths

namespace {

struct Graph {
    ZVass sys;
    std::vector<int> origin, state_origin;
    std::vector<std::optional<OmegaConfig>> tests;
};

struct Chain {
    std::vector<Component> comps;
    std::vector<Boundary> bounds;
};

// Tested transitions inside a component throw when strict, and are dropped from the test otherwise
// (used where the control state already fixes the tested value).
std::vector<Chain> scc_paths(const Graph& g, int entry, int exit, std::size_t cap, bool& capped, bool strict) {
    const ZVass& sys = g.sys;
    const int n = sys.num_states();
    const int d = sys.layout().d;
    std::vector<std::vector<int>> out(n), in(n);
    for (int t = 0; t < sys.num_transitions(); ++t) {
        out[sys.transition(t).src].push_back(t);
        in[sys.transition(t).dst].push_back(t);
    }
    std::vector<int> comp(n, -1), low(n, 0), idx(n, -1), stack;
    std::vector<char> on(n, 0);
    int counter = 0, ncomp = 0;
    std::function<void(int)> dfs = [&](int u) {
        idx[u] = low[u] = counter++;
        stack.push_back(u);
        on[u] = 1;
        for (int t : out[u]) {
            int v = sys.transition(t).dst;
            if (idx[v] < 0) {
                dfs(v);
                low[u] = std::min(low[u], low[v]);
            } else if (on[v]) {
                low[u] = std::min(low[u], idx[v]);
            }
        }
        if (low[u] == idx[u]) {
            for (;;) {
                int w = stack.back();
                stack.pop_back();
                on[w] = 0;
                comp[w] = ncomp;
                if (w == u) break;
            }
            ++ncomp;
        }
    };
    dfs(entry);
    if (comp[exit] < 0) return {};
    std::vector<char> good(n, 0);
    std::vector<int> work{exit};
    good[exit] = 1;
    while (!work.empty()) {
        int u = work.back();
        work.pop_back();
        for (int t : in[u]) {
            int v = sys.transition(t).src;
            if (comp[v] >= 0 && !good[v]) {
                good[v] = 1;
                work.push_back(v);
            }
        }
    }
    std::vector<std::vector<int>> members(ncomp), inner(ncomp);
    for (int q = 0; q < n; ++q)
        if (comp[q] >= 0 && good[q]) members[comp[q]].push_back(q);
    for (int t = 0; t < sys.num_transitions(); ++t) {
        const auto& tr = sys.transition(t);
        if (comp[tr.src] < 0 || comp[tr.src] != comp[tr.dst] || !good[tr.src]) continue;
        if (strict && g.tests[t]) throw KlmstError("tested transition " + tr.name + " lies inside a component");
        inner[comp[tr.src]].push_back(t);
    }
    std::vector<Chain> result;
    Chain cur;
    std::function<void(int, int)> walk = [&](int c, int entry_state) {
        if (capped) return;
        Component part{members[c], inner[c], entry_state, exit};
        if (c == comp[exit]) {
            cur.comps.push_back(part);
            if (result.size() >= cap) capped = true;
            else result.push_back(cur);
            cur.comps.pop_back();
            return;
        }
        for (int q : members[c])
            for (int t : out[q]) {
                int v = sys.transition(t).dst;
                if (comp[v] == c || !good[v]) continue;
                part.exit = q;
                cur.comps.push_back(part);
                cur.bounds.push_back({t, g.tests[t] ? *g.tests[t] : omega_config(d)});
                walk(comp[v], v);
                cur.comps.pop_back();
                cur.bounds.pop_back();
            }
    };
    if (good[entry]) walk(comp[entry], entry);
    return result;
}

struct Fragment {
    const Graph* g = nullptr;
    Chain chain;
    std::vector<std::pair<int, Int>> pin_in, pin_out;
};

struct Glue {
    Vec update;
    OmegaConfig test;
    int origin = 0;
    std::string name;
};

bool pin(OmegaConfig& test, int j, const Int& v) {
    if (v < 0) return false;
    if (test[j] && *test[j] != v) return false;
    test[j] = v;
    return true;
}

std::optional<GQuery> assemble(const Layout& l, Encoding enc, const std::vector<const Fragment*>& parts,
                               const std::vector<Glue>& glue, const Vec& source, const Vec& target) {
    GQuery q;
    auto& gv = q.gv;
    gv.system = ZVass(l);
    gv.system.encoding = enc;
    q.source = source;
    q.target = target;
    int prev_exit = -1;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const Fragment& f = *parts[p];
        const Graph& g = *f.g;
        std::unordered_map<int, int> map;
        auto get = [&](int ls) {
            auto it = map.find(ls);
            if (it != map.end()) return it->second;
            int id = gv.system.add_state("n" + std::to_string(gv.system.num_states()));
            gv.state_origin.push_back(g.state_origin[ls]);
            map.emplace(ls, id);
            return id;
        };
        auto copy = [&](int lt) {
            const auto& tr = g.sys.transition(lt);
            int id = gv.system.add_transition(get(tr.src), tr.update, get(tr.dst), tr.name);
            gv.origin.push_back(g.origin[lt]);
            return id;
        };
        for (std::size_t ci = 0; ci < f.chain.comps.size(); ++ci) {
            const Component& c = f.chain.comps[ci];
            Component nc;
            for (int ls : c.states) nc.states.push_back(get(ls));
            nc.entry = get(c.entry);
            nc.exit = get(c.exit);
            for (int lt : c.transitions) nc.transitions.push_back(copy(lt));
            if (ci == 0) {
                if (p == 0) {
                    for (const auto& [j, v] : f.pin_in)
                        if (source[j] != v) return std::nullopt;
                } else {
                    const Glue& gl = glue[p - 1];
                    OmegaConfig test = gl.test;
                    for (const auto& [j, v] : parts[p - 1]->pin_out)
                        if (!pin(test, j, v)) return std::nullopt;
                    for (const auto& [j, v] : f.pin_in)
                        if (!pin(test, j, v - gl.update[j])) return std::nullopt;
                    int id = gv.system.add_transition(prev_exit, gl.update, nc.entry, gl.name);
                    gv.origin.push_back(gl.origin);
                    gv.boundaries.push_back({id, test});
                }
            } else {
                const Boundary& b = f.chain.bounds[ci - 1];
                int id = copy(b.transition);
                gv.boundaries.push_back({id, b.test});
            }
            gv.components.push_back(std::move(nc));
        }
        prev_exit = gv.components.back().exit;
    }
    for (const auto& [j, v] : parts.back()->pin_out)
        if (target[j] != v) return std::nullopt;
    return q;
}

Graph graph_of(const ReachQuery& q) {
    Graph g;
    const ZVass& sys = q.system;
    g.sys = ZVass(sys.layout());
    g.sys.encoding = sys.encoding;
    for (const auto& s : sys.states()) g.sys.add_state(s);
    g.state_origin.resize(sys.num_states());
    std::iota(g.state_origin.begin(), g.state_origin.end(), 0);
    for (int t = 0; t < sys.num_transitions(); ++t) {
        const auto& tr = sys.transition(t);
        g.sys.add_transition(tr.src, tr.update, tr.dst, tr.name);
        g.origin.push_back(t);
        if (tr.ztest) {
            OmegaConfig test = omega_config(sys.layout().d);
            test[*tr.ztest] = Int(0);
            g.tests.emplace_back(std::move(test));
        } else {
            g.tests.emplace_back(std::nullopt);
        }
    }
    return g;
}

}  // namespace

SplitResult split_query(const ReachQuery& q, std::size_t cap) {
    Graph g = graph_of(q);
    SplitResult out;
    auto chains = scc_paths(g, q.source.state, q.target.state, cap, out.cap_exceeded, true);
    for (auto& c : chains) {
        Fragment f{&g, std::move(c), {}, {}};
        auto gq = assemble(g.sys.layout(), g.sys.encoding, {&f}, {}, q.source.values, q.target.values);
        if (gq) out.queries.push_back(std::move(*gq));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Replay and oracle

ReplayResult replay_generalised(const GQuery& q, const std::vector<int>& path) {
    const auto& gv = q.gv;
    std::vector<const OmegaConfig*> test(gv.system.num_transitions(), nullptr);
    for (const auto& b : gv.boundaries) test[b.transition] = &b.test;
    ReplayResult r;
    Configuration c{gv.components.front().entry, q.source};
    r.trace.configs.push_back(c);
    for (std::size_t i = 0; i < path.size(); ++i) {
        int t = path[i];
        r.step = i;
        if (t < 0 || t >= gv.system.num_transitions()) {
            r.fault = Fault::UnknownTransition;
            return r;
        }
        if (test[t])
            for (std::size_t j = 0; j < test[t]->size(); ++j)
                if ((*test[t])[j] && c.values[j] != *(*test[t])[j]) {
                    r.fault = Fault::ZeroTestFailed;
                    return r;
                }
        Configuration nx;
        Fault f = fire(gv.system, c, t, nx);
        if (f != Fault::None) {
            r.fault = f;
            return r;
        }
        c = std::move(nx);
        r.trace.path.push_back(t);
        r.trace.configs.push_back(c);
    }
    r.step = path.size();
    return r;
}

bool reaches_target(const GQuery& q, const std::vector<int>& path) {
    ReplayResult r = replay_generalised(q, path);
    if (!r.ok()) return false;
    const auto& last = r.trace.configs.back();
    return last.state == q.gv.components.back().exit && last.values == q.target;
}

OracleAnswer oracle_reach(const GQuery& q, const Bounds& b) {
    const auto& gv = q.gv;
    const int d = gv.system.layout().d;
    auto in_box = [&](const Vec& v) {
        for (int i = 0; i < gv.system.layout().dim(); ++i) {
            if (i < d && (v[i] < 0 || v[i] > b.nmax)) return false;
            if (i >= d && abs(v[i]) > b.zabs) return false;
        }
        return true;
    };
    if (!in_box(q.source)) throw ZvassError("BoundsExceededAtSource");
    if (!in_box(q.target)) throw ZvassError("BoundsExceededAtTarget");
    SearchSpec spec = make_spec(gv.system, b);
    for (const auto& bd : gv.boundaries)
        for (int j = 0; j < d; ++j)
            if (bd.test[j]) spec.moves[bd.transition].guards.emplace_back(j, to_i64(*bd.test[j]));
    std::vector<std::int64_t> src, tgt;
    for (const auto& x : q.source) src.push_back(to_i64(x));
    for (const auto& x : q.target) tgt.push_back(to_i64(x));
    const int tstate = gv.components.back().exit;
    PartialTarget pt;
    pt.state = tstate;
    for (auto v : tgt) pt.values.emplace_back(v);
    spec.prune = pt;
    Explorer ex(std::move(spec));
    auto goal = [&](int s, const std::int64_t* v) {
        if (s != tstate) return false;
        for (std::size_t i = 0; i < tgt.size(); ++i)
            if (v[i] != tgt[i]) return false;
        return true;
    };
    SearchResult r = ex.search(gv.components.front().entry, src, goal);
    OracleAnswer a;
    a.explored = r.explored;
    if (r.found) {
        ReplayResult rr = replay_generalised(q, r.path);
        if (!rr.ok()) throw ZvassError("internal: oracle trace does not replay");
        a.reachable = true;
        a.trace = std::move(rr.trace);
    }
    return a;
}

// ---------------------------------------------------------------------------------------------
// Cycle spaces and rank

RatMat cycle_space(const ZVass& sys, const std::vector<int>& states, const std::vector<int>& transitions) {
    if (states.empty()) throw KlmstError("NotStronglyConnected: empty fragment");
    if (!strongly_connected(sys, states, transitions)) throw KlmstError("NotStronglyConnected");
    auto pot = potentials(sys, states, transitions);
    std::vector<Vec> rows;
    for (int t : transitions) {
        const auto& tr = sys.transition(t);
        rows.push_back(sub(add(pot[tr.src], tr.update), pot[tr.dst]));
    }
    return span_basis(rows, sys.layout().dim());
}

RatMat cycle_space(const GeneralisedZVass& gv, int component) {
    const auto& c = gv.components.at(component);
    std::vector<int> states = c.states;
    std::rotate(states.begin(), std::find(states.begin(), states.end(), c.entry), states.end());
    return cycle_space(gv.system, states, c.transitions);
}

std::strong_ordering Rank::operator<=>(const Rank& o) const {
    if (auto c = dimZ <=> o.dimZ; c != 0) return c;
    const std::size_t n = std::max(rankN.size(), o.rankN.size());
    for (std::size_t i = n; i-- > 0;) {
        int a = i < rankN.size() ? rankN[i] : 0;
        int b = i < o.rankN.size() ? o.rankN[i] : 0;
        if (auto c = a <=> b; c != 0) return c;
    }
    return std::strong_ordering::equal;
}

std::string Rank::str() const {
    std::string s = "(" + std::to_string(dimZ) + ",[";
    for (std::size_t i = 0; i < rankN.size(); ++i) s += (i ? "," : "") + std::to_string(rankN[i]);
    return s + "])";
}

namespace {

struct ComponentSpace {
    RatMat basis;
    int dimN = 0;
    std::vector<Vec> zero_n;  // integer part of cycle effects with zero natural part
};

ComponentSpace component_space(const GeneralisedZVass& gv, int i) {
    const int d = gv.system.layout().d, k = gv.system.layout().k;
    ComponentSpace cs;
    cs.basis = cycle_space(gv, i);
    const std::size_t m = cs.basis.size();
    if (m == 0) return cs;
    RatMat kernel;
    if (d == 0) {
        for (std::size_t l = 0; l < m; ++l) {
            RatVec e(m, Rat(0));
            e[l] = 1;
            kernel.push_back(e);
        }
    } else {
        RatMat p(d, RatVec(m, Rat(0)));
        for (int j = 0; j < d; ++j)
            for (std::size_t l = 0; l < m; ++l) p[j][l] = cs.basis[l][j];
        cs.dimN = static_cast<int>(rref(p, m).size());
        kernel = nullspace(p, m);
    }
    if (k == 0) return cs;
    for (const auto& lam : kernel) {
        RatVec z(k, Rat(0));
        for (std::size_t l = 0; l < m; ++l)
            for (int c = 0; c < k; ++c) z[c] += lam[l] * cs.basis[l][d + c];
        if (std::any_of(z.begin(), z.end(), [](const Rat& r) { return r != 0; })) cs.zero_n.push_back(primitive(z));
    }
    return cs;
}

}  // namespace

Rank rank(const GeneralisedZVass& gv) {
    const int d = gv.system.layout().d, k = gv.system.layout().k;
    Rank r;
    r.rankN.assign(d, 0);
    std::vector<Vec> zs;
    for (int i = 0; i <= gv.s(); ++i) {
        ComponentSpace cs = component_space(gv, i);
        if (cs.dimN > 0) r.rankN[cs.dimN - 1] += static_cast<int>(gv.components[i].states.size());
        zs.insert(zs.end(), cs.zero_n.begin(), cs.zero_n.end());
    }
    r.dimZ = (k > 0 && !zs.empty()) ? static_cast<int>(rank_of(zs, k)) : 0;
    return r;
}

// ---------------------------------------------------------------------------------------------
// ILP

KlmstIlp build_ilp(const GQuery& q) {
    const auto& gv = q.gv;
    const ZVass& sys = gv.system;
    const int d = sys.layout().d, k = sys.layout().k, s = gv.s();
    KlmstIlp out;
    IlpSystem& ilp = out.system;
    out.x.assign(s + 1, {});
    out.y.assign(s + 1, {});
    for (int i = 0; i <= s; ++i)
        for (int j = 0; j < d; ++j) {
            out.x[i].push_back(ilp.add_var("x" + std::to_string(i) + "_" + std::to_string(j + 1)));
            out.y[i].push_back(ilp.add_var("y" + std::to_string(i) + "_" + std::to_string(j + 1)));
        }
    out.edge_var.assign(sys.num_transitions(), -1);
    for (int i = 0; i <= s; ++i)
        for (int t : gv.components[i].transitions) out.edge_var[t] = ilp.add_var("n_" + sys.transition(t).name);
    auto row = [&](const std::map<int, Int>& terms, const Int& rhs) {
        Row r;
        for (const auto& [v, c] : terms)
            if (c != 0) r.terms.emplace_back(v, c);
        r.rhs = rhs;
        ilp.rows.push_back(std::move(r));
    };
    for (int j = 0; j < d; ++j) {
        row({{out.x[0][j], 1}}, q.source[j]);
        row({{out.y[s][j], 1}}, q.target[j]);
    }
    for (int i = 0; i <= s; ++i) {
        const auto& c = gv.components[i];
        std::map<int, std::map<int, Int>> kir;
        for (int q0 : c.states) kir[q0];
        for (int t : c.transitions) {
            const auto& tr = sys.transition(t);
            kir[tr.src][out.edge_var[t]] += 1;
            kir[tr.dst][out.edge_var[t]] -= 1;
        }
        for (const auto& [st, terms] : kir) row(terms, Int((st == c.entry) - (st == c.exit)));
        for (int j = 0; j < d; ++j) {
            std::map<int, Int> terms{{out.y[i][j], 1}, {out.x[i][j], -1}};
            for (int t : c.transitions) terms[out.edge_var[t]] -= sys.transition(t).update[j];
            row(terms, 0);
        }
    }
    for (int z = d; z < d + k; ++z) {
        std::map<int, Int> terms;
        Int rhs = q.target[z] - q.source[z];
        for (int t = 0; t < sys.num_transitions(); ++t) {
            const Int& u = sys.transition(t).update[z];
            if (out.edge_var[t] >= 0) terms[out.edge_var[t]] += u;
            else rhs -= u;
        }
        row(terms, rhs);
    }
    for (int b = 0; b < s; ++b) {
        const auto& bd = gv.boundaries[b];
        const auto& u = sys.transition(bd.transition).update;
        for (int j = 0; j < d; ++j) {
            row({{out.x[b + 1][j], 1}, {out.y[b][j], -1}}, u[j]);
            if (bd.test[j]) row({{out.y[b][j], 1}}, *bd.test[j]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Perfectness

nlohmann::json KlmstCaps::to_json() const {
    return {{"value_cap", value_cap.str()}, {"word_len", word_len}, {"words", words},
            {"children", children},         {"pump_len", pump_len}, {"pump_slack", pump_slack.str()},
            {"km_nodes", km_nodes},         {"counter_cap", counter_cap.str()}, {"mcap", mcap},
            {"nodes", nodes},               {"depth", depth}};
}

json Violation::evidence(const GQuery& q) const {
    const ZVass& sys = q.gv.system;
    json e{{"condition", condition}};
    if (component >= 0) e["component"] = component;
    if (condition == 2) {
        json b = json::array();
        for (const auto& [t, vals] : bounded) {
            json vs = json::array();
            for (const auto& v : vals) vs.push_back(v.str());
            b.push_back({{"transition", sys.transition(t).name}, {"values", vs}});
        }
        e["bounded"] = b;
    }
    if (condition == 3) {
        e["boundary"] = boundary + 1;
        e["counter"] = counter + 1;
        json vs = json::array();
        for (const auto& v : values) vs.push_back(v.str());
        e["values"] = vs;
    }
    if (condition == 4 || condition == 5) {
        e["counter"] = counter + 1;
        e["bound"] = bound.str();
    }
    if (condition == 6) {
        e["counter"] = counter + 1;
        json ds = json::array();
        for (int s : dead_states) ds.push_back(sys.state_name(s));
        e["dead_states"] = ds;
    }
    return e;
}

namespace {

using I64Vec = std::vector<long long>;

struct RigidInfo {
    std::vector<char> rigid;                 // per natural counter
    std::unordered_map<int, Vec> pot;        // potentials from the entry
};

RigidInfo rigid_info(const GeneralisedZVass& gv, int i) {
    const int d = gv.system.layout().d;
    const auto& c = gv.components[i];
    RigidInfo r;
    RatMat basis = cycle_space(gv, i);
    r.rigid.assign(d, 1);
    for (const auto& b : basis)
        for (int j = 0; j < d; ++j)
            if (b[j] != 0) r.rigid[j] = 0;
    std::vector<int> states = c.states;
    std::rotate(states.begin(), std::find(states.begin(), states.end(), c.entry), states.end());
    r.pot = potentials(gv.system, states, c.transitions);
    return r;
}

// Natural values on entering (forward) or leaving (backward) component i; omega where unknown.
OmegaConfig entry_values(const GQuery& q, int i) {
    const int d = q.gv.system.layout().d;
    OmegaConfig v = omega_config(d);
    if (i == 0) {
        for (int j = 0; j < d; ++j) v[j] = q.source[j];
        return v;
    }
    const auto& b = q.gv.boundaries[i - 1];
    const auto& u = q.gv.system.transition(b.transition).update;
    for (int j = 0; j < d; ++j)
        if (b.test[j]) v[j] = *b.test[j] + u[j];
    return v;
}

OmegaConfig exit_values(const GQuery& q, int i) {
    const int d = q.gv.system.layout().d;
    OmegaConfig v = omega_config(d);
    if (i == q.gv.s()) {
        for (int j = 0; j < d; ++j) v[j] = q.target[j];
        return v;
    }
    return q.gv.boundaries[i].test;
}

struct PumpSearch {
    enum Status { Found, None, Capped } status = None;
    std::vector<int> path;
};

// Cycle at the anchor that raises (forward) or, read backwards, lowers every tracked counter.
PumpSearch find_pump(const ZVass& sys, const Component& c, const std::vector<int>& tracked, const I64Vec& start,
                     bool backward, const KlmstCaps& caps) {
    PumpSearch out;
    if (tracked.empty()) {
        out.status = PumpSearch::Found;
        return out;
    }
    const int anchor = backward ? c.exit : c.entry;
    const long long slack = to_i64(caps.pump_slack);
    std::unordered_map<int, std::vector<int>> adj;
    for (int t : c.transitions) adj[backward ? sys.transition(t).dst : sys.transition(t).src].push_back(t);
    struct Node {
        int state;
        I64Vec v;
        int parent;
        int via;
        std::size_t depth;
    };
    std::vector<Node> nodes{{anchor, start, -1, -1, 0}};
    std::set<std::pair<int, I64Vec>> seen{{anchor, start}};
    bool capped = false;
    for (std::size_t head = 0; head < nodes.size(); ++head) {
        Node cur = nodes[head];
        if (cur.depth >= caps.pump_len) {
            capped = capped || !adj[cur.state].empty();
            continue;
        }
        for (int t : adj[cur.state]) {
            const auto& tr = sys.transition(t);
            I64Vec nv = cur.v;
            bool ok = true;
            for (std::size_t a = 0; a < tracked.size(); ++a) {
                long long u = to_i64(tr.update[tracked[a]]);
                nv[a] += backward ? -u : u;
                if (nv[a] < 0) ok = false;
                if (nv[a] > start[a] + slack) {
                    ok = false;
                    capped = true;
                }
            }
            if (!ok) continue;
            int next = backward ? tr.src : tr.dst;
            bool goal = next == anchor;
            for (std::size_t a = 0; a < tracked.size() && goal; ++a) goal = nv[a] > start[a];
            if (goal) {
                std::vector<int> path{t};
                for (int p = static_cast<int>(head); nodes[p].parent >= 0; p = nodes[p].parent) path.push_back(nodes[p].via);
                if (!backward) std::reverse(path.begin(), path.end());
                out.status = PumpSearch::Found;
                out.path = std::move(path);
                return out;
            }
            if (!seen.insert({next, nv}).second) continue;
            nodes.push_back({next, nv, static_cast<int>(head), t, cur.depth + 1});
        }
    }
    out.status = capped ? PumpSearch::Capped : PumpSearch::None;
    return out;
}

struct Coverage {
    bool capped = false;
    bool pump = false;
    std::vector<char> unbounded;
    I64Vec maxval;
};

// Coverability tree over the tracked counters; -1 stands for omega.
Coverage coverability(const ZVass& sys, const Component& c, const std::vector<int>& tracked, const I64Vec& start,
                      bool backward, std::size_t cap) {
    Coverage cov;
    const std::size_t n = tracked.size();
    cov.unbounded.assign(n, 0);
    cov.maxval = start;
    const int anchor = backward ? c.exit : c.entry;
    std::unordered_map<int, std::vector<int>> adj;
    for (int t : c.transitions) adj[backward ? sys.transition(t).dst : sys.transition(t).src].push_back(t);
    struct Node {
        int state;
        I64Vec v;
        int parent;
    };
    std::vector<Node> nodes{{anchor, start, -1}};
    std::vector<int> stack{0};
    while (!stack.empty()) {
        int id = stack.back();
        stack.pop_back();
        for (int t : adj[nodes[id].state]) {
            const auto& tr = sys.transition(t);
            I64Vec nv = nodes[id].v;
            bool ok = true;
            for (std::size_t a = 0; a < n; ++a) {
                if (nv[a] < 0) continue;
                long long u = to_i64(tr.update[tracked[a]]);
                nv[a] += backward ? -u : u;
                if (nv[a] < 0) ok = false;
            }
            if (!ok) continue;
            int next = backward ? tr.src : tr.dst;
            bool repeat = false;
            for (int p = id; p >= 0; p = nodes[p].parent) {
                if (nodes[p].state != next) continue;
                const I64Vec& pv = nodes[p].v;
                bool le = true, eq = true;
                for (std::size_t a = 0; a < n; ++a) {
                    long long x = pv[a], y = nv[a];
                    if (x != y) eq = false;
                    if (y >= 0 && (x < 0 || x > y)) le = false;
                }
                if (eq) {
                    repeat = true;
                    break;
                }
                if (le)
                    for (std::size_t a = 0; a < n; ++a)
                        if (nv[a] >= 0 && pv[a] < nv[a]) nv[a] = -1;
            }
            for (std::size_t a = 0; a < n; ++a) {
                if (nv[a] < 0) cov.unbounded[a] = 1;
                else cov.maxval[a] = std::max(cov.maxval[a], nv[a]);
            }
            if (next == anchor) {
                bool up = true;
                for (std::size_t a = 0; a < n && up; ++a) up = nv[a] < 0 || nv[a] > start[a];
                if (up) cov.pump = true;
            }
            if (repeat) continue;
            if (nodes.size() >= cap) {
                cov.capped = true;
                return cov;
            }
            nodes.push_back({next, nv, id});
            stack.push_back(static_cast<int>(nodes.size()) - 1);
        }
    }
    return cov;
}

Vec parikh(const std::vector<int>& path, int n) {
    Vec v = zero_vec(n);
    for (int t : path) v[t] += 1;
    return v;
}

}  // namespace

PerfectCheck check_perfect(const GQuery& q, const KlmstCaps& caps) {
    PerfectCheck pc;
    const auto& gv = q.gv;
    const ZVass& sys = gv.system;
    const int d = sys.layout().d, s = gv.s();
    pc.ilp = build_ilp(q);
    const IlpSystem& ilp = pc.ilp.system;
    IlpResult r = ilp_solve(ilp);
    if (r.status == IlpStatus::Unknown) {
        pc.reason = "ilp node cap";
        return pc;
    }
    if (r.status == IlpStatus::Infeasible) {
        pc.status = Perfectness::Violated;
        pc.violation.condition = 1;
        return pc;
    }
    pc.solution = r.solution;
    const int nv = ilp.num_vars();
    Vec h = zero_vec(nv);
    for (int v = 0; v < nv; ++v) {
        if (h[v] > 0) continue;
        if (auto ray = homogeneous_ray(ilp, v)) h = add(h, *ray);
    }
    pc.homogeneous = h;

    auto bounded_values = [&](int var, std::vector<Int>& vals) {
        ValueSet vs = ilp_bounded_values(ilp, var, caps.value_cap);
        if (vs.unknown) {
            pc.reason = "ilp node cap while enumerating " + ilp.names[var];
            return false;
        }
        if (vs.cap_exceeded) {
            pc.reason = "value cap " + caps.value_cap.str() + " exceeded by " + ilp.names[var];
            return false;
        }
        vals = std::move(vs.values);
        return true;
    };

    Violation v2;
    v2.condition = 2;
    for (int i = 0; i <= s; ++i)
        for (int t : gv.components[i].transitions) {
            int var = pc.ilp.edge_var[t];
            if (h[var] > 0) continue;
            std::vector<Int> vals;
            if (!bounded_values(var, vals)) return pc;
            v2.bounded.emplace_back(t, std::move(vals));
        }
    if (!v2.bounded.empty()) {
        pc.status = Perfectness::Violated;
        pc.violation = std::move(v2);
        return pc;
    }

    for (int b = 0; b < s; ++b)
        for (int j = 0; j < d; ++j) {
            if (gv.boundaries[b].test[j]) continue;
            int var = pc.ilp.y[b][j];
            if (h[var] > 0) continue;
            Violation v3;
            v3.condition = 3;
            v3.boundary = b;
            v3.counter = j;
            if (!bounded_values(var, v3.values)) return pc;
            pc.status = Perfectness::Violated;
            pc.violation = std::move(v3);
            return pc;
        }

    std::vector<RigidInfo> rigid;
    for (int i = 0; i <= s; ++i) {
        rigid.push_back(rigid_info(gv, i));
        const auto& c = gv.components[i];
        const RigidInfo& ri = rigid.back();
        OmegaConfig in = entry_values(q, i), out = exit_values(q, i);
        for (int j = 0; j < d; ++j) {
            if (!ri.rigid[j]) continue;
            std::optional<Int> base;
            if (in[j]) base = *in[j];
            else if (out[j]) base = *out[j] - ri.pot.at(c.exit)[j];
            if (!base) continue;
            Violation v6;
            v6.condition = 6;
            v6.component = i;
            v6.counter = j;
            for (int st : c.states)
                if (*base + ri.pot.at(st)[j] < 0) v6.dead_states.push_back(st);
            if (!v6.dead_states.empty()) {
                pc.status = Perfectness::Violated;
                pc.violation = std::move(v6);
                return pc;
            }
        }
    }

    pc.cert.up.assign(s + 1, {});
    pc.cert.dwn.assign(s + 1, {});
    for (int dir = 0; dir < 2; ++dir)
        for (int i = 0; i <= s; ++i) {
            const bool backward = dir == 1;
            OmegaConfig at = backward ? exit_values(q, i) : entry_values(q, i);
            std::vector<int> tracked;
            I64Vec start;
            for (int j = 0; j < d; ++j)
                if (at[j] && !rigid[i].rigid[j]) {
                    tracked.push_back(j);
                    start.push_back(to_i64(*at[j]));
                }
            const auto& c = gv.components[i];
            PumpSearch ps = find_pump(sys, c, tracked, start, backward, caps);
            if (ps.status == PumpSearch::Found) {
                (backward ? pc.cert.dwn : pc.cert.up)[i] = std::move(ps.path);
                continue;
            }
            Coverage cov = coverability(sys, c, tracked, start, backward, caps.km_nodes);
            const std::string what = std::string(backward ? "backward" : "forward") + " pump in component " + std::to_string(i);
            if (cov.capped) {
                pc.reason = "coverability node cap for " + what;
                return pc;
            }
            if (cov.pump) {
                pc.reason = "pump length or slack cap for " + what;
                return pc;
            }
            for (std::size_t a = 0; a < tracked.size(); ++a)
                if (!cov.unbounded[a]) {
                    if (cov.maxval[a] > to_i64(caps.counter_cap)) {
                        pc.reason = "counter cap " + caps.counter_cap.str() + " below bound " +
                                    std::to_string(cov.maxval[a]) + " for " + what;
                        return pc;
                    }
                    pc.status = Perfectness::Violated;
                    pc.violation.condition = backward ? 5 : 4;
                    pc.violation.component = i;
                    pc.violation.counter = tracked[a];
                    pc.violation.bound = cov.maxval[a];
                    return pc;
                }
            pc.reason = "no bounded counter found for " + what;
            return pc;
        }
    pc.status = Perfectness::Perfect;
    return pc;
}

// ---------------------------------------------------------------------------------------------
// Decomposition

namespace {

Graph component_graph(const GQuery& q, int i, const std::vector<char>* keep = nullptr) {
    const auto& gv = q.gv;
    const auto& c = gv.components[i];
    Graph g;
    g.sys = ZVass(gv.system.layout());
    g.sys.encoding = gv.system.encoding;
    std::unordered_map<int, int> local;
    for (int st : c.states) {
        if (keep && !(*keep)[st]) continue;
        local[st] = g.sys.add_state(gv.system.state_name(st));
        g.state_origin.push_back(gv.state_origin[st]);
    }
    for (int t : c.transitions) {
        const auto& tr = gv.system.transition(t);
        if (!local.count(tr.src) || !local.count(tr.dst)) continue;
        g.sys.add_transition(local[tr.src], tr.update, local[tr.dst], tr.name);
        g.origin.push_back(gv.origin[t]);
        g.tests.emplace_back(std::nullopt);
    }
    return g;
}

struct Options {
    std::deque<Graph> graphs;
    std::vector<std::vector<Fragment>> per_component;
};

void add_chains(Options& opt, int i, const Graph& g, int entry, int exit, std::vector<std::pair<int, Int>> pin_in,
                std::vector<std::pair<int, Int>> pin_out, const KlmstCaps& caps, Decomposition& dec) {
    bool capped = false;
    auto chains = scc_paths(g, entry, exit, caps.children, capped, false);
    if (capped) {
        dec.cap_exceeded = true;
        dec.report = "component paths exceed the children cap";
    }
    for (auto& ch : chains) opt.per_component[i].push_back(Fragment{&g, std::move(ch), pin_in, pin_out});
}

void identity_option(Options& opt, const GQuery& q, int i, const KlmstCaps& caps, Decomposition& dec) {
    const Graph& g = opt.graphs.emplace_back(component_graph(q, i));
    const auto& c = q.gv.components[i];
    add_chains(opt, i, g, g.sys.state_id(q.gv.system.state_name(c.entry)),
               g.sys.state_id(q.gv.system.state_name(c.exit)), {}, {}, caps, dec);
}

void combine(const GQuery& q, Options& opt, const KlmstCaps& caps, Decomposition& dec) {
    const auto& gv = q.gv;
    std::vector<Glue> glue;
    for (const auto& b : gv.boundaries) {
        const auto& tr = gv.system.transition(b.transition);
        glue.push_back({tr.update, b.test, gv.origin[b.transition], tr.name});
    }
    const std::size_t n = opt.per_component.size();
    for (const auto& o : opt.per_component)
        if (o.empty()) return;
    std::vector<std::size_t> pick(n, 0);
    for (;;) {
        std::vector<const Fragment*> parts;
        for (std::size_t i = 0; i < n; ++i) parts.push_back(&opt.per_component[i][pick[i]]);
        if (auto child = assemble(gv.system.layout(), gv.system.encoding, parts, glue, q.source, q.target)) {
            if (dec.children.size() >= caps.children) {
                dec.cap_exceeded = true;
                dec.report = "children cap " + std::to_string(caps.children) + " reached";
                return;
            }
            child->gv.validate();
            dec.children.push_back(std::move(*child));
        }
        std::size_t i = n;
        while (i-- > 0) {
            if (++pick[i] < opt.per_component[i].size()) break;
            pick[i] = 0;
        }
        if (i == static_cast<std::size_t>(-1)) return;
    }
}

// Copies of the component without its bounded transitions, joined in series by the word.
Graph series_graph(const GQuery& q, int i, const std::set<int>& removed, const std::vector<int>& word) {
    const auto& gv = q.gv;
    const auto& c = gv.components[i];
    Graph g;
    g.sys = ZVass(gv.system.layout());
    g.sys.encoding = gv.system.encoding;
    std::vector<std::unordered_map<int, int>> local(word.size() + 1);
    for (std::size_t copy = 0; copy <= word.size(); ++copy) {
        for (int st : c.states) {
            local[copy][st] = g.sys.add_state(gv.system.state_name(st) + "/" + std::to_string(copy));
            g.state_origin.push_back(gv.state_origin[st]);
        }
        for (int t : c.transitions) {
            if (removed.count(t)) continue;
            const auto& tr = gv.system.transition(t);
            g.sys.add_transition(local[copy][tr.src], tr.update, local[copy][tr.dst], tr.name);
            g.origin.push_back(gv.origin[t]);
            g.tests.emplace_back(std::nullopt);
        }
        if (copy == 0) continue;
        int t = word[copy - 1];
        const auto& tr = gv.system.transition(t);
        g.sys.add_transition(local[copy - 1][tr.src], tr.update, local[copy][tr.dst], tr.name);
        g.origin.push_back(gv.origin[t]);
        g.tests.emplace_back(std::nullopt);
    }
    return g;
}

void decompose_bounded(const GQuery& q, const Violation& v, const KlmstCaps& caps, Decomposition& dec) {
    const auto& gv = q.gv;
    const int s = gv.s();
    KlmstIlp ilp = build_ilp(q);
    Options opt;
    opt.per_component.resize(s + 1);
    for (int i = 0; i <= s; ++i) {
        std::vector<std::pair<int, std::vector<Int>>> mine;
        for (const auto& b : v.bounded)
            if (gv.component_of_state(gv.system.transition(b.first).src) == i) mine.push_back(b);
        if (mine.empty()) {
            identity_option(opt, q, i, caps, dec);
            continue;
        }
        std::set<int> removed;
        for (const auto& b : mine) removed.insert(b.first);
        std::vector<std::size_t> pick(mine.size(), 0);
        std::size_t words = 0;
        for (bool more = true; more;) {
            bool empty_set = false;
            for (const auto& b : mine) empty_set = empty_set || b.second.empty();
            if (empty_set) break;
            IlpSystem probe = ilp.system;
            std::vector<int> letters;
            std::size_t total = 0;
            bool too_long = false;
            for (std::size_t a = 0; a < mine.size(); ++a) {
                const Int& cnt = mine[a].second[pick[a]];
                probe.rows.push_back(Row{{{ilp.edge_var[mine[a].first], 1}}, Rel::Eq, cnt});
                if (cnt > static_cast<long>(caps.word_len)) too_long = true;
                else total += static_cast<std::size_t>(cnt);
            }
            IlpStatus st = ilp_solve(probe).status;
            if (st != IlpStatus::Infeasible) {
                if (too_long || total > caps.word_len) {
                    dec.cap_exceeded = true;
                    dec.report = "bounded word longer than " + std::to_string(caps.word_len);
                } else {
                    for (std::size_t a = 0; a < mine.size(); ++a)
                        for (Int c = 0; c < mine[a].second[pick[a]]; ++c) letters.push_back(mine[a].first);
                    std::sort(letters.begin(), letters.end());
                    do {
                        if (++words > caps.words) {
                            dec.cap_exceeded = true;
                            dec.report = "more than " + std::to_string(caps.words) + " bounded words";
                            break;
                        }
                        const Graph& g = opt.graphs.emplace_back(series_graph(q, i, removed, letters));
                        const std::string last = "/" + std::to_string(letters.size());
                        add_chains(opt, i, g, g.sys.state_id(gv.system.state_name(gv.components[i].entry) + "/0"),
                                   g.sys.state_id(gv.system.state_name(gv.components[i].exit) + last), {}, {}, caps, dec);
                    } while (std::next_permutation(letters.begin(), letters.end()));
                }
            }
            std::size_t a = mine.size();
            while (a-- > 0) {
                if (++pick[a] < mine[a].second.size()) break;
                pick[a] = 0;
            }
            more = a != static_cast<std::size_t>(-1);
        }
    }
    combine(q, opt, caps, dec);
}

void decompose_store(const GQuery& q, const Violation& v, const KlmstCaps& caps, Decomposition& dec) {
    const auto& gv = q.gv;
    const int s = gv.s(), i = v.component, j = v.counter;
    const bool backward = v.condition == 5;
    const auto& c = gv.components[i];
    const long long bound = to_i64(v.bound);
    OmegaConfig at = backward ? exit_values(q, i) : entry_values(q, i);
    const long long start = to_i64(*at[j]);
    std::map<std::pair<int, long long>, int> id;
    std::vector<std::pair<int, long long>> order{{backward ? c.exit : c.entry, start}};
    id[order[0]] = 0;
    for (std::size_t h = 0; h < order.size(); ++h) {
        auto [st, val] = order[h];
        for (int t : c.transitions) {
            const auto& tr = gv.system.transition(t);
            if ((backward ? tr.dst : tr.src) != st) continue;
            long long u = to_i64(tr.update[j]);
            std::pair<int, long long> nx{backward ? tr.src : tr.dst, backward ? val - u : val + u};
            if (nx.second < 0 || nx.second > bound || id.count(nx)) continue;
            id[nx] = static_cast<int>(order.size());
            order.push_back(nx);
        }
    }
    Options opt;
    opt.per_component.resize(s + 1);
    for (int o = 0; o <= s; ++o)
        if (o != i) identity_option(opt, q, o, caps, dec);
    Graph& g = opt.graphs.emplace_back();
    g.sys = ZVass(gv.system.layout());
    g.sys.encoding = gv.system.encoding;
    for (const auto& [st, val] : order) {
        g.sys.add_state(gv.system.state_name(st) + "=" + std::to_string(val));
        g.state_origin.push_back(gv.state_origin[st]);
    }
    const int d = gv.system.layout().d;
    for (std::size_t a = 0; a < order.size(); ++a) {
        auto [st, val] = order[a];
        for (int t : c.transitions) {
            const auto& tr = gv.system.transition(t);
            if (tr.src != st) continue;
            auto it = id.find({tr.dst, val + to_i64(tr.update[j])});
            if (it == id.end()) continue;
            g.sys.add_transition(static_cast<int>(a), tr.update, it->second, tr.name);
            g.origin.push_back(gv.origin[t]);
            OmegaConfig test = omega_config(d);
            test[j] = Int(val);
            g.tests.emplace_back(std::move(test));
        }
    }
    for (std::size_t a = 0; a < order.size(); ++a) {
        auto [st, val] = order[a];
        if (!backward && st == c.exit) add_chains(opt, i, g, 0, static_cast<int>(a), {}, {{j, Int(val)}}, caps, dec);
        if (backward && st == c.entry) add_chains(opt, i, g, static_cast<int>(a), 0, {{j, Int(val)}}, {}, caps, dec);
    }
    combine(q, opt, caps, dec);
}

void decompose_dead(const GQuery& q, const Violation& v, const KlmstCaps& caps, Decomposition& dec) {
    const auto& gv = q.gv;
    const int s = gv.s(), i = v.component;
    std::vector<char> keep(gv.system.num_states(), 1);
    for (int st : v.dead_states) keep[st] = 0;
    const auto& c = gv.components[i];
    if (!keep[c.entry] || !keep[c.exit]) return;
    Options opt;
    opt.per_component.resize(s + 1);
    for (int o = 0; o <= s; ++o) {
        if (o != i) {
            identity_option(opt, q, o, caps, dec);
            continue;
        }
        const Graph& g = opt.graphs.emplace_back(component_graph(q, i, &keep));
        add_chains(opt, i, g, g.sys.state_id(gv.system.state_name(c.entry)), g.sys.state_id(gv.system.state_name(c.exit)),
                   {}, {}, caps, dec);
    }
    combine(q, opt, caps, dec);
}

}  // namespace

Decomposition decompose(const GQuery& q, const Violation& v, const KlmstCaps& caps) {
    Decomposition dec;
    switch (v.condition) {
    case 1:
        break;
    case 2:
        decompose_bounded(q, v, caps, dec);
        break;
    case 3:
        dec.refining = false;
        for (const auto& val : v.values) {
            GQuery child = q;
            child.gv.boundaries[v.boundary].test[v.counter] = val;
            dec.children.push_back(std::move(child));
        }
        break;
    case 4:
    case 5:
        decompose_store(q, v, caps, dec);
        break;
    case 6:
        dec.refining = false;
        decompose_dead(q, v, caps, dec);
        break;
    default:
        throw KlmstError("unknown perfectness condition " + std::to_string(v.condition));
    }
    return dec;
}

// ---------------------------------------------------------------------------------------------
// Runs from perfect queries

namespace {

// Walks the multiset cnt from the current state to exit, keeping naturals nonnegative and the rest
// of the multiset connected to the walker.
bool euler_walk(const ZVass& sys, const std::vector<int>& edges, std::unordered_map<int, Int>& cnt, int exit,
                Configuration& cur, std::vector<int>& path) {
    const int d = sys.layout().d;
    Int total = 0;
    for (int e : edges) total += cnt[e];
    if (total > 500000) return false;
    std::vector<int> order = edges;
    auto weight = [&](int e) {
        Int w = 0;
        for (int j = 0; j < d; ++j) w += sys.transition(e).update[j];
        return w;
    };
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return weight(a) > weight(b); });
    auto connected_from = [&](int from) {
        std::unordered_map<int, std::vector<int>> out;
        for (int e : edges)
            if (cnt[e] > 0) out[sys.transition(e).src].push_back(e);
        std::set<int> seen{from};
        std::vector<int> stack{from};
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int e : out[u])
                if (seen.insert(sys.transition(e).dst).second) stack.push_back(sys.transition(e).dst);
        }
        for (int e : edges)
            if (cnt[e] > 0 && !seen.count(sys.transition(e).src)) return false;
        return true;
    };
    for (; total > 0; --total) {
        bool moved = false;
        for (int e : order) {
            if (cnt[e] <= 0 || sys.transition(e).src != cur.state) continue;
            Configuration nx;
            if (fire(sys, cur, e, nx) != Fault::None) continue;
            cnt[e] -= 1;
            if (connected_from(nx.state)) {
                cur = std::move(nx);
                path.push_back(e);
                moved = true;
                break;
            }
            cnt[e] += 1;
        }
        if (!moved) return false;
    }
    return cur.state == exit;
}

bool walk_cycle(const ZVass& sys, const std::vector<int>& cycle, std::size_t times, Configuration& cur,
                std::vector<int>& path) {
    for (std::size_t r = 0; r < times; ++r)
        for (int t : cycle) {
            Configuration nx;
            if (fire(sys, cur, t, nx) != Fault::None) return false;
            cur = std::move(nx);
            path.push_back(t);
        }
    return true;
}

}  // namespace

std::optional<std::vector<int>> run_from_perfect(const GQuery& q, const PerfectCheck& pc, std::size_t mcap,
                                                 std::size_t mmin) {
    if (pc.status != Perfectness::Perfect) throw KlmstError("run_from_perfect needs a perfect query");
    const auto& gv = q.gv;
    const ZVass& sys = gv.system;
    const int nt = sys.num_transitions(), s = gv.s();
    const auto& ev = pc.ilp.edge_var;
    std::vector<Vec> up(s + 1), dwn(s + 1);
    for (int i = 0; i <= s; ++i) {
        up[i] = parikh(pc.cert.up[i], nt);
        dwn[i] = parikh(pc.cert.dwn[i], nt);
    }
    // diffs[0] is the least multiple of h covering the pumps, diffs[1] also has full support.
    std::vector<Vec> diffs;
    for (int extra = 0; extra < 2; ++extra) {
        Int c = 1;
        for (int i = 0; i <= s; ++i)
            for (int t : gv.components[i].transitions) {
                const Int& hv = pc.homogeneous[ev[t]];
                if (hv <= 0) throw KlmstError("NoHomogeneousDecomposition: transition " + sys.transition(t).name);
                Int need = up[i][t] + dwn[i][t] + extra;
                c = std::max(c, Int((need + hv - 1) / hv));
            }
        Vec diff = zero_vec(nt);
        for (int i = 0; i <= s; ++i)
            for (int t : gv.components[i].transitions) diff[t] = c * pc.homogeneous[ev[t]] - up[i][t] - dwn[i][t];
        if (diffs.empty() || diffs.back() != diff) diffs.push_back(std::move(diff));
    }
    for (std::size_t m = mmin; m <= mcap; ++m)
        for (const Vec& diff : diffs) {
            std::vector<int> path;
            Configuration cur{gv.components.front().entry, q.source};
            bool ok = true;
            for (int i = 0; i <= s && ok; ++i) {
                const auto& comp = gv.components[i];
                ok = walk_cycle(sys, pc.cert.up[i], m, cur, path);
                std::unordered_map<int, Int> cnt;
                for (int t : comp.transitions) cnt[t] = pc.solution[ev[t]] + Int(m) * diff[t];
                ok = ok && euler_walk(sys, comp.transitions, cnt, comp.exit, cur, path);
                ok = ok && walk_cycle(sys, pc.cert.dwn[i], m, cur, path);
                if (ok && i < s) {
                    const auto& b = gv.boundaries[i];
                    for (std::size_t j = 0; j < b.test.size(); ++j)
                        if (b.test[j] && cur.values[j] != *b.test[j]) ok = false;
                    Configuration nx;
                    if (ok && fire(sys, cur, b.transition, nx) == Fault::None) {
                        cur = std::move(nx);
                        path.push_back(b.transition);
                    } else {
                        ok = false;
                    }
                }
            }
            if (ok && reaches_target(q, path)) return path;
        }
    return std::nullopt;
}

// ---------------------------------------------------------------------------------------------
// Driver

const char* klmst_verdict_name(KlmstVerdict v) {
    switch (v) {
    case KlmstVerdict::Reach: return "Reach";
    case KlmstVerdict::NonReach: return "NonReach";
    case KlmstVerdict::Unknown: return "Unknown";
    }
    return "?";
}

namespace {

json rank_json(const Rank& r) { return {{"dimZ", r.dimZ}, {"rankN", r.rankN}}; }

struct Driver {
    const KlmstCaps& caps;
    KlmstResult& res;

    void hit(const std::string& what) {
        if (std::find(res.caps_hit.begin(), res.caps_hit.end(), what) == res.caps_hit.end()) res.caps_hit.push_back(what);
    }

    KlmstVerdict run(const GQuery& q, const Rank& r, std::size_t depth, json& node, std::vector<int>& path) {
        node["id"] = res.nodes++;
        node["rank"] = rank_json(r);
        node["components"] = q.gv.components.size();
        node["states"] = q.gv.system.num_states();
        if (res.nodes > caps.nodes || depth > caps.depth) {
            hit(res.nodes > caps.nodes ? "nodes" : "depth");
            node["status"] = "capped";
            return KlmstVerdict::Unknown;
        }
        PerfectCheck pc = check_perfect(q, caps);
        if (pc.status == Perfectness::Unknown) {
            hit(pc.reason);
            node["status"] = "unknown";
            node["reason"] = pc.reason;
            return KlmstVerdict::Unknown;
        }
        if (pc.status == Perfectness::Perfect) {
            ++res.perfect_nodes;
            node["status"] = "perfect";
            auto run = run_from_perfect(q, pc, caps.mcap);
            if (!run) {
                hit("mcap");
                node["verdict"] = "Unknown";
                return KlmstVerdict::Unknown;
            }
            ++res.perfect_runs;
            path.clear();
            for (int t : *run) path.push_back(q.gv.origin[t]);
            node["verdict"] = "Reach";
            node["run_length"] = run->size();
            return KlmstVerdict::Reach;
        }
        node["status"] = "violated";
        node["violation"] = pc.violation.evidence(q);
        Decomposition dec = decompose(q, pc.violation, caps);
        node["edge"] = dec.refining ? "refining" : "cleaning";
        if (dec.cap_exceeded) {
            hit(dec.report);
            node["cap"] = dec.report;
        }
        node["children"] = json::array();
        bool unknown = dec.cap_exceeded;
        for (std::size_t a = 0; a < dec.children.size(); ++a) {
            const GQuery& child = dec.children[a];
            Rank rc = rank(child.gv);
            bool ok = dec.refining ? rc < r : rc <= r;
            if (!ok)
                throw KlmstError("RankDidNotDecrease: condition " + std::to_string(pc.violation.condition) + " edge " +
                                 r.str() + " -> " + rc.str());
            ++(dec.refining ? res.refining_edges : res.cleaning_edges);
            json cj;
            KlmstVerdict v = run(child, rc, depth + 1, cj, path);
            node["children"].push_back(std::move(cj));
            if (v == KlmstVerdict::Reach) {
                node["verdict"] = "Reach";
                if (a + 1 < dec.children.size()) node["skipped"] = dec.children.size() - a - 1;
                return v;
            }
            if (v == KlmstVerdict::Unknown) unknown = true;
        }
        KlmstVerdict v = unknown ? KlmstVerdict::Unknown : KlmstVerdict::NonReach;
        node["verdict"] = klmst_verdict_name(v);
        return v;
    }
};

}  // namespace

KlmstResult klmst_decide(const GQuery& q0, const KlmstCaps& caps) {
    GQuery q = q0;
    reset_origin(q.gv);
    q.gv.validate();
    KlmstResult res;
    Driver drv{caps, res};
    std::vector<int> path;
    res.verdict = drv.run(q, rank(q.gv), 0, res.tree, path);
    if (res.verdict == KlmstVerdict::Reach) {
        if (!reaches_target(q, path)) throw KlmstError("internal: reconstructed run does not replay");
        res.path = std::move(path);
    }
    return res;
}

KlmstResult klmst_decide(const ReachQuery& q, const KlmstCaps& caps) {
    KlmstResult res;
    SplitResult split;
    try {
        split = split_query(q);
    } catch (const KlmstError& e) {
        res.caps_hit.push_back(e.what());
        res.tree = {{"id", "split"}, {"status", "unsupported"}, {"reason", e.what()}};
        return res;
    }
    Driver drv{caps, res};
    res.tree = {{"id", "split"}, {"paths", split.queries.size()}, {"children", json::array()}};
    if (split.cap_exceeded) drv.hit("component path cap");
    bool unknown = split.cap_exceeded;
    for (const auto& gq : split.queries) {
        json node;
        std::vector<int> path;
        KlmstVerdict v = drv.run(gq, rank(gq.gv), 0, node, path);
        res.tree["children"].push_back(std::move(node));
        if (v == KlmstVerdict::Reach) {
            ReplayResult rr = replay(q.system, q.source, path);
            if (!rr.ok() || rr.trace.configs.back() != q.target)
                throw KlmstError("internal: reconstructed run does not replay");
            res.verdict = v;
            res.path = std::move(path);
            return res;
        }
        if (v == KlmstVerdict::Unknown) unknown = true;
    }
    res.verdict = unknown ? KlmstVerdict::Unknown : KlmstVerdict::NonReach;
    return res;
}

// ---------------------------------------------------------------------------------------------
// Integer-only reachability

Tri zvass0_reach(const ReachQuery& q, std::size_t node_cap) {
    const ZVass& sys = q.system;
    if (sys.layout().d != 0 || sys.has_ztests()) throw KlmstError("zvass0_reach expects integer counters only");
    const int n = sys.num_states(), nt = sys.num_transitions(), k = sys.layout().k;
    IlpSystem base;
    for (int t = 0; t < nt; ++t) base.add_var(sys.transition(t).name);
    for (int st = 0; st < n; ++st) {
        std::map<int, Int> terms;
        for (int t = 0; t < nt; ++t) {
            if (sys.transition(t).src == st) terms[t] += 1;
            if (sys.transition(t).dst == st) terms[t] -= 1;
        }
        Row r;
        for (const auto& [v, c] : terms)
            if (c != 0) r.terms.emplace_back(v, c);
        r.rhs = Int((st == q.source.state) - (st == q.target.state));
        base.rows.push_back(std::move(r));
    }
    for (int z = 0; z < k; ++z) {
        Row r;
        for (int t = 0; t < nt; ++t)
            if (sys.transition(t).update[z] != 0) r.terms.emplace_back(t, sys.transition(t).update[z]);
        r.rhs = q.target.values[z] - q.source.values[z];
        base.rows.push_back(std::move(r));
    }
    std::vector<std::vector<Row>> stack{{}};
    std::size_t nodes = 0;
    bool unknown = false;
    while (!stack.empty()) {
        if (++nodes > node_cap) return Tri::Unknown;
        std::vector<Row> extra = std::move(stack.back());
        stack.pop_back();
        IlpSystem probe = base;
        probe.rows.insert(probe.rows.end(), extra.begin(), extra.end());
        IlpResult r = ilp_solve(probe);
        if (r.status == IlpStatus::Unknown) {
            unknown = true;
            continue;
        }
        if (r.status == IlpStatus::Infeasible) continue;
        std::vector<char> seen(n, 0);
        seen[q.source.state] = 1;
        for (bool grew = true; grew;) {
            grew = false;
            for (int t = 0; t < nt; ++t) {
                const auto& tr = sys.transition(t);
                if (r.solution[t] > 0 && seen[tr.src] && !seen[tr.dst]) seen[tr.dst] = grew = 1;
            }
        }
        bool connected = true;
        for (int t = 0; t < nt; ++t)
            if (r.solution[t] > 0 && !seen[sys.transition(t).src]) connected = false;
        if (connected) return Tri::Yes;
        Row none{{}, Rel::Eq, 0}, enter{{}, Rel::Ge, 1};
        for (int t = 0; t < nt; ++t) {
            const auto& tr = sys.transition(t);
            if (!seen[tr.src]) none.terms.emplace_back(t, 1);
            if (seen[tr.src] && !seen[tr.dst]) enter.terms.emplace_back(t, 1);
        }
        auto a = extra, b = extra;
        a.push_back(none);
        b.push_back(enter);
        stack.push_back(std::move(b));
        stack.push_back(std::move(a));
    }
    return unknown ? Tri::Unknown : Tri::No;
}

}  // namespace zvass
