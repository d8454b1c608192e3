#include "zvass/parikh.hpp"

#include <deque>
#include <functional>
#include <sstream>
#include <unordered_map>

namespace zvass {

int Oca::add_state(std::string name) {
    states.push_back(std::move(name));
    return static_cast<int>(states.size()) - 1;
}

std::string letter_name(int letter) {
    if (letter == kEpsilon) return "eps";
    return std::string(letter % 2 == 0 ? "a" : "b") + std::to_string(letter / 2 + 1);
}

namespace {

// Emits a chain src -> ... -> dst realising update u; returns nothing, appends to a.
void emit_chain(Oca& a, int src, int dst, const Vec& u, int origin, const std::string& tag) {
    std::vector<std::pair<int, CounterOp>> steps;
    for (Int i = 0; i < abs(u[0]); ++i) steps.emplace_back(kEpsilon, u[0] > 0 ? CounterOp::Inc : CounterOp::Dec);
    for (int i = 0; i < a.k; ++i) {
        const Int& z = u[1 + i];
        for (Int j = 0; j < abs(z); ++j) steps.emplace_back(2 * i + (z > 0 ? 0 : 1), CounterOp::Nop);
    }
    int cur = src;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        int next = i + 1 == steps.size() ? dst : a.add_state(tag + "." + std::to_string(i + 1));
        a.transitions.push_back(OcaTransition{cur, next, steps[i].first, steps[i].second, origin});
        cur = next;
    }
}

}  // namespace

Oca zvass1_to_oca(const ZVass& v0, int initial, int final_state) {
    if (v0.layout().d != 1) throw ZvassError("DimensionMismatch: the OCA translation needs exactly one N-counter");
    if (v0.has_ztests()) throw ZvassError("DimensionMismatch: zero-tests are not supported by the OCA translation");
    ZVass v = v0;
    if (v.layout().k == 0) v.add_counter_int();
    Oca a;
    a.k = v.layout().k;
    for (const auto& s : v.states()) a.add_state(s);
    a.base_states = v.num_states();
    a.initial = initial;
    a.finals = {final_state};
    for (int t = 0; t < v.num_transitions(); ++t) {
        const Transition& tr = v.transition(t);
        bool zfree = true;
        for (int i = 1; i < v.layout().dim(); ++i) zfree = zfree && tr.update[i] == 0;
        std::string tag = tr.name.empty() ? "t" + std::to_string(t) : tr.name;
        if (!zfree) {
            emit_chain(a, tr.src, tr.dst, tr.update, t, tag);
            continue;
        }
        int mid = a.add_state(tag + "'");
        Vec first = zero_vec(v.layout().dim()), second = zero_vec(v.layout().dim());
        first[0] = tr.update[0];
        first[1] = 1;
        second[1] = -1;
        emit_chain(a, tr.src, mid, first, t, tag + ".in");
        emit_chain(a, mid, tr.dst, second, t, tag + ".out");
    }
    return a;
}

Oca query_to_oca(const ReachQuery& q) {
    ZVass v = q.system;
    if (v.layout().d != 1) throw ZvassError("DimensionMismatch: the OCA translation needs exactly one N-counter");
    int pre = v.add_state("$init"), post = v.add_state("$final");
    v.add_transition(pre, q.source.values, q.source.state, "$load");
    v.add_transition(q.target.state, scale(q.target.values, -1), post, "$unload");
    return zvass1_to_oca(v, pre, post);
}

LinearSet z_set(int k) {
    LinearSet s;
    s.base.assign(2 * k, 0);
    for (int i = 0; i < k; ++i) {
        ParikhVector p(2 * k, 0);
        p[2 * i] = 1;
        p[2 * i + 1] = 1;
        s.periods.push_back(std::move(p));
    }
    return s;
}

bool in_z(const ParikhVector& v) {
    for (std::size_t i = 0; i + 1 < v.size(); i += 2)
        if (v[i] != v[i + 1]) return false;
    return true;
}

namespace {

bool linear_member(const ParikhVector& v, const LinearSet& s) {
    if (s.base.size() != v.size()) throw ZvassError("DimensionMismatch");
    ParikhVector rest = sub(v, s.base);
    for (const auto& x : rest)
        if (x < 0) return false;
    std::vector<const ParikhVector*> ps;
    for (const auto& p : s.periods) {
        if (p.size() != v.size()) throw ZvassError("DimensionMismatch");
        if (!is_zero(p)) ps.push_back(&p);
    }
    std::function<bool(std::size_t, ParikhVector&)> go = [&](std::size_t j, ParikhVector& r) {
        if (is_zero(r)) return true;
        if (j == ps.size()) return false;
        ParikhVector save = r;
        for (;;) {
            if (go(j + 1, r)) return true;
            bool ok = true;
            for (std::size_t c = 0; c < r.size(); ++c) {
                r[c] -= (*ps[j])[c];
                ok = ok && r[c] >= 0;
            }
            if (!ok) break;
        }
        r = save;
        return false;
    };
    return go(0, rest);
}

}  // namespace

bool semilinear_member(const ParikhVector& v, const SemilinearSet& s) {
    for (const auto& l : s)
        if (linear_member(v, l)) return true;
    return false;
}

ParikhVector parikh(const std::vector<int>& word, int k) {
    ParikhVector p(2 * k, 0);
    for (int l : word) p.at(l) += 1;
    return p;
}

std::optional<OcaWitness> balanced_witness(const Oca& a, std::size_t cap) {
    const int k = a.k;
    const long cmax = static_cast<long>((cap + 1) * a.states.size());
    const long icap = static_cast<long>(cap);
    std::vector<std::vector<int>> out(a.states.size());
    for (int t = 0; t < static_cast<int>(a.transitions.size()); ++t) out[a.transitions[t].src].push_back(t);
    std::vector<char> is_final(a.states.size(), 0);
    for (int f : a.finals) is_final[f] = 1;

    // Key: state, counter, imbalance per Z-letter pair.
    using Key = std::vector<long>;
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::size_t h = 0;
            for (long x : k) h = h * 1000003u ^ std::hash<long>()(x);
            return h;
        }
    };
    struct Info {
        std::size_t dist;
        long parent;
        int via;
    };
    std::vector<Key> keys;
    std::vector<Info> info;
    std::unordered_map<Key, std::size_t, KeyHash> index;
    std::deque<std::size_t> dq;
    Key start(2 + k, 0);
    start[0] = a.initial;
    index[start] = 0;
    keys.push_back(start);
    info.push_back(Info{0, -1, -1});
    dq.push_back(0);
    std::vector<char> done;
    while (!dq.empty()) {
        std::size_t cur = dq.front();
        dq.pop_front();
        if (done.size() <= cur) done.resize(cur + 1, 0);
        if (done[cur]) continue;
        done[cur] = 1;
        const Key key = keys[cur];
        const std::size_t dist = info[cur].dist;
        bool balanced = true;
        for (int i = 0; i < k; ++i) balanced = balanced && key[2 + i] == 0;
        if (is_final[key[0]] && key[1] == 0 && balanced) {
            OcaWitness w;
            for (long at = static_cast<long>(cur); info[at].parent >= 0; at = info[at].parent) w.run.push_back(info[at].via);
            std::reverse(w.run.begin(), w.run.end());
            for (int t : w.run)
                if (a.transitions[t].letter != kEpsilon) w.word.push_back(a.transitions[t].letter);
            return w;
        }
        for (int t : out[key[0]]) {
            const OcaTransition& tr = a.transitions[t];
            Key nk = key;
            nk[0] = tr.dst;
            if (tr.op == CounterOp::ZeroTest && key[1] != 0) continue;
            if (tr.op == CounterOp::Inc) nk[1] += 1;
            if (tr.op == CounterOp::Dec) nk[1] -= 1;
            if (nk[1] < 0 || nk[1] > cmax) continue;
            std::size_t nd = dist;
            if (tr.letter != kEpsilon) {
                nd += 1;
                if (nd > cap) continue;
                long& imb = nk[2 + tr.letter / 2];
                imb += tr.letter % 2 == 0 ? 1 : -1;
                if (imb > icap || imb < -icap) continue;
            }
            auto it = index.find(nk);
            if (it == index.end()) {
                std::size_t id = keys.size();
                index.emplace(nk, id);
                keys.push_back(nk);
                info.push_back(Info{nd, static_cast<long>(cur), t});
                if (nd == dist) dq.push_front(id);
                else dq.push_back(id);
            } else if (nd < info[it->second].dist) {
                info[it->second] = Info{nd, static_cast<long>(cur), t};
                if (nd == dist) dq.push_front(it->second);
                else dq.push_back(it->second);
            }
        }
    }
    return std::nullopt;
}

std::vector<int> decode_run(const Oca& a, const std::vector<int>& run) {
    std::vector<int> path;
    for (int t : run) {
        const OcaTransition& tr = a.transitions[t];
        if (tr.src < a.base_states && tr.origin >= 0) path.push_back(tr.origin);
    }
    return path;
}

std::string serialize_oca(const Oca& a) {
    std::ostringstream os;
    os << "oca k=" << a.k << "\n";
    os << "states";
    for (const auto& s : a.states) os << " " << s;
    os << "\ninitial " << a.states[a.initial] << "\nfinal";
    for (int f : a.finals) os << " " << a.states[f];
    os << "\n";
    for (const auto& t : a.transitions) {
        os << "trans " << a.states[t.src] << " -> " << a.states[t.dst] << " : " << letter_name(t.letter) << " ";
        switch (t.op) {
            case CounterOp::Inc: os << "+1"; break;
            case CounterOp::Dec: os << "-1"; break;
            case CounterOp::Nop: os << "0"; break;
            case CounterOp::ZeroTest: os << "z"; break;
        }
        if (t.origin >= 0) os << " # " << t.origin;
        os << "\n";
    }
    return os.str();
}

Oca parse_oca(const std::string& text) {
    Oca a;
    std::unordered_map<std::string, int> ids;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto state = [&](const std::string& n) {
        auto it = ids.find(n);
        if (it == ids.end()) throw ParseError(lineno, 1, "unknown state '" + n + "'");
        return it->second;
    };
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        int origin = -1;
        auto hash = line.find('#');
        if (hash != std::string::npos) {
            std::istringstream c(line.substr(hash + 1));
            c >> origin;
            if (c.fail()) origin = -1;
            line = line.substr(0, hash);
        }
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw)) continue;
        if (kw == "oca") {
            std::string kk;
            ls >> kk;
            if (kk.rfind("k=", 0) != 0) throw ParseError(lineno, 5, "expected k=<int>");
            a.k = std::stoi(kk.substr(2));
            header = true;
        } else if (!header) {
            throw ParseError(lineno, 1, "missing 'oca k=' header");
        } else if (kw == "states") {
            std::string s;
            while (ls >> s) ids[s] = a.add_state(s);
            a.base_states = static_cast<int>(a.states.size());
        } else if (kw == "initial") {
            std::string s;
            ls >> s;
            a.initial = state(s);
        } else if (kw == "final") {
            std::string s;
            while (ls >> s) a.finals.push_back(state(s));
        } else if (kw == "trans") {
            std::string p, arrow, q, colon, let, op;
            ls >> p >> arrow >> q >> colon >> let >> op;
            if (arrow != "->" || colon != ":" || op.empty()) throw ParseError(lineno, 1, "malformed transition");
            OcaTransition t;
            t.src = state(p);
            t.dst = state(q);
            t.origin = origin;
            if (let == "eps") {
                t.letter = kEpsilon;
            } else {
                if (let.size() < 2 || (let[0] != 'a' && let[0] != 'b')) throw ParseError(lineno, 1, "bad letter '" + let + "'");
                int i = std::stoi(let.substr(1));
                if (i < 1 || i > a.k) throw ParseError(lineno, 1, "letter outside the alphabet");
                t.letter = 2 * (i - 1) + (let[0] == 'b');
            }
            if (op == "+1") t.op = CounterOp::Inc;
            else if (op == "-1") t.op = CounterOp::Dec;
            else if (op == "0") t.op = CounterOp::Nop;
            else if (op == "z") t.op = CounterOp::ZeroTest;
            else throw ParseError(lineno, 1, "bad counter operation '" + op + "'");
            a.transitions.push_back(t);
        } else {
            throw ParseError(lineno, 1, "unknown keyword '" + kw + "'");
        }
    }
    return a;
}

}  // namespace zvass
