#include "zvass/core.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace zvass {

int ZVass::add_state(const std::string& name) {
    auto it = state_index_.find(name);
    if (it != state_index_.end()) return it->second;
    int id = static_cast<int>(states_.size());
    states_.push_back(name);
    state_index_.emplace(name, id);
    return id;
}

int ZVass::state_id(const std::string& name) const {
    auto it = state_index_.find(name);
    return it == state_index_.end() ? -1 : it->second;
}

int ZVass::add_transition(Transition t) {
    if (static_cast<int>(t.update.size()) != layout_.dim())
        throw ZvassError("update arity mismatch in transition " + t.name);
    if (t.src < 0 || t.src >= num_states() || t.dst < 0 || t.dst >= num_states())
        throw ZvassError("transition " + t.name + " references unknown state");
    if (t.ztest) {
        if (*t.ztest < 0 || *t.ztest >= layout_.d)
            throw ZvassError("zero-test index out of range in transition " + t.name);
        if (!is_zero(t.update))
            throw ZvassError("zero-test transition " + t.name + " must have zero update");
    }
    if (t.name.empty()) t.name = "t" + std::to_string(transitions_.size());
    transitions_.push_back(std::move(t));
    return num_transitions() - 1;
}

int ZVass::add_transition(int src, Vec update, int dst, std::string name) {
    Transition t;
    t.name = std::move(name);
    t.src = src;
    t.dst = dst;
    t.update = std::move(update);
    return add_transition(std::move(t));
}

int ZVass::add_ztest(int src, int counter, int dst, std::string name) {
    Transition t;
    t.name = std::move(name);
    t.src = src;
    t.dst = dst;
    t.update = zero_vec(layout_.dim());
    t.ztest = counter;
    return add_transition(std::move(t));
}

int ZVass::add_counter_int(const Int& fill) {
    for (auto& t : transitions_) t.update.push_back(t.ztest ? Int(0) : fill);
    layout_.k += 1;
    return layout_.dim() - 1;
}

int ZVass::transition_id(const std::string& name) const {
    for (int i = 0; i < num_transitions(); ++i)
        if (transitions_[i].name == name) return i;
    return -1;
}

Int ZVass::unary_size() const {
    Int s = num_states();
    for (const auto& t : transitions_)
        for (const auto& v : t.update) s += abs(v);
    return s;
}

double ZVass::binary_size() const {
    double s = num_states();
    for (const auto& t : transitions_) {
        Int n = 0;
        for (const auto& v : t.update) n += abs(v);
        s += std::log2(static_cast<double>(n + 1)) + 1.0;
    }
    return s;
}

Int ZVass::max_norm() const {
    Int m = 0;
    for (const auto& t : transitions_)
        for (const auto& v : t.update)
            if (abs(v) > m) m = abs(v);
    return m;
}

bool ZVass::has_ztests() const {
    for (const auto& t : transitions_)
        if (t.ztest) return true;
    return false;
}

void ZVass::validate() const {
    if (layout_.d < 0 || layout_.k < 0 || layout_.dim() < 1)
        throw ZvassError("invalid layout");
    for (const auto& t : transitions_)
        if (static_cast<int>(t.update.size()) != layout_.dim())
            throw ZvassError("update arity mismatch in transition " + t.name);
}

const char* fault_name(Fault f) {
    switch (f) {
        case Fault::None: return "None";
        case Fault::NNegViolation: return "NNegViolation";
        case Fault::ZeroTestFailed: return "ZeroTestFailed";
        case Fault::WrongState: return "WrongState";
        case Fault::UnknownTransition: return "UnknownTransition";
    }
    return "?";
}

ParseError::ParseError(int l, int c, const std::string& msg)
    : ZvassError("line " + std::to_string(l) + ", column " + std::to_string(c) + ": " + msg),
      line(l),
      column(c) {}

Fault fire(const ZVass& sys, const Configuration& c, int t, Configuration& out) {
    if (t < 0 || t >= sys.num_transitions()) return Fault::UnknownTransition;
    const Transition& tr = sys.transition(t);
    if (c.state != tr.src) return Fault::WrongState;
    const int d = sys.layout().d;
    if (tr.ztest && c.values[*tr.ztest] != 0) return Fault::ZeroTestFailed;
    Configuration next{tr.dst, c.values};
    for (int i = 0; i < sys.layout().dim(); ++i) {
        next.values[i] += tr.update[i];
        if (i < d && next.values[i] < 0) return Fault::NNegViolation;
    }
    out = std::move(next);
    return Fault::None;
}

Vec effect(const ZVass& sys, const std::vector<int>& path) {
    Vec e = zero_vec(sys.layout().dim());
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (path[i] < 0 || path[i] >= sys.num_transitions())
            throw ZvassError("unknown transition in path");
        const Transition& t = sys.transition(path[i]);
        if (i > 0 && sys.transition(path[i - 1]).dst != t.src)
            throw ZvassError("BrokenChain at step " + std::to_string(i));
        for (int j = 0; j < sys.layout().dim(); ++j) e[j] += t.update[j];
    }
    return e;
}

ReplayResult replay(const ZVass& sys, const Configuration& start, const std::vector<int>& path, bool keep) {
    ReplayResult r;
    r.trace.configs.push_back(start);
    if (!keep) r.trace.configs.push_back(start);
    for (std::size_t i = 0; i < path.size(); ++i) {
        Configuration next;
        Fault f = fire(sys, r.trace.configs.back(), path[i], next);
        if (f != Fault::None) {
            r.fault = f;
            r.step = i;
            return r;
        }
        if (keep) {
            r.trace.configs.push_back(std::move(next));
            r.trace.path.push_back(path[i]);
        } else {
            r.trace.configs.back() = std::move(next);
        }
    }
    return r;
}

bool config_valid(const Layout& l, const Configuration& c) {
    if (static_cast<int>(c.values.size()) != l.dim()) return false;
    for (int i = 0; i < l.d; ++i)
        if (c.values[i] < 0) return false;
    return true;
}

Vec zero_vec(int n) { return Vec(static_cast<std::size_t>(n), Int(0)); }

Vec add(const Vec& a, const Vec& b) {
    Vec r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
    return r;
}

Vec sub(const Vec& a, const Vec& b) {
    Vec r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    return r;
}

Vec scale(const Vec& a, const Int& s) {
    Vec r = a;
    for (auto& x : r) x *= s;
    return r;
}

bool is_zero(const Vec& v) {
    for (const auto& x : v)
        if (x != 0) return false;
    return true;
}

std::string vec_to_string(const Vec& v) {
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += v[i].str();
    }
    return s + ")";
}

std::string format_config(const ZVass& sys, const Configuration& c) {
    std::string s = sys.state_name(c.state) + "(";
    const int d = sys.layout().d;
    for (std::size_t i = 0; i < c.values.size(); ++i) {
        if (i) s += (static_cast<int>(i) == d) ? ";" : ",";
        s += c.values[i].str();
    }
    if (d == static_cast<int>(c.values.size()) && d > 0) s += ";";
    return s + ")";
}

namespace {

struct Token {
    std::string text;
    int col;
};

std::vector<Token> tokenize(const std::string& line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        char ch = line[i];
        if (ch == '#') break;
        if (std::isspace(static_cast<unsigned char>(ch))) {
            ++i;
            continue;
        }
        if (ch == ':' || ch == ';') {
            out.push_back({std::string(1, ch), static_cast<int>(i) + 1});
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) && line[j] != ':' &&
               line[j] != ';' && line[j] != '#')
            ++j;
        out.push_back({line.substr(i, j - i), static_cast<int>(i) + 1});
        i = j;
    }
    return out;
}

Int parse_int(const Token& t, int line) {
    const std::string& s = t.text;
    std::size_t p = (s.size() > 1 && (s[0] == '-' || s[0] == '+')) ? 1 : 0;
    if (p >= s.size()) throw ParseError(line, t.col, "expected integer, got '" + s + "'");
    for (std::size_t i = p; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i])))
            throw ParseError(line, t.col, "expected integer, got '" + s + "'");
    return Int(s[0] == '+' ? s.substr(1) : s);
}

int parse_header_field(const Token& t, const std::string& key, int line) {
    if (t.text.rfind(key + "=", 0) != 0) throw ParseError(line, t.col, "expected " + key + "=<int>");
    Token v{t.text.substr(key.size() + 1), t.col + static_cast<int>(key.size()) + 1};
    Int x = parse_int(v, line);
    if (x < 0 || x > 100000) throw ParseError(line, v.col, key + " out of range");
    return static_cast<int>(x);
}

// Parses "<naturals> ; <integers>" starting at tokens[pos]. The owner name is used in errors.
Vec parse_vector(const std::vector<Token>& toks, std::size_t pos, const Layout& l, int line,
                 const std::string& owner, bool check_nat) {
    std::vector<Int> nat, zs;
    bool after_semi = false;
    for (std::size_t i = pos; i < toks.size(); ++i) {
        if (toks[i].text == ";") {
            if (after_semi) throw ParseError(line, toks[i].col, "duplicate ';'");
            after_semi = true;
            continue;
        }
        Int v = parse_int(toks[i], line);
        if (!after_semi) {
            if (check_nat && v < 0) throw ParseError(line, toks[i].col, "negative natural in " + owner);
            nat.push_back(v);
        } else {
            zs.push_back(v);
        }
    }
    if (!after_semi && l.k == 0) after_semi = true;
    int col = toks.empty() ? 1 : toks[pos < toks.size() ? pos : toks.size() - 1].col;
    if (static_cast<int>(nat.size()) != l.d || static_cast<int>(zs.size()) != l.k)
        throw ParseError(line, col,
                         "arity mismatch in " + owner + ": expected " + std::to_string(l.d) + " ; " +
                             std::to_string(l.k) + " values");
    Vec out = nat;
    out.insert(out.end(), zs.begin(), zs.end());
    return out;
}

}  // namespace

ReachQuery parse_instance(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    bool have_header = false;
    Layout layout;
    ReachQuery q;
    bool have_init = false, have_target = false;
    struct Pending {
        std::string name;
        std::string src, dst;
        int line;
        int col;
        std::vector<Token> toks;
        bool ztest;
    };
    std::vector<Pending> pending;
    struct PendingCfg {
        std::string state;
        int line, col;
        Vec values;
    };
    PendingCfg init_cfg, target_cfg;
    std::vector<std::string> state_names;

    while (std::getline(in, raw)) {
        ++lineno;
        auto toks = tokenize(raw);
        if (toks.empty()) continue;
        const std::string& kw = toks[0].text;
        if (!have_header) {
            if (kw != "zvass" || toks.size() != 3) throw ParseError(lineno, toks[0].col, "expected 'zvass d=<int> k=<int>'");
            layout.d = parse_header_field(toks[1], "d", lineno);
            layout.k = parse_header_field(toks[2], "k", lineno);
            if (layout.dim() < 1) throw ParseError(lineno, toks[1].col, "d + k must be at least 1");
            q.system = ZVass(layout);
            have_header = true;
            continue;
        }
        if (kw == "encoding") {
            if (toks.size() != 2 || (toks[1].text != "unary" && toks[1].text != "binary"))
                throw ParseError(lineno, toks[0].col, "expected 'encoding unary|binary'");
            q.system.encoding = toks[1].text == "unary" ? Encoding::Unary : Encoding::Binary;
        } else if (kw == "states") {
            for (std::size_t i = 1; i < toks.size(); ++i) {
                if (q.system.state_id(toks[i].text) >= 0) throw ParseError(lineno, toks[i].col, "duplicate state " + toks[i].text);
                q.system.add_state(toks[i].text);
            }
        } else if (kw == "init" || kw == "target") {
            if (toks.size() < 3 || toks[2].text != ":") throw ParseError(lineno, toks[0].col, "expected '" + kw + " <state> : ...'");
            PendingCfg c{toks[1].text, lineno, toks[1].col, parse_vector(toks, 3, layout, lineno, kw, true)};
            if (kw == "init") {
                if (have_init) throw ParseError(lineno, toks[0].col, "duplicate init");
                init_cfg = c;
                have_init = true;
            } else {
                if (have_target) throw ParseError(lineno, toks[0].col, "duplicate target");
                target_cfg = c;
                have_target = true;
            }
        } else if (kw == "trans" || kw == "ztest") {
            if (toks.size() < 6 || toks[3].text != "->" || toks[5].text != ":")
                throw ParseError(lineno, toks[0].col, "expected '" + kw + " <name> <src> -> <dst> : ...'");
            pending.push_back({toks[1].text, toks[2].text, toks[4].text, lineno, toks[2].col, toks, kw == "ztest"});
        } else {
            throw ParseError(lineno, toks[0].col, "unknown keyword '" + kw + "'");
        }
    }
    if (!have_header) throw ParseError(lineno + 1, 1, "missing header");
    for (const auto& p : pending) {
        int s = q.system.state_id(p.src), t = q.system.state_id(p.dst);
        if (s < 0) throw ParseError(p.line, p.col, "unknown state " + p.src + " in transition " + p.name);
        if (t < 0) throw ParseError(p.line, p.toks[4].col, "unknown state " + p.dst + " in transition " + p.name);
        if (q.system.transition_id(p.name) >= 0) throw ParseError(p.line, p.toks[1].col, "duplicate transition " + p.name);
        if (p.ztest) {
            if (p.toks.size() != 7) throw ParseError(p.line, p.toks[0].col, "ztest " + p.name + " expects one counter index");
            Int idx = parse_int(p.toks[6], p.line);
            if (idx < 1 || idx > layout.d) throw ParseError(p.line, p.toks[6].col, "zero-test index out of range in " + p.name);
            q.system.add_ztest(s, static_cast<int>(idx) - 1, t, p.name);
        } else {
            Vec u = parse_vector(p.toks, 6, layout, p.line, "transition " + p.name, false);
            q.system.add_transition(s, std::move(u), t, p.name);
        }
    }
    auto resolve = [&](const PendingCfg& c, bool present, const char* what) {
        if (!present) throw ParseError(lineno + 1, 1, std::string("missing ") + what);
        int s = q.system.state_id(c.state);
        if (s < 0) throw ParseError(c.line, c.col, "unknown state " + c.state);
        return Configuration{s, c.values};
    };
    q.source = resolve(init_cfg, have_init, "init");
    q.target = resolve(target_cfg, have_target, "target");
    return q;
}

namespace {
std::string cfg_line(const ZVass& sys, const Vec& v) {
    std::string s;
    const int d = sys.layout().d;
    for (int i = 0; i < d; ++i) s += " " + v[i].str();
    s += " ;";
    for (int i = d; i < sys.layout().dim(); ++i) s += " " + v[i].str();
    return s;
}
}  // namespace

std::string serialize_instance(const ReachQuery& q) {
    const ZVass& sys = q.system;
    std::ostringstream o;
    o << "zvass d=" << sys.layout().d << " k=" << sys.layout().k << "\n";
    if (sys.encoding == Encoding::Binary) o << "encoding binary\n";
    o << "states";
    for (const auto& s : sys.states()) o << " " << s;
    o << "\n";
    o << "init " << sys.state_name(q.source.state) << " :" << cfg_line(sys, q.source.values) << "\n";
    o << "target " << sys.state_name(q.target.state) << " :" << cfg_line(sys, q.target.values) << "\n";
    for (const auto& t : sys.transitions()) {
        if (t.ztest)
            o << "ztest " << t.name << " " << sys.state_name(t.src) << " -> " << sys.state_name(t.dst) << " : "
              << (*t.ztest + 1) << "\n";
        else
            o << "trans " << t.name << " " << sys.state_name(t.src) << " -> " << sys.state_name(t.dst) << " :"
              << cfg_line(sys, t.update) << "\n";
    }
    return o.str();
}

ReachQuery load_instance(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ZvassError("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_instance(ss.str());
}

}  // namespace zvass
