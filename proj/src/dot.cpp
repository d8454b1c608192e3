#include "zvass/dot.hpp"

#include <sstream>

namespace zvass {

namespace {

std::string quote(const std::string& s) {
    std::string r = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') r += '\\';
        r += c;
    }
    return r + "\"";
}

std::string update_label(const ZVass& sys, const Transition& t) {
    const int d = sys.layout().d;
    std::string s = "(";
    for (std::size_t i = 0; i < t.update.size(); ++i) {
        if (i) s += static_cast<int>(i) == d ? ";" : ",";
        s += t.update[i].str();
    }
    if (d == static_cast<int>(t.update.size()) && d > 0) s += ";";
    s += ")";
    if (t.ztest) s += " x" + std::to_string(*t.ztest + 1) + "=0?";
    return s;
}

void emit(std::ostringstream& o, const ZVass& sys, int t, const std::string& extra) {
    const auto& tr = sys.transition(t);
    o << "  " << quote(sys.state_name(tr.src)) << " -> " << quote(sys.state_name(tr.dst)) << " [label="
      << quote(tr.name + " " + update_label(sys, tr) + extra) << "];\n";
}

}  // namespace

std::string export_dot(const ZVass& sys) {
    std::ostringstream o;
    o << "digraph zvass {\n  rankdir=LR;\n";
    for (const auto& s : sys.states()) o << "  " << quote(s) << ";\n";
    for (int t = 0; t < sys.num_transitions(); ++t) emit(o, sys, t, "");
    o << "}\n";
    return o.str();
}

std::string export_dot(const GeneralisedZVass& gv) {
    const ZVass& sys = gv.system;
    std::ostringstream o;
    o << "digraph zvass {\n  rankdir=LR;\n";
    for (std::size_t i = 0; i < gv.components.size(); ++i) {
        const auto& c = gv.components[i];
        o << "  subgraph cluster_" << i << " {\n    label=\"V" << i << "\";\n";
        for (int s : c.states) o << "    " << quote(sys.state_name(s)) << ";\n";
        o << "  }\n";
        for (int t : c.transitions) emit(o, sys, t, "");
    }
    for (const auto& b : gv.boundaries) emit(o, sys, b.transition, " [" + format_omega(b.test) + "]");
    o << "}\n";
    return o.str();
}

}  // namespace zvass
