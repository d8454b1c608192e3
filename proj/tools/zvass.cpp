#include "zvass/core.hpp"
#include "zvass/ctrprog.hpp"
#include "zvass/dot.hpp"
#include "zvass/klmst.hpp"
#include "zvass/lps.hpp"
#include "zvass/oracle.hpp"
#include "zvass/parikh.hpp"
#include "zvass/reductions.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

using namespace zvass;
using json = nlohmann::json;

namespace {

constexpr int kOk = 0, kError = 1, kUnknown = 2;

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ZvassError("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw ZvassError("cannot write " + path);
    f << text;
}

int emit(const json& j, int code) {
    std::cout << j.dump(2) << "\n";
    return code;
}

json names(const ZVass& sys, const std::vector<int>& path) {
    json a = json::array();
    for (int t : path) a.push_back(sys.transition(t).name);
    return a;
}

json trace_json(const ZVass& sys, const Trace& t) {
    json c = json::array();
    for (const auto& x : t.configs) c.push_back(format_config(sys, x));
    return {{"path", names(sys, t.path)}, {"configs", c}, {"length", t.path.size()}};
}

struct BoundOpts {
    long nmax = 8, zabs = 16;
    std::size_t lmax = 64;

    void add(CLI::App* app) {
        app->add_option("--nmax", nmax, "largest natural counter value")->capture_default_str();
        app->add_option("--zabs", zabs, "largest absolute integer counter value")->capture_default_str();
        app->add_option("--lmax", lmax, "longest run")->capture_default_str();
    }
    Bounds get() const { return Bounds{nmax, zabs, lmax}; }
    json to_json() const { return {{"nmax", nmax}, {"zabs", zabs}, {"lmax", lmax}}; }
};

std::vector<int> parse_path(const ZVass& sys, const std::string& text) {
    std::vector<int> path;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        int t = sys.transition_id(item);
        if (t < 0) throw ZvassError("unknown transition " + item);
        path.push_back(t);
    }
    return path;
}

std::map<std::string, Int> parse_assignments(const std::vector<std::string>& items) {
    std::map<std::string, Int> out;
    for (const auto& s : items) {
        auto eq = s.find('=');
        if (eq == std::string::npos) throw ZvassError("expected name=value, got " + s);
        out[s.substr(0, eq)] = Int(s.substr(eq + 1));
    }
    return out;
}

std::vector<long> parse_longs(const std::string& text) {
    std::vector<long> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stol(item));
    return out;
}

void apply_caps(KlmstCaps& caps, const std::vector<std::string>& items) {
    for (const auto& [key, value] : parse_assignments(items)) {
        auto sz = [&] { return static_cast<std::size_t>(value.convert_to<unsigned long>()); };
        if (key == "value_cap") caps.value_cap = value;
        else if (key == "word_len") caps.word_len = sz();
        else if (key == "words") caps.words = sz();
        else if (key == "children") caps.children = sz();
        else if (key == "pump_len") caps.pump_len = sz();
        else if (key == "pump_slack") caps.pump_slack = value;
        else if (key == "km_nodes") caps.km_nodes = sz();
        else if (key == "counter_cap") caps.counter_cap = value;
        else if (key == "mcap") caps.mcap = sz();
        else if (key == "nodes") caps.nodes = sz();
        else if (key == "depth") caps.depth = sz();
        else throw ZvassError("unknown cap " + key);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reachability toolkit for VASS with integer counters"};
    app.require_subcommand(1);
    std::function<int()> action;

    std::string file;
    BoundOpts bounds;

    auto* reach = app.add_subcommand("reach", "bounded reachability with a witness run");
    reach->add_option("file", file, "instance (.zvass or .gzvass)")->required();
    bounds.add(reach);
    bool no_prune = false;
    reach->add_flag("--no-prune", no_prune, "disable target-directed pruning");
    reach->callback([&] {
        action = [&] {
            std::string text = read_file(file);
            json j{{"schema", "zvass.reach/1"}, {"bounds", bounds.to_json()}};
            OracleAnswer a;
            const ZVass* sys = nullptr;
            GQuery g;
            ReachQuery q;
            if (looks_generalised(text)) {
                g = parse_generalised(text);
                a = oracle_reach(g, bounds.get());
                sys = &g.gv.system;
            } else {
                q = parse_instance(text);
                a = bounded_reach(q, bounds.get(), !no_prune);
                sys = &q.system;
            }
            j["verdict"] = a.reachable ? "Reachable" : "NotWithinBounds";
            j["explored"] = a.explored;
            if (a.trace) j["trace"] = trace_json(*sys, *a.trace);
            return emit(j, a.reachable ? kOk : kUnknown);
        };
    });

    auto* rset = app.add_subcommand("reach-set", "configurations reachable inside the bounds");
    rset->add_option("file", file, "instance")->required();
    bounds.add(rset);
    rset->callback([&] {
        action = [&] {
            ReachQuery q = load_instance(file);
            auto configs = reach_set(q.system, q.source, bounds.get());
            std::vector<std::string> out;
            for (const auto& c : configs) out.push_back(format_config(q.system, c));
            std::sort(out.begin(), out.end());
            return emit({{"schema", "zvass.reach-set/1"}, {"bounds", bounds.to_json()}, {"count", out.size()},
                         {"configurations", out}},
                        kOk);
        };
    });

    std::string scheme_file;
    auto* lpsv = app.add_subcommand("lps-validate", "check a linear path scheme against an instance");
    lpsv->add_option("file", file, "instance")->required();
    lpsv->add_option("scheme", scheme_file, "scheme JSON")->required();
    lpsv->callback([&] {
        action = [&] {
            ReachQuery q = load_instance(file);
            LinearPathScheme s = scheme_from_json(json::parse(read_file(scheme_file)));
            LpsCheck c = validate(q, s);
            bool ok = c.error == LpsError::None;
            json j{{"schema", "zvass.lps-check/1"}, {"valid", ok}, {"error", lps_error_name(c.error)},
                   {"checks", c.checks}};
            if (!ok) {
                j["segment"] = c.segment;
                j["step"] = c.step;
                j["last_iteration"] = c.last_iteration;
            }
            j["end"] = format_config(q.system, c.end);
            return emit(j, ok ? kOk : kError);
        };
    });

    std::string path_text;
    auto* lpsc = app.add_subcommand("lps-compress", "compress a run into a linear path scheme");
    lpsc->add_option("file", file, "instance")->required();
    lpsc->add_option("--path", path_text, "comma-separated transition names; the oracle finds a run if absent");
    bounds.add(lpsc);
    lpsc->callback([&] {
        action = [&] {
            ReachQuery q = load_instance(file);
            Trace run;
            if (path_text.empty()) {
                OracleAnswer a = bounded_reach(q, bounds.get());
                if (!a.reachable)
                    return emit({{"schema", "zvass.lps/1"}, {"verdict", "NotWithinBounds"}, {"bounds", bounds.to_json()}},
                                kUnknown);
                run = *a.trace;
            } else {
                ReplayResult r = replay(q.system, q.source, parse_path(q.system, path_text));
                if (!r.ok()) throw ZvassError(std::string("run does not replay: ") + fault_name(r.fault));
                run = r.trace;
            }
            LinearPathScheme s = compress_run(q, run);
            return emit({{"schema", "zvass.lps/1"}, {"run_length", run.path.size()}, {"scheme", scheme_to_json(s)}}, kOk);
        };
    });

    Dim1Caps dcaps;
    std::size_t skeleton = 8;
    long xmax = 64;
    bool boxed = false;
    auto* solve1 = app.add_subcommand("solve1", "linear path scheme search for one counter");
    solve1->add_option("file", file, "instance")->required();
    solve1->add_option("--skeleton", skeleton, "skeleton length cap")->capture_default_str();
    solve1->add_option("--xmax", xmax, "exponent cap")->capture_default_str();
    solve1->add_flag("--box", boxed, "restrict runs to the oracle bounds");
    bounds.add(solve1);
    solve1->callback([&] {
        action = [&] {
            ReachQuery q = load_instance(file);
            dcaps.skeleton = skeleton;
            dcaps.xmax = xmax;
            if (boxed) dcaps.box = bounds.get();
            Dim1Result r = solve_dim1(q, dcaps);
            json j{{"schema", "zvass.solve1/1"},
                   {"verdict", r.found ? "Reachable" : "NotWithinCaps"},
                   {"caps", {{"skeleton", skeleton}, {"xmax", xmax}}},
                   {"skeletons", r.skeletons}};
            if (boxed) j["bounds"] = bounds.to_json();
            if (r.found) j["scheme"] = scheme_to_json(r.scheme);
            return emit(j, r.found ? kOk : kUnknown);
        };
    });

    auto* oca = app.add_subcommand("to-oca", "one-counter automaton over the integer-counter alphabet");
    oca->add_option("file", file, "instance")->required();
    oca->callback([&] {
        action = [&] {
            std::cout << serialize_oca(query_to_oca(load_instance(file)));
            return kOk;
        };
    });

    std::size_t witness_cap = 20000;
    auto* bal = app.add_subcommand("balanced-witness", "accepted word with a balanced Parikh image");
    bal->add_option("file", file, "instance")->required();
    bal->add_option("--cap", witness_cap, "search nodes")->capture_default_str();
    bal->callback([&] {
        action = [&] {
            ReachQuery q = load_instance(file);
            Oca a = query_to_oca(q);
            auto w = balanced_witness(a, witness_cap);
            json j{{"schema", "zvass.balanced-witness/1"}, {"cap", witness_cap}, {"found", w.has_value()}};
            if (w) {
                json word = json::array();
                for (int l : w->word) word.push_back(letter_name(l));
                j["word"] = word;
                std::vector<int> run;
                for (int t : decode_run(a, w->run))
                    if (t < q.system.num_transitions()) run.push_back(t);
                j["run"] = names(q.system, run);
            }
            return emit(j, w ? kOk : kUnknown);
        };
    });

    std::string backend = "zvass", out_file;
    std::vector<std::string> inputs, outputs;
    auto* cpc = app.add_subcommand("cp-compile", "compile a counter program");
    cpc->add_option("file", file, "program")->required();
    cpc->add_option("--backend", backend, "zvass or ca")->check(CLI::IsMember({"zvass", "ca"}))->capture_default_str();
    cpc->add_option("--input", inputs, "initial counter value name=value");
    cpc->add_option("--output", outputs, "required final value name=value");
    cpc->add_option("-o,--out", out_file, "write the instance here");
    cpc->callback([&] {
        action = [&] {
            CounterProgram p = parse_program(read_file(file));
            CompiledUnit u = compile(p, backend == "ca" ? Backend::CA : Backend::ZVass);
            ReachQuery q;
            q.system = u.system;
            q.source = u.source(parse_assignments(inputs));
            q.target = {u.exit, zero_vec(u.system.layout().dim())};
            for (const auto& [n, v] : parse_assignments(outputs)) q.target.values[u.counter(n)] = v;
            std::string text = serialize_instance(q);
            if (out_file.empty()) {
                std::cout << text;
                return kOk;
            }
            write_file(out_file, text);
            return emit({{"schema", "zvass.compiled/1"}, {"counters", u.counter_names}, {"states", u.system.num_states()},
                         {"transitions", u.system.num_transitions()}, {"shadows", u.shadows.size()}},
                        kOk);
        };
    });

    std::string gadget;
    long cmax = -1;
    std::vector<std::string> params;
    auto* cpv = app.add_subcommand("cp-verify", "compare a compiled gadget with its closed form");
    cpv->add_option("--gadget", gadget, "gadget name")->required()->check(CLI::IsMember(gadget_names()));
    cpv->add_option("--cmax", cmax, "largest input parameter");
    cpv->add_option("--param", params, "gadget parameter name=value");
    cpv->callback([&] {
        action = [&] {
            std::map<std::string, long> ps;
            for (const auto& [k, v] : parse_assignments(params)) ps[k] = v.convert_to<long>();
            if (cmax >= 0) ps["max"] = cmax;
            GadgetReport r = verify_gadget(gadget_spec(gadget, ps));
            json j{{"schema", "zvass.gadget-report/1"}, {"gadget", r.name},        {"params", ps},
                   {"inputs", r.inputs},                 {"finals", r.finals},     {"lines", r.lines},
                   {"counterexamples", r.counterexamples}, {"ok", r.ok()}};
            return emit(j, r.ok() ? kOk : kError);
        };
    });

    std::string kind, xs_text, ops_text, prefix;
    long target_sum = 0, n = 1, a_base = 2, b_param = 8;
    bool generated = false;
    auto* gen = app.add_subcommand("gen", "generate hardness instances");
    gen->add_option("kind", kind, "subset-sum, ca3, double-exp, amplifier or tower")
        ->required()
        ->check(CLI::IsMember({"subset-sum", "ca3", "double-exp", "amplifier", "tower"}));
    gen->add_option("--xs", xs_text, "subset-sum elements, comma-separated");
    gen->add_option("--t", target_sum, "subset-sum target");
    gen->add_option("--ops", ops_text, "ca3 operations separated by ';' such as 'inc 1;dec 1;zero 1'");
    gen->add_option("--n", n, "size parameter")->capture_default_str();
    gen->add_option("--a", a_base, "double-exp base")->capture_default_str();
    gen->add_option("--b", b_param, "amplifier budget")->capture_default_str();
    gen->add_flag("--generated", generated, "ca3: generate the initial pair instead of preloading it");
    gen->add_option("-o,--out", prefix, "write <prefix>.zvass or <prefix>.cp and <prefix>.json");
    gen->callback([&] {
        action = [&] {
            std::string text, ext = ".zvass";
            json side;
            if (kind == "subset-sum" || kind == "ca3") {
                InstanceBundle b;
                if (kind == "subset-sum") {
                    b = subset_sum_to_izvass(parse_longs(xs_text), target_sum);
                } else {
                    std::vector<std::string> ops;
                    std::stringstream ss(ops_text);
                    std::string op;
                    while (std::getline(ss, op, ';'))
                        if (!op.empty()) ops.push_back(op);
                    b = ca3_to_zvass2(linear_ca(ops), static_cast<int>(n),
                                      generated ? PairSource::Generated : PairSource::Preloaded)
                            .bundle;
                }
                text = serialize_instance(b.query);
                side = b.sidecar();
            } else {
                ext = ".cp";
                CounterProgram p;
                if (kind == "double-exp") {
                    p = double_exp_triple(a_base, n);
                    side = {{"schema", "zvass.program/1"}, {"construction", kind}, {"a", a_base}, {"n", n}};
                } else if (kind == "amplifier") {
                    p = amplifier_step(b_param).program;
                    side = {{"schema", "zvass.program/1"}, {"construction", kind}, {"b", b_param}};
                } else {
                    TowerBundle t = tower_instance(static_cast<int>(n));
                    p = t.program;
                    side = t.interface;
                    side["schema"] = "zvass.program/1";
                }
                text = format_program(p);
            }
            if (prefix.empty()) {
                std::cout << text;
                return kOk;
            }
            write_file(prefix + ext, text);
            write_file(prefix + ".json", side.dump(2) + "\n");
            return emit(side, kOk);
        };
    });

    std::string gname;
    bool sidecar = false;
    auto* gal = app.add_subcommand("gallery", "named instances");
    gal->add_option("name", gname, "instance name; lists the names if absent");
    gal->add_flag("--sidecar", sidecar, "print the JSON sidecar instead of the instance");
    gal->callback([&] {
        action = [&] {
            if (gname.empty()) return emit({{"schema", "zvass.gallery/1"}, {"names", gallery_names()}}, kOk);
            InstanceBundle b = gallery(gname);
            if (sidecar) return emit(b.sidecar(), kOk);
            std::cout << serialize_instance(b.query);
            return kOk;
        };
    });

    KlmstCaps caps;
    std::vector<std::string> cap_items;
    std::string tree_file;
    auto* kl = app.add_subcommand("klmst", "decomposition decider for generalised systems");
    kl->add_option("file", file, "instance (.zvass or .gzvass)")->required();
    kl->add_option("--caps", cap_items, "cap overrides such as nodes=500 value_cap=20");
    kl->add_option("--trace-tree", tree_file, "write the decomposition tree here");
    kl->callback([&] {
        action = [&] {
            apply_caps(caps, cap_items);
            std::string text = read_file(file);
            KlmstResult r;
            const ZVass* sys = nullptr;
            GQuery g;
            ReachQuery q;
            if (looks_generalised(text)) {
                g = parse_generalised(text);
                r = klmst_decide(g, caps);
                sys = &g.gv.system;
            } else {
                q = parse_instance(text);
                r = klmst_decide(q, caps);
                sys = &q.system;
            }
            json j{{"schema", "zvass.klmst/1"},
                   {"verdict", klmst_verdict_name(r.verdict)},
                   {"caps", caps.to_json()},
                   {"caps_hit", r.caps_hit},
                   {"nodes", r.nodes},
                   {"refining_edges", r.refining_edges},
                   {"cleaning_edges", r.cleaning_edges},
                   {"perfect_nodes", r.perfect_nodes}};
            if (r.path) j["path"] = names(*sys, *r.path);
            if (!tree_file.empty())
                write_file(tree_file, json{{"schema", "zvass.klmst-tree/1"}, {"tree", r.tree}}.dump(2) + "\n");
            return emit(j, r.verdict == KlmstVerdict::Unknown ? kUnknown : kOk);
        };
    });

    auto* dot = app.add_subcommand("dot", "Graphviz rendering");
    dot->add_option("file", file, "instance (.zvass or .gzvass)")->required();
    dot->callback([&] {
        action = [&] {
            std::string text = read_file(file);
            std::cout << (looks_generalised(text) ? export_dot(parse_generalised(text).gv)
                                                  : export_dot(parse_instance(text).system));
            return kOk;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kError;
    }
    try {
        return action();
    } catch (const ParseError& e) {
        std::cerr << "zvass: " << file << ":" << e.line << ":" << e.column << ": " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "zvass: " << e.what() << "\n";
    }
    return kError;
}
