#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace zvass {

using Int = boost::multiprecision::mpz_int;
using Rat = boost::multiprecision::mpq_rational;
using Vec = std::vector<Int>;

struct Layout {
    int d = 0;
    int k = 0;
    int dim() const { return d + k; }
};

enum class Encoding { Unary, Binary };

struct Transition {
    std::string name;
    int src = 0;
    int dst = 0;
    Vec update;
    std::optional<int> ztest;  // 0-based index of a tested N-counter
};

struct Configuration {
    int state = 0;
    Vec values;  // first d entries are naturals, then k integers

    bool operator==(const Configuration&) const = default;
};

struct Trace {
    std::vector<Configuration> configs;
    std::vector<int> path;
};

class ZVass {
public:
    ZVass() = default;
    explicit ZVass(Layout layout) : layout_(layout) {}

    int add_state(const std::string& name);
    int state_id(const std::string& name) const;  // -1 if unknown
    int add_transition(Transition t);
    int add_transition(int src, Vec update, int dst, std::string name = {});
    int add_ztest(int src, int counter, int dst, std::string name = {});
    int add_counter_int(const Int& fill = 0);  // appends a Z-counter, padding updates

    const Layout& layout() const { return layout_; }
    int num_states() const { return static_cast<int>(states_.size()); }
    int num_transitions() const { return static_cast<int>(transitions_.size()); }
    const std::string& state_name(int s) const { return states_.at(s); }
    const std::vector<std::string>& states() const { return states_; }
    const Transition& transition(int t) const { return transitions_.at(t); }
    const std::vector<Transition>& transitions() const { return transitions_; }
    int transition_id(const std::string& name) const;

    Encoding encoding = Encoding::Unary;

    Int unary_size() const;
    double binary_size() const;
    Int max_norm() const;  // max infinity norm of an update
    bool has_ztests() const;

    void validate() const;

private:
    Layout layout_;
    std::vector<std::string> states_;
    std::unordered_map<std::string, int> state_index_;
    std::vector<Transition> transitions_;
};

struct ReachQuery {
    ZVass system;
    Configuration source;
    Configuration target;
};

enum class Fault { None, NNegViolation, ZeroTestFailed, WrongState, UnknownTransition };

const char* fault_name(Fault f);

class ZvassError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public ZvassError {
public:
    ParseError(int line, int column, const std::string& msg);
    int line;
    int column;
};

Fault fire(const ZVass& sys, const Configuration& c, int t, Configuration& out);

// Throws ZvassError("BrokenChain ...") when consecutive transitions do not chain.
Vec effect(const ZVass& sys, const std::vector<int>& path);

struct ReplayResult {
    Trace trace;
    Fault fault = Fault::None;
    std::size_t step = 0;  // index of the failing transition in the path
    bool ok() const { return fault == Fault::None; }
};

// keep=false stores only the start and the last configuration reached.
ReplayResult replay(const ZVass& sys, const Configuration& start, const std::vector<int>& path, bool keep = true);

bool config_valid(const Layout& l, const Configuration& c);

ReachQuery parse_instance(const std::string& text);
std::string serialize_instance(const ReachQuery& q);
ReachQuery load_instance(const std::string& path);

std::string format_config(const ZVass& sys, const Configuration& c);
std::string vec_to_string(const Vec& v);

Vec zero_vec(int n);
Vec add(const Vec& a, const Vec& b);
Vec sub(const Vec& a, const Vec& b);
Vec scale(const Vec& a, const Int& s);
bool is_zero(const Vec& v);

}  // namespace zvass
