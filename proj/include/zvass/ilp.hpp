#pragma once

#include "zvass/core.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace zvass {

enum class Rel { Eq, Le, Ge };

struct Row {
    std::vector<std::pair<int, Int>> terms;  // (variable, coefficient)
    Rel rel = Rel::Eq;
    Int rhs = 0;
};

// Variables are nonnegative integers; upper[v], when set, bounds v from above.
struct IlpSystem {
    std::vector<std::string> names;
    std::vector<Row> rows;
    std::vector<std::optional<Int>> upper;

    int add_var(std::string name, std::optional<Int> ub = std::nullopt);
    int num_vars() const { return static_cast<int>(names.size()); }
    bool satisfied_by(const Vec& x) const;
};

enum class IlpStatus { Feasible, Infeasible, Unknown };

struct IlpOptions {
    std::optional<Vec> minimize;  // nonnegative integer cost vector
    std::size_t node_cap = 20000;
};

struct IlpResult {
    IlpStatus status = IlpStatus::Unknown;
    Vec solution;
    bool optimal = false;  // only meaningful with an objective
    std::size_t nodes = 0;
};

IlpResult ilp_solve(const IlpSystem& sys, const IlpOptions& opt = {});

// Rational LP feasibility of the relaxation with extra rows; returns a vertex when feasible.
std::optional<std::vector<Rat>> lp_feasible(const IlpSystem& sys, const std::vector<Row>& extra = {});

// Homogeneous cone of sys: rhs zeroed, bounded variables forced to 0.
IlpSystem homogeneous(const IlpSystem& sys);

// Integer h in the homogeneous cone with h[var] >= 1, if any.
std::optional<Vec> homogeneous_ray(const IlpSystem& sys, int var);

enum class Tri { No, Yes, Unknown };

Tri ilp_var_unbounded(const IlpSystem& sys, int var);

struct ValueSet {
    std::vector<Int> values;
    bool cap_exceeded = false;
    bool unknown = false;  // some probe hit the node cap
};

ValueSet ilp_bounded_values(const IlpSystem& sys, int var, const Int& cap);

std::string format_ilp(const IlpSystem& sys);

}  // namespace zvass
