#pragma once

#include "zvass/core.hpp"
#include "zvass/oracle.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace zvass {

struct Segment {
    bool cycle = false;
    std::vector<int> path;  // transition ids
    Int exp = 1;            // cycles only
};

// rho_0 sigma_1^{x_1} rho_1 ... ; consecutive path segments are allowed.
struct LinearPathScheme {
    std::vector<Segment> segments;

    std::size_t underlying_length() const;
    std::size_t skeleton_size() const;
    std::vector<int> flatten() const;  // expands exponents; for small schemes only
};

enum class LpsError { None, NNegViolation, EndpointMismatch, MalformedScheme };

const char* lps_error_name(LpsError e);

struct LpsCheck {
    LpsError error = LpsError::None;
    std::size_t segment = 0;
    std::size_t step = 0;
    bool last_iteration = false;
    Configuration end;
    std::size_t checks = 0;  // configurations examined
    bool ok() const { return error == LpsError::None; }
    std::string describe() const;
};

LpsCheck validate(const ReachQuery& q, const LinearPathScheme& s);

class InvalidInputRun : public ZvassError {
public:
    using ZvassError::ZvassError;
};

LinearPathScheme compress_run(const ReachQuery& q, const Trace& run);

// Cycle state q_{i+1} where the running N-effect attains its least value; returns the rotated cycle.
std::vector<int> rotate_to_minimum(const ZVass& sys, const std::vector<int>& cycle);

std::size_t reduction_bound(std::size_t dim, const Int& m);

struct Reduction {
    std::vector<std::size_t> chosen;  // indices into X
    Vec counts;
};

Reduction caratheodory_reduce(const std::vector<Vec>& xs, const Vec& counts);

struct Dim1Caps {
    std::size_t skeleton = 8;
    Int xmax = 64;
    std::optional<Bounds> box;  // shared with the oracle: box on every configuration and total length <= lmax
};

struct Dim1Result {
    bool found = false;
    LinearPathScheme scheme;
    std::size_t skeletons = 0;
};

Dim1Result solve_dim1(const ReachQuery& q, const Dim1Caps& caps);

nlohmann::json scheme_to_json(const LinearPathScheme& s);
LinearPathScheme scheme_from_json(const nlohmann::json& j);

}  // namespace zvass
