#pragma once

#include "zvass/core.hpp"

#include <vector>

namespace zvass {

using RatVec = std::vector<Rat>;
using RatMat = std::vector<RatVec>;

RatVec to_rat(const Vec& v);

// Reduced row echelon form; zero rows dropped.
RatMat rref(RatMat rows, std::size_t ncols);

std::size_t rank_of(const std::vector<Vec>& rows, std::size_t ncols);

// Basis (in reduced row echelon form) of the span of the given vectors.
RatMat span_basis(const std::vector<Vec>& rows, std::size_t ncols);

bool in_span(const RatMat& basis, const RatVec& v);

// Basis of {x : M x = 0}.
RatMat nullspace(const RatMat& m, std::size_t ncols);

// Scales a rational vector to a primitive integer vector with the same direction.
Vec primitive(const RatVec& v);

// Does A x = b have a solution x in Z^n?  (Hermite normal form by column operations.)
bool lattice_solvable(std::vector<Vec> a, const Vec& b, std::size_t ncols);

}  // namespace zvass
