#pragma once

#include "zvass/core.hpp"
#include "zvass/klmst.hpp"

#include <string>

namespace zvass {

// One node per state, one edge per transition labelled with its update; zero-tests and boundary
// tests are added to the label.
std::string export_dot(const ZVass& sys);
std::string export_dot(const GeneralisedZVass& gv);

}  // namespace zvass
