#pragma once

#include <string>

#include "bfav/milp.hpp"

namespace bfav {

/// CPLEX-LP text: empty Minimize objective, then Subject To / Bounds /
/// Binary / End. Variable order and naming are deterministic; coefficients
/// are printed with 17 significant digits so doubles round-trip exactly.
std::string lp_text(const MilpModel& model);

void export_lp(const MilpModel& model, const std::string& path);

/// Parses the dialect lp_text emits (one constraint per line).
MilpModel parse_lp_text(const std::string& text);

MilpModel import_lp(const std::string& path);

}  // namespace bfav
