#pragma once

#include <vector>

#include "bfav/sympoly.hpp"

namespace bfav {

enum class ParamStatus { kSafe, kUnknown };

/// Outcome of the per-parameter reachability analysis. The proved and
/// unresolved interval lists partition the parameter's flip candidates;
/// sub-intervals skipped after an early Unknown count as unresolved.
struct ParamVerdict {
    ParamId param;
    ParamStatus status = ParamStatus::kUnknown;
    int analyzer_calls = 0;
    std::vector<ParamInterval> proved_subintervals;
    std::vector<ParamInterval> unresolved_subintervals;
};

struct RaOptions {
    bool use_binary_search = true;           // false: hull-only variant
    const ParamRemapTable* remap = nullptr;  // set for lowered conv networks
    FpSlack slack;
};

struct BinaryRaStats {
    int analyzer_calls = 0;
    std::vector<ParamInterval> proved;
    std::vector<ParamInterval> unresolved;
};

/// Recursive interval analysis: prove the hull, or split the candidate list
/// at the value midpoint and recurse, lower half first, stopping at the
/// first Unknown.
CheckResult binary_ra(const QuantizedNetwork& net, const InputRegion& region, int g,
                      const ParamId& param, const ParamInterval& interval,
                      BinaryRaStats* stats = nullptr, const RaOptions& opts = RaOptions{});

/// Sign-split reachability analysis for one parameter under up-to-n bit
/// flips. Both sides always run so the MILP stage sees per-side refinement.
ParamVerdict bfa_ra(const QuantizedNetwork& net, const InputRegion& region, int g,
                    const ParamId& param, int n_bits, const RaOptions& opts = RaOptions{});

/// Baseline: one plain DeepPoly run per flipped value, no interval
/// reasoning. analyzer_calls is exactly the flip count.
ParamVerdict naive_check(const QuantizedNetwork& net, const InputRegion& region, int g,
                         const ParamId& param, int n_bits, const RaOptions& opts = RaOptions{});

}  // namespace bfav
