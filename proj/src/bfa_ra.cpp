#include "bfav/bfa_ra.hpp"

#include <algorithm>

namespace bfav {

namespace {

SymbolicParamBinding make_binding(const ParamId& param, double lo, double hi,
                                  const RaOptions& opts) {
    if (opts.remap) return SymbolicParamBinding::aliased(*opts.remap, param, lo, hi);
    return SymbolicParamBinding::single(param, lo, hi);
}

ParamInterval sub_interval(const ParamInterval& iv, size_t begin, size_t end) {
    ParamInterval out;
    out.candidates.assign(iv.candidates.begin() + static_cast<long>(begin),
                          iv.candidates.begin() + static_cast<long>(end));
    out.int_candidates.assign(iv.int_candidates.begin() + static_cast<long>(begin),
                              iv.int_candidates.begin() + static_cast<long>(end));
    out.lo = out.candidates.front();
    out.hi = out.candidates.back();
    return out;
}

/// The parameter's stored integer value, resolved through the alias table
/// when the network is a lowered convolution.
int32_t param_value(const QuantizedNetwork& net, const ParamId& param, const RaOptions& opts) {
    ParamId addr = opts.remap ? opts.remap->of(param).front() : param;
    return net.int_param(addr);
}

}  // namespace

CheckResult binary_ra(const QuantizedNetwork& net, const InputRegion& region, int g,
                      const ParamId& param, const ParamInterval& interval, BinaryRaStats* stats,
                      const RaOptions& opts) {
    BinaryRaStats local;
    BinaryRaStats& st = stats ? *stats : local;

    ++st.analyzer_calls;
    CheckResult hull = analyze(net, region, g, make_binding(param, interval.lo, interval.hi, opts),
                               opts.slack)
                           .result;
    if (hull == CheckResult::kProved) {
        st.proved.push_back(interval);
        return CheckResult::kProved;
    }
    if (interval.is_point() || !opts.use_binary_search) {
        st.unresolved.push_back(interval);
        return CheckResult::kUnknown;
    }

    // Split the sorted candidates at the hull midpoint; both halves are
    // non-empty because the hull endpoints are candidates.
    double mid = 0.5 * (interval.lo + interval.hi);
    size_t cut = 0;
    while (cut < interval.candidates.size() && interval.candidates[cut] <= mid) ++cut;
    ParamInterval left = sub_interval(interval, 0, cut);
    ParamInterval right = sub_interval(interval, cut, interval.candidates.size());

    if (binary_ra(net, region, g, param, left, &st, opts) == CheckResult::kUnknown) {
        st.unresolved.push_back(right);  // skipped sibling stays unresolved
        return CheckResult::kUnknown;
    }
    return binary_ra(net, region, g, param, right, &st, opts);
}

ParamVerdict bfa_ra(const QuantizedNetwork& net, const InputRegion& region, int g,
                    const ParamId& param, int n_bits, const RaOptions& opts) {
    int32_t v = param_value(net, param, opts);
    double step = net.layer(param.layer).step_size;
    SignSplit split = sign_split_intervals(v, net.quant_bits, n_bits, step);

    ParamVerdict verdict;
    verdict.param = param;
    BinaryRaStats stats;
    bool safe = true;
    if (split.pos)
        safe &= binary_ra(net, region, g, param, *split.pos, &stats, opts) == CheckResult::kProved;
    if (split.neg)
        safe &= binary_ra(net, region, g, param, *split.neg, &stats, opts) == CheckResult::kProved;
    verdict.status = safe ? ParamStatus::kSafe : ParamStatus::kUnknown;
    verdict.analyzer_calls = stats.analyzer_calls;
    verdict.proved_subintervals = std::move(stats.proved);
    verdict.unresolved_subintervals = std::move(stats.unresolved);
    return verdict;
}

ParamVerdict naive_check(const QuantizedNetwork& net, const InputRegion& region, int g,
                         const ParamId& param, int n_bits, const RaOptions& opts) {
    int32_t v = param_value(net, param, opts);
    std::vector<int32_t> flips = enumerate_flips(v, net.quant_bits, n_bits);

    ParamVerdict verdict;
    verdict.param = param;
    verdict.analyzer_calls = static_cast<int>(flips.size());
    bool safe = true;
    double step = net.layer(param.layer).step_size;
    for (int32_t flipped : flips) {
        AttackVector attack;
        attack.entries.push_back({param, differing_bits(v, flipped, net.quant_bits)});
        QuantizedNetwork attacked =
            opts.remap ? apply_attack(LoweredNetwork{net, *opts.remap}, attack)
                       : apply_attack(net, attack);
        CheckResult r = analyze(attacked, region, g, std::nullopt, opts.slack).result;
        ParamInterval point;
        point.lo = point.hi = flipped * step;
        point.candidates = {point.lo};
        point.int_candidates = {flipped};
        if (r == CheckResult::kProved) {
            verdict.proved_subintervals.push_back(std::move(point));
        } else {
            safe = false;
            verdict.unresolved_subintervals.push_back(std::move(point));
        }
    }
    verdict.status = safe ? ParamStatus::kSafe : ParamStatus::kUnknown;
    return verdict;
}

}  // namespace bfav
