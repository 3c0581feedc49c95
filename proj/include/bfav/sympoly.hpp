#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "bfav/absdomain.hpp"
#include "bfav/quant.hpp"

namespace bfav {

/// Interval constraint on one parameter. `sites` lists every (row, col)
/// position the parameter occupies in its layer — more than one only for
/// lowered convolutions, whose affine entries alias a single filter tap.
struct SymbolicParamBinding {
    ParamId param;  // original id, kept for reporting
    int layer = 2;
    bool is_bias = false;
    std::vector<std::pair<int, int>> sites;
    double w_lo = 0.0;
    double w_hi = 0.0;

    static SymbolicParamBinding single(const ParamId& p, double lo, double hi);
    static SymbolicParamBinding aliased(const ParamRemapTable& remap, const ParamId& p,
                                        double lo, double hi);
};

/// Abstract element of the auxiliary node w * act(x) attached next to the
/// activation it weights.
using WeightedNode = AbstractElement;

/// Joint relaxation of w * ReLU(x) for w in [wl, wu], applied to the ReLU
/// output element. Handles both sign-uniform cases and the mixed case; the
/// pipeline sign-splits first, so the mixed case only serves whole-hull
/// bounds passes.
WeightedNode weighted_relu_transform(const AbstractElement& relu_out, double wl, double wu);

/// Linear boundaries of {w * x : w in [wl, wu], x in [xl, xu]}:
/// kappa_lower * x - eta <= w * x <= kappa_upper * x + eta.
struct InputWeightRelaxation {
    double kappa_lower = 0.0;
    double kappa_upper = 0.0;
    double eta = 0.0;
};

InputWeightRelaxation weighted_input_transform(double xl, double xu, double wl, double wu);

/// Affine node whose bias is only known up to [wl, wu]. `row` carries the
/// weight terms without the bias constant. Lossless in the bias dimension.
AbstractElement symbolic_bias_transform(const NetworkAbstraction& abs, int layer,
                                        const LinExpr& row, double wl, double wu);

/// Joint relaxation of w * g(x) for sigmoid/tanh, from the pre-activation
/// element. Mixed-sign weight ranges are rejected; callers must sign-split.
WeightedNode weighted_act_transform(const AbstractElement& pre_elem, int index, int frame_size,
                                    double wl, double wu, Activation g);

struct Analysis {
    CheckResult result = CheckResult::kUnknown;
    NetworkAbstraction abstraction;
};

/// Full abstract pass over the network, routing the bound parameter (if
/// any) through the weighted transformers; finishes with the argmax check.
/// Without a binding this is exactly the DeepPoly pass.
Analysis analyze(const QuantizedNetwork& net, const InputRegion& region, int g,
                 const std::optional<SymbolicParamBinding>& binding = std::nullopt,
                 FpSlack slack = FpSlack{});

}  // namespace bfav
