#include "bfav/sympoly.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace bfav {

SymbolicParamBinding SymbolicParamBinding::single(const ParamId& p, double lo, double hi) {
    SymbolicParamBinding b;
    b.param = p;
    b.layer = p.layer;
    b.is_bias = p.is_bias;
    b.sites = {{p.row, p.col}};
    b.w_lo = lo;
    b.w_hi = hi;
    return b;
}

SymbolicParamBinding SymbolicParamBinding::aliased(const ParamRemapTable& remap, const ParamId& p,
                                                   double lo, double hi) {
    SymbolicParamBinding b;
    b.param = p;
    b.layer = p.layer;
    b.is_bias = p.is_bias;
    for (const ParamId& alias : remap.of(p)) {
        if (alias.layer != p.layer || alias.is_bias != p.is_bias)
            throw ConfigError("alias table maps a parameter across layers or roles");
        b.sites.emplace_back(alias.row, alias.col);
    }
    b.w_lo = lo;
    b.w_hi = hi;
    return b;
}

namespace {

LinExpr scaled(const LinExpr& e, double s) {
    LinExpr out = e;
    out.constant *= s;
    for (double& c : out.coef) c *= s;
    return out;
}

LinExpr line_at(int index, int frame_size, double x0, double y0, double slope) {
    LinExpr e(frame_size);
    e.coef[static_cast<size_t>(index)] = slope;
    e.constant = y0 - slope * x0;
    return e;
}

}  // namespace

WeightedNode weighted_relu_transform(const AbstractElement& relu_out, double wl, double wu) {
    if (wl > wu) throw ConfigError("weight interval has lo > hi");
    WeightedNode out;
    if (wl >= 0.0) {
        out.lower = scaled(relu_out.lower, wl);
        out.upper = scaled(relu_out.upper, wu);
        out.lb = wl * relu_out.lb;
        out.ub = wu * relu_out.ub;
    } else if (wu <= 0.0) {
        out.lower = scaled(relu_out.upper, wl);
        out.upper = scaled(relu_out.lower, wu);
        out.lb = wl * relu_out.ub;
        out.ub = wu * relu_out.lb;
    } else {
        out.lower = scaled(relu_out.upper, wl);
        out.upper = scaled(relu_out.upper, wu);
        out.lb = wl * relu_out.ub;
        out.ub = wu * relu_out.ub;
    }
    return out;
}

InputWeightRelaxation weighted_input_transform(double xl, double xu, double wl, double wu) {
    if (xl > xu) throw ConfigError("input interval has lo > hi");
    if (wl > wu) throw ConfigError("weight interval has lo > hi");
    if (xl >= 0.0) return {wl, wu, 0.0};
    if (xu <= 0.0) return {wu, wl, 0.0};
    double kle = (wl * xu - wu * xl) / (xu - xl);
    double kge = (wu * xu - wl * xl) / (xu - xl);
    double eta = xu * xl * (wl - wu) / (xu - xl);
    return {kle, kge, eta};
}

AbstractElement symbolic_bias_transform(const NetworkAbstraction& abs, int layer,
                                        const LinExpr& row, double wl, double wu) {
    if (wl > wu) throw ConfigError("bias interval has lo > hi");
    AbstractElement e;
    e.lower = row;
    e.lower.constant += wl;
    e.upper = row;
    e.upper.constant += wu;
    e.lb = abs.back_substitute(e.lower, layer - 1, Phase::kPost).first;
    e.ub = abs.back_substitute(e.upper, layer - 1, Phase::kPost).second;
    return e;
}

WeightedNode weighted_act_transform(const AbstractElement& pre_elem, int index, int frame_size,
                                    double wl, double wu, Activation g) {
    if (g != Activation::kSigmoid && g != Activation::kTanh)
        throw ConfigError("weighted_act_transform handles sigmoid and tanh only");
    if (wl > wu) throw ConfigError("weight interval has lo > hi");
    if (wl < 0.0 && wu > 0.0)
        throw ConfigError("mixed-sign weight range: sign-split before the sigmoid/tanh transformer");

    double l = pre_elem.lb, u = pre_elem.ub;
    double gl = activation_value(g, l), gu = activation_value(g, u);
    double kappa = u == l ? activation_derivative(g, l) : (gu - gl) / (u - l);
    double kp = std::min(activation_derivative(g, l), activation_derivative(g, u));
    auto line = [&](double x0, double y0, double slope) {
        return line_at(index, frame_size, x0, y0, slope);
    };

    bool wpos = wl >= 0.0;
    WeightedNode out;
    if (g == Activation::kSigmoid) {
        // sigmoid is positive, so w * g is monotone in w
        if (wpos) {
            out.lb = wl * gl;
            out.ub = wu * gu;
            out.lower = l >= 0.0 ? line(l, wl * gl, wl * kappa) : line(l, wl * gl, wl * kp);
            out.upper = u <= 0.0 ? line(u, wu * gu, wu * kappa) : line(u, wu * gu, wu * kp);
        } else {
            out.lb = wl * gu;
            out.ub = wu * gl;
            out.lower = u <= 0.0 ? line(u, wl * gu, wl * kappa) : line(u, wl * gu, wl * kp);
            out.upper = l >= 0.0 ? line(l, wu * gl, wu * kappa) : line(l, wu * gl, wu * kp);
        }
        return out;
    }
    // tanh changes sign at 0, so the extremal weight depends on where the
    // interval sits.
    if (wpos) {
        if (l >= 0.0) {
            out.lb = wl * gl;
            out.ub = wu * gu;
            out.lower = line(l, wl * gl, wl * kappa);
            out.upper = line(u, wu * gu, wu * kp);
        } else if (u <= 0.0) {
            out.lb = wu * gl;
            out.ub = wl * gu;
            out.lower = line(l, wu * gl, wu * kp);
            out.upper = line(u, wl * gu, wl * kappa);
        } else {
            out.lb = wu * gl;
            out.ub = wu * gu;
            out.lower = line(l, wu * gl, wl * kp);
            out.upper = line(u, wu * gu, wl * kp);
        }
    } else {
        if (l >= 0.0) {
            out.lb = wl * gu;
            out.ub = wu * gl;
            out.lower = line(u, wl * gu, wl * kp);
            out.upper = line(l, wu * gl, wu * kappa);
        } else if (u <= 0.0) {
            out.lb = wu * gu;
            out.ub = wl * gl;
            out.lower = line(u, wu * gu, wu * kappa);
            out.upper = line(l, wl * gl, wl * kp);
        } else {
            out.lb = wl * gu;
            out.ub = wl * gl;
            out.lower = line(u, wl * gu, wu * kp);
            out.upper = line(l, wl * gl, wu * kp);
        }
    }
    return out;
}

namespace {

void validate_binding(const QuantizedNetwork& net, const SymbolicParamBinding& b) {
    if (b.layer < 2 || b.layer > net.num_layers())
        throw RangeError("binding layer out of range");
    if (b.sites.empty()) throw ConfigError("binding has no sites");
    if (b.w_lo > b.w_hi) throw ConfigError("binding interval has lo > hi");
    const Layer& l = net.layer(b.layer);
    for (auto [row, col] : b.sites) {
        if (row < 0 || row >= l.integer_weights.rows)
            throw RangeError("binding row out of range");
        if (!b.is_bias && (col < 0 || col >= l.integer_weights.cols))
            throw RangeError("binding col out of range");
    }
}

}  // namespace

Analysis analyze(const QuantizedNetwork& net, const InputRegion& region, int g,
                 const std::optional<SymbolicParamBinding>& binding, FpSlack slack) {
    if (g < 0 || g >= net.output_dim()) throw RangeError("target class out of range");
    if (binding) validate_binding(net, *binding);

    NetworkAbstraction abs(net, region, slack);
    const int d = net.num_layers();

    for (int li = 2; li <= d; ++li) {
        const Layer& lay = net.layer(li);
        LayerAbstraction& la = abs.layer_abs(li);

        bool weight_binding_here =
            binding && !binding->is_bias && binding->layer == li;
        bool bias_binding_here = binding && binding->is_bias && binding->layer == li;

        // Auxiliary weighted nodes live in the previous layer's post frame;
        // one per distinct source column, shared by every row that reads it.
        std::map<int, int> aux_slot;  // source col -> index in post frame
        if (weight_binding_here && li >= 3) {
            LayerAbstraction& prev = abs.layer_abs(li - 1);
            const Layer& src_layer = net.layer(li - 1);
            int prev_width = src_layer.out_dim();
            std::vector<int> cols;
            for (auto [row, col] : binding->sites) cols.push_back(col);
            std::sort(cols.begin(), cols.end());
            cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
            for (int k : cols) {
                WeightedNode aux;
                if (src_layer.activation == Activation::kRelu) {
                    aux = weighted_relu_transform(prev.post[static_cast<size_t>(k)],
                                                  binding->w_lo, binding->w_hi);
                } else {
                    aux = weighted_act_transform(prev.pre[static_cast<size_t>(k)], k,
                                                 abs.frame_size(li - 1, Phase::kPre),
                                                 binding->w_lo, binding->w_hi,
                                                 src_layer.activation);
                }
                aux_slot[k] = prev_width + static_cast<int>(prev.aux.size());
                prev.aux.push_back(std::move(aux));
            }
        }

        int below = abs.frame_size(li - 1, Phase::kPost);
        la.pre.resize(static_cast<size_t>(lay.out_dim()));
        for (int j = 0; j < lay.out_dim(); ++j) {
            LinExpr row(below);
            for (int c = 0; c < lay.integer_weights.cols; ++c)
                row.coef[static_cast<size_t>(c)] = lay.weight(j, c);
            row.constant = lay.bias(j);

            if (bias_binding_here &&
                std::any_of(binding->sites.begin(), binding->sites.end(),
                            [j](auto s) { return s.first == j; })) {
                row.constant -= lay.bias(j);  // range replaces the stored bias
                la.pre[static_cast<size_t>(j)] =
                    symbolic_bias_transform(abs, li, row, binding->w_lo, binding->w_hi);
                continue;
            }

            bool asym = false;
            LinExpr row_lo, row_hi;
            if (weight_binding_here) {
                for (auto [srow, scol] : binding->sites) {
                    if (srow != j) continue;
                    if (li == 2) {
                        if (!asym) {
                            row_lo = row;
                            row_hi = row;
                            asym = true;
                        }
                        InputWeightRelaxation rel = weighted_input_transform(
                            abs.input_lower()[static_cast<size_t>(scol)],
                            abs.input_upper()[static_cast<size_t>(scol)], binding->w_lo,
                            binding->w_hi);
                        row_lo.coef[static_cast<size_t>(scol)] = rel.kappa_lower;
                        row_lo.constant -= rel.eta;
                        row_hi.coef[static_cast<size_t>(scol)] = rel.kappa_upper;
                        row_hi.constant += rel.eta;
                    } else {
                        row.coef[static_cast<size_t>(scol)] = 0.0;
                        row.coef[static_cast<size_t>(aux_slot.at(scol))] += 1.0;
                    }
                }
            }

            if (asym) {
                AbstractElement e;
                e.lower = std::move(row_lo);
                e.upper = std::move(row_hi);
                e.lb = abs.back_substitute(e.lower, li - 1, Phase::kPost).first;
                e.ub = abs.back_substitute(e.upper, li - 1, Phase::kPost).second;
                la.pre[static_cast<size_t>(j)] = std::move(e);
            } else {
                la.pre[static_cast<size_t>(j)] = affine_transform(abs, li, row);
            }
        }

        if (li < d) {
            int fsz = abs.frame_size(li, Phase::kPre);
            la.post.resize(static_cast<size_t>(lay.out_dim()));
            for (int j = 0; j < lay.out_dim(); ++j) {
                const AbstractElement& pre = la.pre[static_cast<size_t>(j)];
                la.post[static_cast<size_t>(j)] =
                    lay.activation == Activation::kRelu
                        ? relu_transform(pre, j, fsz)
                        : act_transform(pre, j, fsz, lay.activation);
            }
        }
    }

    CheckResult result = check_argmax(abs, g);
    return Analysis{result, std::move(abs)};
}

}  // namespace bfav
