#include "bfav/absdomain.hpp"

#include <algorithm>
#include <cmath>

namespace bfav {

InputRegion InputRegion::linf_ball(std::vector<double> center, double radius) {
    if (center.empty()) throw ConfigError("region center must be non-empty");
    if (radius < 0.0) throw ConfigError("region radius must be >= 0");
    InputRegion r;
    r.kind = Kind::kLinfBall;
    r.center = std::move(center);
    r.radius = radius;
    return r;
}

InputRegion InputRegion::box(std::vector<double> lower, std::vector<double> upper) {
    if (lower.empty() || lower.size() != upper.size())
        throw ConfigError("region box bounds must be non-empty and of equal length");
    for (size_t i = 0; i < lower.size(); ++i)
        if (lower[i] > upper[i]) throw ConfigError("region box has lower > upper");
    InputRegion r;
    r.kind = Kind::kBox;
    r.lower = std::move(lower);
    r.upper = std::move(upper);
    return r;
}

int InputRegion::dim() const {
    return static_cast<int>(kind == Kind::kLinfBall ? center.size() : lower.size());
}

std::pair<std::vector<double>, std::vector<double>> InputRegion::bounds() const {
    if (kind == Kind::kBox) return {lower, upper};
    std::vector<double> lo(center.size()), hi(center.size());
    for (size_t i = 0; i < center.size(); ++i) {
        lo[i] = std::max(center[i] - radius, 0.0);
        hi[i] = std::min(center[i] + radius, 1.0);
        if (lo[i] > hi[i]) throw ConfigError("clipped L-inf ball is empty in some dimension");
    }
    return {std::move(lo), std::move(hi)};
}

double FpSlack::widen_lo(double lo) const { return lo - (abs_eps + rel_eps * std::fabs(lo)); }
double FpSlack::widen_hi(double hi) const { return hi + (abs_eps + rel_eps * std::fabs(hi)); }

std::vector<AbstractElement> init_input(const InputRegion& region) {
    auto [lo, hi] = region.bounds();
    int n = static_cast<int>(lo.size());
    std::vector<AbstractElement> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        AbstractElement& e = out[static_cast<size_t>(i)];
        e.lower = LinExpr::variable(i, n);
        e.upper = e.lower;
        e.lb = lo[static_cast<size_t>(i)];
        e.ub = hi[static_cast<size_t>(i)];
    }
    return out;
}

NetworkAbstraction::NetworkAbstraction(const QuantizedNetwork& net, const InputRegion& region,
                                       FpSlack slack)
    : net_(net), slack_(slack) {
    if (net.has_conv()) throw ConfigError("abstract interpretation requires affine layers; lower convolutions first");
    if (region.dim() != net.input_dim)
        throw ShapeError("region dimension does not match the network input");
    auto [lo, hi] = region.bounds();
    in_lo_ = std::move(lo);
    in_hi_ = std::move(hi);
    layers_.resize(net.layers.size());
}

int NetworkAbstraction::frame_size(int layer, Phase phase) const {
    if (layer == 1) return input_dim();  // input frame
    const LayerAbstraction& la = layer_abs(layer);
    if (phase == Phase::kPre) return net_.layer(layer).out_dim();
    return net_.layer(layer).out_dim() + static_cast<int>(la.aux.size());
}

LinExpr NetworkAbstraction::substitute_once(const LinExpr& expr, int layer, Phase phase,
                                            bool lower_path) const {
    const LayerAbstraction& la = layer_abs(layer);
    int below = phase == Phase::kPre ? frame_size(layer - 1, Phase::kPost)
                                     : frame_size(layer, Phase::kPre);
    LinExpr out(below);
    out.constant = expr.constant;
    int width = net_.layer(layer).out_dim();
    for (int j = 0; j < static_cast<int>(expr.coef.size()); ++j) {
        double c = expr.coef[static_cast<size_t>(j)];
        if (c == 0.0) continue;
        const AbstractElement* elem;
        if (phase == Phase::kPre) {
            elem = &la.pre[static_cast<size_t>(j)];
        } else {
            elem = j < width ? &la.post[static_cast<size_t>(j)]
                             : &la.aux[static_cast<size_t>(j - width)];
        }
        const LinExpr& b = (c > 0.0) == lower_path ? elem->lower : elem->upper;
        out.constant += c * b.constant;
        for (size_t t = 0; t < b.coef.size(); ++t) out.coef[t] += c * b.coef[t];
    }
    return out;
}

LinExpr NetworkAbstraction::input_form(const LinExpr& expr, int layer, Phase phase,
                                       bool lower_path) const {
    LinExpr e = expr;
    int l = layer;
    Phase p = phase;
    while (l > 1) {
        e = substitute_once(e, l, p, lower_path);
        if (p == Phase::kPost) {
            p = Phase::kPre;
        } else {
            p = Phase::kPost;
            --l;
        }
    }
    return e;
}

std::pair<double, double> NetworkAbstraction::optimize_over_box(const LinExpr& e) const {
    double lo = e.constant;
    for (size_t i = 0; i < e.coef.size(); ++i) {
        double c = e.coef[i];
        lo += c >= 0.0 ? c * in_lo_[i] : c * in_hi_[i];
    }
    double hi = e.constant;
    for (size_t i = 0; i < e.coef.size(); ++i) {
        double c = e.coef[i];
        hi += c >= 0.0 ? c * in_hi_[i] : c * in_lo_[i];
    }
    return {lo, hi};
}

std::pair<double, double> NetworkAbstraction::back_substitute(const LinExpr& expr, int layer,
                                                              Phase phase) const {
    LinExpr lo_form = input_form(expr, layer, phase, /*lower_path=*/true);
    LinExpr hi_form = input_form(expr, layer, phase, /*lower_path=*/false);
    double lb = optimize_over_box(lo_form).first;
    double ub = optimize_over_box(hi_form).second;
    return {slack_.widen_lo(lb), slack_.widen_hi(ub)};
}

std::pair<double, double> NetworkAbstraction::node_bounds(int layer, Phase phase,
                                                          int index) const {
    if (layer == 1)
        return {in_lo_[static_cast<size_t>(index)], in_hi_[static_cast<size_t>(index)]};
    const LayerAbstraction& la = layer_abs(layer);
    int width = net_.layer(layer).out_dim();
    const AbstractElement& e =
        phase == Phase::kPre
            ? la.pre[static_cast<size_t>(index)]
            : (index < width ? la.post[static_cast<size_t>(index)]
                             : la.aux[static_cast<size_t>(index - width)]);
    return {e.lb, e.ub};
}

std::pair<double, double> NetworkAbstraction::output_diff_bounds(int g, int i) const {
    int d = net_.num_layers();
    int s = net_.output_dim();
    LinExpr diff(s);
    diff.coef[static_cast<size_t>(g)] = 1.0;
    diff.coef[static_cast<size_t>(i)] = -1.0;
    return back_substitute(diff, d, Phase::kPre);
}

AbstractElement affine_transform(const NetworkAbstraction& abs, int layer, const LinExpr& row) {
    AbstractElement e;
    e.lower = row;
    e.upper = row;
    // The row is expressed over the frame below this layer's pre frame.
    auto [lb, ub] = abs.back_substitute(row, layer - 1, Phase::kPost);
    e.lb = lb;
    e.ub = ub;
    return e;
}

AbstractElement relu_transform(const AbstractElement& pre, int index, int frame_size) {
    AbstractElement out;
    if (pre.lb >= 0.0) {
        out.lower = LinExpr::variable(index, frame_size);
        out.upper = out.lower;
        out.lb = pre.lb;
        out.ub = pre.ub;
        return out;
    }
    if (pre.ub <= 0.0) {
        out.lower = LinExpr::constant_of(0.0, frame_size);
        out.upper = out.lower;
        out.lb = 0.0;
        out.ub = 0.0;
        return out;
    }
    double slope = pre.ub / (pre.ub - pre.lb);
    out.upper = LinExpr(frame_size);
    out.upper.coef[static_cast<size_t>(index)] = slope;
    out.upper.constant = -slope * pre.lb;
    // lambda in {0,1} minimizing the relaxation area; area(lambda) is
    // proportional to u - lambda*(u + l), so lambda = 1 iff u + l > 0.
    double lambda = pre.ub + pre.lb > 0.0 ? 1.0 : 0.0;
    out.lower = LinExpr(frame_size);
    out.lower.coef[static_cast<size_t>(index)] = lambda;
    out.lb = lambda * pre.lb;
    out.ub = pre.ub;
    return out;
}

double activation_value(Activation g, double x) {
    switch (g) {
        case Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::kTanh: return std::tanh(x);
        case Activation::kRelu: return x > 0.0 ? x : 0.0;
        case Activation::kNone: return x;
    }
    return x;
}

double activation_derivative(Activation g, double x) {
    switch (g) {
        case Activation::kSigmoid: {
            double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        }
        case Activation::kTanh: {
            double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case Activation::kRelu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::kNone: return 1.0;
    }
    return 1.0;
}

AbstractElement act_transform(const AbstractElement& pre, int index, int frame_size,
                              Activation g) {
    if (g != Activation::kSigmoid && g != Activation::kTanh)
        throw ConfigError("act_transform handles sigmoid and tanh only");
    double l = pre.lb, u = pre.ub;
    double gl = activation_value(g, l), gu = activation_value(g, u);

    AbstractElement out;
    out.lb = gl;
    out.ub = gu;
    if (l == u) {
        out.lower = LinExpr::constant_of(gl, frame_size);
        out.upper = out.lower;
        return out;
    }
    double kappa = (gu - gl) / (u - l);
    double kp = std::min(activation_derivative(g, l), activation_derivative(g, u));

    auto line = [&](double x0, double y0, double slope) {
        LinExpr e(frame_size);
        e.coef[static_cast<size_t>(index)] = slope;
        e.constant = y0 - slope * x0;
        return e;
    };
    // Lower: secant where the curve is concave (l >= 0), else the minimum-
    // derivative line through (l, g(l)). Upper mirrored.
    out.lower = l >= 0.0 ? line(l, gl, kappa) : line(l, gl, kp);
    out.upper = u <= 0.0 ? line(u, gu, kappa) : line(u, gu, kp);
    return out;
}

CheckResult check_argmax(const NetworkAbstraction& abs, int g) {
    int s = abs.net().output_dim();
    if (g < 0 || g >= s) throw RangeError("target class out of range");
    for (int i = 0; i < s; ++i) {
        if (i == g) continue;
        if (abs.output_diff_bounds(g, i).first <= 0.0) return CheckResult::kUnknown;
    }
    return CheckResult::kProved;
}

}  // namespace bfav
