#pragma once

#include <utility>
#include <vector>

#include "bfav/model.hpp"

namespace bfav {

/// Linear expression over the nodes of one frame (input layer, or the
/// pre-/post-activation nodes of one layer). The frame itself is implicit;
/// coef is sized to the frame.
struct LinExpr {
    std::vector<double> coef;
    double constant = 0.0;

    LinExpr() = default;
    explicit LinExpr(int frame_size) : coef(static_cast<size_t>(frame_size), 0.0) {}

    static LinExpr variable(int index, int frame_size) {
        LinExpr e(frame_size);
        e.coef[static_cast<size_t>(index)] = 1.0;
        return e;
    }
    static LinExpr constant_of(double c, int frame_size) {
        LinExpr e(frame_size);
        e.constant = c;
        return e;
    }
};

/// Per-node tuple <a_le, a_ge, l, u>: symbolic linear bounds over earlier
/// nodes plus concrete bounds.
struct AbstractElement {
    LinExpr lower;  // a_le
    LinExpr upper;  // a_ge
    double lb = 0.0;
    double ub = 0.0;
};

struct InputRegion {
    enum class Kind { kLinfBall, kBox };
    Kind kind = Kind::kBox;
    std::vector<double> center;  // linf ball
    double radius = 0.0;
    std::vector<double> lower;  // box
    std::vector<double> upper;

    static InputRegion linf_ball(std::vector<double> center, double radius);
    static InputRegion box(std::vector<double> lower, std::vector<double> upper);

    int dim() const;
    /// Per-dimension interval; the L-inf ball is clipped to [0, 1].
    std::pair<std::vector<double>, std::vector<double>> bounds() const;
};

/// Outward slack applied whenever a symbolic bound is concretized. Bounds
/// are sound modulo this widening; the arithmetic itself is not directed-
/// rounded.
struct FpSlack {
    double abs_eps = 1e-9;
    double rel_eps = 1e-9;

    double widen_lo(double lo) const;
    double widen_hi(double hi) const;
};

enum class Phase { kPre, kPost };

/// Elements of one non-input layer. `pre` bounds are expressed over the
/// previous layer's post frame (inputs for the first layer); `post` and
/// `aux` bounds over this layer's pre frame. `aux` holds weighted nodes
/// appended to the post frame for symbolic-parameter runs.
struct LayerAbstraction {
    std::vector<AbstractElement> pre;
    std::vector<AbstractElement> post;
    std::vector<AbstractElement> aux;
};

class NetworkAbstraction {
  public:
    NetworkAbstraction(const QuantizedNetwork& net, const InputRegion& region,
                       FpSlack slack = FpSlack{});

    const QuantizedNetwork& net() const { return net_; }
    const FpSlack& slack() const { return slack_; }
    int input_dim() const { return static_cast<int>(in_lo_.size()); }
    const std::vector<double>& input_lower() const { return in_lo_; }
    const std::vector<double>& input_upper() const { return in_hi_; }

    LayerAbstraction& layer_abs(int paper_layer) { return layers_.at(static_cast<size_t>(paper_layer) - 2); }
    const LayerAbstraction& layer_abs(int paper_layer) const { return layers_.at(static_cast<size_t>(paper_layer) - 2); }

    /// Frame width. The post frame of layer 1 is the input layer; post
    /// frames include aux slots.
    int frame_size(int layer, Phase phase) const;

    /// Repeatedly substitutes variables by their symbolic bounds, sign-
    /// directed, down to the input layer, then optimizes over the input box.
    /// Returns slack-widened (lb, ub).
    std::pair<double, double> back_substitute(const LinExpr& expr, int layer, Phase phase) const;

    /// The input-level linear forms the two substitution paths produce;
    /// lower(x) <= expr <= upper(x) pointwise on the region.
    LinExpr input_form(const LinExpr& expr, int layer, Phase phase, bool lower_path) const;

    /// Concrete bounds of node `index` in the given frame.
    std::pair<double, double> node_bounds(int layer, Phase phase, int index) const;

    /// Bounds of the output difference y_g - y_i.
    std::pair<double, double> output_diff_bounds(int g, int i) const;

  private:
    LinExpr substitute_once(const LinExpr& expr, int layer, Phase phase, bool lower_path) const;
    std::pair<double, double> optimize_over_box(const LinExpr& input_expr) const;

    QuantizedNetwork net_;  // owned copy; keeps bound queries valid past the caller's net
    FpSlack slack_;
    std::vector<double> in_lo_, in_hi_;
    std::vector<LayerAbstraction> layers_;
};

/// Input elements: identity symbolic bounds with the region's per-dimension
/// interval.
std::vector<AbstractElement> init_input(const InputRegion& region);

/// Affine node: both symbolic bounds equal the row expression; concrete
/// bounds by back-substitution. `row` must already be sized to the post
/// frame below `layer`.
AbstractElement affine_transform(const NetworkAbstraction& abs, int layer, const LinExpr& row);

/// DeepPoly ReLU cases. `index` is the node's position in its pre frame.
AbstractElement relu_transform(const AbstractElement& pre, int index, int frame_size);

/// Sigmoid/tanh: secant on the concave/convex side, minimum-derivative line
/// on the other.
AbstractElement act_transform(const AbstractElement& pre, int index, int frame_size, Activation g);

double activation_value(Activation g, double x);
double activation_derivative(Activation g, double x);

enum class CheckResult { kProved, kUnknown };

/// Proved iff lb(y_g - y_i) > 0 for every i != g.
CheckResult check_argmax(const NetworkAbstraction& abs, int g);

}  // namespace bfav
