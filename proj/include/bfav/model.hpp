#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bfav/errors.hpp"

namespace bfav {

/// Dense row-major matrix of doubles. Networks at verification scale are
/// tiny, so no BLAS backing; explicit loops keep the bound computations
/// easy to audit.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

struct IntMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int32_t> data;

    IntMatrix() = default;
    IntMatrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0) {}

    int32_t& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    int32_t at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

enum class Activation { kRelu, kSigmoid, kTanh, kNone };

enum class LayerKind { kAffine, kConv2d };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Spatial metadata for conv2d layers. Single input channel, one filter per
/// output channel, zero padding. integer_weights rows hold one flattened
/// filter each (kernel_h * kernel_w taps).
struct ConvMeta {
    int in_height = 0;
    int in_width = 0;
    int kernel_height = 0;
    int kernel_width = 0;
    int stride = 1;
};

/// One non-input layer. Integer parameters plus the step size are the stored
/// ground truth; the real-valued weights are always derived from them.
struct Layer {
    LayerKind kind = LayerKind::kAffine;
    IntMatrix integer_weights;
    std::vector<int32_t> integer_bias;
    double step_size = 0.0;  // Δw for this layer, > 0
    Activation activation = Activation::kNone;
    std::optional<ConvMeta> conv;

    int out_dim() const;  // affine: rows; conv: channels * oh * ow
    int in_dim() const;   // affine: cols; conv: in_height * in_width

    double weight(int r, int c) const { return integer_weights.at(r, c) * step_size; }
    double bias(int r) const { return integer_bias[static_cast<size_t>(r)] * step_size; }

    /// De-quantized weight matrix of the affine view. Only valid for affine
    /// layers; conv layers must be lowered first.
    Matrix real_weights() const;
    std::vector<double> real_bias() const;
};

/// Addresses one parameter. Layers follow the convention that the input
/// layer is layer 1, so the first parameterized layer has index 2. Rows and
/// columns are zero-based; col is ignored for biases.
struct ParamId {
    int layer = 2;  // >= 2
    bool is_bias = false;
    int row = 0;
    int col = 0;

    friend bool operator==(const ParamId&, const ParamId&) = default;
    friend auto operator<=>(const ParamId&, const ParamId&) = default;
};

std::string to_string(const ParamId& p);

struct QuantizedNetwork {
    int quant_bits = 8;          // Q in [2, 16]
    int input_dim = 0;           // n_1
    std::vector<Layer> layers;   // layers[i] is paper layer i + 2

    int num_layers() const { return static_cast<int>(layers.size()) + 1; }  // d
    int output_dim() const { return layers.back().out_dim(); }

    const Layer& layer(int paper_index) const;  // paper_index in [2, d]
    Layer& layer(int paper_index);

    int32_t int_param(const ParamId& p) const;
    void set_int_param(const ParamId& p, int32_t v);
    double real_param(const ParamId& p) const;

    /// Every weight and bias of every layer, in (layer, weights row-major,
    /// then biases) order.
    std::vector<ParamId> all_params() const;

    bool has_conv() const;

    void validate() const;  // throws ShapeError / RangeError / ConfigError
};

/// Maps a parameter of the original (conv) network to the affine entries
/// that alias it after lowering. Parameters of affine layers map to
/// themselves.
struct ParamRemapTable {
    std::map<ParamId, std::vector<ParamId>> aliases;

    const std::vector<ParamId>& of(const ParamId& original) const;
};

struct LoweredNetwork {
    QuantizedNetwork net;
    ParamRemapTable remap;
};

QuantizedNetwork load_model(const std::string& path);
QuantizedNetwork model_from_json_text(const std::string& text);
void save_model(const QuantizedNetwork& net, const std::string& path);
std::string model_to_json_text(const QuantizedNetwork& net);

/// Concrete forward pass on de-quantized weights. Affine + activation per
/// hidden layer, affine only at the output.
std::vector<double> forward(const QuantizedNetwork& net, const std::vector<double>& x);

/// Forward through a conv layer directly on the spatial grid; used as the
/// oracle against the lowered affine form.
std::vector<double> conv_forward(const Layer& layer, const std::vector<double>& x);

/// argmax with the smallest-index tie rule. Returns a zero-based class.
int argmax_class(const std::vector<double>& y);

/// Replaces every conv2d layer by the equivalent dense affine layer and
/// records which affine entries alias each original filter parameter.
LoweredNetwork lower_conv(const QuantizedNetwork& net);

struct SyntheticSpec {
    std::vector<int> dims;  // n_1 ... n_d
    int quant_bits = 4;
    Activation activation = Activation::kRelu;
    uint64_t seed = 0;
};

/// Samples real weights uniformly in [-1, 1] and quantizes per layer.
/// Identical specs produce identical networks.
QuantizedNetwork generate_synthetic(const SyntheticSpec& spec);

}  // namespace bfav
