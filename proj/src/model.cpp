#include "bfav/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bfav/quant.hpp"

namespace bfav {

using nlohmann::json;

std::string to_string(Activation a) {
    switch (a) {
        case Activation::kRelu: return "relu";
        case Activation::kSigmoid: return "sigmoid";
        case Activation::kTanh: return "tanh";
        case Activation::kNone: return "none";
    }
    return "none";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::kRelu;
    if (s == "sigmoid") return Activation::kSigmoid;
    if (s == "tanh") return Activation::kTanh;
    if (s == "none") return Activation::kNone;
    throw ParseError("unknown activation: " + s);
}

std::string to_string(const ParamId& p) {
    std::ostringstream os;
    os << (p.is_bias ? "b" : "w") << ":" << p.layer << ":" << p.row;
    if (!p.is_bias) os << ":" << p.col;
    return os.str();
}

int Layer::out_dim() const {
    if (kind == LayerKind::kAffine) return integer_weights.rows;
    const ConvMeta& m = *conv;
    int oh = (m.in_height - m.kernel_height) / m.stride + 1;
    int ow = (m.in_width - m.kernel_width) / m.stride + 1;
    return integer_weights.rows * oh * ow;  // rows = output channels
}

int Layer::in_dim() const {
    if (kind == LayerKind::kAffine) return integer_weights.cols;
    return conv->in_height * conv->in_width;
}

Matrix Layer::real_weights() const {
    if (kind != LayerKind::kAffine) throw ConfigError("real_weights: conv layer not lowered");
    Matrix w(integer_weights.rows, integer_weights.cols);
    for (size_t i = 0; i < w.data.size(); ++i) w.data[i] = integer_weights.data[i] * step_size;
    return w;
}

std::vector<double> Layer::real_bias() const {
    std::vector<double> b(integer_bias.size());
    for (size_t i = 0; i < b.size(); ++i) b[i] = integer_bias[i] * step_size;
    return b;
}

const Layer& QuantizedNetwork::layer(int paper_index) const {
    return layers.at(static_cast<size_t>(paper_index) - 2);
}

Layer& QuantizedNetwork::layer(int paper_index) {
    return layers.at(static_cast<size_t>(paper_index) - 2);
}

int32_t QuantizedNetwork::int_param(const ParamId& p) const {
    const Layer& l = layer(p.layer);
    if (p.is_bias) {
        if (p.row < 0 || p.row >= static_cast<int>(l.integer_bias.size()))
            throw RangeError("bias row out of range: " + to_string(p));
        return l.integer_bias[static_cast<size_t>(p.row)];
    }
    if (p.row < 0 || p.row >= l.integer_weights.rows || p.col < 0 || p.col >= l.integer_weights.cols)
        throw RangeError("weight index out of range: " + to_string(p));
    return l.integer_weights.at(p.row, p.col);
}

void QuantizedNetwork::set_int_param(const ParamId& p, int32_t v) {
    Layer& l = layer(p.layer);
    if (p.is_bias) {
        if (p.row < 0 || p.row >= static_cast<int>(l.integer_bias.size()))
            throw RangeError("bias row out of range: " + to_string(p));
        l.integer_bias[static_cast<size_t>(p.row)] = v;
        return;
    }
    if (p.row < 0 || p.row >= l.integer_weights.rows || p.col < 0 || p.col >= l.integer_weights.cols)
        throw RangeError("weight index out of range: " + to_string(p));
    l.integer_weights.at(p.row, p.col) = v;
}

double QuantizedNetwork::real_param(const ParamId& p) const {
    return int_param(p) * layer(p.layer).step_size;
}

std::vector<ParamId> QuantizedNetwork::all_params() const {
    std::vector<ParamId> out;
    for (int li = 2; li <= num_layers(); ++li) {
        const Layer& l = layer(li);
        for (int r = 0; r < l.integer_weights.rows; ++r)
            for (int c = 0; c < l.integer_weights.cols; ++c)
                out.push_back(ParamId{li, false, r, c});
        for (int r = 0; r < static_cast<int>(l.integer_bias.size()); ++r)
            out.push_back(ParamId{li, true, r, 0});
    }
    return out;
}

bool QuantizedNetwork::has_conv() const {
    return std::any_of(layers.begin(), layers.end(),
                       [](const Layer& l) { return l.kind == LayerKind::kConv2d; });
}

void QuantizedNetwork::validate() const {
    if (quant_bits < 2 || quant_bits > 16)
        throw RangeError("quant_bits must be in [2, 16]");
    if (layers.empty()) throw ShapeError("network needs at least one non-input layer");
    if (input_dim <= 0) throw ShapeError("input dimension must be positive");

    const int lo = min_int(quant_bits);
    const int hi = max_int(quant_bits);
    int prev = input_dim;
    for (size_t i = 0; i < layers.size(); ++i) {
        const Layer& l = layers[i];
        if (l.step_size <= 0.0) throw ConfigError("layer step_size must be > 0");
        if (l.kind == LayerKind::kConv2d) {
            if (!l.conv) throw ShapeError("conv layer missing spatial metadata");
            const ConvMeta& m = *l.conv;
            if (m.stride < 1) throw ConfigError("conv stride must be >= 1");
            if (m.kernel_height > m.in_height || m.kernel_width > m.in_width)
                throw ShapeError("conv kernel larger than input");
            if (l.integer_weights.cols != m.kernel_height * m.kernel_width)
                throw ShapeError("conv weights must have kernel_h*kernel_w columns");
        }
        if (l.in_dim() != prev) {
            std::ostringstream os;
            os << "layer " << (i + 2) << " expects input of size " << l.in_dim()
               << " but previous layer produces " << prev;
            throw ShapeError(os.str());
        }
        // affine: one bias per row; conv: one bias per output channel
        if (static_cast<int>(l.integer_bias.size()) != l.integer_weights.rows)
            throw ShapeError("bias length does not match layer rows");
        // Structural range is the full two's-complement range; attacked
        // copies may hold -2^{Q-1}. Loading enforces the tighter pre-attack
        // symmetric range separately.
        for (int32_t v : l.integer_weights.data)
            if (v < lo || v > hi) throw RangeError("integer weight outside quantization range");
        for (int32_t v : l.integer_bias)
            if (v < lo || v > hi) throw RangeError("integer bias outside quantization range");
        if (i + 1 < layers.size() && l.activation == Activation::kNone)
            throw ConfigError("activation 'none' is only allowed on the output layer");
        prev = l.out_dim();
    }
}

namespace {

Layer layer_from_json(const json& j) {
    Layer l;
    std::string kind = j.value("kind", "affine");
    if (kind == "affine") {
        l.kind = LayerKind::kAffine;
    } else if (kind == "conv2d") {
        l.kind = LayerKind::kConv2d;
    } else {
        throw ParseError("unknown layer kind: " + kind);
    }

    const auto& w = j.at("integer_weights");
    if (!w.is_array() || w.empty()) throw ParseError("integer_weights must be a non-empty array");
    int rows = static_cast<int>(w.size());
    int cols = static_cast<int>(w.at(0).size());
    l.integer_weights = IntMatrix(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const auto& row = w.at(static_cast<size_t>(r));
        if (static_cast<int>(row.size()) != cols)
            throw ParseError("ragged integer_weights rows");
        for (int c = 0; c < cols; ++c)
            l.integer_weights.at(r, c) = row.at(static_cast<size_t>(c)).get<int32_t>();
    }
    l.integer_bias = j.at("integer_bias").get<std::vector<int32_t>>();
    l.step_size = j.at("step_size").get<double>();
    l.activation = activation_from_string(j.at("activation").get<std::string>());
    if (l.kind == LayerKind::kConv2d) {
        ConvMeta m;
        m.in_height = j.at("in_height").get<int>();
        m.in_width = j.at("in_width").get<int>();
        m.kernel_height = j.at("kernel_height").get<int>();
        m.kernel_width = j.at("kernel_width").get<int>();
        m.stride = j.value("stride", 1);
        if (j.value("padding", 0) != 0) throw ConfigError("conv padding is not supported");
        l.conv = m;
    }
    return l;
}

json layer_to_json(const Layer& l) {
    json j;
    j["kind"] = l.kind == LayerKind::kAffine ? "affine" : "conv2d";
    json w = json::array();
    for (int r = 0; r < l.integer_weights.rows; ++r) {
        json row = json::array();
        for (int c = 0; c < l.integer_weights.cols; ++c) row.push_back(l.integer_weights.at(r, c));
        w.push_back(std::move(row));
    }
    j["integer_weights"] = std::move(w);
    j["integer_bias"] = l.integer_bias;
    j["step_size"] = l.step_size;
    j["activation"] = to_string(l.activation);
    if (l.conv) {
        j["in_height"] = l.conv->in_height;
        j["in_width"] = l.conv->in_width;
        j["kernel_height"] = l.conv->kernel_height;
        j["kernel_width"] = l.conv->kernel_width;
        j["stride"] = l.conv->stride;
    }
    return j;
}

}  // namespace

QuantizedNetwork model_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    }
    QuantizedNetwork net;
    try {
        net.quant_bits = j.at("quant_bits").get<int>();
        if (!j.at("layers").is_array() || j.at("layers").empty())
            throw ParseError("model needs a non-empty layers array");
        for (const auto& lj : j.at("layers")) net.layers.push_back(layer_from_json(lj));
    } catch (const json::exception& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    }
    net.input_dim = net.layers.front().in_dim();
    net.validate();
    // Stored models are pre-attack: integers stay in the symmetric range.
    const int sym_lo = min_int(net.quant_bits) + 1;
    for (const Layer& l : net.layers) {
        for (int32_t v : l.integer_weights.data)
            if (v < sym_lo) throw RangeError("pre-attack integer weight below symmetric range");
        for (int32_t v : l.integer_bias)
            if (v < sym_lo) throw RangeError("pre-attack integer bias below symmetric range");
    }
    return net;
}

QuantizedNetwork load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_json_text(buf.str());
}

std::string model_to_json_text(const QuantizedNetwork& net) {
    json j;
    j["quant_bits"] = net.quant_bits;
    json layers = json::array();
    for (const Layer& l : net.layers) layers.push_back(layer_to_json(l));
    j["layers"] = std::move(layers);
    return j.dump(2);
}

void save_model(const QuantizedNetwork& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open output file: " + path);
    out << model_to_json_text(net) << "\n";
}

namespace {

double apply_activation(Activation a, double v) {
    switch (a) {
        case Activation::kRelu: return v > 0.0 ? v : 0.0;
        case Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-v));
        case Activation::kTanh: return std::tanh(v);
        case Activation::kNone: return v;
    }
    return v;
}

}  // namespace

std::vector<double> conv_forward(const Layer& layer, const std::vector<double>& x) {
    const ConvMeta& m = *layer.conv;
    if (static_cast<int>(x.size()) != m.in_height * m.in_width)
        throw ShapeError("conv_forward: input size mismatch");
    int oh = (m.in_height - m.kernel_height) / m.stride + 1;
    int ow = (m.in_width - m.kernel_width) / m.stride + 1;
    int channels = layer.integer_weights.rows;
    std::vector<double> out(static_cast<size_t>(channels) * oh * ow, 0.0);
    for (int ch = 0; ch < channels; ++ch) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = layer.bias(ch);
                for (int ky = 0; ky < m.kernel_height; ++ky)
                    for (int kx = 0; kx < m.kernel_width; ++kx) {
                        int iy = oy * m.stride + ky;
                        int ix = ox * m.stride + kx;
                        acc += layer.weight(ch, ky * m.kernel_width + kx) *
                               x[static_cast<size_t>(iy) * m.in_width + ix];
                    }
                out[static_cast<size_t>(ch) * oh * ow + static_cast<size_t>(oy) * ow + ox] = acc;
            }
        }
    }
    return out;
}

std::vector<double> forward(const QuantizedNetwork& net, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != net.input_dim)
        throw ShapeError("forward: input dimension mismatch");
    std::vector<double> cur = x;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& l = net.layers[i];
        std::vector<double> next;
        if (l.kind == LayerKind::kConv2d) {
            next = conv_forward(l, cur);
        } else {
            next.assign(static_cast<size_t>(l.integer_weights.rows), 0.0);
            for (int r = 0; r < l.integer_weights.rows; ++r) {
                double acc = l.bias(r);
                for (int c = 0; c < l.integer_weights.cols; ++c)
                    acc += l.weight(r, c) * cur[static_cast<size_t>(c)];
                next[static_cast<size_t>(r)] = acc;
            }
        }
        for (double& v : next) v = apply_activation(l.activation, v);
        cur = std::move(next);
    }
    return cur;
}

int argmax_class(const std::vector<double>& y) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(y.size()); ++i)
        if (y[static_cast<size_t>(i)] > y[static_cast<size_t>(best)]) best = i;
    return best;
}

const std::vector<ParamId>& ParamRemapTable::of(const ParamId& original) const {
    auto it = aliases.find(original);
    if (it == aliases.end()) throw RangeError("no remap entry for " + to_string(original));
    return it->second;
}

LoweredNetwork lower_conv(const QuantizedNetwork& net) {
    net.validate();
    LoweredNetwork out;
    out.net.quant_bits = net.quant_bits;
    out.net.input_dim = net.input_dim;
    for (int li = 2; li <= net.num_layers(); ++li) {
        const Layer& l = net.layer(li);
        if (l.kind == LayerKind::kAffine) {
            out.net.layers.push_back(l);
            for (int r = 0; r < l.integer_weights.rows; ++r)
                for (int c = 0; c < l.integer_weights.cols; ++c) {
                    ParamId p{li, false, r, c};
                    out.remap.aliases[p] = {p};
                }
            for (int r = 0; r < static_cast<int>(l.integer_bias.size()); ++r) {
                ParamId p{li, true, r, 0};
                out.remap.aliases[p] = {p};
            }
            continue;
        }
        const ConvMeta& m = *l.conv;
        int oh = (m.in_height - m.kernel_height) / m.stride + 1;
        int ow = (m.in_width - m.kernel_width) / m.stride + 1;
        int channels = l.integer_weights.rows;
        Layer flat;
        flat.kind = LayerKind::kAffine;
        flat.step_size = l.step_size;
        flat.activation = l.activation;
        flat.integer_weights = IntMatrix(channels * oh * ow, m.in_height * m.in_width);
        flat.integer_bias.assign(static_cast<size_t>(channels) * oh * ow, 0);
        for (int ch = 0; ch < channels; ++ch) {
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    int row = ch * oh * ow + oy * ow + ox;
                    flat.integer_bias[static_cast<size_t>(row)] =
                        l.integer_bias[static_cast<size_t>(ch)];
                    ParamId bias_orig{li, true, ch, 0};
                    out.remap.aliases[bias_orig].push_back(ParamId{li, true, row, 0});
                    for (int ky = 0; ky < m.kernel_height; ++ky)
                        for (int kx = 0; kx < m.kernel_width; ++kx) {
                            int iy = oy * m.stride + ky;
                            int ix = ox * m.stride + kx;
                            int colflat = iy * m.in_width + ix;
                            flat.integer_weights.at(row, colflat) =
                                l.integer_weights.at(ch, ky * m.kernel_width + kx);
                            ParamId tap_orig{li, false, ch, ky * m.kernel_width + kx};
                            out.remap.aliases[tap_orig].push_back(
                                ParamId{li, false, row, colflat});
                        }
                }
        }
        out.net.layers.push_back(std::move(flat));
    }
    out.net.validate();
    return out;
}

QuantizedNetwork generate_synthetic(const SyntheticSpec& spec) {
    if (spec.dims.size() < 2) throw ConfigError("synthetic network needs at least two layers");
    for (int d : spec.dims)
        if (d <= 0) throw ConfigError("synthetic dims must be positive");

    // splitmix64 stream; fixed here so equal seeds give identical networks
    // across platforms and standard-library versions.
    uint64_t state = spec.seed;
    auto next_u64 = [&state]() {
        state += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    auto next_unit = [&next_u64]() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;  // [0, 1)
    };

    QuantizedNetwork net;
    net.quant_bits = spec.quant_bits;
    net.input_dim = spec.dims.front();
    for (size_t i = 1; i < spec.dims.size(); ++i) {
        int rows = spec.dims[i];
        int cols = spec.dims[i - 1];
        Matrix w(rows, cols);
        std::vector<double> b(static_cast<size_t>(rows));
        for (double& v : w.data) v = next_unit() * 2.0 - 1.0;
        for (double& v : b) v = next_unit() * 2.0 - 1.0;
        QuantizedLayerParams qp = quantize_layer(w, b, spec.quant_bits);
        Layer l;
        l.kind = LayerKind::kAffine;
        l.integer_weights = std::move(qp.integer_weights);
        l.integer_bias = std::move(qp.integer_bias);
        l.step_size = qp.step_size;
        l.activation = i + 1 < spec.dims.size() ? spec.activation : Activation::kNone;
        net.layers.push_back(std::move(l));
    }
    net.validate();
    return net;
}

}  // namespace bfav
