#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bfav/model.hpp"

namespace bfav::testing {

/// splitmix64; keeps test data identical across platforms.
struct Rng {
    uint64_t state;
    explicit Rng(uint64_t seed) : state(seed) {}

    uint64_t next_u64() {
        state += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double in(double lo, double hi) { return lo + (hi - lo) * unit(); }
    int index(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }
};

inline std::string data_path(const std::string& name) {
    return std::string(BFAV_TEST_DATA) + "/" + name;
}

/// Concrete values of every node, computed layer by layer with plain
/// arithmetic; the reference the abstract bounds are checked against.
struct LayerValues {
    std::vector<std::vector<double>> pre;   // [layer-2][j]
    std::vector<std::vector<double>> post;  // hidden layers only
};

inline double act_of(Activation a, double v) {
    switch (a) {
        case Activation::kRelu: return v > 0.0 ? v : 0.0;
        case Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-v));
        case Activation::kTanh: return std::tanh(v);
        case Activation::kNone: return v;
    }
    return v;
}

inline LayerValues eval_nodes(const QuantizedNetwork& net, const std::vector<double>& x) {
    LayerValues out;
    std::vector<double> cur = x;
    for (int li = 2; li <= net.num_layers(); ++li) {
        const Layer& l = net.layer(li);
        std::vector<double> pre(static_cast<size_t>(l.out_dim()));
        for (int j = 0; j < l.out_dim(); ++j) {
            double acc = l.bias(j);
            for (int c = 0; c < l.integer_weights.cols; ++c)
                acc += l.weight(j, c) * cur[static_cast<size_t>(c)];
            pre[static_cast<size_t>(j)] = acc;
        }
        out.pre.push_back(pre);
        if (li < net.num_layers()) {
            std::vector<double> post(pre.size());
            for (size_t j = 0; j < pre.size(); ++j) post[j] = act_of(l.activation, pre[j]);
            out.post.push_back(post);
            cur = std::move(post);
        }
    }
    return out;
}

inline QuantizedNetwork random_net(Rng& rng, std::vector<int> dims, int qbits,
                                   Activation act = Activation::kRelu) {
    SyntheticSpec spec;
    spec.dims = std::move(dims);
    spec.quant_bits = qbits;
    spec.activation = act;
    spec.seed = rng.next_u64();
    return generate_synthetic(spec);
}

}  // namespace bfav::testing
