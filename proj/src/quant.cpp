#include "bfav/quant.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

namespace bfav {

std::vector<int> BitPattern::bits() const {
    std::vector<int> out(static_cast<size_t>(width));
    for (int pos = width; pos >= 1; --pos) out[static_cast<size_t>(width - pos)] = bit(pos) ? 1 : 0;
    return out;
}

std::string BitPattern::to_string() const {
    std::string s = "[";
    for (int pos = width; pos >= 1; --pos) s += bit(pos) ? '1' : '0';
    return s + "]";
}

int32_t min_int(int q) { return -(1 << (q - 1)); }
int32_t max_int(int q) { return (1 << (q - 1)) - 1; }

BitPattern encode_tc(int32_t v, int q) {
    if (q < 2 || q > 16) throw RangeError("bit width must be in [2, 16]");
    if (v < min_int(q) || v > max_int(q)) throw RangeError("value out of two's-complement range");
    uint32_t mask = (1u << q) - 1u;
    return BitPattern{static_cast<uint32_t>(v) & mask, q};
}

int32_t decode_tc(const BitPattern& p) {
    if (p.width < 2 || p.width > 16) throw RangeError("bit width must be in [2, 16]");
    uint32_t mask = (1u << p.width) - 1u;
    uint32_t raw = p.raw & mask;
    if (raw >> (p.width - 1)) return static_cast<int32_t>(raw) - (1 << p.width);
    return static_cast<int32_t>(raw);
}

int64_t round_half_even(double x) {
    // nearbyint honors the current rounding mode; the default FE_TONEAREST
    // is round-half-to-even.
    return static_cast<int64_t>(std::nearbyint(x));
}

QuantizedLayerParams quantize_layer(const Matrix& weights, const std::vector<double>& bias,
                                    int q) {
    if (q < 2 || q > 16) throw RangeError("quant_bits must be in [2, 16]");
    double max_abs = 0.0;
    for (double v : weights.data) max_abs = std::max(max_abs, std::fabs(v));
    for (double v : bias) max_abs = std::max(max_abs, std::fabs(v));
    if (max_abs == 0.0) throw ConfigError("cannot quantize an all-zero layer");

    QuantizedLayerParams out;
    out.step_size = max_abs / static_cast<double>(max_int(q));
    out.integer_weights = IntMatrix(weights.rows, weights.cols);
    for (size_t i = 0; i < weights.data.size(); ++i)
        out.integer_weights.data[i] = static_cast<int32_t>(round_half_even(weights.data[i] / out.step_size));
    out.integer_bias.resize(bias.size());
    for (size_t i = 0; i < bias.size(); ++i)
        out.integer_bias[i] = static_cast<int32_t>(round_half_even(bias[i] / out.step_size));
    return out;
}

std::vector<int32_t> enumerate_flips(int32_t v, int q, int n) {
    if (n < 1 || n > q) throw RangeError("flip count must be in [1, Q]");
    uint32_t base = encode_tc(v, q).raw;
    std::vector<int32_t> out;
    uint32_t limit = 1u << q;
    for (uint32_t mask = 1; mask < limit; ++mask) {
        if (std::popcount(mask) > n) continue;
        out.push_back(decode_tc(BitPattern{base ^ mask, q}));
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

ParamInterval make_interval(std::vector<int32_t> ints, double step) {
    std::sort(ints.begin(), ints.end());
    ParamInterval iv;
    iv.int_candidates = std::move(ints);
    iv.candidates.reserve(iv.int_candidates.size());
    for (int32_t v : iv.int_candidates) iv.candidates.push_back(v * step);
    iv.lo = iv.candidates.front();
    iv.hi = iv.candidates.back();
    return iv;
}

}  // namespace

SignSplit sign_split_intervals(int32_t v, int q, int n, double step_size) {
    if (step_size <= 0.0) throw ConfigError("step size must be > 0");
    std::vector<int32_t> values = enumerate_flips(v, q, n);
    values.push_back(v);  // zero flips
    std::vector<int32_t> pos, neg;
    for (int32_t c : values) (c >= 0 ? pos : neg).push_back(c);

    SignSplit split;
    if (!pos.empty()) split.pos = make_interval(std::move(pos), step_size);
    if (!neg.empty()) split.neg = make_interval(std::move(neg), step_size);
    return split;
}

SignSplit sign_split_closed_form(int32_t v, int q, int n, double step_size) {
    if (n < 1 || n > q) throw RangeError("flip count must be in [1, Q]");
    uint32_t base = encode_tc(v, q).raw;
    uint32_t sign_bit = 1u << (q - 1);

    // Flip up to `budget` magnitude bits, most significant first, in the
    // given direction (1->0 clears set bits, 0->1 sets clear bits).
    auto flip_msb = [&](uint32_t pattern, int budget, bool set_bits) {
        for (int pos = q - 1; pos >= 1 && budget > 0; --pos) {
            uint32_t bit = 1u << (pos - 1);
            bool is_set = pattern & bit;
            if (set_bits == !is_set) {
                pattern ^= bit;
                --budget;
            }
        }
        return pattern;
    };

    auto dec = [&](uint32_t p) { return decode_tc(BitPattern{p, q}); };

    SignSplit split;
    std::vector<int32_t> pos_vals, neg_vals;
    if (v >= 0) {
        pos_vals = {dec(flip_msb(base, n, false)), dec(flip_msb(base, n, true))};
        neg_vals = {dec(flip_msb(base ^ sign_bit, n - 1, false)),
                    dec(flip_msb(base ^ sign_bit, n - 1, true))};
    } else {
        pos_vals = {dec(flip_msb(base ^ sign_bit, n - 1, false)),
                    dec(flip_msb(base ^ sign_bit, n - 1, true))};
        neg_vals = {dec(flip_msb(base, n, false)), dec(flip_msb(base, n, true))};
    }

    auto as_interval = [&](std::vector<int32_t> vals) {
        std::sort(vals.begin(), vals.end());
        ParamInterval iv;
        iv.int_candidates = {vals.front(), vals.back()};
        iv.candidates = {vals.front() * step_size, vals.back() * step_size};
        iv.lo = iv.candidates.front();
        iv.hi = iv.candidates.back();
        return iv;
    };
    split.pos = as_interval(std::move(pos_vals));
    split.neg = as_interval(std::move(neg_vals));
    return split;
}

int AttackVector::n() const {
    int best = 0;
    for (const Entry& e : entries) best = std::max(best, static_cast<int>(e.bit_positions.size()));
    return best;
}

namespace {

int32_t flip_bits(int32_t v, const std::vector<int>& positions, int q) {
    uint32_t raw = encode_tc(v, q).raw;
    std::set<int> seen;
    for (int pos : positions) {
        if (pos < 1 || pos > q) throw RangeError("bit position out of [1, Q]");
        if (!seen.insert(pos).second) throw RangeError("duplicate bit position in attack");
        raw ^= 1u << (pos - 1);
    }
    return decode_tc(BitPattern{raw, q});
}

}  // namespace

QuantizedNetwork apply_attack(const QuantizedNetwork& net, const AttackVector& attack) {
    QuantizedNetwork out = net;
    for (const AttackVector::Entry& e : attack.entries) {
        if (e.param.layer < 2 || e.param.layer > net.num_layers())
            throw RangeError("attack layer out of range: " + to_string(e.param));
        int32_t v = out.int_param(e.param);
        out.set_int_param(e.param, flip_bits(v, e.bit_positions, net.quant_bits));
    }
    return out;
}

QuantizedNetwork apply_attack(const LoweredNetwork& lowered, const AttackVector& attack) {
    QuantizedNetwork out = lowered.net;
    for (const AttackVector::Entry& e : attack.entries) {
        for (const ParamId& alias : lowered.remap.of(e.param)) {
            int32_t v = out.int_param(alias);
            out.set_int_param(alias, flip_bits(v, e.bit_positions, out.quant_bits));
        }
    }
    return out;
}

std::vector<int> differing_bits(int32_t a, int32_t b, int q) {
    uint32_t x = encode_tc(a, q).raw ^ encode_tc(b, q).raw;
    std::vector<int> out;
    for (int pos = 1; pos <= q; ++pos)
        if ((x >> (pos - 1)) & 1u) out.push_back(pos);
    return out;
}

}  // namespace bfav
