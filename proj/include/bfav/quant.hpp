#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bfav/model.hpp"

namespace bfav {

/// Two's complement pattern of width Q. Bit positions are 1-based from the
/// least significant bit, so bit Q is the sign bit, matching the usual
/// [v_Q; ...; v_1] layout.
struct BitPattern {
    uint32_t raw = 0;  // low Q bits
    int width = 0;

    bool bit(int pos) const { return (raw >> (pos - 1)) & 1u; }
    /// Bits most-significant first: {v_Q, ..., v_1}.
    std::vector<int> bits() const;
    std::string to_string() const;  // e.g. "[1001]"

    friend bool operator==(const BitPattern&, const BitPattern&) = default;
};

int32_t min_int(int q);  // -2^(Q-1)
int32_t max_int(int q);  // 2^(Q-1) - 1

BitPattern encode_tc(int32_t v, int q);
int32_t decode_tc(const BitPattern& p);

/// Round-half-to-even to the nearest integer.
int64_t round_half_even(double x);

struct QuantizedLayerParams {
    IntMatrix integer_weights;
    std::vector<int32_t> integer_bias;
    double step_size = 0.0;
};

/// Symmetric per-layer quantization: Δw = maxAbs(W, b) / (2^(Q-1) - 1),
/// entries rounded half-to-even. Throws ConfigError on an all-zero layer.
QuantizedLayerParams quantize_layer(const Matrix& weights, const std::vector<double>& bias,
                                    int q);

/// Every integer reachable from v by flipping between 1 and n distinct bit
/// positions; v itself is excluded. Sorted ascending.
std::vector<int32_t> enumerate_flips(int32_t v, int q, int n);

/// Sign-uniform hull of a set of de-quantized flip candidates.
struct ParamInterval {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> candidates;       // sorted, de-quantized
    std::vector<int32_t> int_candidates;  // same order, integer form

    bool is_point() const { return candidates.size() == 1; }
};

struct SignSplit {
    std::optional<ParamInterval> pos;  // all candidates >= 0 (zero lands here)
    std::optional<ParamInterval> neg;  // all candidates < 0
};

/// Candidates are the de-quantized values of enumerate_flips(v) plus the
/// original value itself ("at most n bits" includes zero flips), partitioned
/// by sign and hulled minimally per side.
SignSplit sign_split_intervals(int32_t v, int q, int n, double step_size);

/// The closed-form hull obtained by flipping the most significant bits only
/// (sign handling per the two value-sign cases). Used as a cross-check
/// against the enumerated hulls, not in the pipeline.
SignSplit sign_split_closed_form(int32_t v, int q, int n, double step_size);

/// A single (m,n) attack instance: per target parameter, the set of bit
/// positions to flip. The pipeline fixes m = 1.
struct AttackVector {
    struct Entry {
        ParamId param;
        std::vector<int> bit_positions;  // each in [1, Q], distinct
    };
    std::vector<Entry> entries;

    int m() const { return static_cast<int>(entries.size()); }
    int n() const;
};

/// Returns a copy of the network with the designated bits XOR-flipped.
/// Self-inverse for a fixed attack vector.
QuantizedNetwork apply_attack(const QuantizedNetwork& net, const AttackVector& attack);

/// Same, but routes each entry through the alias table so a flip on a shared
/// conv parameter lands on every affine copy.
QuantizedNetwork apply_attack(const LoweredNetwork& lowered, const AttackVector& attack);

/// Bit positions on which a and b differ (both width q).
std::vector<int> differing_bits(int32_t a, int32_t b, int q);

}  // namespace bfav
