#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bfav/absdomain.hpp"
#include "bfav/quant.hpp"

namespace bfav {

struct MilpVar {
    std::string name;
    double lo = 0.0;
    double hi = 0.0;
    bool is_binary = false;

    friend bool operator==(const MilpVar&, const MilpVar&) = default;
};

struct MilpTerm {
    int var = 0;
    double coef = 0.0;

    friend bool operator==(const MilpTerm&, const MilpTerm&) = default;
};

enum class Sense { kLe, kGe, kEq };

struct MilpConstraint {
    std::string name;
    std::vector<MilpTerm> terms;  // sorted by var index, no duplicates
    Sense sense = Sense::kLe;
    double rhs = 0.0;

    friend bool operator==(const MilpConstraint&, const MilpConstraint&) = default;
};

/// Objective-free feasibility model.
struct MilpModel {
    std::vector<MilpVar> vars;
    std::vector<MilpConstraint> constraints;
    /// One entry per big-M use: the M and the largest |value| the bounded
    /// expression can reach. Not serialized.
    std::vector<std::pair<double, double>> bigm_audit;

    int add_var(std::string name, double lo, double hi, bool is_binary = false);
    void add_constraint(std::string name, std::vector<MilpTerm> terms, Sense sense, double rhs);
    int var_index(const std::string& name) const;  // -1 if absent

    bool bigm_sufficient() const;  // every M strictly dominates its expression
};

/// Structural equality ignoring the audit log.
bool models_equal(const MilpModel& a, const MilpModel& b);

/// One susceptible parameter with its de-quantized flip candidates
/// (original value excluded).
struct VulnerableParam {
    ParamId param;
    int32_t original_int = 0;
    double original_value = 0.0;
    std::vector<int32_t> flip_ints;
    std::vector<double> flip_values;
};

/// Per-dimension input bounds (the region constraints materialize as
/// variable bounds).
std::vector<std::pair<double, double>> encode_input_region(const InputRegion& region);

struct MilpBuildOptions {
    double eps_strict = 1e-6;
    const ParamRemapTable* remap = nullptr;
    FpSlack slack;
};

/// Adds the misclassification property: binaries eta_i with
///   i < g:  y_i >= y_g  <=>  eta_i = 1
///   i > g:  y_i >  y_g  <=>  eta_i = 1   (strict side carries eps_strict)
/// plus sum eta >= 1, so the model is infeasible iff argmax stays g.
void encode_output_property(MilpModel& model, const std::vector<int>& y_vars, int g,
                            const std::vector<std::pair<double, double>>& y_bounds,
                            double eps_strict);

/// Adds one continuous w-tilde per parameter, its selector equality over
/// the delta binaries, and the single-attack constraint sum delta = 1.
/// Returns the w-tilde variable indices.
std::vector<int> encode_attack_choice(MilpModel& model, const std::vector<VulnerableParam>& xi);

/// The full feasibility problem: input bounds, big-M network encoding with
/// w-tilde substituted into attacked rows (delta*x products linearized by
/// McCormick over the bounds from the symbolic pass), attack choice, and
/// the output property. ReLU networks only.
MilpModel build_milp(const QuantizedNetwork& net, const InputRegion& region, int g,
                     const std::vector<VulnerableParam>& xi, const MilpBuildOptions& opts = {});

enum class MilpStatus { kProved, kFalsified, kEpsUndecided, kTimeout };

struct MilpWitness {
    AttackVector attack;
    std::vector<double> input;
    std::vector<double> output;
};

struct MilpOutcome {
    MilpStatus status = MilpStatus::kTimeout;
    std::optional<MilpWitness> witness;
    int64_t assignments_checked = 0;
    int64_t assignments_total = 0;
    int64_t boxes_explored = 0;
};

struct MilpSolveOptions {
    double eps_split = 1e-6;
    int64_t budget_ms = -1;  // < 0: unlimited; 0: immediate timeout
    const ParamRemapTable* remap = nullptr;
    FpSlack slack;
};

/// Built-in backend: enumerates the one-hot delta assignments and closes
/// each attacked network by input-splitting branch-and-bound (DeepPoly box
/// pruning, concrete center/corner probing, widest-dimension splits).
/// Complete up to eps_split; exact on point regions.
MilpOutcome bfa_milp(const QuantizedNetwork& net, const InputRegion& region, int g,
                     const std::vector<VulnerableParam>& xi, const MilpSolveOptions& opts = {});

}  // namespace bfav
