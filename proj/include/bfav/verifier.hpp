#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bfav/bfa_ra.hpp"
#include "bfav/milp.hpp"

namespace bfav {

/// The job's baseline check failed: the un-attacked network cannot be
/// proved robust, so the bit-flip question is vacuous.
struct BaselineError : std::runtime_error {
    explicit BaselineError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Mode { kRaOnly, kFull, kNaiveBaseline };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct VerificationJob {
    QuantizedNetwork net;
    InputRegion region = InputRegion::box({0.0}, {1.0});
    int target = 0;  // zero-based class
    int n_bits = 1;
    Mode mode = Mode::kFull;
    std::vector<ParamId> scope;  // empty: every parameter
    int workers = 1;
    int64_t ra_budget_ms = -1;    // < 0: unlimited
    int64_t milp_budget_ms = -1;  // < 0: unlimited
    double eps_split = 1e-6;
    double eps_strict = 1e-6;
    bool milp_full_flip_sets = false;  // ignore RA refinement in the MILP stage
    FpSlack slack;

    std::string model_path;      // echoed into the report
    std::string export_lp_path;  // when set in full mode, write the monolithic model
};

enum class OverallStatus { kBfaTolerant, kFalsified, kUnknown, kTimeout };

std::string to_string(OverallStatus s);

struct VerificationReport {
    OverallStatus overall = OverallStatus::kUnknown;
    std::vector<ParamVerdict> verdicts;  // scope order
    std::vector<ParamId> vulnerable;     // sorted by (layer, role, row, col)
    std::optional<MilpWitness> witness;
    int target = 0;
    int n_bits = 1;
    Mode mode = Mode::kFull;
    int64_t analyzer_calls = 0;
    bool ra_timed_out = false;
    bool milp_ran = false;
    bool milp_skipped_unsupported_activation = false;
    MilpOutcome milp;
    double ra_ms = 0.0;
    double milp_ms = 0.0;
    std::string model_path;
};

/// Algorithm: mandatory baseline robustness check, per-parameter BFA_RA
/// sweep (or the naive per-flip baseline), then MILP escalation on the
/// unproved set in full mode. Conv networks are lowered first; parameters
/// keep their original ids.
VerificationReport verify(const VerificationJob& job);

/// True iff the witness attack really misclassifies: apply the flips,
/// run the input, compare argmax (smallest index wins) against g.
bool replay(const QuantizedNetwork& net, const MilpWitness& witness, int g);

std::string report_to_json(const VerificationReport& report);
void write_report(const VerificationReport& report, const std::string& path);

/// Reads back the witness and target recorded by write_report.
struct StoredWitness {
    MilpWitness witness;
    int target = 0;
};
std::optional<StoredWitness> load_witness(const std::string& report_path);

}  // namespace bfav
