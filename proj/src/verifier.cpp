#include "bfav/verifier.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <set>
#include <thread>

#include <json.hpp>

#include "bfav/lp_format.hpp"

namespace bfav {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string to_string(Mode m) {
    switch (m) {
        case Mode::kRaOnly: return "ra_only";
        case Mode::kFull: return "full";
        case Mode::kNaiveBaseline: return "naive_baseline";
    }
    return "full";
}

Mode mode_from_string(const std::string& s) {
    if (s == "ra_only") return Mode::kRaOnly;
    if (s == "full") return Mode::kFull;
    if (s == "naive_baseline") return Mode::kNaiveBaseline;
    throw ConfigError("unknown mode: " + s);
}

std::string to_string(OverallStatus s) {
    switch (s) {
        case OverallStatus::kBfaTolerant: return "bfa_tolerant";
        case OverallStatus::kFalsified: return "falsified";
        case OverallStatus::kUnknown: return "unknown";
        case OverallStatus::kTimeout: return "timeout";
    }
    return "unknown";
}

namespace {

double ms_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}

bool relu_only(const QuantizedNetwork& net) {
    for (const Layer& l : net.layers)
        if (l.activation != Activation::kRelu && l.activation != Activation::kNone) return false;
    return true;
}

/// F for the MILP stage: by default the candidates the RA pass failed to
/// prove (minus the original value); optionally the full flip sets.
VulnerableParam make_vulnerable(const QuantizedNetwork& net, const ParamVerdict& verdict,
                                int n_bits, bool full_sets, const ParamRemapTable* remap) {
    VulnerableParam vp;
    vp.param = verdict.param;
    ParamId addr = remap ? remap->of(verdict.param).front() : verdict.param;
    vp.original_int = net.int_param(addr);
    double step = net.layer(verdict.param.layer).step_size;
    vp.original_value = vp.original_int * step;

    std::set<int32_t> ints;
    if (full_sets) {
        for (int32_t v : enumerate_flips(vp.original_int, net.quant_bits, n_bits)) ints.insert(v);
    } else {
        for (const ParamInterval& iv : verdict.unresolved_subintervals)
            for (int32_t v : iv.int_candidates)
                if (v != vp.original_int) ints.insert(v);
    }
    for (int32_t v : ints) {
        vp.flip_ints.push_back(v);
        vp.flip_values.push_back(v * step);
    }
    return vp;
}

}  // namespace

VerificationReport verify(const VerificationJob& job) {
    job.net.validate();
    if (job.n_bits < 1 || job.n_bits > job.net.quant_bits)
        throw ConfigError("bit budget must be in [1, Q]");
    if (job.target < 0 || job.target >= job.net.output_dim())
        throw RangeError("target class out of range");

    // Work on the affine view; conv parameters keep their original ids and
    // fan out through the alias table.
    LoweredNetwork lowered;
    const ParamRemapTable* remap = nullptr;
    const QuantizedNetwork* net = &job.net;
    if (job.net.has_conv()) {
        lowered = lower_conv(job.net);
        net = &lowered.net;
        remap = &lowered.remap;
    }

    VerificationReport report;
    report.mode = job.mode;
    report.target = job.target;
    report.n_bits = job.n_bits;
    report.model_path = job.model_path;

    // Mandatory baseline: the single-flip encoding assumes the un-attacked
    // network already satisfies the property.
    if (analyze(*net, job.region, job.target, std::nullopt, job.slack).result !=
        CheckResult::kProved)
        throw BaselineError("baseline robustness check failed; the job is vacuous");

    std::vector<ParamId> scope = job.scope.empty() ? job.net.all_params() : job.scope;
    for (const ParamId& p : scope) {
        if (p.layer < 2 || p.layer > job.net.num_layers())
            throw RangeError("scope parameter out of range: " + to_string(p));
        (void)job.net.int_param(p);  // validates row/col
    }

    RaOptions ra_opts;
    ra_opts.remap = remap;
    ra_opts.slack = job.slack;

    std::optional<Clock::time_point> ra_deadline;
    if (job.ra_budget_ms >= 0)
        ra_deadline = Clock::now() + std::chrono::milliseconds(job.ra_budget_ms);

    Clock::time_point ra_start = Clock::now();
    report.verdicts.assign(scope.size(), ParamVerdict{});
    std::vector<char> analyzed(scope.size(), 0);
    std::atomic<size_t> cursor{0};
    std::atomic<bool> timed_out{false};

    auto worker = [&]() {
        for (;;) {
            size_t i = cursor.fetch_add(1);
            if (i >= scope.size()) return;
            if (ra_deadline && Clock::now() >= *ra_deadline) {
                timed_out.store(true);
                return;
            }
            const ParamId& p = scope[i];
            report.verdicts[i] = job.mode == Mode::kNaiveBaseline
                                     ? naive_check(*net, job.region, job.target, p, job.n_bits,
                                                   ra_opts)
                                     : bfa_ra(*net, job.region, job.target, p, job.n_bits,
                                              ra_opts);
            analyzed[i] = 1;
        }
    };

    int workers = std::max(1, job.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    report.ra_ms = ms_between(ra_start, Clock::now());
    report.ra_timed_out = timed_out.load();

    for (size_t i = 0; i < scope.size(); ++i) {
        if (!analyzed[i]) {  // never ran before the deadline
            report.verdicts[i].param = scope[i];
            report.verdicts[i].status = ParamStatus::kUnknown;
        }
        report.analyzer_calls += report.verdicts[i].analyzer_calls;
        if (report.verdicts[i].status == ParamStatus::kUnknown)
            report.vulnerable.push_back(scope[i]);
    }
    std::sort(report.vulnerable.begin(), report.vulnerable.end());

    if (report.ra_timed_out) {
        report.overall = OverallStatus::kTimeout;
        return report;
    }

    if (job.mode != Mode::kFull) {
        report.overall =
            report.vulnerable.empty() ? OverallStatus::kBfaTolerant : OverallStatus::kUnknown;
        return report;
    }

    // Full mode: escalate the unproved set to the complete MILP stage.
    std::vector<VulnerableParam> xi;
    for (const ParamVerdict& v : report.verdicts)
        if (v.status == ParamStatus::kUnknown)
            xi.push_back(make_vulnerable(*net, v, job.n_bits, job.milp_full_flip_sets, remap));
    std::sort(xi.begin(), xi.end(),
              [](const VulnerableParam& a, const VulnerableParam& b) { return a.param < b.param; });

    if (!job.export_lp_path.empty()) {
        if (!relu_only(*net))
            throw ConfigError("LP export needs a ReLU network");
        MilpBuildOptions build_opts;
        build_opts.eps_strict = job.eps_strict;
        build_opts.remap = remap;
        build_opts.slack = job.slack;
        export_lp(build_milp(*net, job.region, job.target, xi, build_opts), job.export_lp_path);
    }

    if (xi.empty()) {
        report.overall = OverallStatus::kBfaTolerant;
        return report;
    }

    if (!relu_only(*net)) {
        // Sigmoid/tanh networks stop at the sound stage; the piecewise
        // encoding is out of scope.
        report.milp_skipped_unsupported_activation = true;
        report.overall = OverallStatus::kUnknown;
        return report;
    }

    MilpSolveOptions solve_opts;
    solve_opts.eps_split = job.eps_split;
    solve_opts.budget_ms = job.milp_budget_ms;
    solve_opts.remap = remap;
    solve_opts.slack = job.slack;

    Clock::time_point milp_start = Clock::now();
    report.milp = bfa_milp(*net, job.region, job.target, xi, solve_opts);
    report.milp_ms = ms_between(milp_start, Clock::now());
    report.milp_ran = true;

    switch (report.milp.status) {
        case MilpStatus::kProved: report.overall = OverallStatus::kBfaTolerant; break;
        case MilpStatus::kFalsified:
            report.overall = OverallStatus::kFalsified;
            report.witness = report.milp.witness;
            break;
        case MilpStatus::kEpsUndecided: report.overall = OverallStatus::kUnknown; break;
        case MilpStatus::kTimeout: report.overall = OverallStatus::kTimeout; break;
    }
    return report;
}

bool replay(const QuantizedNetwork& net, const MilpWitness& witness, int g) {
    QuantizedNetwork attacked;
    if (net.has_conv()) {
        attacked = apply_attack(lower_conv(net), witness.attack);
    } else {
        attacked = apply_attack(net, witness.attack);
    }
    std::vector<double> y = forward(attacked, witness.input);
    return argmax_class(y) != g;
}

namespace {

json param_to_json(const ParamId& p) {
    json j;
    j["layer"] = p.layer;
    j["role"] = p.is_bias ? "bias" : "weight";
    j["row"] = p.row;
    if (!p.is_bias) j["col"] = p.col;
    return j;
}

ParamId param_from_json(const json& j) {
    ParamId p;
    p.layer = j.at("layer").get<int>();
    p.is_bias = j.at("role").get<std::string>() == "bias";
    p.row = j.at("row").get<int>();
    p.col = p.is_bias ? 0 : j.at("col").get<int>();
    return p;
}

json interval_to_json(const ParamInterval& iv) {
    json j;
    j["lo"] = iv.lo;
    j["hi"] = iv.hi;
    j["candidates"] = iv.candidates;
    j["int_candidates"] = iv.int_candidates;
    return j;
}

const char* milp_status_text(MilpStatus s) {
    switch (s) {
        case MilpStatus::kProved: return "proved";
        case MilpStatus::kFalsified: return "falsified";
        case MilpStatus::kEpsUndecided: return "eps_undecided";
        case MilpStatus::kTimeout: return "timeout";
    }
    return "timeout";
}

json witness_to_json(const MilpWitness& w) {
    json j;
    json entries = json::array();
    for (const AttackVector::Entry& e : w.attack.entries) {
        json ej;
        ej["param"] = param_to_json(e.param);
        ej["bits"] = e.bit_positions;
        entries.push_back(std::move(ej));
    }
    j["attack"] = std::move(entries);
    j["input"] = w.input;
    j["output"] = w.output;
    return j;
}

}  // namespace

std::string report_to_json(const VerificationReport& report) {
    json j;
    j["schema_version"] = 1;
    j["overall"] = to_string(report.overall);
    j["mode"] = to_string(report.mode);
    j["target_class"] = report.target;
    j["bits"] = report.n_bits;
    if (!report.model_path.empty()) j["model"] = report.model_path;
    j["analyzer_calls"] = report.analyzer_calls;

    json verdicts = json::array();
    for (const ParamVerdict& v : report.verdicts) {
        json vj;
        vj["param"] = param_to_json(v.param);
        vj["status"] = v.status == ParamStatus::kSafe ? "safe" : "unknown";
        vj["analyzer_calls"] = v.analyzer_calls;
        json proved = json::array(), unresolved = json::array();
        for (const ParamInterval& iv : v.proved_subintervals) proved.push_back(interval_to_json(iv));
        for (const ParamInterval& iv : v.unresolved_subintervals)
            unresolved.push_back(interval_to_json(iv));
        vj["proved_intervals"] = std::move(proved);
        vj["unresolved_intervals"] = std::move(unresolved);
        verdicts.push_back(std::move(vj));
    }
    j["parameters"] = std::move(verdicts);

    json vuln = json::array();
    for (const ParamId& p : report.vulnerable) vuln.push_back(param_to_json(p));
    j["vulnerable"] = std::move(vuln);

    if (report.milp_ran) {
        json mj;
        mj["status"] = milp_status_text(report.milp.status);
        mj["assignments_checked"] = report.milp.assignments_checked;
        mj["assignments_total"] = report.milp.assignments_total;
        mj["boxes_explored"] = report.milp.boxes_explored;
        j["milp"] = std::move(mj);
    }
    if (report.milp_skipped_unsupported_activation) j["milp_skipped"] = "unsupported_activation";
    if (report.witness) j["witness"] = witness_to_json(*report.witness);

    json timings;
    timings["ra_ms"] = report.ra_ms;
    timings["milp_ms"] = report.milp_ms;
    j["timings"] = std::move(timings);
    return j.dump(2);
}

void write_report(const VerificationReport& report, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open report output file: " + path);
    f << report_to_json(report) << "\n";
}

std::optional<StoredWitness> load_witness(const std::string& report_path) {
    std::ifstream f(report_path);
    if (!f) throw ParseError("cannot open report file: " + report_path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw ParseError(std::string("report JSON: ") + e.what());
    }
    if (!j.contains("witness")) return std::nullopt;
    StoredWitness out;
    out.target = j.at("target_class").get<int>();
    const json& w = j.at("witness");
    for (const json& ej : w.at("attack")) {
        AttackVector::Entry e;
        e.param = param_from_json(ej.at("param"));
        e.bit_positions = ej.at("bits").get<std::vector<int>>();
        out.witness.attack.entries.push_back(std::move(e));
    }
    out.witness.input = w.at("input").get<std::vector<double>>();
    out.witness.output = w.at("output").get<std::vector<double>>();
    return out;
}

}  // namespace bfav
