#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bfav/lp_format.hpp"
#include "bfav/verifier.hpp"

namespace {

// Exit codes: 0 tolerant, 1 falsified, 2 unknown/timeout, 3 usage,
// 4 IO/model error, 5 vacuous baseline.
constexpr int kExitTolerant = 0;
constexpr int kExitFalsified = 1;
constexpr int kExitUnknown = 2;
constexpr int kExitUsage = 3;
constexpr int kExitIo = 4;
constexpr int kExitVacuous = 5;

std::vector<double> load_vector(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw bfav::ParseError("cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(f, nullptr, true, true);
    return j.get<std::vector<double>>();
}

bfav::InputRegion load_box(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw bfav::ParseError("cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(f, nullptr, true, true);
    return bfav::InputRegion::box(j.at("lower").get<std::vector<double>>(),
                                  j.at("upper").get<std::vector<double>>());
}

// Scope grammar: "all", "layer:<L>", or a comma-separated list of
// "w:<layer>:<row>:<col>" / "b:<layer>:<row>" entries.
std::vector<bfav::ParamId> parse_scope(const std::string& text, const bfav::QuantizedNetwork& net) {
    if (text.empty() || text == "all") return {};
    if (text.rfind("layer:", 0) == 0) {
        int layer = std::stoi(text.substr(6));
        std::vector<bfav::ParamId> out;
        for (const bfav::ParamId& p : net.all_params())
            if (p.layer == layer) out.push_back(p);
        if (out.empty()) throw bfav::ConfigError("scope layer has no parameters: " + text);
        return out;
    }
    std::vector<bfav::ParamId> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::istringstream fields(item);
        std::string role, tok;
        std::vector<int> nums;
        std::getline(fields, role, ':');
        while (std::getline(fields, tok, ':')) nums.push_back(std::stoi(tok));
        bfav::ParamId p;
        if (role == "w" && nums.size() == 3) {
            p = bfav::ParamId{nums[0], false, nums[1], nums[2]};
        } else if (role == "b" && nums.size() == 2) {
            p = bfav::ParamId{nums[0], true, nums[1], 0};
        } else {
            throw bfav::ConfigError("bad scope entry: " + item);
        }
        out.push_back(p);
    }
    return out;
}

int64_t seconds_to_ms(double s) {
    if (s < 0) return -1;
    return static_cast<int64_t>(s * 1000.0);
}

int run_verify(const std::string& model_path, const std::string& center_path, double radius,
               const std::string& box_path, int target, int bits, const std::string& mode_text,
               const std::string& scope_text, int workers, double timeout_ra, double timeout_milp,
               double eps_split, double eps_strict, bool full_flip_sets,
               const std::string& export_lp_path, const std::string& out_path) {
    bfav::VerificationJob job;
    job.net = bfav::load_model(model_path);
    job.model_path = model_path;
    if (!box_path.empty()) {
        job.region = load_box(box_path);
    } else if (!center_path.empty()) {
        job.region = bfav::InputRegion::linf_ball(load_vector(center_path), radius);
    } else {
        std::cerr << "either --box or --center/--radius is required\n";
        return kExitUsage;
    }
    if (target < 1 || target > job.net.output_dim()) {
        std::cerr << "--target is 1-based and must be in [1, " << job.net.output_dim() << "]\n";
        return kExitUsage;
    }
    job.target = target - 1;
    job.n_bits = bits;
    job.mode = bfav::mode_from_string(mode_text);
    job.scope = parse_scope(scope_text, job.net);
    job.workers = workers;
    job.ra_budget_ms = seconds_to_ms(timeout_ra);
    job.milp_budget_ms = seconds_to_ms(timeout_milp);
    job.eps_split = eps_split;
    job.eps_strict = eps_strict;
    job.milp_full_flip_sets = full_flip_sets;
    job.export_lp_path = export_lp_path;

    bfav::VerificationReport report = bfav::verify(job);
    if (!out_path.empty()) bfav::write_report(report, out_path);
    std::cout << "overall: " << bfav::to_string(report.overall) << "\n";
    std::cout << "vulnerable parameters: " << report.vulnerable.size() << "\n";
    std::cout << "analyzer calls: " << report.analyzer_calls << "\n";
    if (report.witness) {
        const auto& e = report.witness->attack.entries.front();
        std::cout << "witness: " << bfav::to_string(e.param) << " bits";
        for (int b : e.bit_positions) std::cout << ' ' << b;
        std::cout << "\n";
    }
    switch (report.overall) {
        case bfav::OverallStatus::kBfaTolerant: return kExitTolerant;
        case bfav::OverallStatus::kFalsified: return kExitFalsified;
        case bfav::OverallStatus::kUnknown:
        case bfav::OverallStatus::kTimeout: return kExitUnknown;
    }
    return kExitUnknown;
}

int run_replay(const std::string& model_path, const std::string& report_path) {
    bfav::QuantizedNetwork net = bfav::load_model(model_path);
    std::optional<bfav::StoredWitness> stored = bfav::load_witness(report_path);
    if (!stored) {
        std::cout << "report carries no witness\n";
        return kExitUnknown;
    }
    bool ok = bfav::replay(net, stored->witness, stored->target);
    std::cout << (ok ? "witness replays: misclassification confirmed\n"
                     : "witness does NOT replay\n");
    return ok ? 0 : 1;
}

int run_gen(const std::string& out_path, const std::string& dims_text, int qbits,
            const std::string& activation, uint64_t seed) {
    bfav::SyntheticSpec spec;
    std::istringstream in(dims_text);
    std::string tok;
    while (std::getline(in, tok, ',')) spec.dims.push_back(std::stoi(tok));
    spec.quant_bits = qbits;
    spec.activation = bfav::activation_from_string(activation);
    spec.seed = seed;
    bfav::save_model(bfav::generate_synthetic(spec), out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BFAVerifier: proves or falsifies single-parameter bit-flip robustness of "
                 "quantized networks"};
    app.require_subcommand(1);

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "run the verification pipeline");
    std::string model_path, center_path, box_path, mode_text = "full", scope_text = "all";
    std::string export_lp_path, out_path;
    double radius = 0.0, timeout_ra = -1.0, timeout_milp = -1.0;
    double eps_split = 1e-6, eps_strict = 1e-6;
    int target = 1, bits = 1, workers = 1;
    bool full_flip_sets = false;
    verify_cmd->add_option("--model", model_path, "model JSON file")->required();
    verify_cmd->add_option("--center", center_path, "JSON vector; center of the L-inf ball");
    verify_cmd->add_option("--radius", radius, "L-inf radius (with --center)");
    verify_cmd->add_option("--box", box_path, "JSON {lower:[],upper:[]} input box");
    verify_cmd->add_option("--target", target, "target class, 1-based")->required();
    verify_cmd->add_option("--bits", bits, "max bits to flip per parameter");
    verify_cmd->add_option("--mode", mode_text, "ra_only | full | naive_baseline");
    verify_cmd->add_option("--scope", scope_text,
                           "all | layer:<L> | w:<L>:<r>:<c>,b:<L>:<r>,... (rows/cols 0-based)");
    verify_cmd->add_option("--workers", workers, "parallel parameter tasks");
    verify_cmd->add_option("--timeout-ra", timeout_ra, "seconds; <0 = unlimited");
    verify_cmd->add_option("--timeout-milp", timeout_milp, "seconds; <0 = unlimited");
    verify_cmd->add_option("--eps-split", eps_split, "box width resolution of the MILP stage");
    verify_cmd->add_option("--eps-strict", eps_strict, "margin realizing strict inequalities");
    verify_cmd->add_flag("--full-flip-sets", full_flip_sets,
                         "ignore RA interval refinement in the MILP stage");
    verify_cmd->add_option("--export-lp", export_lp_path, "write the monolithic MILP (LP format)");
    verify_cmd->add_option("--out", out_path, "report JSON path");

    // replay
    auto* replay_cmd = app.add_subcommand("replay", "re-execute a report's witness");
    std::string replay_model, replay_report;
    replay_cmd->add_option("--model", replay_model, "model JSON file")->required();
    replay_cmd->add_option("--report", replay_report, "report JSON file")->required();

    // gen
    auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic quantized network");
    std::string gen_out, gen_dims = "2,3,2", gen_act = "relu";
    int gen_qbits = 4;
    uint64_t gen_seed = 0;
    gen_cmd->add_option("--out", gen_out, "output model path")->required();
    gen_cmd->add_option("--dims", gen_dims, "comma-separated layer sizes");
    gen_cmd->add_option("--qbits", gen_qbits, "quantization bit width");
    gen_cmd->add_option("--activation", gen_act, "relu | sigmoid | tanh");
    gen_cmd->add_option("--seed", gen_seed, "rng seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the message / help
        return e.get_exit_code() == 0 ? 0 : kExitUsage;
    }

    try {
        if (*verify_cmd)
            return run_verify(model_path, center_path, radius, box_path, target, bits, mode_text,
                              scope_text, workers, timeout_ra, timeout_milp, eps_split, eps_strict,
                              full_flip_sets, export_lp_path, out_path);
        if (*replay_cmd) return run_replay(replay_model, replay_report);
        if (*gen_cmd) return run_gen(gen_out, gen_dims, gen_qbits, gen_act, gen_seed);
    } catch (const bfav::BaselineError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitVacuous;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitUsage;
}
