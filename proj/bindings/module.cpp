#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bfav/lp_format.hpp"
#include "bfav/verifier.hpp"

namespace py = pybind11;
using namespace bfav;

namespace {

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ShapeError("matrix needs at least one row");
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int r = 0; r < m.rows; ++r) {
        if (static_cast<int>(rows[static_cast<size_t>(r)].size()) != m.cols)
            throw ShapeError("ragged matrix rows");
        for (int c = 0; c < m.cols; ++c)
            m.at(r, c) = rows[static_cast<size_t>(r)][static_cast<size_t>(c)];
    }
    return m;
}

const char* milp_text(MilpStatus s) {
    switch (s) {
        case MilpStatus::kProved: return "proved";
        case MilpStatus::kFalsified: return "falsified";
        case MilpStatus::kEpsUndecided: return "eps_undecided";
        case MilpStatus::kTimeout: return "timeout";
    }
    return "timeout";
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bit-flip attack verification for quantized feed-forward networks";

    py::register_exception<ParseError>(m, "ParseError");
    py::register_exception<ShapeError>(m, "ShapeError");
    py::register_exception<RangeError>(m, "RangeError");
    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<BaselineError>(m, "BaselineError");

    py::enum_<Activation>(m, "Activation")
        .value("relu", Activation::kRelu)
        .value("sigmoid", Activation::kSigmoid)
        .value("tanh", Activation::kTanh)
        .value("none", Activation::kNone);

    py::class_<ParamId>(m, "ParamId")
        .def(py::init([](int layer, const std::string& role, int row, int col) {
                 return ParamId{layer, role == "bias", row, col};
             }),
             py::arg("layer"), py::arg("role"), py::arg("row"), py::arg("col") = 0)
        .def_readonly("layer", &ParamId::layer)
        .def_readonly("row", &ParamId::row)
        .def_readonly("col", &ParamId::col)
        .def_property_readonly("role",
                               [](const ParamId& p) { return p.is_bias ? "bias" : "weight"; })
        .def("__eq__", [](const ParamId& a, const ParamId& b) { return a == b; })
        .def("__lt__", [](const ParamId& a, const ParamId& b) { return a < b; })
        .def("__hash__", [](const ParamId& p) { return std::hash<std::string>{}(to_string(p)); })
        .def("__repr__", [](const ParamId& p) { return to_string(p); });

    py::class_<QuantizedNetwork>(m, "QuantizedNetwork")
        .def_readonly("quant_bits", &QuantizedNetwork::quant_bits)
        .def_readonly("input_dim", &QuantizedNetwork::input_dim)
        .def_property_readonly("num_layers", &QuantizedNetwork::num_layers)
        .def_property_readonly("output_dim", &QuantizedNetwork::output_dim)
        .def("forward", &forward, py::arg("x"))
        .def("int_param", &QuantizedNetwork::int_param)
        .def("real_param", &QuantizedNetwork::real_param)
        .def("step_size",
             [](const QuantizedNetwork& n, int layer) { return n.layer(layer).step_size; },
             py::arg("layer"))
        .def("all_params", &QuantizedNetwork::all_params)
        .def("to_json", &model_to_json_text)
        .def("save", [](const QuantizedNetwork& n, const std::string& p) { save_model(n, p); });

    m.def("load_model", &load_model, py::arg("path"));
    m.def("model_from_json", &model_from_json_text, py::arg("text"));
    m.def("argmax_class", &argmax_class, py::arg("y"));
    m.def(
        "generate_synthetic",
        [](std::vector<int> dims, int quant_bits, Activation activation, uint64_t seed) {
            return generate_synthetic({std::move(dims), quant_bits, activation, seed});
        },
        py::arg("dims"), py::arg("quant_bits") = 4, py::arg("activation") = Activation::kRelu,
        py::arg("seed") = 0);

    py::class_<ParamRemapTable>(m, "ParamRemapTable")
        .def("aliases_of", [](const ParamRemapTable& t, const ParamId& p) { return t.of(p); });

    py::class_<LoweredNetwork>(m, "LoweredNetwork")
        .def_readonly("net", &LoweredNetwork::net)
        .def_readonly("remap", &LoweredNetwork::remap);

    m.def("lower_conv", &lower_conv, py::arg("net"));

    m.def(
        "quantize_layer",
        [](const std::vector<std::vector<double>>& weights, const std::vector<double>& bias,
           int quant_bits) {
            QuantizedLayerParams qp = quantize_layer(matrix_from_rows(weights), bias, quant_bits);
            std::vector<std::vector<int32_t>> rows(static_cast<size_t>(qp.integer_weights.rows));
            for (int r = 0; r < qp.integer_weights.rows; ++r)
                for (int c = 0; c < qp.integer_weights.cols; ++c)
                    rows[static_cast<size_t>(r)].push_back(qp.integer_weights.at(r, c));
            return py::make_tuple(rows, qp.integer_bias, qp.step_size);
        },
        py::arg("weights"), py::arg("bias"), py::arg("quant_bits"));

    py::class_<BitPattern>(m, "BitPattern")
        .def("bits", &BitPattern::bits)
        .def("__repr__", &BitPattern::to_string);

    m.def("encode_tc", &encode_tc, py::arg("value"), py::arg("quant_bits"));
    m.def("decode_tc", &decode_tc, py::arg("pattern"));
    m.def("enumerate_flips", &enumerate_flips, py::arg("value"), py::arg("quant_bits"),
          py::arg("max_bits"));

    py::class_<ParamInterval>(m, "ParamInterval")
        .def_readonly("lo", &ParamInterval::lo)
        .def_readonly("hi", &ParamInterval::hi)
        .def_readonly("candidates", &ParamInterval::candidates)
        .def_readonly("int_candidates", &ParamInterval::int_candidates);

    py::class_<SignSplit>(m, "SignSplit")
        .def_readonly("pos", &SignSplit::pos)
        .def_readonly("neg", &SignSplit::neg);

    m.def("sign_split_intervals", &sign_split_intervals, py::arg("value"), py::arg("quant_bits"),
          py::arg("max_bits"), py::arg("step_size"));

    py::class_<AttackVector>(m, "AttackVector")
        .def(py::init<>())
        .def(
            "add",
            [](AttackVector& a, const ParamId& p, std::vector<int> bits) {
                a.entries.push_back({p, std::move(bits)});
            },
            py::arg("param"), py::arg("bit_positions"))
        .def_property_readonly("entries", [](const AttackVector& a) {
            std::vector<py::tuple> out;
            for (const auto& e : a.entries) out.push_back(py::make_tuple(e.param, e.bit_positions));
            return out;
        });

    m.def("apply_attack",
          py::overload_cast<const QuantizedNetwork&, const AttackVector&>(&apply_attack),
          py::arg("net"), py::arg("attack"));

    py::class_<InputRegion>(m, "InputRegion")
        .def_static("linf_ball", &InputRegion::linf_ball, py::arg("center"), py::arg("radius"))
        .def_static("box", &InputRegion::box, py::arg("lower"), py::arg("upper"))
        .def_property_readonly("bounds", [](const InputRegion& r) { return r.bounds(); });

    py::enum_<CheckResult>(m, "CheckResult")
        .value("proved", CheckResult::kProved)
        .value("unknown", CheckResult::kUnknown);

    py::class_<SymbolicParamBinding>(m, "SymbolicParamBinding")
        .def_static("single", &SymbolicParamBinding::single, py::arg("param"), py::arg("lo"),
                    py::arg("hi"));

    m.def(
        "analyze",
        [](const QuantizedNetwork& net, const InputRegion& region, int g,
           const std::optional<SymbolicParamBinding>& binding) {
            return analyze(net, region, g, binding).result;
        },
        py::arg("net"), py::arg("region"), py::arg("target"), py::arg("binding") = std::nullopt);

    py::enum_<ParamStatus>(m, "ParamStatus")
        .value("safe", ParamStatus::kSafe)
        .value("unknown", ParamStatus::kUnknown);

    py::class_<ParamVerdict>(m, "ParamVerdict")
        .def_readonly("param", &ParamVerdict::param)
        .def_readonly("status", &ParamVerdict::status)
        .def_readonly("analyzer_calls", &ParamVerdict::analyzer_calls)
        .def_readonly("proved_subintervals", &ParamVerdict::proved_subintervals)
        .def_readonly("unresolved_subintervals", &ParamVerdict::unresolved_subintervals);

    m.def(
        "bfa_ra",
        [](const QuantizedNetwork& net, const InputRegion& region, int g, const ParamId& p,
           int n_bits, bool use_binary_search) {
            RaOptions opts;
            opts.use_binary_search = use_binary_search;
            return bfa_ra(net, region, g, p, n_bits, opts);
        },
        py::arg("net"), py::arg("region"), py::arg("target"), py::arg("param"),
        py::arg("max_bits"), py::arg("use_binary_search") = true);

    m.def(
        "naive_check",
        [](const QuantizedNetwork& net, const InputRegion& region, int g, const ParamId& p,
           int n_bits) { return naive_check(net, region, g, p, n_bits); },
        py::arg("net"), py::arg("region"), py::arg("target"), py::arg("param"),
        py::arg("max_bits"));

    py::class_<MilpWitness>(m, "MilpWitness")
        .def_readonly("attack", &MilpWitness::attack)
        .def_readonly("input", &MilpWitness::input)
        .def_readonly("output", &MilpWitness::output);

    py::class_<MilpOutcome>(m, "MilpOutcome")
        .def_property_readonly("status", [](const MilpOutcome& o) { return milp_text(o.status); })
        .def_readonly("witness", &MilpOutcome::witness)
        .def_readonly("assignments_checked", &MilpOutcome::assignments_checked)
        .def_readonly("boxes_explored", &MilpOutcome::boxes_explored);

    py::class_<VulnerableParam>(m, "VulnerableParam")
        .def(py::init([](const ParamId& p, int32_t original_int, double step,
                         std::vector<int32_t> flip_ints) {
                 VulnerableParam vp;
                 vp.param = p;
                 vp.original_int = original_int;
                 vp.original_value = original_int * step;
                 vp.flip_ints = std::move(flip_ints);
                 for (int32_t f : vp.flip_ints) vp.flip_values.push_back(f * step);
                 return vp;
             }),
             py::arg("param"), py::arg("original_int"), py::arg("step_size"),
             py::arg("flip_ints"));

    m.def(
        "bfa_milp",
        [](const QuantizedNetwork& net, const InputRegion& region, int g,
           const std::vector<VulnerableParam>& xi, double eps_split, int64_t budget_ms) {
            MilpSolveOptions opts;
            opts.eps_split = eps_split;
            opts.budget_ms = budget_ms;
            return bfa_milp(net, region, g, xi, opts);
        },
        py::arg("net"), py::arg("region"), py::arg("target"), py::arg("xi"),
        py::arg("eps_split") = 1e-6, py::arg("budget_ms") = -1);

    m.def(
        "build_lp_text",
        [](const QuantizedNetwork& net, const InputRegion& region, int g,
           const std::vector<VulnerableParam>& xi, double eps_strict) {
            MilpBuildOptions opts;
            opts.eps_strict = eps_strict;
            return lp_text(build_milp(net, region, g, xi, opts));
        },
        py::arg("net"), py::arg("region"), py::arg("target"), py::arg("xi"),
        py::arg("eps_strict") = 1e-6);

    py::class_<VerificationReport>(m, "VerificationReport")
        .def_property_readonly("overall",
                               [](const VerificationReport& r) { return to_string(r.overall); })
        .def_readonly("vulnerable", &VerificationReport::vulnerable)
        .def_readonly("verdicts", &VerificationReport::verdicts)
        .def_readonly("witness", &VerificationReport::witness)
        .def_readonly("analyzer_calls", &VerificationReport::analyzer_calls)
        .def("to_json", &report_to_json);

    m.def(
        "verify",
        [](const QuantizedNetwork& net, const InputRegion& region, int target, int max_bits,
           const std::string& mode, std::vector<ParamId> scope, int workers, double eps_split,
           double eps_strict, int64_t ra_budget_ms, int64_t milp_budget_ms) {
            VerificationJob job;
            job.net = net;
            job.region = region;
            job.target = target;
            job.n_bits = max_bits;
            job.mode = mode_from_string(mode);
            job.scope = std::move(scope);
            job.workers = workers;
            job.eps_split = eps_split;
            job.eps_strict = eps_strict;
            job.ra_budget_ms = ra_budget_ms;
            job.milp_budget_ms = milp_budget_ms;
            return verify(job);
        },
        py::arg("net"), py::arg("region"), py::arg("target"), py::arg("max_bits") = 1,
        py::arg("mode") = "full", py::arg("scope") = std::vector<ParamId>{},
        py::arg("workers") = 1, py::arg("eps_split") = 1e-6, py::arg("eps_strict") = 1e-6,
        py::arg("ra_budget_ms") = -1, py::arg("milp_budget_ms") = -1);

    m.def("replay", &replay, py::arg("net"), py::arg("witness"), py::arg("target"));
}
