#include "bfav/milp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "bfav/sympoly.hpp"

namespace bfav {

int MilpModel::add_var(std::string name, double lo, double hi, bool is_binary) {
    vars.push_back(MilpVar{std::move(name), lo, hi, is_binary});
    return static_cast<int>(vars.size()) - 1;
}

void MilpModel::add_constraint(std::string name, std::vector<MilpTerm> terms, Sense sense,
                               double rhs) {
    // Normalize: combine duplicates, drop zeros, sort by variable index.
    std::sort(terms.begin(), terms.end(),
              [](const MilpTerm& a, const MilpTerm& b) { return a.var < b.var; });
    std::vector<MilpTerm> packed;
    for (const MilpTerm& t : terms) {
        if (!packed.empty() && packed.back().var == t.var) {
            packed.back().coef += t.coef;
        } else {
            packed.push_back(t);
        }
    }
    packed.erase(std::remove_if(packed.begin(), packed.end(),
                                [](const MilpTerm& t) { return t.coef == 0.0; }),
                 packed.end());
    if (packed.empty()) throw ConfigError("constraint '" + name + "' has no terms");
    constraints.push_back(MilpConstraint{std::move(name), std::move(packed), sense, rhs});
}

int MilpModel::var_index(const std::string& name) const {
    for (size_t i = 0; i < vars.size(); ++i)
        if (vars[i].name == name) return static_cast<int>(i);
    return -1;
}

bool MilpModel::bigm_sufficient() const {
    for (auto [m, reach] : bigm_audit)
        if (!(std::fabs(m) > reach)) return false;
    return true;
}

bool models_equal(const MilpModel& a, const MilpModel& b) {
    if (a.vars.size() != b.vars.size() || a.constraints.size() != b.constraints.size())
        return false;
    auto var_map = [](const MilpModel& m) {
        std::map<std::string, MilpVar> out;
        for (const MilpVar& v : m.vars) out[v.name] = v;
        return out;
    };
    if (var_map(a) != var_map(b)) return false;

    auto cons_map = [](const MilpModel& m) {
        std::map<std::string, std::tuple<std::vector<std::pair<std::string, double>>, Sense, double>>
            out;
        for (const MilpConstraint& c : m.constraints) {
            std::vector<std::pair<std::string, double>> terms;
            for (const MilpTerm& t : c.terms)
                terms.emplace_back(m.vars[static_cast<size_t>(t.var)].name, t.coef);
            std::sort(terms.begin(), terms.end());
            out[c.name] = {std::move(terms), c.sense, c.rhs};
        }
        return out;
    };
    return cons_map(a) == cons_map(b);
}

std::vector<std::pair<double, double>> encode_input_region(const InputRegion& region) {
    auto [lo, hi] = region.bounds();
    std::vector<std::pair<double, double>> out(lo.size());
    for (size_t i = 0; i < lo.size(); ++i) out[i] = {lo[i], hi[i]};
    return out;
}

void encode_output_property(MilpModel& model, const std::vector<int>& y_vars, int g,
                            const std::vector<std::pair<double, double>>& y_bounds,
                            double eps_strict) {
    int s = static_cast<int>(y_vars.size());
    if (g < 0 || g >= s) throw RangeError("target class out of range");
    std::vector<MilpTerm> sum_terms;
    for (int i = 0; i < s; ++i) {
        if (i == g) continue;
        double diff_lo = y_bounds[static_cast<size_t>(g)].first - y_bounds[static_cast<size_t>(i)].second;
        double diff_hi = y_bounds[static_cast<size_t>(g)].second - y_bounds[static_cast<size_t>(i)].first;
        double reach = std::max(std::fabs(diff_lo), std::fabs(diff_hi));
        double big_m = reach + 1.0;
        model.bigm_audit.emplace_back(big_m, reach);

        int eta = model.add_var("eta" + std::to_string(i), 0.0, 1.0, true);
        sum_terms.push_back({eta, 1.0});
        std::string tag = std::to_string(i);
        if (i < g) {
            // y_i >= y_g  <=>  eta = 1
            model.add_constraint("out_lo" + tag,
                                 {{y_vars[static_cast<size_t>(g)], 1.0},
                                  {y_vars[static_cast<size_t>(i)], -1.0},
                                  {eta, big_m}},
                                 Sense::kLe, big_m);
            model.add_constraint("out_hi" + tag,
                                 {{y_vars[static_cast<size_t>(i)], 1.0},
                                  {y_vars[static_cast<size_t>(g)], -1.0},
                                  {eta, -big_m}},
                                 Sense::kLe, -eps_strict);
        } else {
            // y_i > y_g  <=>  eta = 1, strictness via eps_strict
            model.add_constraint("out_lo" + tag,
                                 {{y_vars[static_cast<size_t>(g)], 1.0},
                                  {y_vars[static_cast<size_t>(i)], -1.0},
                                  {eta, big_m}},
                                 Sense::kLe, big_m - eps_strict);
            model.add_constraint("out_hi" + tag,
                                 {{y_vars[static_cast<size_t>(i)], 1.0},
                                  {y_vars[static_cast<size_t>(g)], -1.0},
                                  {eta, -big_m}},
                                 Sense::kLe, 0.0);
        }
    }
    model.add_constraint("misclass", std::move(sum_terms), Sense::kGe, 1.0);
}

std::vector<int> encode_attack_choice(MilpModel& model, const std::vector<VulnerableParam>& xi) {
    std::vector<int> wt_vars;
    std::vector<MilpTerm> one_hot;
    for (size_t m = 0; m < xi.size(); ++m) {
        const VulnerableParam& vp = xi[m];
        if (vp.flip_values.empty()) throw ConfigError("vulnerable parameter has no flip candidates");
        double lo = vp.original_value, hi = vp.original_value;
        for (double v : vp.flip_values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        int wt = model.add_var("wt" + std::to_string(m), lo, hi);
        wt_vars.push_back(wt);
        std::vector<MilpTerm> sel{{wt, 1.0}};
        for (size_t c = 0; c < vp.flip_values.size(); ++c) {
            int d = model.add_var("d" + std::to_string(m) + "_" + std::to_string(c), 0.0, 1.0,
                                  true);
            sel.push_back({d, -(vp.flip_values[c] - vp.original_value)});
            one_hot.push_back({d, 1.0});
        }
        model.add_constraint("sel" + std::to_string(m), std::move(sel), Sense::kEq,
                             vp.original_value);
    }
    if (!one_hot.empty())
        model.add_constraint("one_attack", std::move(one_hot), Sense::kEq, 1.0);
    return wt_vars;
}

namespace {

struct NodeBoundsTable {
    std::vector<double> in_lo, in_hi;
    std::vector<std::vector<double>> pre_lo, pre_hi;    // [layer-2][j]
    std::vector<std::vector<double>> post_lo, post_hi;  // hidden layers only
};

/// Union of per-member SymPoly passes, each binding one member to its full
/// flip hull, plus the plain pass. Sound whichever single parameter is
/// attacked.
NodeBoundsTable union_bounds(const QuantizedNetwork& net, const InputRegion& region, int g,
                             const std::vector<VulnerableParam>& xi,
                             const ParamRemapTable* remap, FpSlack slack) {
    NodeBoundsTable table;
    auto [in_lo, in_hi] = region.bounds();
    table.in_lo = std::move(in_lo);
    table.in_hi = std::move(in_hi);
    int d = net.num_layers();
    table.pre_lo.resize(net.layers.size());
    table.pre_hi.resize(net.layers.size());
    table.post_lo.resize(net.layers.size());
    table.post_hi.resize(net.layers.size());

    bool first = true;
    auto absorb = [&](const NetworkAbstraction& abs) {
        for (int li = 2; li <= d; ++li) {
            int width = net.layer(li).out_dim();
            auto& plo = table.pre_lo[static_cast<size_t>(li - 2)];
            auto& phi = table.pre_hi[static_cast<size_t>(li - 2)];
            if (first) {
                plo.assign(static_cast<size_t>(width), 0.0);
                phi.assign(static_cast<size_t>(width), 0.0);
            }
            for (int j = 0; j < width; ++j) {
                auto [lo, hi] = abs.node_bounds(li, Phase::kPre, j);
                plo[static_cast<size_t>(j)] = first ? lo : std::min(plo[static_cast<size_t>(j)], lo);
                phi[static_cast<size_t>(j)] = first ? hi : std::max(phi[static_cast<size_t>(j)], hi);
            }
            if (li < d) {
                auto& qlo = table.post_lo[static_cast<size_t>(li - 2)];
                auto& qhi = table.post_hi[static_cast<size_t>(li - 2)];
                if (first) {
                    qlo.assign(static_cast<size_t>(width), 0.0);
                    qhi.assign(static_cast<size_t>(width), 0.0);
                }
                for (int j = 0; j < width; ++j) {
                    auto [lo, hi] = abs.node_bounds(li, Phase::kPost, j);
                    qlo[static_cast<size_t>(j)] = first ? lo : std::min(qlo[static_cast<size_t>(j)], lo);
                    qhi[static_cast<size_t>(j)] = first ? hi : std::max(qhi[static_cast<size_t>(j)], hi);
                }
            }
        }
        first = false;
    };

    absorb(analyze(net, region, g, std::nullopt, slack).abstraction);
    for (const VulnerableParam& vp : xi) {
        double lo = vp.original_value, hi = vp.original_value;
        for (double v : vp.flip_values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        SymbolicParamBinding binding =
            remap ? SymbolicParamBinding::aliased(*remap, vp.param, lo, hi)
                  : SymbolicParamBinding::single(vp.param, lo, hi);
        absorb(analyze(net, region, g, binding, slack).abstraction);
    }
    return table;
}

}  // namespace

MilpModel build_milp(const QuantizedNetwork& net, const InputRegion& region, int g,
                     const std::vector<VulnerableParam>& xi, const MilpBuildOptions& opts) {
    net.validate();
    for (const Layer& l : net.layers)
        if (l.activation != Activation::kRelu && l.activation != Activation::kNone)
            throw ConfigError("MILP encoding supports ReLU networks only");
    if (net.has_conv()) throw ConfigError("lower convolutions before the MILP encoding");

    NodeBoundsTable bounds = union_bounds(net, region, g, xi, opts.remap, opts.slack);
    const int d = net.num_layers();

    MilpModel model;

    // Inputs with the region as bounds.
    std::vector<int> in_vars(static_cast<size_t>(net.input_dim));
    auto region_bounds = encode_input_region(region);
    for (int i = 0; i < net.input_dim; ++i)
        in_vars[static_cast<size_t>(i)] =
            model.add_var("x" + std::to_string(i), region_bounds[static_cast<size_t>(i)].first,
                          region_bounds[static_cast<size_t>(i)].second);

    // Hidden activations and phase binaries.
    std::vector<std::vector<int>> z_vars(net.layers.size());
    std::vector<std::vector<int>> a_vars(net.layers.size());
    for (int li = 2; li < d; ++li) {
        int width = net.layer(li).out_dim();
        auto& zs = z_vars[static_cast<size_t>(li - 2)];
        auto& as = a_vars[static_cast<size_t>(li - 2)];
        zs.resize(static_cast<size_t>(width));
        as.assign(static_cast<size_t>(width), -1);
        for (int j = 0; j < width; ++j) {
            double lo = std::max(0.0, bounds.post_lo[static_cast<size_t>(li - 2)][static_cast<size_t>(j)]);
            double hi = std::max(0.0, bounds.post_hi[static_cast<size_t>(li - 2)][static_cast<size_t>(j)]);
            zs[static_cast<size_t>(j)] =
                model.add_var("z" + std::to_string(li) + "_" + std::to_string(j), lo, hi);
        }
        for (int j = 0; j < width; ++j) {
            double pl = bounds.pre_lo[static_cast<size_t>(li - 2)][static_cast<size_t>(j)];
            double pu = bounds.pre_hi[static_cast<size_t>(li - 2)][static_cast<size_t>(j)];
            if (pl < 0.0 && pu > 0.0)
                as[static_cast<size_t>(j)] =
                    model.add_var("a" + std::to_string(li) + "_" + std::to_string(j), 0.0, 1.0,
                                  true);
        }
    }

    // Outputs.
    std::vector<int> y_vars(static_cast<size_t>(net.output_dim()));
    std::vector<std::pair<double, double>> y_bounds(static_cast<size_t>(net.output_dim()));
    for (int i = 0; i < net.output_dim(); ++i) {
        double lo = bounds.pre_lo[static_cast<size_t>(d - 2)][static_cast<size_t>(i)];
        double hi = bounds.pre_hi[static_cast<size_t>(d - 2)][static_cast<size_t>(i)];
        y_vars[static_cast<size_t>(i)] = model.add_var("y" + std::to_string(i), lo, hi);
        y_bounds[static_cast<size_t>(i)] = {lo, hi};
    }

    std::vector<int> wt_vars = encode_attack_choice(model, xi);

    // Attacked sites: (layer, row, col) -> member index. Conv alias tables
    // map one member onto several sites.
    std::map<std::tuple<int, int, int>, size_t> weight_sites;
    std::map<std::pair<int, int>, size_t> bias_sites;  // (layer, row)
    for (size_t m = 0; m < xi.size(); ++m) {
        const ParamId& p = xi[m].param;
        std::vector<ParamId> sites =
            opts.remap ? opts.remap->of(p) : std::vector<ParamId>{p};
        for (const ParamId& s : sites) {
            if (s.is_bias) {
                bias_sites[{s.layer, s.row}] = m;
            } else {
                weight_sites[{s.layer, s.row, s.col}] = m;
            }
        }
    }

    // McCormick products p = delta * source, one per (member, candidate,
    // site) whenever the source variable is not pinned by its bounds.
    // Created lazily but in deterministic (layer, row, col) order below.
    int mccormick_counter = 0;

    auto source_var = [&](int li, int c) {
        return li == 2 ? in_vars[static_cast<size_t>(c)]
                       : z_vars[static_cast<size_t>(li - 3)][static_cast<size_t>(c)];
    };
    auto source_bounds = [&](int li, int c) -> std::pair<double, double> {
        if (li == 2)
            return {bounds.in_lo[static_cast<size_t>(c)], bounds.in_hi[static_cast<size_t>(c)]};
        return {std::max(0.0, bounds.post_lo[static_cast<size_t>(li - 3)][static_cast<size_t>(c)]),
                std::max(0.0, bounds.post_hi[static_cast<size_t>(li - 3)][static_cast<size_t>(c)])};
    };

    int cons_counter = 0;
    auto relu_name = [&cons_counter](const char* stem) {
        return std::string(stem) + std::to_string(cons_counter++);
    };

    // Row expression: returns terms of E (everything except the constant)
    // and the constant; attack terms included.
    auto build_row = [&](int li, int j) -> std::pair<std::vector<MilpTerm>, double> {
        const Layer& lay = net.layer(li);
        std::vector<MilpTerm> terms;
        double constant = lay.bias(j);
        if (auto it = bias_sites.find({li, j}); it != bias_sites.end()) {
            const VulnerableParam& vp = xi[it->second];
            // bias becomes original + sum (fj - orig) * delta
            for (size_t c = 0; c < vp.flip_values.size(); ++c) {
                int dvar = model.var_index("d" + std::to_string(it->second) + "_" +
                                           std::to_string(c));
                terms.push_back({dvar, vp.flip_values[c] - vp.original_value});
            }
        }
        for (int c = 0; c < lay.integer_weights.cols; ++c) {
            double w0 = lay.weight(j, c);
            if (w0 != 0.0) terms.push_back({source_var(li, c), w0});
            auto it = weight_sites.find({li, j, c});
            if (it == weight_sites.end()) continue;
            const VulnerableParam& vp = xi[it->second];
            auto [slo, shi] = source_bounds(li, c);
            if (slo == shi) {
                // pinned source: delta terms are linear
                for (size_t cc = 0; cc < vp.flip_values.size(); ++cc) {
                    int dvar = model.var_index("d" + std::to_string(it->second) + "_" +
                                               std::to_string(cc));
                    terms.push_back({dvar, (vp.flip_values[cc] - vp.original_value) * slo});
                }
            } else {
                int sv = source_var(li, c);
                for (size_t cc = 0; cc < vp.flip_values.size(); ++cc) {
                    int dvar = model.var_index("d" + std::to_string(it->second) + "_" +
                                               std::to_string(cc));
                    int pv = model.add_var("p" + std::to_string(mccormick_counter++),
                                           std::min(slo, 0.0), std::max(shi, 0.0));
                    // exact envelope of p = delta * source for binary delta
                    model.add_constraint(relu_name("mc"), {{pv, 1.0}, {dvar, -shi}}, Sense::kLe,
                                         0.0);
                    model.add_constraint(relu_name("mc"), {{pv, 1.0}, {dvar, -slo}}, Sense::kGe,
                                         0.0);
                    model.add_constraint(relu_name("mc"), {{pv, 1.0}, {sv, -1.0}, {dvar, -slo}},
                                         Sense::kLe, -slo);
                    model.add_constraint(relu_name("mc"), {{pv, 1.0}, {sv, -1.0}, {dvar, -shi}},
                                         Sense::kGe, -shi);
                    terms.push_back({pv, vp.flip_values[cc] - vp.original_value});
                }
            }
        }
        return {std::move(terms), constant};
    };

    // Hidden layers: big-M ReLU.
    for (int li = 2; li < d; ++li) {
        int width = net.layer(li).out_dim();
        for (int j = 0; j < width; ++j) {
            auto [terms, constant] = build_row(li, j);
            double pl = bounds.pre_lo[static_cast<size_t>(li - 2)][static_cast<size_t>(j)];
            double pu = bounds.pre_hi[static_cast<size_t>(li - 2)][static_cast<size_t>(j)];
            int z = z_vars[static_cast<size_t>(li - 2)][static_cast<size_t>(j)];
            if (pu <= 0.0) continue;  // z is fixed to 0 by its bounds
            if (pl >= 0.0) {
                std::vector<MilpTerm> eq = terms;
                for (MilpTerm& t : eq) t.coef = -t.coef;
                eq.push_back({z, 1.0});
                model.add_constraint(relu_name("relu_eq"), std::move(eq), Sense::kEq, constant);
                continue;
            }
            int a = a_vars[static_cast<size_t>(li - 2)][static_cast<size_t>(j)];
            double m1 = -pl + 1.0;  // z <= E + M1 (1 - a)
            double m2 = pu + 1.0;   // z <= M2 a
            model.bigm_audit.emplace_back(m1, -pl);
            model.bigm_audit.emplace_back(m2, pu);
            {
                std::vector<MilpTerm> c1 = terms;
                for (MilpTerm& t : c1) t.coef = -t.coef;
                c1.push_back({z, 1.0});
                model.add_constraint(relu_name("relu_ge"), std::move(c1), Sense::kGe, constant);
            }
            {
                std::vector<MilpTerm> c2 = terms;
                for (MilpTerm& t : c2) t.coef = -t.coef;
                c2.push_back({z, 1.0});
                c2.push_back({a, m1});
                model.add_constraint(relu_name("relu_le"), std::move(c2), Sense::kLe,
                                     constant + m1);
            }
            model.add_constraint(relu_name("relu_off"), {{z, 1.0}, {a, -m2}}, Sense::kLe, 0.0);
        }
    }

    // Output equalities.
    for (int i = 0; i < net.output_dim(); ++i) {
        auto [terms, constant] = build_row(d, i);
        std::vector<MilpTerm> eq = terms;
        for (MilpTerm& t : eq) t.coef = -t.coef;
        eq.push_back({y_vars[static_cast<size_t>(i)], 1.0});
        model.add_constraint("out_eq" + std::to_string(i), std::move(eq), Sense::kEq, constant);
    }

    encode_output_property(model, y_vars, g, y_bounds, opts.eps_strict);
    (void)wt_vars;
    return model;
}

namespace {

using Clock = std::chrono::steady_clock;

enum class BoxResult { kClosed, kViolated, kUndecided, kTimedOut };

struct BoxSearch {
    const QuantizedNetwork& net;
    int g;
    double eps_split;
    std::optional<Clock::time_point> deadline;
    FpSlack slack;
    int64_t* boxes;

    std::vector<double> witness_input, witness_output;

    bool probe(const std::vector<double>& lo, const std::vector<double>& hi) {
        int n = static_cast<int>(lo.size());
        auto test = [&](const std::vector<double>& x) {
            std::vector<double> y = forward(net, x);
            if (argmax_class(y) != g) {
                witness_input = x;
                witness_output = std::move(y);
                return true;
            }
            return false;
        };
        std::vector<double> center(lo.size());
        for (int i = 0; i < n; ++i)
            center[static_cast<size_t>(i)] = 0.5 * (lo[static_cast<size_t>(i)] + hi[static_cast<size_t>(i)]);
        if (test(center)) return true;
        if (n <= 12) {
            for (uint32_t mask = 0; mask < (1u << n); ++mask) {
                std::vector<double> corner(lo.size());
                for (int i = 0; i < n; ++i)
                    corner[static_cast<size_t>(i)] =
                        (mask >> i) & 1u ? hi[static_cast<size_t>(i)] : lo[static_cast<size_t>(i)];
                if (test(corner)) return true;
            }
        } else {
            for (int i = 0; i < n; ++i) {
                std::vector<double> pt = center;
                pt[static_cast<size_t>(i)] = lo[static_cast<size_t>(i)];
                if (test(pt)) return true;
                pt[static_cast<size_t>(i)] = hi[static_cast<size_t>(i)];
                if (test(pt)) return true;
            }
        }
        return false;
    }

    BoxResult run(std::vector<double> lo0, std::vector<double> hi0) {
        std::vector<std::pair<std::vector<double>, std::vector<double>>> stack;
        stack.emplace_back(std::move(lo0), std::move(hi0));
        bool undecided = false;
        while (!stack.empty()) {
            if (deadline && Clock::now() >= *deadline) return BoxResult::kTimedOut;
            auto [lo, hi] = std::move(stack.back());
            stack.pop_back();
            ++*boxes;

            InputRegion box = InputRegion::box(lo, hi);
            if (analyze(net, box, g, std::nullopt, slack).result == CheckResult::kProved)
                continue;
            if (probe(lo, hi)) return BoxResult::kViolated;

            double width = 0.0;
            int split_dim = 0;
            for (size_t i = 0; i < lo.size(); ++i) {
                double w = hi[i] - lo[i];
                if (w > width) {
                    width = w;
                    split_dim = static_cast<int>(i);
                }
            }
            if (width < eps_split) {
                undecided = true;
                continue;
            }
            double mid = 0.5 * (lo[static_cast<size_t>(split_dim)] + hi[static_cast<size_t>(split_dim)]);
            auto lo_hi = hi;
            lo_hi[static_cast<size_t>(split_dim)] = mid;
            auto hi_lo = lo;
            hi_lo[static_cast<size_t>(split_dim)] = mid;
            stack.emplace_back(std::move(hi_lo), std::move(hi));  // upper half
            stack.emplace_back(std::move(lo), std::move(lo_hi));  // lower half, explored first
        }
        return undecided ? BoxResult::kUndecided : BoxResult::kClosed;
    }
};

struct Assignment {
    size_t member;
    size_t cand;
};

}  // namespace

MilpOutcome bfa_milp(const QuantizedNetwork& net, const InputRegion& region, int g,
                     const std::vector<VulnerableParam>& xi, const MilpSolveOptions& opts) {
    MilpOutcome out;
    std::optional<Clock::time_point> deadline;
    if (opts.budget_ms >= 0)
        deadline = Clock::now() + std::chrono::milliseconds(opts.budget_ms);

    const int d = net.num_layers();
    std::vector<Assignment> order;
    for (size_t m = 0; m < xi.size(); ++m)
        for (size_t c = 0; c < xi[m].flip_values.size(); ++c) order.push_back({m, c});
    // Search heuristic: outermost layers first; within the output layer,
    // rows competing with the target class before the target row; weights
    // before biases; largest value deviation first.
    std::stable_sort(order.begin(), order.end(), [&](const Assignment& a, const Assignment& b) {
        const ParamId& pa = xi[a.member].param;
        const ParamId& pb = xi[b.member].param;
        if (pa.layer != pb.layer) return pa.layer > pb.layer;
        bool ta = pa.layer == d && pa.row == g;
        bool tb = pb.layer == d && pb.row == g;
        if (ta != tb) return !ta;
        if (pa.is_bias != pb.is_bias) return !pa.is_bias;
        if (pa.row != pb.row) return pa.row < pb.row;
        if (pa.col != pb.col) return pa.col < pb.col;
        double da = std::fabs(xi[a.member].flip_values[a.cand] - xi[a.member].original_value);
        double db = std::fabs(xi[b.member].flip_values[b.cand] - xi[b.member].original_value);
        if (da != db) return da > db;
        return a.cand < b.cand;
    });

    out.assignments_total = xi.empty() ? 1 : static_cast<int64_t>(order.size());
    auto [lo, hi] = region.bounds();

    bool any_undecided = false;
    auto run_attacked = [&](const QuantizedNetwork& attacked,
                            const AttackVector& attack) -> std::optional<MilpStatus> {
        BoxSearch search{attacked, g, opts.eps_split, deadline, opts.slack, &out.boxes_explored};
        BoxResult r = search.run(lo, hi);
        ++out.assignments_checked;
        switch (r) {
            case BoxResult::kViolated:
                out.witness = MilpWitness{attack, std::move(search.witness_input),
                                          std::move(search.witness_output)};
                return MilpStatus::kFalsified;
            case BoxResult::kTimedOut:
                return MilpStatus::kTimeout;
            case BoxResult::kUndecided:
                any_undecided = true;
                return std::nullopt;
            case BoxResult::kClosed:
                return std::nullopt;
        }
        return std::nullopt;
    };

    if (deadline && Clock::now() >= *deadline) {
        out.status = MilpStatus::kTimeout;
        return out;
    }

    if (xi.empty()) {
        // vanilla robustness: the un-attacked network
        AttackVector none;
        if (auto s = run_attacked(net, none)) {
            out.status = *s;
            return out;
        }
    } else {
        for (const Assignment& asg : order) {
            if (deadline && Clock::now() >= *deadline) {
                out.status = MilpStatus::kTimeout;
                return out;
            }
            const VulnerableParam& vp = xi[asg.member];
            AttackVector attack;
            attack.entries.push_back(
                {vp.param, differing_bits(vp.original_int, vp.flip_ints[asg.cand],
                                          net.quant_bits)});
            QuantizedNetwork attacked =
                opts.remap ? apply_attack(LoweredNetwork{net, *opts.remap}, attack)
                           : apply_attack(net, attack);
            if (auto s = run_attacked(attacked, attack)) {
                out.status = *s;
                return out;
            }
        }
    }

    out.status = any_undecided ? MilpStatus::kEpsUndecided : MilpStatus::kProved;
    return out;
}

}  // namespace bfav
