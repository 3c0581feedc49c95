#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bfav/bfa_ra.hpp"
#include "test_support.hpp"

using namespace bfav;
using bfav::testing::Rng;

namespace {

const std::string kFig2 = bfav::testing::data_path("fig2.json");

/// Exhaustive attack search: every flip of one parameter, forward on a set
/// of inputs, true iff some attacked run misclassifies.
bool oracle_attackable(const QuantizedNetwork& net, const ParamId& p, int n_bits,
                       const std::vector<std::vector<double>>& inputs, int g) {
    int32_t v = net.int_param(p);
    for (int32_t flipped : enumerate_flips(v, net.quant_bits, n_bits)) {
        QuantizedNetwork attacked = net;
        attacked.set_int_param(p, flipped);
        for (const auto& x : inputs)
            if (argmax_class(forward(attacked, x)) != g) return true;
    }
    return false;
}

std::vector<std::vector<double>> sample_region(Rng& rng, const InputRegion& region, int count) {
    auto [lo, hi] = region.bounds();
    std::vector<std::vector<double>> out;
    // corners first (tiny dimensionality in these tests)
    int n = static_cast<int>(lo.size());
    for (uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::vector<double> c(lo.size());
        for (int i = 0; i < n; ++i) c[static_cast<size_t>(i)] = (mask >> i) & 1u ? hi[static_cast<size_t>(i)] : lo[static_cast<size_t>(i)];
        out.push_back(std::move(c));
    }
    for (int s = 0; s < count; ++s) {
        std::vector<double> x(lo.size());
        for (size_t i = 0; i < x.size(); ++i) x[i] = rng.in(lo[i], hi[i]);
        out.push_back(std::move(x));
    }
    return out;
}

/// Simulates binary_ra's recursion with fresh analyze calls to predict the
/// verdict, the call count, and the unresolved leaves.
struct TreeOracle {
    const QuantizedNetwork& net;
    const InputRegion& region;
    int g;
    const ParamId& param;
    int calls = 0;

    CheckResult walk(const ParamInterval& iv, std::vector<ParamInterval>* unresolved) {
        ++calls;
        CheckResult hull =
            analyze(net, region, g, SymbolicParamBinding::single(param, iv.lo, iv.hi)).result;
        if (hull == CheckResult::kProved) return CheckResult::kProved;
        if (iv.candidates.size() == 1) {
            if (unresolved) unresolved->push_back(iv);
            return CheckResult::kUnknown;
        }
        double mid = 0.5 * (iv.lo + iv.hi);
        ParamInterval left, right;
        for (size_t i = 0; i < iv.candidates.size(); ++i) {
            ParamInterval& side = iv.candidates[i] <= mid ? left : right;
            side.candidates.push_back(iv.candidates[i]);
            side.int_candidates.push_back(iv.int_candidates[i]);
        }
        for (ParamInterval* s : {&left, &right}) {
            s->lo = s->candidates.front();
            s->hi = s->candidates.back();
        }
        if (walk(left, unresolved) == CheckResult::kUnknown) {
            if (unresolved) unresolved->push_back(right);
            return CheckResult::kUnknown;
        }
        return walk(right, unresolved);
    }
};

}  // namespace

TEST_CASE("bfa_ra flags the worked attack parameter") {
    QuantizedNetwork net = load_model(kFig2);
    InputRegion pt = InputRegion::linf_ball({1.0, 1.0}, 0.0);
    ParamVerdict v = bfa_ra(net, pt, 0, ParamId{3, false, 1, 1}, 1);
    CHECK(v.status == ParamStatus::kUnknown);
    REQUIRE(v.unresolved_subintervals.size() == 1);
    CHECK(v.unresolved_subintervals[0].lo == doctest::Approx(1.0));
    CHECK(v.unresolved_subintervals[0].hi == doctest::Approx(1.0));
    // the negative side proves as one hull
    REQUIRE(v.proved_subintervals.size() == 1);
    CHECK(v.proved_subintervals[0].lo == doctest::Approx(-5.0 / 7.0));
    CHECK(v.proved_subintervals[0].hi == doctest::Approx(-1.0 / 7.0));
    CHECK(v.analyzer_calls == 2);
}

TEST_CASE("bfa_ra proves the weight reading the dead hidden unit") {
    // W3[1][0] = 6 multiplies the ReLU output pinned to 0 at x = (1,1);
    // the exhaustive oracle confirms no flip changes the classification.
    QuantizedNetwork net = load_model(kFig2);
    InputRegion pt = InputRegion::linf_ball({1.0, 1.0}, 0.0);
    ParamId p{3, false, 1, 0};
    Rng rng(5);
    CHECK_FALSE(oracle_attackable(net, p, 1, sample_region(rng, pt, 4), 0));
    ParamVerdict v = bfa_ra(net, pt, 0, p, 1);
    CHECK(v.status == ParamStatus::kSafe);
    CHECK(v.unresolved_subintervals.empty());
}

TEST_CASE("the zero-valued output weight is genuinely attackable") {
    // W3[0][1] = 0 multiplies the live unit x2_2 = 1; its sign-bit flip
    // drives y_1 to -8/7 which loses to y_2 = -1/7.
    QuantizedNetwork net = load_model(kFig2);
    InputRegion pt = InputRegion::linf_ball({1.0, 1.0}, 0.0);
    ParamId p{3, false, 0, 1};
    Rng rng(6);
    CHECK(oracle_attackable(net, p, 1, sample_region(rng, pt, 4), 0));
    CHECK(bfa_ra(net, pt, 0, p, 1).status == ParamStatus::kUnknown);
}

TEST_CASE("binary_ra base cases") {
    QuantizedNetwork net = load_model(kFig2);
    InputRegion pt = InputRegion::linf_ball({1.0, 1.0}, 0.0);
    ParamId p{3, false, 1, 1};

    // hull that proves in one call
    ParamInterval neg;
    neg.int_candidates = {-5, -3, -2, -1};
    for (int32_t c : neg.int_candidates) neg.candidates.push_back(c / 7.0);
    neg.lo = neg.candidates.front();
    neg.hi = neg.candidates.back();
    BinaryRaStats stats;
    CHECK(binary_ra(net, pt, 0, p, neg, &stats) == CheckResult::kProved);
    CHECK(stats.analyzer_calls == 1);

    // failing singleton: one call, unresolved
    ParamInterval point;
    point.int_candidates = {7};
    point.candidates = {1.0};
    point.lo = point.hi = 1.0;
    BinaryRaStats stats2;
    CHECK(binary_ra(net, pt, 0, p, point, &stats2) == CheckResult::kUnknown);
    CHECK(stats2.analyzer_calls == 1);
    CHECK(stats2.unresolved.size() == 1);
}

TEST_CASE("binary_ra matches the recursion-tree oracle") {
    Rng rng(404);
    int full_trees = 0;
    for (int t = 0; t < 60; ++t) {
        QuantizedNetwork net = bfav::testing::random_net(rng, {2, 4, 3, 2}, 4);
        std::vector<double> lo(2), hi(2);
        for (int i = 0; i < 2; ++i) {
            double c = rng.in(-0.6, 0.6), r = rng.in(0.01, 0.4);
            lo[static_cast<size_t>(i)] = c - r;
            hi[static_cast<size_t>(i)] = c + r;
        }
        InputRegion region = InputRegion::box(lo, hi);
        int g = argmax_class(forward(net, {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])}));
        if (analyze(net, region, g).result != CheckResult::kProved) continue;

        std::vector<ParamId> params = net.all_params();
        ParamId p = params[static_cast<size_t>(rng.index(static_cast<int>(params.size())))];
        SignSplit split =
            sign_split_intervals(net.int_param(p), net.quant_bits, 2, net.layer(p.layer).step_size);

        BinaryRaStats stats;
        int expected_calls = 0;
        bool expected_safe = true;
        for (const auto& side : {split.pos, split.neg}) {
            if (!side) continue;
            TreeOracle oracle{net, region, g, p};
            expected_safe &= oracle.walk(*side, nullptr) == CheckResult::kProved;
            expected_calls += oracle.calls;
            size_t c = side->candidates.size();
            CHECK(oracle.calls <= static_cast<int>(2 * c - 1));
            if (oracle.calls == static_cast<int>(2 * c - 1) && c > 1) ++full_trees;
        }
        ParamVerdict v = bfa_ra(net, region, g, p, 2);
        CHECK(v.analyzer_calls == expected_calls);
        CHECK((v.status == ParamStatus::kSafe) == expected_safe);

        // unresolved + proved candidates partition the candidate set
        std::set<int32_t> all;
        if (split.pos) all.insert(split.pos->int_candidates.begin(), split.pos->int_candidates.end());
        if (split.neg) all.insert(split.neg->int_candidates.begin(), split.neg->int_candidates.end());
        std::set<int32_t> seen;
        for (const auto& iv : v.proved_subintervals)
            seen.insert(iv.int_candidates.begin(), iv.int_candidates.end());
        for (const auto& iv : v.unresolved_subintervals)
            seen.insert(iv.int_candidates.begin(), iv.int_candidates.end());
        CHECK(seen == all);
    }
    (void)full_trees;
}

TEST_CASE("hull-only variant never beats binary search and stays within 2 calls") {
    Rng rng(505);
    int strict = 0;
    for (int t = 0; t < 80; ++t) {
        QuantizedNetwork net = bfav::testing::random_net(rng, {2, 4, 2}, 4);
        InputRegion region = InputRegion::box({-0.3, -0.3}, {0.3, 0.3});
        int g = argmax_class(forward(net, {0.0, 0.0}));
        if (analyze(net, region, g).result != CheckResult::kProved) continue;
        RaOptions hull_only;
        hull_only.use_binary_search = false;
        for (const ParamId& p : net.all_params()) {
            ParamVerdict h = bfa_ra(net, region, g, p, 1, hull_only);
            ParamVerdict b = bfa_ra(net, region, g, p, 1);
            CHECK(h.analyzer_calls <= 2);
            if (h.status == ParamStatus::kSafe) CHECK(b.status == ParamStatus::kSafe);
            if (h.status == ParamStatus::kUnknown && b.status == ParamStatus::kSafe) ++strict;
        }
    }
    // the binary search must add value somewhere in this batch
    CHECK(strict > 0);
}

TEST_CASE("binary_ra on a point interval equals plain DeepPoly on the substituted net") {
    Rng rng(606);
    for (int t = 0; t < 50; ++t) {
        QuantizedNetwork net = bfav::testing::random_net(rng, {3, 4, 2}, 4);
        InputRegion region = InputRegion::box({-0.4, -0.4, -0.4}, {0.4, 0.4, 0.4});
        std::vector<ParamId> params = net.all_params();
        ParamId p = params[static_cast<size_t>(rng.index(static_cast<int>(params.size())))];
        std::vector<int32_t> flips = enumerate_flips(net.int_param(p), 4, 1);
        int32_t c = flips[static_cast<size_t>(rng.index(static_cast<int>(flips.size())))];

        ParamInterval point;
        point.int_candidates = {c};
        point.candidates = {c * net.layer(p.layer).step_size};
        point.lo = point.hi = point.candidates[0];

        QuantizedNetwork subst = net;
        subst.set_int_param(p, c);
        for (int g = 0; g < net.output_dim(); ++g) {
            CheckResult direct = analyze(subst, region, g).result;
            CheckResult via_ra = binary_ra(net, region, g, p, point);
            CHECK(direct == via_ra);
        }
    }
}

TEST_CASE("naive_check counts exactly the flip budget") {
    QuantizedNetwork net = load_model(kFig2);
    InputRegion pt = InputRegion::linf_ball({1.0, 1.0}, 0.0);
    ParamVerdict v = naive_check(net, pt, 0, ParamId{3, false, 1, 1}, 1);
    CHECK(v.analyzer_calls == 4);  // C(4,1)
    CHECK(v.status == ParamStatus::kUnknown);
    // the flip to +1 is the failing vector
    bool found = false;
    for (const auto& iv : v.unresolved_subintervals)
        if (iv.int_candidates == std::vector<int32_t>{7}) found = true;
    CHECK(found);

    QuantizedNetwork q8 = generate_synthetic({{2, 3, 2}, 8, Activation::kRelu, 21});
    InputRegion region = InputRegion::box({-0.1, -0.1}, {0.1, 0.1});
    int g = argmax_class(forward(q8, {0.0, 0.0}));
    ParamVerdict v8 = naive_check(q8, region, g, ParamId{2, false, 0, 0}, 2);
    CHECK(v8.analyzer_calls == 36);  // C(8,1) + C(8,2)
}

TEST_CASE("bfa_ra never certifies an oracle-attackable parameter") {
    Rng rng(707);
    int checked = 0;
    for (int t = 0; t < 30; ++t) {
        QuantizedNetwork net = bfav::testing::random_net(rng, {2, 3, 3, 2}, 4);
        std::vector<double> lo(2), hi(2);
        for (int i = 0; i < 2; ++i) {
            double c = rng.in(-0.5, 0.5), r = rng.in(0.02, 0.3);
            lo[static_cast<size_t>(i)] = c - r;
            hi[static_cast<size_t>(i)] = c + r;
        }
        InputRegion region = InputRegion::box(lo, hi);
        int g = argmax_class(forward(net, {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])}));
        if (analyze(net, region, g).result != CheckResult::kProved) continue;
        std::vector<std::vector<double>> inputs = sample_region(rng, region, 200);
        for (const ParamId& p : net.all_params()) {
            ParamVerdict v = bfa_ra(net, region, g, p, 1);
            if (v.status == ParamStatus::kSafe) {
                CHECK_FALSE(oracle_attackable(net, p, 1, inputs, g));
                ++checked;
            }
        }
    }
    CHECK(checked > 0);
}
