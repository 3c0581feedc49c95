#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <regex>

#include "bfav/verifier.hpp"
#include "test_support.hpp"

using namespace bfav;
using bfav::testing::Rng;

namespace {

const std::string kFig2 = bfav::testing::data_path("fig2.json");

VerificationJob fig2_job(Mode mode = Mode::kFull) {
    VerificationJob job;
    job.net = load_model(kFig2);
    job.region = InputRegion::linf_ball({1.0, 1.0}, 0.0);
    job.target = 0;
    job.n_bits = 1;
    job.mode = mode;
    return job;
}

std::string strip_timings(std::string json) {
    return std::regex_replace(json, std::regex(R"("timings": \{[^}]*\})"), "\"timings\": {}");
}

}  // namespace

TEST_CASE("verify falsifies the worked example with the canonical witness") {
    VerificationReport r = verify(fig2_job());
    CHECK(r.overall == OverallStatus::kFalsified);
    REQUIRE(r.witness.has_value());
    CHECK(r.witness->attack.entries[0].param == ParamId{3, false, 1, 1});
    CHECK(r.witness->attack.entries[0].bit_positions == std::vector<int>{4});
    CHECK(r.witness->output[1] == doctest::Approx(1.0));
    CHECK(replay(load_model(kFig2), *r.witness, 0));

    // 12 parameters analyzed, vulnerable listing sorted
    CHECK(r.verdicts.size() == 12);
    REQUIRE(r.vulnerable.size() == 4);
    CHECK(std::is_sorted(r.vulnerable.begin(), r.vulnerable.end()));
}

TEST_CASE("excluding the canonical parameter still falsifies via another one") {
    VerificationJob job = fig2_job();
    for (const ParamId& p : job.net.all_params())
        if (!(p == ParamId{3, false, 1, 1})) job.scope.push_back(p);
    VerificationReport r = verify(job);
    // oracle: W3[0][1] -> -8 and both output biases still break the property
    CHECK(r.overall == OverallStatus::kFalsified);
    REQUIRE(r.witness.has_value());
    CHECK(!(r.witness->attack.entries[0].param == ParamId{3, false, 1, 1}));
    CHECK(replay(load_model(kFig2), *r.witness, 0));
}

TEST_CASE("ra_only mode reports verdicts but never falsifies") {
    VerificationReport r = verify(fig2_job(Mode::kRaOnly));
    CHECK(r.overall == OverallStatus::kUnknown);
    CHECK(!r.witness.has_value());
    CHECK(!r.milp_ran);
    int safe = 0, unknown = 0;
    for (const ParamVerdict& v : r.verdicts)
        (v.status == ParamStatus::kSafe ? safe : unknown)++;
    CHECK(safe == 8);
    CHECK(unknown == 4);
}

TEST_CASE("naive_baseline mode counts exactly params x flips") {
    VerificationReport r = verify(fig2_job(Mode::kNaiveBaseline));
    CHECK(r.analyzer_calls == 12 * 4);  // 12 parameters, C(4,1) flips each
    CHECK(r.overall == OverallStatus::kUnknown);
}

TEST_CASE("vacuous baseline is rejected") {
    VerificationJob job = fig2_job();
    job.target = 1;  // class 2 is not the argmax at (1,1)
    CHECK_THROWS_AS(verify(job), BaselineError);
}

TEST_CASE("invalid jobs are rejected") {
    VerificationJob job = fig2_job();
    job.n_bits = 9;
    CHECK_THROWS_AS(verify(job), ConfigError);

    VerificationJob job2 = fig2_job();
    job2.target = 7;
    CHECK_THROWS_AS(verify(job2), RangeError);

    VerificationJob job3 = fig2_job();
    job3.scope.push_back(ParamId{3, false, 9, 9});
    CHECK_THROWS_AS(verify(job3), RangeError);
}

TEST_CASE("reports are deterministic modulo timings") {
    std::string a = strip_timings(report_to_json(verify(fig2_job())));
    std::string b = strip_timings(report_to_json(verify(fig2_job())));
    CHECK(a == b);

    VerificationJob par = fig2_job();
    par.workers = 4;
    std::string c = strip_timings(report_to_json(verify(par)));
    CHECK(a == c);
}

TEST_CASE("ra timeout produces a partial timeout report") {
    VerificationJob job = fig2_job();
    job.ra_budget_ms = 0;
    VerificationReport r = verify(job);
    CHECK(r.overall == OverallStatus::kTimeout);
    CHECK(r.ra_timed_out);
    CHECK(!r.milp_ran);
}

TEST_CASE("milp timeout propagates") {
    VerificationJob job = fig2_job();
    job.milp_budget_ms = 0;
    VerificationReport r = verify(job);
    CHECK(r.overall == OverallStatus::kTimeout);
    CHECK(r.milp_ran);
    CHECK(r.milp.status == MilpStatus::kTimeout);
}

TEST_CASE("full mode on sigmoid networks stops at the sound stage") {
    Rng rng(42);
    // find a sigmoid net whose baseline proves but some parameter is unknown
    for (int t = 0; t < 50; ++t) {
        QuantizedNetwork net = bfav::testing::random_net(rng, {2, 3, 2}, 4, Activation::kSigmoid);
        InputRegion region = InputRegion::box({-0.2, -0.2}, {0.2, 0.2});
        int g = argmax_class(forward(net, {0.0, 0.0}));
        if (analyze(net, region, g).result != CheckResult::kProved) continue;
        VerificationJob job;
        job.net = net;
        job.region = region;
        job.target = g;
        job.n_bits = 1;
        job.mode = Mode::kFull;
        VerificationReport r = verify(job);
        if (r.vulnerable.empty()) {
            CHECK(r.overall == OverallStatus::kBfaTolerant);
        } else {
            CHECK(r.overall == OverallStatus::kUnknown);
            CHECK(r.milp_skipped_unsupported_activation);
        }
        return;
    }
    FAIL("no sigmoid instance with a provable baseline found");
}

TEST_CASE("witness JSON round-trips through the report file") {
    VerificationReport r = verify(fig2_job());
    std::string path = std::string(BFAV_TEST_DATA) + "/../.report.json";
    write_report(r, path);
    std::optional<StoredWitness> stored = load_witness(path);
    std::remove(path.c_str());
    REQUIRE(stored.has_value());
    CHECK(stored->target == 0);
    CHECK(stored->witness.attack.entries[0].param == r.witness->attack.entries[0].param);
    CHECK(replay(load_model(kFig2), stored->witness, stored->target));
}

TEST_CASE("replay rejects malformed witnesses and no-op attacks") {
    QuantizedNetwork net = load_model(kFig2);
    MilpWitness none;
    none.input = {1.0, 1.0};
    CHECK_FALSE(replay(net, none, 0));  // nothing flipped: baseline is robust

    MilpWitness bad;
    bad.attack.entries.push_back({ParamId{9, false, 0, 0}, {1}});
    bad.input = {1.0, 1.0};
    CHECK_THROWS_AS(replay(net, bad, 0), RangeError);
}

TEST_CASE("verify handles conv networks through lowering") {
    // small conv net; parameters keep their filter-tap ids in the report
    QuantizedNetwork net;
    net.quant_bits = 4;
    net.input_dim = 9;
    Layer conv;
    conv.kind = LayerKind::kConv2d;
    conv.integer_weights = IntMatrix(1, 4);
    conv.integer_weights.at(0, 0) = 3;
    conv.integer_weights.at(0, 1) = -2;
    conv.integer_weights.at(0, 2) = 1;
    conv.integer_weights.at(0, 3) = 2;
    conv.integer_bias = {1};
    conv.step_size = 0.25;
    conv.activation = Activation::kRelu;
    conv.conv = ConvMeta{3, 3, 2, 2, 1};
    net.layers.push_back(conv);
    Layer out;
    out.integer_weights = IntMatrix(2, 4);
    out.integer_weights.at(0, 0) = 4;
    out.integer_weights.at(0, 1) = 1;
    out.integer_weights.at(0, 2) = 1;
    out.integer_weights.at(0, 3) = 2;
    out.integer_weights.at(1, 0) = -1;
    out.integer_weights.at(1, 1) = -2;
    out.integer_weights.at(1, 2) = 0;
    out.integer_weights.at(1, 3) = -3;
    out.integer_bias = {2, 0};
    out.step_size = 0.2;
    out.activation = Activation::kNone;
    net.layers.push_back(out);
    net.validate();

    std::vector<double> center(9, 0.5);
    VerificationJob job;
    job.net = net;
    job.region = InputRegion::linf_ball(center, 0.05);
    job.target = argmax_class(forward(net, center));
    job.n_bits = 1;
    job.mode = Mode::kFull;
    VerificationReport r = verify(job);

    // 5 conv parameters (4 taps + bias) + 10 output parameters
    CHECK(r.verdicts.size() == 15);
    if (r.witness) {
        CHECK(replay(net, *r.witness, job.target));
    }
    CHECK((r.overall == OverallStatus::kFalsified || r.overall == OverallStatus::kBfaTolerant ||
           r.overall == OverallStatus::kUnknown));
}
