#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "snasnet/search.hpp"

using namespace snasnet;

namespace {

NetworkConfig tiny_cfg() {
    NetworkConfig cfg;
    cfg.base_channels = 4;
    cfg.timesteps = 3;
    cfg.num_classes = 2;
    cfg.in_channels = 1;
    cfg.in_h = 8;
    cfg.in_w = 8;
    cfg.voting_k = 2;
    cfg.fc_hidden = 8;
    return cfg;
}

Tensor4 gaussian_batch(const NetworkConfig& cfg, int n, uint64_t seed) {
    Rng rng(seed);
    Tensor4 batch(n, cfg.in_channels, cfg.in_h, cfg.in_w);
    for (auto& v : batch.data) v = rng.gaussian();
    return batch;
}

} // namespace

TEST_CASE("kendall tau on hand sequences") {
    CHECK(*kendall_tau({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(*kendall_tau({1, 2, 3, 4}, {40, 30, 20, 10}) == doctest::Approx(-1.0));
    // one swap: 5 concordant, 1 discordant of 6 pairs -> (5 - 1) / 6
    CHECK(*kendall_tau({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx((5.0 - 1.0) / 6.0));
    CHECK(!kendall_tau({1, 1, 1}, {1, 2, 3}).has_value());
    CHECK_THROWS_AS(kendall_tau({1}, {2}), std::invalid_argument);
}

TEST_CASE("kendall tau tie correction") {
    // xs has one tied pair; tau_b = (C - D) / sqrt((n0 - n1)(n0 - n2))
    std::vector<double> xs = {1, 2, 2, 3};
    std::vector<double> ys = {1, 2, 3, 4};
    // pairs: (1,2)C (1,2)C (1,3)C (2,2)tie-x (2,3)C (2,3)C -> C=5 D=0
    // n0 = 6, n1 = 1 (x ties), n2 = 0
    CHECK(*kendall_tau(xs, ys) == doctest::Approx(5.0 / std::sqrt(6.0 * 5.0)));
}

TEST_CASE("kendall tau antisymmetry and monotone invariance") {
    Rng rng(3);
    std::vector<double> xs(20), ys(20);
    for (auto& v : xs) v = rng.gaussian();
    for (auto& v : ys) v = rng.gaussian();
    const double t = *kendall_tau(xs, ys);
    std::vector<double> neg = ys;
    for (auto& v : neg) v = -v;
    CHECK(*kendall_tau(xs, neg) == doctest::Approx(-t).epsilon(1e-12));
    std::vector<double> mono = xs;
    for (auto& v : mono) v = std::exp(0.5 * v) + 3.0;
    CHECK(*kendall_tau(mono, ys) == doctest::Approx(t).epsilon(1e-12));
}

TEST_CASE("sign test tail probabilities") {
    CHECK(sign_test_p(0, 0) == doctest::Approx(1.0));
    CHECK(sign_test_p(1, 0) == doctest::Approx(0.5));
    CHECK(sign_test_p(0, 1) == doctest::Approx(1.0));
    // P[Bin(10, 1/2) >= 8] = (45 + 10 + 1) / 1024
    CHECK(sign_test_p(8, 2) == doctest::Approx(56.0 / 1024.0).epsilon(1e-12));
    CHECK(sign_test_p(10, 0) == doctest::Approx(1.0 / 1024.0).epsilon(1e-12));
}

TEST_CASE("concordance counts skip ties") {
    int c = 0, d = 0;
    concordance_counts({1, 2, 2, 3}, {1, 3, 2, 2}, c, d);
    // pairs: (0,1)C (0,2)C (0,3)C (1,2)tie-x (1,3)D (2,3)tie-y
    CHECK(c == 3);
    CHECK(d == 1);
}

TEST_CASE("random_search determinism across worker counts") {
    const NetworkConfig cfg = tiny_cfg();
    Tensor4 batch = gaussian_batch(cfg, 4, 11);
    SearchReport r1 = random_search(12, SampleMode::ForwardAndBackward, batch, cfg, 99, 1, true);
    SearchReport r3 = random_search(12, SampleMode::ForwardAndBackward, batch, cfg, 99, 3, true);
    CHECK(format_report(r1) == format_report(r3));
    CHECK(r1.best_index == r3.best_index);
}

TEST_CASE("random_search ranking puts singular scores last") {
    const NetworkConfig cfg = tiny_cfg();
    Tensor4 batch = gaussian_batch(cfg, 4, 5);
    SearchReport r = random_search(20, SampleMode::ForwardOnly, batch, cfg, 7, 2);
    REQUIRE(static_cast<int>(r.ranked.size()) == 20);
    bool seen_singular = false;
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& rec : r.ranked) {
        if (rec.score.singular) {
            seen_singular = true;
        } else {
            CHECK(!seen_singular); // finite never follows singular
            CHECK(rec.score.value <= prev);
            prev = rec.score.value;
        }
    }
    CHECK(r.best_index == r.ranked.front().sample_index);
}

TEST_CASE("candidate seeds derive from the master seed") {
    const NetworkConfig cfg = tiny_cfg();
    Tensor4 batch = gaussian_batch(cfg, 4, 5);
    SearchReport r = random_search(5, SampleMode::ForwardOnly, batch, cfg, 321, 1);
    for (const auto& rec : r.ranked)
        CHECK(rec.seed == derive_seed(321, static_cast<uint64_t>(rec.sample_index)));
}

TEST_CASE("compact genotype codec round trip") {
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        CellGenotype g = sample_genotype(
            rng, i % 2 ? SampleMode::ForwardAndBackward : SampleMode::ForwardOnly);
        CellGenotype back = parse_compact_genotype(compact_genotype(g));
        CHECK(back.forward == g.forward);
        CHECK(back.backward == g.backward);
        CHECK(back.mode == g.mode);
    }
    CHECK_THROWS(parse_compact_genotype("bogus"));
    CHECK_THROWS(parse_compact_genotype("B:zzzzzz|zzzzzX")); // bad op code
    CHECK_THROWS(parse_compact_genotype("Q:zzzzzz|zzzzzz")); // bad mode letter
}

TEST_CASE("report round trip preserves ranking and scores") {
    const NetworkConfig cfg = tiny_cfg();
    Tensor4 batch = gaussian_batch(cfg, 4, 2);
    SearchReport r = random_search(10, SampleMode::ForwardAndBackward, batch, cfg, 13, 2, true);
    r.ranked[0].trained_accuracy = 0.8125;
    const std::string text = format_report(r);
    std::vector<CandidateRecord> back = parse_report(text);
    REQUIRE(back.size() == r.ranked.size());
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].sample_index == r.ranked[i].sample_index);
        CHECK(back[i].seed == r.ranked[i].seed);
        CHECK(back[i].score.singular == r.ranked[i].score.singular);
        if (!back[i].score.singular)
            CHECK(back[i].score.value == r.ranked[i].score.value); // %.17g is lossless
        REQUIRE(back[i].hd_score.has_value() == r.ranked[i].hd_score.has_value());
        CHECK(back[i].trained_accuracy == r.ranked[i].trained_accuracy);
        CHECK(compact_genotype(back[i].genotype) == compact_genotype(r.ranked[i].genotype));
    }
    CHECK(text.find("duration") == std::string::npos);
}

TEST_CASE("attribute_stats bucket means") {
    std::vector<CandidateRecord> recs(3);
    // genotype 0: one forward skip, score 2
    recs[0].genotype.forward[0] = Operation::SkipConnect;
    recs[0].score.value = 2.0;
    recs[0].score.singular = false;
    // genotype 1: one forward skip + one forward conv3x3, score 4
    recs[1].genotype.forward[0] = Operation::SkipConnect;
    recs[1].genotype.forward[1] = Operation::Conv3x3;
    recs[1].score.value = 4.0;
    recs[1].score.singular = false;
    // genotype 2: all Zeroize, score 6
    recs[2].score.value = 6.0;
    recs[2].score.singular = false;

    auto stats = attribute_stats(recs, false);
    REQUIRE(stats.count("skip_connect") == 1);
    const auto& sk = stats["skip_connect"];
    REQUIRE(sk.size() == 2);
    CHECK(sk[0].attribute_value == 0);
    CHECK(sk[0].count == 1);
    CHECK(sk[0].mean_y == doctest::Approx(6.0));
    CHECK(sk[1].attribute_value == 1);
    CHECK(sk[1].count == 2);
    CHECK(sk[1].mean_y == doctest::Approx(3.0));

    const auto& fw = stats["fw"];
    // forward non-Zeroize counts: 1, 2, 0
    REQUIRE(fw.size() == 3);
    CHECK(fw[0].attribute_value == 0);
    CHECK(fw[0].mean_y == doctest::Approx(6.0));
    CHECK(fw[2].attribute_value == 2);
    CHECK(fw[2].mean_y == doctest::Approx(4.0));
}

TEST_CASE("format_score tokens") {
    ArchitectureScore inf;
    CHECK(format_score(inf) == "-inf");
    ArchitectureScore s;
    s.singular = false;
    s.value = 1.5;
    CHECK(format_score(s) == "1.5");
}
