#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "oracles.hpp"

using namespace vcvote;

namespace {

std::vector<double> draw(std::size_t n, double mean, double sd, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(mean, sd);
    std::vector<double> v(n);
    for (auto& x : v) x = std::abs(g(rng));
    return v;
}

Scene blank_scene(int h, int w) {
    Scene s{"s", "c", FeatureMap(LatticeSpec::for_image(h, w), 1), {}};
    s.annotations.objects.push_back({0, "c", {0, 0, double(w), double(h)}});
    return s;
}

} // namespace

TEST(Negatives, FullyExcludedObjectIsError) {
    std::vector<Scene> scenes = {blank_scene(64, 64)};
    scenes[0].annotations.parts.push_back({0, {32, 32}, Box::centered({32, 32}, 10, 10), 0, 0});
    EXPECT_THROW(sample_negatives(scenes, 0, 1, 160, 0), Error);
}

TEST(Negatives, ZeroDistanceAcceptsAnyCell) {
    std::vector<Scene> scenes = {blank_scene(64, 64)};
    scenes[0].annotations.parts.push_back({0, {32, 32}, Box::centered({32, 32}, 10, 10), 0, 0});
    EXPECT_EQ(sample_negatives(scenes, 0, 16, 0, 0).size(), 16u);
}

TEST(Negatives, AllFarFromPositivesAndDeterministic) {
    std::vector<Scene> scenes;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 5; ++i) {
        scenes.push_back(blank_scene(320, 480));
        for (int k = 0; k < 2; ++k) {
            const ImagePos c = vcvote::testing::random_position(scenes.back().features.spec(), rng);
            scenes.back().annotations.parts.push_back({0, c, Box::centered(c, 5, 5), 0, 0});
        }
    }
    const auto neg = sample_negatives(scenes, 0, 100, 160, 9);
    EXPECT_EQ(neg, sample_negatives(scenes, 0, 100, 160, 9));
    ASSERT_EQ(neg.size(), 100u);
    for (const auto& n : neg)
        for (const auto& p : scenes[n.scene].annotations.parts) EXPECT_GE(pixel_distance(n.q, p.center), 160.0);
}

TEST(Threshold, NearestRankOnOneToHundred) {
    std::vector<double> r(100);
    std::iota(r.begin(), r.end(), 1.0);
    EXPECT_EQ(calibrate_threshold(r), 95.0);
    EXPECT_DOUBLE_EQ(false_negative_rate(r, 95.0), 0.05);
}

TEST(Threshold, AllEqual) {
    const std::vector<double> r(40, 2.5);
    EXPECT_EQ(calibrate_threshold(r), 2.5);
    EXPECT_EQ(false_negative_rate(r, 2.5), 0.0);
}

TEST(Threshold, HeldOutFnrNearFivePercent) {
    const auto fit = draw(1000, 1.0, 0.4, 2), held = draw(1000, 1.0, 0.4, 3);
    const double t = calibrate_threshold(fit);
    EXPECT_LE(false_negative_rate(fit, t), 0.05);
    EXPECT_NEAR(false_negative_rate(held, t), 0.05, 0.02);
}

TEST(Threshold, InfiniteDistancesFallBack) {
    std::vector<double> r(10, oracle::kInf);
    r[0] = 0.5;
    EXPECT_EQ(calibrate_threshold(r), 0.5);
}

TEST(Histogram, ExactMatchesLandInBinZero) {
    const std::vector<double> pos(50, 0.0);
    const auto neg = draw(200, 3.0, 1.0, 4);
    const CueModel m = build_cue_model(0, pos, neg);
    EXPECT_DOUBLE_EQ(m.hist_pos[0], 1.0);
    EXPECT_EQ(m.threshold, 0.0);
    EXPECT_NEAR(std::accumulate(m.hist_neg.begin(), m.hist_neg.end(), 0.0), 1.0, 1e-9);
}

TEST(Histogram, SameDistributionIsClose) {
    const auto a = draw(2000, 2.0, 1.0, 5), b = draw(2000, 2.0, 1.0, 6);
    const CueModel m = build_cue_model(0, a, b, {5, 1e-7, 0.05, 99.5});
    double l1 = 0;
    for (int i = 0; i < 5; ++i) l1 += std::abs(m.hist_pos[i] - m.hist_neg[i]);
    EXPECT_LT(l1, 0.1);
}

TEST(Histogram, OutOfRangeClampsToLastBin) {
    const std::vector<double> pos = {0.1, 0.2, 50.0}, neg = {0.3};
    const CueModel m = build_cue_model(0, pos, neg, {10, 1e-7, 0.05, 50.0});
    EXPECT_EQ(m.bin_of(1e9), 9);
    EXPECT_EQ(m.bin_of(oracle::kInf), 9);
    // r_max is the pooled median 0.2, so 0.2 and 50 both land in the last bin
    EXPECT_DOUBLE_EQ(m.r_max, 0.2);
    EXPECT_NEAR(m.hist_pos[9], 2.0 / 3.0, 1e-12);
}

TEST(Histogram, MatchesLoopOracle) {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const auto rep = oracle::check_instance(1000 + seed);
        EXPECT_EQ(rep.distance_mismatches, 0u) << seed;
        EXPECT_LE(rep.distribution_error, 1e-6) << seed;
    }
}

TEST(Score, Examples) {
    const std::vector<double> same = {0.5, 0.5}, pos = {0.1, 0.9}, neg = {0.0, 1.0};
    EXPECT_EQ(score_table(same, same, 1e-7)[0], 0.0);
    const double s = score_table(pos, neg, 1e-7)[0];
    EXPECT_NEAR(s, 13.8155, 1e-3);
    EXPECT_DOUBLE_EQ(s, std::log(0.1 + 1e-7) - std::log(1e-7));
}

TEST(Score, Antisymmetry) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> a(100), b(100);
        for (auto& x : a) x = (rng() % 3 == 0) ? 0.0 : std::uniform_real_distribution<double>(0, 1)(rng);
        for (auto& x : b) x = (rng() % 3 == 0) ? 0.0 : std::uniform_real_distribution<double>(0, 1)(rng);
        const auto ab = score_table(a, b, 1e-7), ba = score_table(b, a, 1e-7);
        for (int k = 0; k < 100; ++k) EXPECT_EQ(ab[k], -ba[k]);
    }
}

TEST(Score, LookupUsesContainingBin) {
    CueModel m;
    m.r_max = 10.0;
    m.score_table = {1, 2, 3, 4, 5};
    EXPECT_EQ(m.score(0.0), 1);
    EXPECT_EQ(m.score(1.99), 1);
    EXPECT_EQ(m.score(2.0), 2);
    EXPECT_EQ(m.score(9.99), 5);
    EXPECT_EQ(m.score(25.0), 5);
}

TEST(Score, GoodAndPoorCues) {
    const auto pos = draw(2000, 0.5, 0.2, 8), neg = draw(2000, 3.0, 0.5, 9);
    const CueModel good = build_cue_model(0, pos, neg);
    double overlap = 0;
    for (int i = 0; i < good.bins(); ++i) overlap += std::min(good.hist_pos[i], good.hist_neg[i]);
    EXPECT_LT(overlap, 0.2);
    EXPECT_GT(*std::max_element(good.score_table.begin(), good.score_table.end()), 0.0);

    const auto a = draw(2000, 2.0, 1.0, 10), b = draw(2000, 2.0, 1.0, 11);
    const CueModel poor = build_cue_model(1, a, b, {8, 1e-7, 0.05, 99.5});
    for (int i = 0; i < poor.bins(); ++i)
        if (poor.hist_pos[i] + poor.hist_neg[i] > 0.02) {
            EXPECT_LT(std::abs(poor.score_table[i]), 0.2) << i;
        }
}

TEST(Supporting, RankingAndTies) {
    std::vector<CueModel> cues(5);
    const double fpr[] = {0.3, 0.0, 0.2, 0.2, 0.9};
    for (int i = 0; i < 5; ++i) {
        cues[i].concept_id = i;
        cues[i].fpr = fpr[i];
    }
    EXPECT_EQ(select_supporting(cues, 3), (std::vector<int>{1, 2, 3}));
    EXPECT_EQ(select_supporting(cues, 5), (std::vector<int>{1, 2, 3, 0, 4}));
    EXPECT_THROW(select_supporting(cues, 6), Error);
    EXPECT_THROW(select_supporting(cues, 0), Error);
}

TEST(Supporting, RankingMatchesRecomputedRates) {
    std::mt19937_64 rng(12);
    std::vector<CueModel> cues;
    std::vector<std::vector<double>> negs;
    for (int v = 0; v < 30; ++v) {
        const auto pos = draw(100, 1.0, 0.5, 100 + v);
        negs.push_back(draw(300, 0.5 + 0.1 * (rng() % 20), 0.7, 200 + v));
        cues.push_back(build_cue_model(v, pos, negs.back()));
    }
    std::vector<std::pair<double, int>> want;
    for (int v = 0; v < 30; ++v) {
        double hit = 0;
        for (double r : negs[v]) hit += r <= cues[v].threshold;
        want.push_back({hit / 300.0, v});
    }
    std::sort(want.begin(), want.end());
    const auto got = select_supporting(cues, 10);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(got[i], want[i].second);
}

TEST(Supporting, FprNeverFallsAsThresholdRises) {
    const auto neg = draw(500, 1.0, 1.0, 13);
    double last = 0;
    for (double t = 0; t < 5; t += 0.05) {
        const double f = false_positive_rate(neg, t);
        EXPECT_GE(f, last);
        last = f;
    }
}
