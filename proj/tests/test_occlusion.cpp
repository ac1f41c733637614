#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace vcvote;
namespace vt = vcvote::testing;

namespace {

BinaryMask ellipse_target(int h, int w) {
    BinaryMask m(h, w, 0);
    const BinaryMask e = ellipse_occluder(h / 3, w / 3).mask;
    stamp(m, e, h / 2 - h / 3, w / 2 - w / 3);
    return m;
}

} // namespace

TEST(Occlusion, RegimesMapToRatioBins) {
    const auto r3 = OcclusionConfig::regime(3);
    EXPECT_EQ(r3.occluder_count, 3);
    EXPECT_DOUBLE_EQ(r3.ratio_lo, 0.4);
    EXPECT_DOUBLE_EQ(r3.ratio_hi, 0.6);
    EXPECT_THROW(OcclusionConfig::regime(5), Error);
    EXPECT_THROW((OcclusionConfig{1, 0.5, 0.5, 0, 10}.validate()), Error);
}

TEST(Occlusion, AcceptedRatioMatchesPixelCount) {
    const BinaryMask target = ellipse_target(120, 160);
    const auto occ = random_ellipses(6, 10, 40, 1);
    SceneAnnotations ann;
    ann.parts.push_back({0, {60, 80}, Box::centered({60, 80}, 40, 40), 0, 0});
    for (int n = 2; n <= 4; ++n) {
        const auto cfg = OcclusionConfig::regime(n, 10 + n);
        const auto res = synthesize_occlusion(target, ann, occ, cfg);
        double in = 0, cov = 0;
        for (int y = 0; y < 120; ++y)
            for (int x = 0; x < 160; ++x)
                if (target(y, x)) {
                    in += 1;
                    cov += res.composite(y, x) != 0;
                }
        EXPECT_DOUBLE_EQ(res.ratio, cov / in);
        EXPECT_GE(res.ratio, cfg.ratio_lo);
        EXPECT_LT(res.ratio, cfg.ratio_hi);
        EXPECT_DOUBLE_EQ(res.annotations.parts[0].occluded_fraction,
                         oracle::occluded_fraction(ann.parts[0].box, res.composite));
    }
}

TEST(Occlusion, FullCoverIsNeverAccepted) {
    BinaryMask target(50, 50, 0);
    target(25, 25) = 1; // any overlap covers the whole target
    const auto occ = random_ellipses(2, 5, 8, 2);
    EXPECT_THROW(synthesize_occlusion(target, {}, occ, {2, 0.2, 0.4, 0, 20}), Error);
}

TEST(Occlusion, EveryOccluderTouchesTheTarget) {
    // one occluder, ratio bin starting at zero: an occluder missing the target would give 0
    const BinaryMask target = ellipse_target(100, 100);
    const auto occ = random_ellipses(1, 3, 4, 3);
    for (std::uint64_t s = 0; s < 30; ++s) {
        const auto res = synthesize_occlusion(target, {}, occ, {1, 0.0, 1.0, s, 50});
        EXPECT_GT(overlap_count(res.composite, target), 0u);
    }
}

TEST(Occlusion, Deterministic) {
    const BinaryMask target = ellipse_target(90, 90);
    const auto occ = random_ellipses(4, 8, 30, 4);
    const auto a = synthesize_occlusion(target, {}, occ, OcclusionConfig::regime(2, 77));
    const auto b = synthesize_occlusion(target, {}, occ, OcclusionConfig::regime(2, 77));
    EXPECT_EQ(a.composite, b.composite);
    EXPECT_EQ(a.attempts, b.attempts);
}

TEST(Occlusion, EmptyInputsAreErrors) {
    const BinaryMask target = ellipse_target(40, 40);
    const std::vector<OccluderSegment> none;
    EXPECT_THROW(synthesize_occlusion(target, {}, none, {}), Error);
    EXPECT_THROW(synthesize_occlusion(BinaryMask(40, 40, 0), {}, random_ellipses(1, 3, 4, 0), {}), Error);
}

TEST(Occlusion, OccludedFractionMatchesOracle) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 60);
    for (int i = 0; i < 300; ++i) {
        BinaryMask m(64, 64, 0);
        for (auto& v : m.data()) v = rng() % 3 == 0;
        const double x = u(rng), y = u(rng);
        const Box b{x, y, x + 0.5 + u(rng) / 4, y + 0.5 + u(rng) / 4};
        EXPECT_DOUBLE_EQ(occluded_fraction(b, m), oracle::occluded_fraction(b, m));
    }
}

TEST(Occlusion, MaskedCellsMatchOracle) {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 50; ++i) {
        const LatticeSpec s = vt::random_lattice(rng, 12);
        BinaryMask m(s.image_h, s.image_w, 0);
        for (auto& v : m.data()) v = rng() % 2;
        EXPECT_EQ(masked_cells(s, m), oracle::masked_cells(s, m));
    }
    EXPECT_THROW(masked_cells(LatticeSpec::for_image(32, 32), BinaryMask(16, 16, 0)), Error);
}

TEST(Occlusion, CellMaskCoversExactlyThoseCells) {
    const LatticeSpec s = LatticeSpec::for_image(160, 160);
    const std::vector<GridPos> cells = {{0, 0}, {3, 7}, {9, 9}};
    const BinaryMask m = cell_mask(s, cells);
    EXPECT_EQ(masked_cells(s, m), cells);
    EXPECT_EQ(mask_count(m), 3u * 256u);
}

TEST(Corrupt, EmptyMaskIsIdentity) {
    std::mt19937_64 rng(7);
    const FeatureMap fm = vt::random_features(LatticeSpec::for_image(96, 128), 4, rng);
    CorruptOptions o;
    o.pool = {{1, 2, 3, 4}};
    EXPECT_EQ(corrupt_features(fm, BinaryMask(96, 128, 0), o).data(), fm.data());
}

TEST(Corrupt, ResampleReplacesMaskedCellsOnly) {
    std::mt19937_64 rng(8);
    const LatticeSpec s = LatticeSpec::for_image(96, 128);
    const FeatureMap fm = vt::random_features(s, 3, rng);
    CorruptOptions o;
    o.pool = {{9, 9, 9}, {7, 7, 7}};
    const std::vector<GridPos> cells = {{1, 1}, {4, 6}};
    const FeatureMap out = corrupt_features(fm, cell_mask(s, cells), o);
    for (int r = 0; r < s.grid_h; ++r)
        for (int c = 0; c < s.grid_w; ++c) {
            const bool hit = std::find(cells.begin(), cells.end(), GridPos{r, c}) != cells.end();
            const auto a = out.at({r, c}), b = fm.at({r, c});
            if (hit) EXPECT_TRUE(a[0] == 9.0f || a[0] == 7.0f);
            else EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
        }
}

TEST(Corrupt, FullMaskResamplesEverything) {
    std::mt19937_64 rng(9);
    const LatticeSpec s = LatticeSpec::for_image(64, 64);
    const FeatureMap fm = vt::random_features(s, 2, rng);
    CorruptOptions o;
    o.pool = {{5, 5}};
    const FeatureMap out = corrupt_features(fm, BinaryMask(64, 64, 1), o);
    for (float v : out.data()) EXPECT_EQ(v, 5.0f);
}

TEST(Corrupt, OccluderConceptAndErrors) {
    const LatticeSpec s = LatticeSpec::for_image(64, 64);
    const FeatureMap fm(s, 2);
    CorruptOptions o;
    o.mode = CorruptMode::occluder_concept;
    o.distractor = {3, -3};
    const FeatureMap out = corrupt_features(fm, BinaryMask(64, 64, 1), o);
    EXPECT_EQ(out.at({2, 2})[1], -3.0f);
    o.distractor = {1};
    EXPECT_THROW(corrupt_features(fm, BinaryMask(64, 64, 1), o), Error);
    CorruptOptions r;
    EXPECT_THROW(corrupt_features(fm, BinaryMask(64, 64, 1), r), Error);
}

TEST(Corrupt, Deterministic) {
    std::mt19937_64 rng(10);
    const LatticeSpec s = LatticeSpec::for_image(96, 96);
    const FeatureMap fm = vt::random_features(s, 2, rng);
    CorruptOptions o;
    o.pool = {{1, 1}, {2, 2}, {3, 3}};
    o.seed = 4;
    BinaryMask m(96, 96, 0);
    for (int y = 0; y < 50; ++y)
        for (int x = 0; x < 96; ++x) m(y, x) = 1;
    EXPECT_EQ(corrupt_features(fm, m, o).data(), corrupt_features(fm, m, o).data());
}
