#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace vcvote;

namespace {

LatticeSpec grid14() { return LatticeSpec::for_image(224, 224); }

} // namespace

TEST(Lattice, ForImageUsesCellCenterConvention) {
    const LatticeSpec s = grid14();
    EXPECT_EQ(s.stride, 16);
    EXPECT_DOUBLE_EQ(s.receptive_offset, 8.0);
    EXPECT_EQ(s.grid_h, 14);
    EXPECT_EQ(s.grid_w, 14);
    EXPECT_EQ(LatticeSpec::for_image(500, 333).grid_w, 21);
}

TEST(Lattice, L0OfAffineMap) {
    const LatticeSpec s = grid14();
    EXPECT_EQ(l0_of({0, 0}, s), (ImagePos{8, 8}));
    EXPECT_EQ(l0_of({7, 7}, s), (ImagePos{120, 120}));
    EXPECT_EQ(l0_of({13, 2}, s), (ImagePos{216, 40}));
}

TEST(Lattice, L0OfRejectsCellsOutsideGrid) {
    const LatticeSpec s = grid14();
    EXPECT_THROW(l0_of({14, 0}, s), Error);
    EXPECT_THROW(l0_of({0, -1}, s), Error);
}

TEST(Lattice, L4OfNearestAndTies) {
    const LatticeSpec s = grid14();
    EXPECT_EQ(l4_of({8, 8}, s), (GridPos{0, 0}));
    EXPECT_EQ(l4_of({15.9, 15.9}, s), (GridPos{0, 0}));
    EXPECT_EQ(l4_of({16, 16}, s), (GridPos{0, 0})); // equidistant between rows 0 and 1
    EXPECT_EQ(l4_of({16.01, 16}, s), (GridPos{1, 0}));
    EXPECT_EQ(l4_of({0, 223.5}, s), (GridPos{0, 13}));
}

TEST(Lattice, L4OfRejectsPositionsOutsideImage) {
    const LatticeSpec s = grid14();
    EXPECT_THROW(l4_of({-0.1, 5}, s), Error);
    EXPECT_THROW(l4_of({5, 224}, s), Error);
}

TEST(Lattice, RoundTripOverWholeGrid) {
    const LatticeSpec s = grid14();
    for (int r = 0; r < s.grid_h; ++r)
        for (int c = 0; c < s.grid_w; ++c) EXPECT_EQ(l4_of(l0_of({r, c}, s), s), (GridPos{r, c}));
}

TEST(Lattice, L4OfMatchesBruteForceArgmin) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        const LatticeSpec s = vcvote::testing::random_lattice(rng);
        ImagePos q = vcvote::testing::random_position(s, rng);
        if (i % 5 == 0) q = {std::floor(q.y / 8) * 8, std::floor(q.x / 8) * 8}; // hit tie lines
        ASSERT_EQ(l4_of(q, s), oracle::l4(q, s)) << q.y << "," << q.x;
    }
}

TEST(Lattice, InteriorNeighborhoodHas177Members) {
    const LatticeSpec s = LatticeSpec::for_image(800, 800);
    const ImagePos q = l0_of({25, 25}, s);
    EXPECT_EQ(neighborhood(q, s, 120).members.size(), 177u);
    EXPECT_EQ(oracle::neighborhood(q, s, 120).size(), 177u);
}

TEST(Lattice, ZeroRadiusIsEmpty) {
    EXPECT_TRUE(neighborhood({100, 100}, grid14(), 0.0).members.empty());
}

TEST(Lattice, CornerNeighborhoodIsSmaller) {
    const LatticeSpec s = LatticeSpec::for_image(800, 800);
    const auto corner = neighborhood({1, 1}, s, 120).members;
    EXPECT_EQ(corner, oracle::neighborhood({1, 1}, s, 120));
    EXPECT_LT(corner.size(), 177u);
}

TEST(Lattice, NeighborhoodMatchesScanAndStaysInExtent) {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 300; ++i) {
        const LatticeSpec s = vcvote::testing::random_lattice(rng);
        const ImagePos q = vcvote::testing::random_position(s, rng);
        const double radius = std::uniform_real_distribution<double>(0, 160)(rng);
        const auto n = neighborhood(q, s, radius).members;
        ASSERT_EQ(n, oracle::neighborhood(q, s, radius));
        const GridPos c = l4_of(q, s);
        const int h = offset_half_extent(radius, 16);
        for (const auto& p : n) {
            EXPECT_LE(std::abs(p.row - c.row), h);
            EXPECT_LE(std::abs(p.col - c.col), h);
        }
    }
}

TEST(Lattice, DefaultRadiusReachesSevenCells) {
    EXPECT_EQ(offset_half_extent(120, 16), 7);
    EXPECT_EQ(offset_half_extent(56, 16), 3);
    EXPECT_EQ(oracle::half_extent(120, 16), 7);
    EXPECT_EQ(oracle::half_extent(56, 16), 3);
}

TEST(Lattice, NeighborhoodsGrowWithRadius) {
    std::mt19937_64 rng(3);
    const LatticeSpec s = LatticeSpec::for_image(320, 320);
    for (int i = 0; i < 200; ++i) {
        const ImagePos q = vcvote::testing::random_position(s, rng);
        const double r1 = std::uniform_real_distribution<double>(0, 150)(rng);
        const double r2 = r1 + std::uniform_real_distribution<double>(0, 50)(rng);
        const auto a = neighborhood(q, s, r1).members, b = neighborhood(q, s, r2).members;
        for (const auto& p : a) EXPECT_NE(std::find(b.begin(), b.end(), p), b.end());
    }
}
