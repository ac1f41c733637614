#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace vcvote;
namespace vt = vcvote::testing;

namespace {

struct Trained {
    SynthGenerator gen{vt::tuned_spec()};
    Model model;
    Trained() {
        model = train_model(vt::scenes_of(gen.generate(80, 0, "train")), vt::tuned_training());
    }
};

const Trained& trained() {
    static const Trained t;
    return t;
}

} // namespace

TEST(Schedule, Validation) {
    EXPECT_NO_THROW(ScaleSchedule{}.validate());
    EXPECT_THROW(ScaleSchedule{{}}.validate(), Error);
    EXPECT_THROW((ScaleSchedule{{224, 224}}.validate()), Error);
    EXPECT_THROW((ScaleSchedule{{480, 224}}.validate()), Error);
    EXPECT_THROW((ScaleSchedule{{-1, 224}}.validate()), Error);
}

TEST(Schedule, NearestTiesGoToSmaller) {
    const ScaleSchedule s;
    EXPECT_EQ(s.nearest(600), 560);
    EXPECT_EQ(s.nearest(601), 640);
    EXPECT_EQ(s.nearest(100), 224);
    EXPECT_EQ(s.nearest(5000), 976);
}

TEST(Aggregate, TwoPartsAgreeing) {
    const std::map<int, std::map<int, double>> m = {{0, {{224, 1.0}, {480, 5.0}, {640, 2.0}}},
                                                    {1, {{224, 0.5}, {480, 3.0}, {640, 2.9}}}};
    const auto p = aggregate_scale(m);
    EXPECT_EQ(p.part_scale.at(0), 480);
    EXPECT_EQ(p.part_scale.at(1), 480);
    EXPECT_EQ(p.aggregate, 480.0);
}

TEST(Aggregate, MeanOfDisagreeingParts) {
    const std::map<int, std::map<int, double>> m = {{0, {{480, 5.0}, {720, 2.0}}}, {1, {{480, 1.0}, {720, 3.0}}}};
    const auto p = aggregate_scale(m);
    EXPECT_EQ(p.aggregate, 600.0);
    EXPECT_EQ(ScaleSchedule{}.nearest(p.aggregate), 560);
}

TEST(Aggregate, TiesGoToSmallerScale) {
    const std::map<int, std::map<int, double>> m = {{0, {{320, 2.0}, {480, 2.0}}}};
    EXPECT_EQ(aggregate_scale(m).part_scale.at(0), 320);
}

TEST(Aggregate, MatchesRecomputation) {
    std::mt19937_64 rng(1);
    const ScaleSchedule sched;
    for (int i = 0; i < 300; ++i) {
        std::map<int, std::map<int, double>> m;
        const int parts = 1 + static_cast<int>(rng() % 5);
        for (int p = 0; p < parts; ++p)
            for (int t : sched.scales) m[p][t] = static_cast<double>(rng() % 6);
        double sum = 0;
        for (const auto& [p, by] : m) {
            int best = -1;
            double bv = -1;
            for (int t : sched.scales)
                if (by.at(t) > bv) {
                    bv = by.at(t);
                    best = t;
                }
            sum += best;
        }
        EXPECT_DOUBLE_EQ(aggregate_scale(m).aggregate, sum / parts);
    }
}

TEST(Aggregate, EmptyIsError) {
    EXPECT_THROW(aggregate_scale({}), Error);
    EXPECT_THROW(aggregate_scale({{0, {}}}), Error);
}

TEST(UpsampledMax, EqualsMaxOfMaterializedMap) {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 30; ++i) {
        const LatticeSpec s = vt::random_lattice(rng, 10);
        Grid<double> g(s.grid_h, s.grid_w, 0.0);
        for (double& v : g.data()) v = std::uniform_real_distribution<double>(-2, 6)(rng);
        const Grid<double> up = oracle::upsample(g, s);
        EXPECT_NEAR(upsampled_max(g, s), *std::max_element(up.data().begin(), up.data().end()), 1e-9);
    }
}

TEST(OracleScale, BringsObjectToTrainingSize) {
    EXPECT_DOUBLE_EQ(oracle_scale({0, 0, 112, 200}, 224), 448.0);
    EXPECT_DOUBLE_EQ(oracle_scale({10, 10, 234, 234}, 500), 500.0);
    EXPECT_THROW(oracle_scale({0, 0, 0, 10}, 224), Error);
}

TEST(MultiScale, SingleScaleAtTrainingSizeIsIdentity) {
    const auto& t = trained();
    const auto ms = t.gen.generate_multiscale(500, "ms", 224, 224, {224});
    const VoteParams vp = VoteParams::from(t.model.params);
    const auto res = detect_multiscale(ms.features, t.model, t.gen.spec().object_class, "ms", 224, vp);
    EXPECT_EQ(res.rerun_scale, 224);
    std::vector<Detection> want;
    for (const auto& p : t.model.parts) {
        auto d = detect_part(ms.features.at(224), t.model, p, "ms", vp);
        want.insert(want.end(), d.begin(), d.end());
    }
    EXPECT_EQ(res.detections, want);
}

TEST(MultiScale, BoxesScaleToOriginalResolution) {
    const auto& t = trained();
    const auto ms = t.gen.generate_multiscale(501, "ms", 224, 448, {224});
    const VoteParams vp = VoteParams::from(t.model.params);
    const auto a = detect_multiscale(ms.features, t.model, t.gen.spec().object_class, "ms", 224, vp);
    const auto b = detect_multiscale(ms.features, t.model, t.gen.spec().object_class, "ms", 448, vp);
    ASSERT_EQ(a.detections.size(), b.detections.size());
    for (std::size_t i = 0; i < a.detections.size(); ++i) {
        EXPECT_EQ(b.detections[i].box, a.detections[i].box.scaled(2.0));
        EXPECT_EQ(b.detections[i].score, a.detections[i].score);
    }
}

TEST(MultiScale, RecoversTheObjectScaleOnCleanData) {
    SynthSpec spec = vt::tuned_spec();
    spec.noise_sigma = 0.0;
    spec.decoy_rate = 0.0;
    const SynthGenerator gen(spec);
    const Model m = train_model(vt::scenes_of(gen.generate(80, 0, "train")), vt::tuned_training());
    const ScaleSchedule sched;
    for (int t : {320, 640, 976}) {
        const auto ms = gen.generate_multiscale(600 + t, "ms", t, 500, sched.scales);
        const auto r = detect_multiscale(ms.features, m, spec.object_class, "ms", 500, VoteParams::from(m.params));
        EXPECT_EQ(r.prediction.aggregate, t);
        EXPECT_EQ(scale_loss(t, r.prediction.aggregate), 0.0);
    }
}

TEST(MultiScale, DeterministicAcrossJobCounts) {
    const auto& t = trained();
    const auto ms = t.gen.generate_multiscale(502, "ms", 700, 500, ScaleSchedule{}.scales);
    const VoteParams vp = VoteParams::from(t.model.params);
    MultiScaleOptions o1, o4;
    o4.jobs = 4;
    const auto a = detect_multiscale(ms.features, t.model, t.gen.spec().object_class, "ms", 500, vp, o1);
    const auto b = detect_multiscale(ms.features, t.model, t.gen.spec().object_class, "ms", 500, vp, o4);
    EXPECT_EQ(a.detections, b.detections);
    EXPECT_EQ(a.prediction.aggregate, b.prediction.aggregate);
    EXPECT_EQ(a.prediction.max_score, b.prediction.max_score);
}

TEST(MultiScale, ForcedScaleSkipsPrediction) {
    const auto& t = trained();
    const auto ms = t.gen.generate_multiscale(503, "ms", 480, 500, {224, 480});
    MultiScaleOptions o;
    o.forced_scale = 470;
    const auto r =
        detect_multiscale(ms.features, t.model, t.gen.spec().object_class, "ms", 500, VoteParams::from(t.model.params), o);
    EXPECT_EQ(r.rerun_scale, 480);
    EXPECT_TRUE(r.prediction.part_scale.empty());
}

TEST(MultiScale, MissingInputsAreErrors) {
    const auto& t = trained();
    const VoteParams vp = VoteParams::from(t.model.params);
    EXPECT_THROW(detect_multiscale({}, t.model, t.gen.spec().object_class, "x", 500, vp), Error);
    const auto ms = t.gen.generate_multiscale(504, "ms", 224, 224, {224});
    EXPECT_THROW(detect_multiscale(ms.features, t.model, "no-such-class", "x", 224, vp), Error);
}
