#include <gtest/gtest.h>

#include <cstring>
#include <random>
#include <sstream>

#include "support.hpp"

using namespace vcvote;
using vcvote::testing::ScratchDir;

namespace {

FeatureMap random_map(int gh, int gw, int depth, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n(0.0f, 3.0f);
    std::vector<float> data(static_cast<std::size_t>(gh) * gw * depth);
    for (auto& v : data) v = n(rng);
    return FeatureMap(LatticeSpec::for_image(gh * 16, gw * 16), depth, std::move(data));
}

Errc decode_error(const std::vector<std::uint8_t>& bytes) {
    try {
        decode_feature_map(bytes);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "decode succeeded";
    return Errc::invalid_argument;
}

// Byte layout an external exporter writes, assembled by hand.
void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f32(std::vector<std::uint8_t>& b, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(b, v);
}

std::vector<std::uint8_t> exporter_bytes(std::uint32_t gh, std::uint32_t gw, std::uint32_t depth,
                                         std::uint32_t payload_floats) {
    std::vector<std::uint8_t> b = {'V', 'C', 'F', '1'};
    for (std::uint32_t v : {1u, gh, gw, depth, 16u}) put_u32(b, v);
    put_f32(b, 8.0f);
    for (std::uint32_t v : {gh * 16, gw * 16, 1u}) put_u32(b, v);
    for (std::uint32_t i = 0; i < payload_floats; ++i) put_f32(b, 0.25f * static_cast<float>(i % 7));
    return b;
}

} // namespace

TEST(FeatureIo, RoundTripIsBitwise) {
    ScratchDir dir("vcf");
    const FeatureMap m = random_map(14, 14, 512, 1);
    write_feature_map(m, dir / "a.vcf");
    const FeatureMap back = read_feature_map(dir / "a.vcf");
    EXPECT_EQ(back.spec(), m.spec());
    ASSERT_EQ(back.data().size(), m.data().size());
    EXPECT_EQ(std::memcmp(back.data().data(), m.data().data(), m.data().size() * 4), 0);
}

TEST(FeatureIo, HeaderIsFortyBytes) {
    const auto bytes = encode_feature_map(random_map(3, 4, 5, 2));
    EXPECT_EQ(bytes.size(), kVcfHeaderBytes + 3 * 4 * 5 * 4);
}

TEST(FeatureIo, ExporterLayoutDecodes) {
    const FeatureMap m = decode_feature_map(exporter_bytes(2, 3, 4, 24));
    EXPECT_EQ(m.rows(), 2);
    EXPECT_EQ(m.cols(), 3);
    EXPECT_EQ(m.depth(), 4);
    EXPECT_EQ(m.spec().image_w, 48);
    EXPECT_FLOAT_EQ(m.at({1, 2})[3], 0.25f * (23 % 7));
}

TEST(FeatureIo, TruncatedFileReportsEndOfStream) {
    auto bytes = encode_feature_map(random_map(14, 14, 8, 3));
    bytes.resize(bytes.size() - 3);
    EXPECT_EQ(decode_error(bytes), Errc::unexpected_eof);
    try {
        decode_feature_map(bytes);
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("unexpected end of stream"), std::string::npos);
    }
    bytes.resize(20);
    EXPECT_EQ(decode_error(bytes), Errc::unexpected_eof);
}

TEST(FeatureIo, HalfDepthPayloadIsDimMismatch) {
    EXPECT_EQ(decode_error(exporter_bytes(14, 14, 512, 14 * 14 * 256)), Errc::dim_mismatch);
}

TEST(FeatureIo, DistinctErrorsForBadInput) {
    auto bytes = encode_feature_map(random_map(2, 2, 2, 4));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_EQ(decode_error(bad_magic), Errc::bad_magic);
    auto bad_version = bytes;
    bad_version[4] = 9;
    EXPECT_EQ(decode_error(bad_version), Errc::version_mismatch);
    auto bad_dtype = bytes;
    bad_dtype[36] = 2;
    EXPECT_EQ(decode_error(bad_dtype), Errc::bad_dtype);
    auto nan = bytes;
    const float q = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(nan.data() + kVcfHeaderBytes, &q, 4);
    EXPECT_EQ(decode_error(nan), Errc::non_finite);
}

TEST(FeatureIo, RandomCorruptionNeverCrashes) {
    const auto bytes = encode_feature_map(random_map(3, 3, 3, 5));
    std::mt19937_64 rng(6);
    for (int i = 0; i < 500; ++i) {
        auto b = bytes;
        b[std::uniform_int_distribution<std::size_t>(0, b.size() - 1)(rng)] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        if (i % 3 == 0) b.resize(std::uniform_int_distribution<std::size_t>(0, b.size())(rng));
        try {
            decode_feature_map(b);
        } catch (const Error&) {
        }
    }
}

TEST(Annotations, MinimalFileHasOneRecord) {
    std::istringstream in("part 3 0 20 30 10 20 30 40 0.25\n");
    const auto a = parse_scene_annotations(in);
    ASSERT_EQ(a.parts.size(), 1u);
    EXPECT_EQ(a.parts[0].part_id, 3);
    EXPECT_EQ(a.parts[0].center, (ImagePos{30, 20}));
    EXPECT_DOUBLE_EQ(a.parts[0].occluded_fraction, 0.25);
}

TEST(Annotations, EmptyFileIsEmpty) {
    std::istringstream in("");
    EXPECT_TRUE(parse_scene_annotations(in).parts.empty());
}

TEST(Annotations, RejectsMalformedRecords) {
    for (const char* text : {"part 1 0 5 5 10 0 0 10 0\n",      // x2 <= x1
                             "part 1 0 50 5 0 0 10 10 0\n",     // center outside box
                             "part 1 0 5 5 0 0 10 10 1.5\n",    // fraction > 1
                             "part 1 0 5 5 0 0 10\n",           // short
                             "object 0 car 0 0 10 10 extra\n",  // trailing
                             "wheel 1 2 3\n"}) {
        std::istringstream in(text);
        EXPECT_THROW(parse_scene_annotations(in), Error) << text;
    }
}

TEST(Annotations, RandomRoundTrip) {
    ScratchDir dir("vca");
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 500), f(0, 1);
    SceneAnnotations a;
    a.objects.push_back({0, "car", {1.5, 2.25, 400, 300}});
    for (int i = 0; i < 100; ++i) {
        const double x1 = u(rng), y1 = u(rng), w = 1 + u(rng), h = 1 + u(rng);
        const Box b{x1, y1, x1 + w, y1 + h};
        a.parts.push_back({i % 7, b.center(), b, 0, f(rng)});
    }
    write_scene_annotations(a, dir / "a.vca");
    EXPECT_EQ(read_scene_annotations(dir / "a.vca"), a);
}

TEST(Manifest, RoundTripWithScalesAndOcclusion) {
    ScratchDir dir("manifest");
    DatasetManifest m;
    m.base_dir = dir.path();
    ManifestEntry e;
    e.id = "img1";
    e.object_class = "car";
    e.image_h = 375;
    e.image_w = 500;
    e.annotations = "img1.vca";
    e.features = "img1.vcf";
    e.scaled_features = {{224, "img1@224.vcf"}, {480, "img1@480.vcf"}};
    e.occlusion = "occluders=2,ratio=0.31";
    m.entries.push_back(e);
    write_manifest(m, dir / "manifest.txt");
    for (const char* f : {"img1.vca", "img1.vcf", "img1@224.vcf", "img1@480.vcf"}) std::ofstream(dir / f) << "x";
    const DatasetManifest back = read_manifest(dir / "manifest.txt");
    ASSERT_EQ(back.entries.size(), 1u);
    EXPECT_EQ(back.entries[0], e);
    EXPECT_EQ(back.entries[0].short_edge(), 375);
    EXPECT_EQ(back.resolve("img1.vcf"), dir / "img1.vcf");
}

TEST(Manifest, MissingFileAndBadTokens) {
    ScratchDir dir("manifest_bad");
    std::ofstream(dir / "m.txt") << "scene id=a class=c image=10x10 annotations=a.vca features=a.vcf\n";
    EXPECT_THROW(read_manifest(dir / "m.txt"), Error);
    for (const char* text : {"scene id=a image=10x10 annotations=a.vca\n", "scene id=a bogus=1\n",
                             "frame id=a\n", "scene id=a image=ten annotations=a features=b\n"}) {
        std::istringstream in(text);
        EXPECT_THROW(parse_manifest(in, "."), Error) << text;
    }
}
