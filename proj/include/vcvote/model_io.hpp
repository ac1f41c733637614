#pragma once

// .vcm model bundle: "VCMB", version, section count, then sections of
// {4-byte tag, u64 payload length, u32 CRC-32 of the payload, payload}.
//   CONF  model parameters
//   DICT  concept dictionary
//   PART  one per part: box statistics, V_s, and a cue model + offset counts per concept

#include <zlib.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "error.hpp"
#include "model.hpp"

namespace vcvote {

inline constexpr char kVcmMagic[] = "VCMB";
inline constexpr std::uint32_t kVcmVersion = 1;

namespace detail {

inline std::uint32_t crc32_of(const std::uint8_t* p, std::size_t n) {
    uLong c = ::crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        c = ::crc32(c, p, chunk);
        p += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(c);
}

inline void put_section(ByteWriter& out, const char* tag, const ByteWriter& payload) {
    const auto& b = payload.buffer();
    out.tag(tag);
    out.u64(b.size());
    out.u32(crc32_of(b.data(), b.size()));
    out.bytes(b);
}

inline void put_doubles(ByteWriter& w, const std::vector<double>& v) {
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (double x : v) w.f64(x);
}

inline std::vector<double> get_doubles(ByteReader& r) {
    const std::uint32_t n = r.u32();
    if (r.remaining() / 8 < n) throw Error(Errc::unexpected_eof, "unexpected end of stream");
    std::vector<double> v(n);
    for (auto& x : v) x = r.f64();
    return v;
}

inline void encode_params(ByteWriter& w, const ModelParams& p) {
    w.f64(p.neighborhood_radius);
    w.i32(p.stride);
    w.f64(p.beta);
    w.f64(p.epsilon);
    w.i32(p.bins);
    w.f64(p.fnr_target);
    w.i32(p.supporting);
    w.u8(static_cast<std::uint8_t>(p.vote_offsets));
    w.u8(static_cast<std::uint8_t>(p.spatial_mean));
    w.i32(p.training_short_edge);
    w.f64(p.score_floor);
}

inline ModelParams decode_params(ByteReader& r) {
    ModelParams p;
    p.neighborhood_radius = r.f64();
    p.stride = r.i32();
    p.beta = r.f64();
    p.epsilon = r.f64();
    p.bins = r.i32();
    p.fnr_target = r.f64();
    p.supporting = r.i32();
    const std::uint8_t vo = r.u8(), sm = r.u8();
    if (vo > 1 || sm > 1) throw Error(Errc::parse, "model: unknown vote-offset or spatial-mean mode");
    p.vote_offsets = static_cast<VoteOffsets>(vo);
    p.spatial_mean = static_cast<SpatialMean>(sm);
    p.training_short_edge = r.i32();
    p.score_floor = r.f64();
    return p;
}

inline void encode_dictionary(ByteWriter& w, const ConceptDictionary& d) {
    w.i32(d.depth);
    w.u64(d.seed);
    w.i32(d.iterations);
    w.f64(d.inertia);
    put_doubles(w, d.centers);
}

inline ConceptDictionary decode_dictionary(ByteReader& r) {
    ConceptDictionary d;
    d.depth = r.i32();
    d.seed = r.u64();
    d.iterations = r.i32();
    d.inertia = r.f64();
    d.centers = get_doubles(r);
    if (d.depth <= 0 || d.centers.size() % static_cast<std::size_t>(d.depth) != 0)
        throw Error(Errc::dim_mismatch, "model: dictionary size is not a multiple of its depth");
    return d;
}

inline void encode_part(ByteWriter& w, const PartModel& p) {
    w.i32(p.part_id);
    w.str(p.object_class);
    w.f64(p.box_w);
    w.f64(p.box_h);
    w.f64(p.nms_radius);
    w.u32(static_cast<std::uint32_t>(p.supporting.size()));
    for (int v : p.supporting) w.i32(v);
    w.u32(static_cast<std::uint32_t>(p.cues.size()));
    for (const auto& [v, e] : p.cues) {
        const CueModel& c = e.cue;
        w.i32(v);
        w.i32(c.concept_id);
        w.f64(c.r_max);
        w.f64(c.threshold);
        w.f64(c.fnr);
        w.f64(c.fpr);
        w.f64(c.epsilon);
        put_doubles(w, c.hist_pos);
        put_doubles(w, c.hist_neg);
        put_doubles(w, c.score_table);
        w.i32(e.offsets.half_extent());
        w.u32(static_cast<std::uint32_t>(e.offsets.counts().size()));
        for (auto n : e.offsets.counts()) w.u64(n);
    }
}

inline PartModel decode_part(ByteReader& r) {
    PartModel p;
    p.part_id = r.i32();
    p.object_class = r.str();
    p.box_w = r.f64();
    p.box_h = r.f64();
    p.nms_radius = r.f64();
    const std::uint32_t ns = r.u32();
    if (r.remaining() / 4 < ns) throw Error(Errc::unexpected_eof, "unexpected end of stream");
    for (std::uint32_t i = 0; i < ns; ++i) p.supporting.push_back(r.i32());
    const std::uint32_t nc = r.u32();
    for (std::uint32_t i = 0; i < nc; ++i) {
        const int v = r.i32();
        CueEntry e;
        CueModel& c = e.cue;
        c.concept_id = r.i32();
        c.r_max = r.f64();
        c.threshold = r.f64();
        c.fnr = r.f64();
        c.fpr = r.f64();
        c.epsilon = r.f64();
        c.hist_pos = get_doubles(r);
        c.hist_neg = get_doubles(r);
        c.score_table = get_doubles(r);
        if (c.score_table.empty() || c.hist_pos.size() != c.score_table.size() ||
            c.hist_neg.size() != c.score_table.size())
            throw Error(Errc::dim_mismatch, "model: cue histograms and score table differ in length");
        const int half = r.i32();
        const std::uint32_t n = r.u32();
        if (half < 0 || half > 1000) throw Error(Errc::parse, "model: offset map extent out of range");
        if (r.remaining() / 8 < n) throw Error(Errc::unexpected_eof, "unexpected end of stream");
        std::vector<std::uint64_t> counts(n);
        for (auto& x : counts) x = r.u64();
        e.offsets = OffsetMap::from_counts(half, std::move(counts));
        if (!p.cues.emplace(v, std::move(e)).second)
            throw Error(Errc::integrity, "model: duplicate cue for concept " + std::to_string(v));
    }
    return p;
}

} // namespace detail

inline std::vector<std::uint8_t> encode_model(const Model& m) {
    m.check_integrity();
    ByteWriter out;
    out.tag(kVcmMagic);
    out.u32(kVcmVersion);
    out.u32(static_cast<std::uint32_t>(2 + m.parts.size()));
    ByteWriter conf, dict;
    detail::encode_params(conf, m.params);
    detail::put_section(out, "CONF", conf);
    detail::encode_dictionary(dict, m.dictionary);
    detail::put_section(out, "DICT", dict);
    for (const auto& p : m.parts) {
        ByteWriter w;
        detail::encode_part(w, p);
        detail::put_section(out, "PART", w);
    }
    return std::move(out.buffer());
}

inline Model decode_model(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    if (r.tag() != kVcmMagic) throw Error(Errc::bad_magic, "not a model bundle");
    const std::uint32_t version = r.u32();
    if (version != kVcmVersion)
        throw Error(Errc::version_mismatch, "model bundle version " + std::to_string(version) +
                                                " is not supported (expected " +
                                                std::to_string(kVcmVersion) + ")");
    const std::uint32_t sections = r.u32();
    Model m;
    bool have_conf = false, have_dict = false;
    for (std::uint32_t s = 0; s < sections; ++s) {
        const std::string tag = r.tag();
        const std::uint64_t len = r.u64();
        const std::uint32_t crc = r.u32();
        if (len > r.remaining()) throw Error(Errc::unexpected_eof, "unexpected end of stream");
        const std::uint8_t* payload = r.take(static_cast<std::size_t>(len));
        if (detail::crc32_of(payload, static_cast<std::size_t>(len)) != crc)
            throw Error(Errc::checksum, "model section " + tag + " fails its checksum");
        ByteReader pr(payload, static_cast<std::size_t>(len));
        if (tag == "CONF") {
            m.params = detail::decode_params(pr);
            have_conf = true;
        } else if (tag == "DICT") {
            m.dictionary = detail::decode_dictionary(pr);
            have_dict = true;
        } else if (tag == "PART") {
            m.parts.push_back(detail::decode_part(pr));
        } else {
            continue;
        }
        if (pr.remaining() != 0) throw Error(Errc::parse, "model section " + tag + " has trailing bytes");
    }
    if (!have_conf || !have_dict) throw Error(Errc::integrity, "model bundle lacks CONF or DICT");
    if (r.remaining() != 0) throw Error(Errc::parse, "trailing bytes after the last model section");
    m.check_integrity();
    return m;
}

inline void save_model(const Model& m, const std::filesystem::path& path) {
    write_file_bytes(path, encode_model(m));
}

inline Model load_model(const std::filesystem::path& path) { return decode_model(read_file_bytes(path)); }

} // namespace vcvote
