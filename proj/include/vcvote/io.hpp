#pragma once

// On-disk formats shared with the feature exporter:
//   .vcf  binary feature tensor
//   .vca  line-oriented part/object annotations
//   manifest  line-oriented list of scenes

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "annotation.hpp"
#include "binary_io.hpp"
#include "error.hpp"
#include "feature_map.hpp"

namespace vcvote {

// ---------------------------------------------------------------------------
// .vcf
//
// Header, all little-endian, 40 bytes:
//   char[4] magic "VCF1" | u32 version | u32 grid_h | u32 grid_w | u32 depth
//   u32 stride | f32 receptive_offset | u32 image_h | u32 image_w | u32 dtype
// followed by grid_h*grid_w*depth float32 values (row, col, channel order).

inline constexpr char kVcfMagic[] = "VCF1";
inline constexpr std::uint32_t kVcfVersion = 1;
inline constexpr std::uint32_t kDtypeFloat32 = 1;
inline constexpr std::size_t kVcfHeaderBytes = 40;

inline std::vector<std::uint8_t> encode_feature_map(const FeatureMap& map) {
    const LatticeSpec& s = map.spec();
    ByteWriter w;
    w.tag(kVcfMagic);
    w.u32(kVcfVersion);
    w.u32(static_cast<std::uint32_t>(s.grid_h));
    w.u32(static_cast<std::uint32_t>(s.grid_w));
    w.u32(static_cast<std::uint32_t>(map.depth()));
    w.u32(static_cast<std::uint32_t>(s.stride));
    w.f32(static_cast<float>(s.receptive_offset));
    w.u32(static_cast<std::uint32_t>(s.image_h));
    w.u32(static_cast<std::uint32_t>(s.image_w));
    w.u32(kDtypeFloat32);
    w.buffer().reserve(kVcfHeaderBytes + map.data().size() * 4);
    for (float v : map.data()) w.f32(v);
    return std::move(w.buffer());
}

inline FeatureMap decode_feature_map(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    if (r.tag() != std::string(kVcfMagic, 4)) throw Error(Errc::bad_magic, "not a .vcf stream");
    const std::uint32_t version = r.u32();
    if (version != kVcfVersion)
        throw Error(Errc::version_mismatch, ".vcf version " + std::to_string(version) +
                                                ", expected " + std::to_string(kVcfVersion));
    LatticeSpec spec;
    spec.grid_h = static_cast<int>(r.u32());
    spec.grid_w = static_cast<int>(r.u32());
    const std::uint32_t depth = r.u32();
    spec.stride = static_cast<int>(r.u32());
    spec.receptive_offset = r.f32();
    spec.image_h = static_cast<int>(r.u32());
    spec.image_w = static_cast<int>(r.u32());
    const std::uint32_t dtype = r.u32();
    if (dtype != kDtypeFloat32)
        throw Error(Errc::bad_dtype, "dtype code " + std::to_string(dtype));
    if (spec.grid_h <= 0 || spec.grid_w <= 0 || depth == 0 || depth > (1u << 20))
        throw Error(Errc::dim_mismatch, "implausible header dimensions");
    spec.validate();

    const std::uint64_t count = static_cast<std::uint64_t>(spec.grid_h) * spec.grid_w * depth;
    if (r.remaining() != count * 4) {
        // A payload holding a whole number of cells at some other depth is a header/payload
        // disagreement; anything else short is a truncated stream.
        const std::uint64_t plane = static_cast<std::uint64_t>(spec.grid_h) * spec.grid_w * 4;
        const bool whole_cells = r.remaining() > 0 && r.remaining() % plane == 0;
        if (r.remaining() < count * 4 && !whole_cells)
            throw Error(Errc::unexpected_eof, "unexpected end of stream");
        throw Error(Errc::dim_mismatch,
                    "header " + std::to_string(spec.grid_h) + "x" + std::to_string(spec.grid_w) +
                        "x" + std::to_string(depth) + " but payload holds " +
                        std::to_string(r.remaining() / 4) + " floats");
    }
    std::vector<float> data(count);
    for (auto& v : data) {
        v = r.f32();
        if (!std::isfinite(v)) throw Error(Errc::non_finite, "feature payload has NaN/inf");
    }
    return FeatureMap(spec, static_cast<int>(depth), std::move(data));
}

inline FeatureMap read_feature_map(const std::filesystem::path& path) {
    return decode_feature_map(read_file_bytes(path));
}

inline void write_feature_map(const FeatureMap& map, const std::filesystem::path& path) {
    if (!map.all_finite()) throw Error(Errc::non_finite, "refusing to write NaN/inf features");
    write_file_bytes(path, encode_feature_map(map));
}

// ---------------------------------------------------------------------------
// .vca
//
//   # comment
//   object <object_id> <class> <x1> <y1> <x2> <y2>
//   part <part_id> <object_id> <cx> <cy> <x1> <y1> <x2> <y2> <occluded_fraction>

namespace detail {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void validate_part(const PartAnnotation& p, int line) {
    const std::string where = "line " + std::to_string(line) + ": ";
    if (!(p.box.x2 > p.box.x1) || !(p.box.y2 > p.box.y1))
        throw Error(Errc::validation, where + "part box must have x2 > x1 and y2 > y1");
    if (!p.box.contains(p.center))
        throw Error(Errc::validation, where + "part center outside its box");
    if (!(p.occluded_fraction >= 0.0 && p.occluded_fraction <= 1.0))
        throw Error(Errc::validation, where + "occluded_fraction outside [0,1]");
}

} // namespace detail

inline SceneAnnotations parse_scene_annotations(std::istream& in) {
    SceneAnnotations out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind) || kind[0] == '#') continue;
        const std::string where = "line " + std::to_string(lineno);
        if (kind == "object") {
            ObjectAnnotation o;
            if (!(ls >> o.object_id >> o.object_class >> o.box.x1 >> o.box.y1 >> o.box.x2 >>
                  o.box.y2))
                throw Error(Errc::parse, where + ": malformed object record");
            if (!o.box.valid())
                throw Error(Errc::validation, where + ": object box must have x2 > x1 and y2 > y1");
            out.objects.push_back(std::move(o));
        } else if (kind == "part") {
            PartAnnotation p;
            if (!(ls >> p.part_id >> p.object_id >> p.center.x >> p.center.y >> p.box.x1 >>
                  p.box.y1 >> p.box.x2 >> p.box.y2 >> p.occluded_fraction))
                throw Error(Errc::parse, where + ": malformed part record");
            detail::validate_part(p, lineno);
            out.parts.push_back(p);
        } else {
            throw Error(Errc::parse, where + ": unknown record '" + kind + "'");
        }
        std::string extra;
        if (ls >> extra) throw Error(Errc::parse, where + ": trailing tokens");
    }
    return out;
}

inline SceneAnnotations read_scene_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    return parse_scene_annotations(in);
}

inline std::vector<PartAnnotation> read_annotations(const std::filesystem::path& path) {
    return read_scene_annotations(path).parts;
}

inline void format_scene_annotations(std::ostream& out, const SceneAnnotations& a) {
    using detail::fmt_double;
    out << "# vca v1\n";
    for (const auto& o : a.objects)
        out << "object " << o.object_id << ' ' << o.object_class << ' ' << fmt_double(o.box.x1)
            << ' ' << fmt_double(o.box.y1) << ' ' << fmt_double(o.box.x2) << ' '
            << fmt_double(o.box.y2) << '\n';
    for (const auto& p : a.parts)
        out << "part " << p.part_id << ' ' << p.object_id << ' ' << fmt_double(p.center.x) << ' '
            << fmt_double(p.center.y) << ' ' << fmt_double(p.box.x1) << ' '
            << fmt_double(p.box.y1) << ' ' << fmt_double(p.box.x2) << ' '
            << fmt_double(p.box.y2) << ' ' << fmt_double(p.occluded_fraction) << '\n';
}

inline void write_scene_annotations(const SceneAnnotations& a, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    format_scene_annotations(out, a);
}

// ---------------------------------------------------------------------------
// Manifest
//
//   # vcvote manifest v1
//   scene id=<id> class=<c> image=<h>x<w> annotations=<path> features=<path>
//         [features@<short_edge>=<path> ...] [occlusion=<descriptor>]
//
// Paths are relative to the manifest's directory unless absolute.

struct ManifestEntry {
    std::string id;
    std::string object_class;
    int image_h = 0;
    int image_w = 0;
    std::filesystem::path annotations;
    std::filesystem::path features;
    std::map<int, std::filesystem::path> scaled_features; // short edge → file
    std::string occlusion;

    int short_edge() const { return image_h < image_w ? image_h : image_w; }
    bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
    std::filesystem::path base_dir;
    std::vector<ManifestEntry> entries;

    std::filesystem::path resolve(const std::filesystem::path& p) const {
        return p.is_absolute() ? p : base_dir / p;
    }
};

inline DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
    DatasetManifest m;
    m.base_dir = base_dir;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind) || kind[0] == '#') continue;
        const std::string where = "manifest line " + std::to_string(lineno);
        if (kind != "scene") throw Error(Errc::parse, where + ": expected 'scene'");
        ManifestEntry e;
        std::string tok;
        while (ls >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) throw Error(Errc::parse, where + ": bad token " + tok);
            const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
            if (key == "id") {
                e.id = val;
            } else if (key == "class") {
                e.object_class = val;
            } else if (key == "image") {
                const auto x = val.find('x');
                try {
                    if (x == std::string::npos) throw std::invalid_argument(val);
                    e.image_h = std::stoi(val.substr(0, x));
                    e.image_w = std::stoi(val.substr(x + 1));
                } catch (const std::exception&) {
                    throw Error(Errc::parse, where + ": image must be <h>x<w>");
                }
            } else if (key == "annotations") {
                e.annotations = val;
            } else if (key == "features") {
                e.features = val;
            } else if (key.rfind("features@", 0) == 0) {
                try {
                    e.scaled_features[std::stoi(key.substr(9))] = val;
                } catch (const std::exception&) {
                    throw Error(Errc::parse, where + ": bad scale in " + key);
                }
            } else if (key == "occlusion") {
                e.occlusion = val;
            } else {
                throw Error(Errc::parse, where + ": unknown key " + key);
            }
        }
        if (e.id.empty() || e.annotations.empty() || (e.features.empty() && e.scaled_features.empty()))
            throw Error(Errc::parse, where + ": id, annotations and features are required");
        if (e.image_h <= 0 || e.image_w <= 0)
            throw Error(Errc::parse, where + ": image size required");
        m.entries.push_back(std::move(e));
    }
    return m;
}

/// Parses and checks that every referenced file exists.
inline DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    DatasetManifest m = parse_manifest(in, path.parent_path());
    for (const auto& e : m.entries) {
        auto check = [&](const std::filesystem::path& p) {
            if (!std::filesystem::exists(m.resolve(p)))
                throw Error(Errc::io, "scene " + e.id + ": missing file " + m.resolve(p).string());
        };
        check(e.annotations);
        if (!e.features.empty()) check(e.features);
        for (const auto& [t, p] : e.scaled_features) check(p);
    }
    return m;
}

inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    out << "# vcvote manifest v1\n";
    for (const auto& e : m.entries) {
        out << "scene id=" << e.id << " class=" << e.object_class << " image=" << e.image_h << 'x'
            << e.image_w << " annotations=" << e.annotations.generic_string();
        if (!e.features.empty()) out << " features=" << e.features.generic_string();
        for (const auto& [t, p] : e.scaled_features)
            out << " features@" << t << '=' << p.generic_string();
        if (!e.occlusion.empty()) out << " occlusion=" << e.occlusion;
        out << '\n';
    }
}

} // namespace vcvote
