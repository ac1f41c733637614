#pragma once

// Occluded test cases: place occluder masks over a target object until the covered fraction
// of target pixels falls in a ratio bin, recompute per-part occluded fractions, and corrupt
// the feature cells whose receptive centers fall under the mask.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "annotation.hpp"
#include "error.hpp"
#include "feature_map.hpp"
#include "grid.hpp"
#include "lattice.hpp"

namespace vcvote {

/// Nonzero pixels are set.
using BinaryMask = Grid<std::uint8_t>;

inline std::size_t mask_count(const BinaryMask& m) {
    return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(),
                                                  [](std::uint8_t v) { return v != 0; }));
}

struct OccluderSegment {
    BinaryMask mask;
    std::string label;
};

struct OcclusionConfig {
    int occluder_count = 2;
    double ratio_lo = 0.2;
    double ratio_hi = 0.4;
    std::uint64_t seed = 0;
    int max_attempts = 200;

    /// The occluder count and ratio bin used for each evaluation regime: 2 → [0.2,0.4),
    /// 3 → [0.4,0.6), 4 → [0.6,0.8).
    static OcclusionConfig regime(int occluders, std::uint64_t seed = 0) {
        if (occluders < 2 || occluders > 4)
            throw Error(Errc::invalid_argument, "occluder count must be 2, 3 or 4");
        const double lo = 0.2 * (occluders - 1);
        return {occluders, lo, lo + 0.2, seed, 200};
    }

    void validate() const {
        if (occluder_count < 1) throw Error(Errc::validation, "need at least one occluder");
        if (!(ratio_lo >= 0.0 && ratio_lo < ratio_hi && ratio_hi <= 1.0))
            throw Error(Errc::validation, "ratio bin must satisfy 0 <= lo < hi <= 1");
        if (max_attempts < 1) throw Error(Errc::validation, "max attempts must be positive");
    }
};

/// Filled ellipse with semi-axes (ay, ax) inside a (2ay+1) × (2ax+1) mask.
inline OccluderSegment ellipse_occluder(int ay, int ax, std::string label = "ellipse") {
    if (ay < 1 || ax < 1) throw Error(Errc::invalid_argument, "ellipse semi-axes must be positive");
    BinaryMask m(2 * ay + 1, 2 * ax + 1, 0);
    for (int y = -ay; y <= ay; ++y)
        for (int x = -ax; x <= ax; ++x)
            if (double(y) * y / (double(ay) * ay) + double(x) * x / (double(ax) * ax) <= 1.0)
                m(y + ay, x + ax) = 1;
    return {std::move(m), std::move(label)};
}

/// Random ellipses with semi-axes in [min_axis, max_axis].
inline std::vector<OccluderSegment> random_ellipses(int n, int min_axis, int max_axis, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> axis(min_axis, max_axis);
    std::vector<OccluderSegment> out;
    for (int i = 0; i < n; ++i) {
        const int ay = axis(rng), ax = axis(rng);
        out.push_back(ellipse_occluder(ay, ax, "ellipse" + std::to_string(i)));
    }
    return out;
}

/// Pixels whose centers (x + 0.5, y + 0.5) lie inside the box.
inline BinaryMask box_mask(const Box& b, int h, int w) {
    BinaryMask m(h, w, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (b.contains({y + 0.5, x + 0.5})) m(y, x) = 1;
    return m;
}

/// Stamps `src` with its top-left corner at (top, left), clipped to `dst`.
inline void stamp(BinaryMask& dst, const BinaryMask& src, int top, int left) {
    for (int y = 0; y < src.rows(); ++y) {
        const int yy = top + y;
        if (yy < 0 || yy >= dst.rows()) continue;
        for (int x = 0; x < src.cols(); ++x) {
            const int xx = left + x;
            if (xx < 0 || xx >= dst.cols() || !src(y, x)) continue;
            dst(yy, xx) = 1;
        }
    }
}

inline std::size_t overlap_count(const BinaryMask& a, const BinaryMask& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(Errc::dim_mismatch, "mask sizes differ");
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) n += (a.data()[i] && b.data()[i]) ? 1 : 0;
    return n;
}

/// Fraction of the box's pixels (by center) that are masked; 0 for a box with no pixels.
inline double occluded_fraction(const Box& b, const BinaryMask& mask) {
    std::size_t inside = 0, covered = 0;
    const int y0 = std::max(0, static_cast<int>(std::floor(b.y1))), y1 = std::min(mask.rows(), static_cast<int>(std::ceil(b.y2)) + 1);
    const int x0 = std::max(0, static_cast<int>(std::floor(b.x1))), x1 = std::min(mask.cols(), static_cast<int>(std::ceil(b.x2)) + 1);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            if (!b.contains({y + 0.5, x + 0.5})) continue;
            ++inside;
            covered += mask(y, x) ? 1 : 0;
        }
    return inside ? static_cast<double>(covered) / static_cast<double>(inside) : 0.0;
}

struct OcclusionResult {
    BinaryMask composite;
    double ratio = 0.0; // covered target pixels / target pixels
    SceneAnnotations annotations;
    int attempts = 0;
};

/// Rejection sampling over random placements. Each occluder is placed uniformly among the
/// positions that overlap the target by at least one pixel; the union is accepted when its
/// target coverage lies in [ratio_lo, ratio_hi).
inline OcclusionResult synthesize_occlusion(const BinaryMask& target, const SceneAnnotations& annotations,
                                            std::span<const OccluderSegment> occluders,
                                            const OcclusionConfig& cfg) {
    cfg.validate();
    if (occluders.empty()) throw Error(Errc::invalid_argument, "no occluder segments");
    for (const auto& o : occluders)
        if (mask_count(o.mask) == 0) throw Error(Errc::validation, "occluder mask is empty");
    const std::size_t target_px = mask_count(target);
    if (target_px == 0) throw Error(Errc::validation, "target mask is empty");

    std::vector<std::pair<int, int>> target_pixels;
    for (int y = 0; y < target.rows(); ++y)
        for (int x = 0; x < target.cols(); ++x)
            if (target(y, x)) target_pixels.emplace_back(y, x);

    std::mt19937_64 rng(cfg.seed);
    const int h = target.rows(), w = target.cols();
    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        BinaryMask comp(h, w, 0);
        for (int k = 0; k < cfg.occluder_count; ++k) {
            const OccluderSegment& o =
                occluders[std::uniform_int_distribution<std::size_t>(0, occluders.size() - 1)(rng)];
            // Top-left corners range over every placement touching the image; redraw until
            // the occluder meets the target.
            std::uniform_int_distribution<int> top(-(o.mask.rows() - 1), h - 1);
            std::uniform_int_distribution<int> left(-(o.mask.cols() - 1), w - 1);
            for (int tries = 0;; ++tries) {
                const int t = top(rng), l = left(rng);
                BinaryMask one(h, w, 0);
                stamp(one, o.mask, t, l);
                if (overlap_count(one, target) > 0) {
                    stamp(comp, o.mask, t, l);
                    break;
                }
                if (tries > 10000)
                    throw Error(Errc::infeasible, "occluder cannot be placed over the target");
            }
        }
        const double ratio = static_cast<double>(overlap_count(comp, target)) / static_cast<double>(target_px);
        if (ratio >= cfg.ratio_lo && ratio < cfg.ratio_hi) {
            OcclusionResult res{std::move(comp), ratio, annotations, attempt};
            for (auto& p : res.annotations.parts) p.occluded_fraction = occluded_fraction(p.box, res.composite);
            return res;
        }
    }
    throw Error(Errc::infeasible, "occlusion ratio bin [" + std::to_string(cfg.ratio_lo) + ", " +
                                      std::to_string(cfg.ratio_hi) + ") not reached in " +
                                      std::to_string(cfg.max_attempts) + " attempts");
}

/// Cells whose receptive center pixel is masked, row-major.
inline std::vector<GridPos> masked_cells(const LatticeSpec& spec, const BinaryMask& mask) {
    if (mask.rows() != spec.image_h || mask.cols() != spec.image_w)
        throw Error(Errc::dim_mismatch, "mask does not match the image size");
    std::vector<GridPos> out;
    for (int r = 0; r < spec.grid_h; ++r)
        for (int c = 0; c < spec.grid_w; ++c) {
            const ImagePos q = l0_of({r, c}, spec);
            if (mask(static_cast<int>(std::floor(q.y)), static_cast<int>(std::floor(q.x))))
                out.push_back({r, c});
        }
    return out;
}

/// Mask covering the stride × stride square around each listed cell's center.
inline BinaryMask cell_mask(const LatticeSpec& spec, std::span<const GridPos> cells) {
    BinaryMask m(spec.image_h, spec.image_w, 0);
    const int half = spec.stride / 2;
    for (const GridPos& p : cells) {
        const ImagePos q = l0_of(p, spec);
        const int cy = static_cast<int>(std::floor(q.y)), cx = static_cast<int>(std::floor(q.x));
        for (int y = cy - half; y < cy - half + spec.stride; ++y)
            for (int x = cx - half; x < cx - half + spec.stride; ++x)
                if (y >= 0 && y < m.rows() && x >= 0 && x < m.cols()) m(y, x) = 1;
    }
    return m;
}

enum class CorruptMode { resample, occluder_concept };

inline const char* to_string(CorruptMode m) {
    return m == CorruptMode::resample ? "resample" : "occluder-concept";
}

struct CorruptOptions {
    CorruptMode mode = CorruptMode::resample;
    std::vector<std::vector<float>> pool; // resample: replacement vectors
    std::vector<float> distractor;        // occluder-concept: center of the replacement cluster
    double distractor_sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Replaces every masked cell; untouched cells are copied bit for bit.
inline FeatureMap corrupt_features(const FeatureMap& map, const BinaryMask& mask, const CorruptOptions& opt) {
    FeatureMap out = map;
    const auto cells = masked_cells(map.spec(), mask);
    if (cells.empty()) return out;
    std::mt19937_64 rng(opt.seed);
    const auto depth = static_cast<std::size_t>(map.depth());
    if (opt.mode == CorruptMode::resample) {
        if (opt.pool.empty()) throw Error(Errc::invalid_argument, "resample mode needs a vector pool");
        for (const auto& v : opt.pool)
            if (v.size() != depth) throw Error(Errc::dim_mismatch, "pool vector depth differs from the map");
        std::uniform_int_distribution<std::size_t> pick(0, opt.pool.size() - 1);
        for (const GridPos& p : cells) {
            const auto& v = opt.pool[pick(rng)];
            std::copy(v.begin(), v.end(), out.at(p).begin());
        }
    } else {
        if (opt.distractor.size() != depth)
            throw Error(Errc::dim_mismatch, "distractor depth differs from the map");
        std::normal_distribution<double> noise(0.0, opt.distractor_sigma);
        for (const GridPos& p : cells) {
            auto dst = out.at(p);
            for (std::size_t d = 0; d < depth; ++d)
                dst[d] = static_cast<float>(opt.distractor[d] + (opt.distractor_sigma > 0 ? noise(rng) : 0.0));
        }
    }
    return out;
}

} // namespace vcvote
