#pragma once

// Testing phase on one feature map: fire concepts, cast offset votes, max-reduce per
// concept, clamp at zero, sum over the supporting set, and resample to pixels.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "concepts.hpp"
#include "detection.hpp"
#include "feature_map.hpp"
#include "grid.hpp"
#include "model.hpp"

namespace vcvote {

inline constexpr double kNoVote = -std::numeric_limits<double>::infinity();

struct VoteParams {
    double beta = 0.7;
    VoteOffsets offsets = VoteOffsets::all_nonzero;
    SpatialMean spatial_mean = SpatialMean::all_cells;
    bool single_concept = false; // baseline: only the top-ranked supporting concept

    static VoteParams from(const ModelParams& p) {
        return {p.beta, p.vote_offsets, p.spatial_mean, false};
    }
};

struct Activation {
    GridPos pos;
    double distance = 0.0;

    bool operator==(const Activation&) const = default;
};

/// Cells whose distance to the center is within the activation threshold.
inline std::vector<Activation> fire_concept(const FeatureMap& map, std::span<const double> center,
                                            double threshold) {
    std::vector<Activation> out;
    for (int r = 0; r < map.rows(); ++r)
        for (int c = 0; c < map.cols(); ++c) {
            const double d = distance(map.at({r, c}), center);
            if (d <= threshold) out.push_back({{r, c}, d});
        }
    return out;
}

/// Activations of every supporting concept, in supporting-set order.
inline std::vector<std::vector<Activation>> fire_concepts(const FeatureMap& map,
                                                          const PartModel& part,
                                                          const ConceptDictionary& dict,
                                                          bool single_concept = false) {
    std::vector<std::vector<Activation>> out;
    for (int v : part.supporting) {
        out.push_back(fire_concept(map, dict.center(v), part.cue(v).cue.threshold));
        if (single_concept) break;
    }
    return out;
}

/// Per-concept vote grid: every cell holds the maximum over candidate votes
/// (1−β)·Score(r) + β·log(Fr(Δp)/U) cast into it, or kNoVote.
inline Grid<double> cast_votes(std::span<const Activation> activations, const CueEntry& entry,
                               int rows, int cols, const VoteParams& params) {
    Grid<double> grid(rows, cols, kNoVote);
    const OffsetMap& om = entry.offsets;
    if (om.sample_count() == 0) return grid;
    const double u = params.spatial_mean == SpatialMean::all_cells ? om.mean_frequency()
                                                                    : om.selected_mean_frequency();
    struct Spatial {
        Offset d;
        double term;
    };
    std::vector<Spatial> spatial;
    const auto offsets =
        params.offsets == VoteOffsets::all_nonzero ? om.nonzero_offsets() : om.selected_offsets();
    for (const Offset& d : offsets) {
        const double fr = om.frequency(d);
        if (fr <= 0.0) continue; // log(0) = −inf never wins a max
        spatial.push_back({d, params.beta * std::log(fr / u)});
    }
    for (const Activation& a : activations) {
        const double evidence = (1.0 - params.beta) * entry.cue.score(a.distance);
        for (const Spatial& s : spatial) {
            const GridPos t = a.pos + s.d;
            if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) continue;
            double& cell = grid(t.row, t.col);
            cell = std::max(cell, evidence + s.term);
        }
    }
    return grid;
}

/// Score_s(p) = Σ_v max{0, Vote_v(p)}.
inline Grid<double> combine(std::span<const Grid<double>> votes, int rows, int cols) {
    Grid<double> out(rows, cols, 0.0);
    for (const auto& g : votes) {
        if (g.rows() != rows || g.cols() != cols)
            throw Error(Errc::dim_mismatch, "vote grid shape differs from score map");
        for (std::size_t i = 0; i < out.size(); ++i)
            out.data()[i] += std::max(0.0, g.data()[i]);
    }
    return out;
}

/// Feature-lattice score map of one part.
inline Grid<double> part_score_map(const FeatureMap& map, const PartModel& part,
                                   const ConceptDictionary& dict, const VoteParams& params) {
    const auto fired = fire_concepts(map, part, dict, params.single_concept);
    std::vector<Grid<double>> votes;
    votes.reserve(fired.size());
    for (std::size_t i = 0; i < fired.size(); ++i)
        votes.push_back(cast_votes(fired[i], part.cue(part.supporting[i]), map.rows(), map.cols(),
                                   params));
    return combine(votes, map.rows(), map.cols());
}

namespace detail {

// Catmull-Rom weights for fractional position t ∈ [0,1) over taps −1, 0, 1, 2.
inline std::array<double, 4> cubic_weights(double t) {
    const double t2 = t * t, t3 = t2 * t;
    return {0.5 * (-t3 + 2.0 * t2 - t), 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
            0.5 * (-3.0 * t3 + 4.0 * t2 + t), 0.5 * (t3 - t2)};
}

struct AxisTaps {
    std::array<int, 4> index;
    std::array<double, 4> weight;
};

inline std::vector<AxisTaps> axis_taps(int pixels, int knots, double offset, int stride) {
    std::vector<AxisTaps> taps(pixels);
    for (int y = 0; y < pixels; ++y) {
        const double u = std::clamp((y - offset) / stride, 0.0, static_cast<double>(knots - 1));
        const int i = static_cast<int>(std::floor(u));
        const double t = u - i;
        taps[y].weight = cubic_weights(t);
        for (int k = 0; k < 4; ++k) taps[y].index[k] = std::clamp(i - 1 + k, 0, knots - 1);
    }
    return taps;
}

} // namespace detail

/// Bicubic (Catmull-Rom) resampling of a lattice grid onto every image pixel, knots at
/// cell centers, edge-replicated outside the outermost centers, clamped at zero.
inline Grid<double> upsample(const Grid<double>& grid, const LatticeSpec& spec) {
    if (grid.rows() != spec.grid_h || grid.cols() != spec.grid_w)
        throw Error(Errc::dim_mismatch, "score grid does not match lattice");
    const auto ty = detail::axis_taps(spec.image_h, spec.grid_h, spec.receptive_offset, spec.stride);
    const auto tx = detail::axis_taps(spec.image_w, spec.grid_w, spec.receptive_offset, spec.stride);
    Grid<double> rows_done(spec.grid_h, spec.image_w);
    for (int r = 0; r < spec.grid_h; ++r)
        for (int x = 0; x < spec.image_w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += tx[x].weight[k] * grid(r, tx[x].index[k]);
            rows_done(r, x) = acc;
        }
    Grid<double> out(spec.image_h, spec.image_w);
    for (int y = 0; y < spec.image_h; ++y)
        for (int x = 0; x < spec.image_w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += ty[y].weight[k] * rows_done(ty[y].index[k], x);
            out(y, x) = std::max(0.0, acc);
        }
    return out;
}

struct PeakOptions {
    double box_w = 0.0;
    double box_h = 0.0;
    double nms_radius = 0.0;
    double score_floor = 0.0;
    std::size_t max_detections = 100;
};

/// Local maxima above the floor, greedy NMS by pixel distance, one fixed-size box per peak.
/// Output is sorted by descending score.
inline std::vector<Detection> extract_detections(const Grid<double>& image_map, int part_id,
                                                 const std::string& image_id,
                                                 const PeakOptions& opt) {
    struct Peak {
        int y, x;
        double v;
    };
    std::vector<Peak> peaks;
    const int h = image_map.rows(), w = image_map.cols();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = image_map(y, x);
            if (!(v > opt.score_floor)) continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                    if (image_map(yy, xx) > v) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max) peaks.push_back({y, x, v});
        }
    std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.v > b.v; });

    std::vector<Detection> out;
    std::vector<Peak> kept;
    for (const Peak& p : peaks) {
        if (out.size() >= opt.max_detections) break;
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Peak& k) {
            return std::hypot(double(p.y - k.y), double(p.x - k.x)) < opt.nms_radius;
        });
        if (suppressed) continue;
        kept.push_back(p);
        out.push_back({image_id, part_id,
                       Box::centered({static_cast<double>(p.y), static_cast<double>(p.x)},
                                     opt.box_w, opt.box_h),
                       p.v});
    }
    return out;
}

/// Full single-scale detection for one part on one feature map.
inline std::vector<Detection> detect_part(const FeatureMap& map, const Model& model,
                                          const PartModel& part, const std::string& image_id,
                                          const VoteParams& params,
                                          std::size_t max_detections = 100) {
    const Grid<double> l4 = part_score_map(map, part, model.dictionary, params);
    const Grid<double> l0 = upsample(l4, map.spec());
    return extract_detections(l0, part.part_id, image_id,
                              {part.box_w, part.box_h, part.nms_radius, model.params.score_floor,
                               max_detections});
}

} // namespace vcvote
