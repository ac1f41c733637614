#pragma once

// Scale prediction: score every part at each scheduled short edge, take the per-part best
// scale, average, and rerun detection at the nearest available scale.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "concepts.hpp"
#include "detection.hpp"
#include "error.hpp"
#include "feature_map.hpp"
#include "model.hpp"
#include "voting.hpp"

namespace vcvote {

struct ScaleSchedule {
    std::vector<int> scales{224, 272, 320, 400, 480, 560, 640, 752, 864, 976};

    void validate() const {
        if (scales.empty()) throw Error(Errc::validation, "scale schedule is empty");
        for (std::size_t i = 0; i < scales.size(); ++i) {
            if (scales[i] <= 0) throw Error(Errc::validation, "scales must be positive");
            if (i > 0 && scales[i] <= scales[i - 1])
                throw Error(Errc::validation, "scale schedule must be strictly increasing");
        }
    }

    /// Scheduled scale closest to s; ties go to the smaller one.
    int nearest(double s) const { return nearest_of(scales, s); }

    static int nearest_of(const std::vector<int>& sorted, double s) {
        if (sorted.empty()) throw Error(Errc::invalid_argument, "no scales to choose from");
        int best = sorted.front();
        for (int t : sorted)
            if (std::abs(t - s) < std::abs(best - s)) best = t;
        return best;
    }
};

struct ScalePrediction {
    std::map<int, int> part_scale;                 // Sc_s
    std::map<int, std::map<int, double>> max_score; // part → scale → global max of the pixel map
    double aggregate = 0.0;                        // Sc*
};

/// Global maximum of the upsampled score map without materializing it.
inline double upsampled_max(const Grid<double>& grid, const LatticeSpec& spec) {
    const auto ty = detail::axis_taps(spec.image_h, spec.grid_h, spec.receptive_offset, spec.stride);
    const auto tx = detail::axis_taps(spec.image_w, spec.grid_w, spec.receptive_offset, spec.stride);
    Grid<double> rows_done(spec.grid_h, spec.image_w);
    for (int r = 0; r < spec.grid_h; ++r)
        for (int x = 0; x < spec.image_w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += tx[x].weight[k] * grid(r, tx[x].index[k]);
            rows_done(r, x) = acc;
        }
    double best = 0.0;
    for (int y = 0; y < spec.image_h; ++y)
        for (int x = 0; x < spec.image_w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += ty[y].weight[k] * rows_done(ty[y].index[k], x);
            best = std::max(best, acc);
        }
    return best;
}

inline std::vector<const PartModel*> parts_of_class(const Model& model, const std::string& object_class) {
    std::vector<const PartModel*> out;
    for (const auto& p : model.parts)
        if (object_class.empty() || p.object_class == object_class) out.push_back(&p);
    return out;
}

/// Sc_s per part from its per-scale maxima (ties toward the smaller scale), and their mean.
inline ScalePrediction aggregate_scale(const std::map<int, std::map<int, double>>& max_by_part) {
    ScalePrediction pred;
    pred.max_score = max_by_part;
    if (max_by_part.empty()) throw Error(Errc::invalid_argument, "no parts to predict a scale from");
    double sum = 0.0;
    for (const auto& [part, by_scale] : max_by_part) {
        if (by_scale.empty()) throw Error(Errc::invalid_argument, "part has no scored scales");
        int best_t = by_scale.begin()->first;
        double best_v = by_scale.begin()->second;
        for (const auto& [t, v] : by_scale)
            if (v > best_v) {
                best_v = v;
                best_t = t;
            }
        pred.part_scale[part] = best_t;
        sum += best_t;
    }
    pred.aggregate = sum / static_cast<double>(pred.part_scale.size());
    return pred;
}

struct MultiScaleOptions {
    bool exact_rerun = false;        // use features at round(Sc*) when present
    std::optional<int> forced_scale; // skip prediction and run at this scale
    std::size_t max_detections = 100;
    int jobs = 1;
};

struct MultiScaleResult {
    ScalePrediction prediction;
    int rerun_scale = 0;
    std::vector<Detection> detections; // original image coordinates
};

/// `maps` holds the image's features keyed by short edge; `original_short_edge` is the
/// short edge detections are reported in.
inline MultiScaleResult detect_multiscale(const std::map<int, FeatureMap>& maps, const Model& model,
                                          const std::string& object_class, const std::string& image_id,
                                          double original_short_edge, const VoteParams& params,
                                          const MultiScaleOptions& opt = {}) {
    if (maps.empty()) throw Error(Errc::invalid_argument, "no scaled features for " + image_id);
    const auto parts = parts_of_class(model, object_class);
    if (parts.empty()) throw Error(Errc::invalid_argument, "no part models for class " + object_class);

    std::vector<int> scales;
    for (const auto& [t, fm] : maps) scales.push_back(t);

    MultiScaleResult res;
    int run_at = 0;
    std::map<int, Grid<double>> cached; // part → lattice map at the rerun scale
    if (opt.forced_scale) {
        run_at = maps.count(*opt.forced_scale) ? *opt.forced_scale
                                               : ScaleSchedule::nearest_of(scales, *opt.forced_scale);
        res.prediction.aggregate = *opt.forced_scale;
    } else {
        std::vector<std::map<int, double>> per_scale(scales.size());
        std::vector<std::map<int, Grid<double>>> grids(scales.size());
        detail::parallel_for(scales.size(), opt.jobs, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const FeatureMap& fm = maps.at(scales[i]);
                for (const PartModel* p : parts) {
                    Grid<double> g = part_score_map(fm, *p, model.dictionary, params);
                    per_scale[i][p->part_id] = upsampled_max(g, fm.spec());
                    grids[i][p->part_id] = std::move(g);
                }
            }
        });
        std::map<int, std::map<int, double>> by_part;
        for (std::size_t i = 0; i < scales.size(); ++i)
            for (const auto& [part, v] : per_scale[i]) by_part[part][scales[i]] = v;
        res.prediction = aggregate_scale(by_part);
        const int exact = static_cast<int>(std::lround(res.prediction.aggregate));
        run_at = opt.exact_rerun && maps.count(exact) ? exact
                                                      : ScaleSchedule::nearest_of(scales, res.prediction.aggregate);
        const auto idx = std::find(scales.begin(), scales.end(), run_at) - scales.begin();
        cached = std::move(grids[static_cast<std::size_t>(idx)]);
    }
    res.rerun_scale = run_at;

    const FeatureMap& fm = maps.at(run_at);
    const double factor = original_short_edge / fm.spec().short_edge();
    for (const PartModel* p : parts) {
        const Grid<double> l4 = cached.count(p->part_id) ? cached.at(p->part_id)
                                                         : part_score_map(fm, *p, model.dictionary, params);
        const Grid<double> l0 = upsample(l4, fm.spec());
        auto dets = extract_detections(l0, p->part_id, image_id,
                                       {p->box_w, p->box_h, p->nms_radius, model.params.score_floor,
                                        opt.max_detections});
        for (auto& d : dets) {
            d.box = d.box.scaled(factor);
            res.detections.push_back(std::move(d));
        }
    }
    return res;
}

/// Short edge that brings an object of the given box to the training scale.
inline double oracle_scale(const Box& object_box, double image_short_edge, double training_short_edge = 224.0) {
    const double s = std::min(object_box.width(), object_box.height());
    if (!(s > 0.0)) throw Error(Errc::invalid_argument, "object box is empty");
    return image_short_edge * training_short_edge / s;
}

} // namespace vcvote
