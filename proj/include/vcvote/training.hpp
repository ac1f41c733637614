#pragma once

// Training phase: dictionary, then per (concept, part) offset maps and cue models,
// then the supporting set of each part.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "concepts.hpp"
#include "dataset.hpp"
#include "likelihood.hpp"
#include "model.hpp"
#include "spatial.hpp"

namespace vcvote {

struct TrainOptions {
    ModelParams params;
    int concepts = 200;
    KMeansOptions kmeans;
    bool cluster_object_interior = true;
    double neg_ratio = 5.0;
    double min_neg_distance = 160.0;
    double range_percentile = 99.5;
    std::uint64_t negative_seed = 1;
    int jobs = 1;
};

/// Everything computed for one part before the supporting set is chosen.
struct PartStatistics {
    int part_id = 0;
    std::vector<SamplePoint> positives;
    std::vector<SamplePoint> negatives;
    std::vector<CueEntry> per_concept; // indexed by concept
};

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace detail

inline ConceptDictionary train_dictionary(std::span<const Scene> scenes, const TrainOptions& opt) {
    if (scenes.empty()) throw Error(Errc::invalid_argument, "no training scenes");
    std::vector<float> samples;
    const int depth = scenes.front().features.depth();
    for (const Scene& s : scenes) {
        if (s.features.depth() != depth)
            throw Error(Errc::dim_mismatch, "scene " + s.id + " has a different feature depth");
        append_cluster_samples(s.features, s.annotations, opt.cluster_object_interior, samples);
    }
    KMeansOptions km = opt.kmeans;
    km.jobs = opt.jobs;
    return fit_dictionary(samples, depth, opt.concepts, km);
}

/// Offset maps and cue models for every (concept, part) pair.
inline std::vector<PartStatistics> collect_statistics(std::span<const Scene> scenes,
                                                      const ConceptDictionary& dict,
                                                      const TrainOptions& opt) {
    const double radius = opt.params.neighborhood_radius;
    std::vector<PartStatistics> stats;
    for (int part : part_ids(scenes)) {
        PartStatistics ps;
        ps.part_id = part;
        for (std::size_t si = 0; si < scenes.size(); ++si)
            for (const auto& a : scenes[si].annotations.parts)
                if (a.part_id == part) ps.positives.push_back({si, a.center});
        const auto n_neg =
            static_cast<std::size_t>(std::ceil(opt.neg_ratio * static_cast<double>(ps.positives.size())));
        ps.negatives = sample_negatives(scenes, part, n_neg, opt.min_neg_distance,
                                        opt.negative_seed + static_cast<std::uint64_t>(part));
        ps.per_concept.resize(dict.size());
        stats.push_back(std::move(ps));
    }

    const CueModelOptions cue_opt{opt.params.bins, opt.params.epsilon, opt.params.fnr_target,
                                  opt.range_percentile};
    detail::parallel_for(static_cast<std::size_t>(dict.size()), opt.jobs,
                         [&](std::size_t lo, std::size_t hi) {
        for (std::size_t v = lo; v < hi; ++v) {
            std::vector<DistanceField> fields;
            fields.reserve(scenes.size());
            for (const Scene& s : scenes)
                fields.push_back(distance_field(s.features, static_cast<int>(v), dict));
            for (PartStatistics& ps : stats) {
                CueEntry e;
                e.offsets = estimate_offset_map(ps.positives, fields, radius);
                const auto pos_r = restricted_min_distances(ps.positives, fields, e.offsets, radius);
                const auto neg_r = restricted_min_distances(ps.negatives, fields, e.offsets, radius);
                e.cue = build_cue_model(static_cast<int>(v), pos_r, neg_r, cue_opt);
                ps.per_concept[v] = std::move(e);
            }
        }
    });
    return stats;
}

/// Selects V_s and attaches box statistics.
inline PartModel make_part_model(const PartStatistics& ps, std::span<const Scene> scenes, int k) {
    PartModel pm;
    pm.part_id = ps.part_id;
    std::vector<CueModel> cues;
    cues.reserve(ps.per_concept.size());
    for (const auto& e : ps.per_concept) cues.push_back(e.cue);
    pm.supporting = select_supporting(cues, k);
    for (int v : pm.supporting) pm.cues.emplace(v, ps.per_concept[v]);

    std::vector<double> w, h, diag;
    for (const SamplePoint& s : ps.positives) {
        const Scene& sc = scenes[s.scene];
        if (pm.object_class.empty()) pm.object_class = sc.object_class;
        for (const auto& a : sc.annotations.parts)
            if (a.part_id == ps.part_id && a.center == s.q) {
                w.push_back(a.box.width());
                h.push_back(a.box.height());
                diag.push_back(std::hypot(a.box.width(), a.box.height()));
                break;
            }
    }
    pm.box_w = detail::median(w);
    pm.box_h = detail::median(h);
    pm.nms_radius = detail::median(diag) / 2.0;
    return pm;
}

inline Model train_model(std::span<const Scene> scenes, const TrainOptions& opt) {
    Model m;
    m.params = opt.params;
    m.dictionary = train_dictionary(scenes, opt);
    for (const auto& ps : collect_statistics(scenes, m.dictionary, opt))
        m.parts.push_back(make_part_model(ps, scenes, opt.params.supporting));
    return m;
}

} // namespace vcvote
