#pragma once

// Target/reference distance distributions per (concept, part) pair, activation
// thresholds at a fixed false-negative rate, supporting-concept selection by
// false-positive rate, and the tabulated log-likelihood-ratio score.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "concepts.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "spatial.hpp"

namespace vcvote {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Uniformly samples `count` distinct cell centers inside object boxes that are at least
/// min_dist_px from every center of part `part` in the same scene.
inline std::vector<SamplePoint> sample_negatives(std::span<const Scene> scenes, int part,
                                                 std::size_t count, double min_dist_px,
                                                 std::uint64_t seed) {
    std::vector<SamplePoint> pool;
    for (std::size_t si = 0; si < scenes.size(); ++si) {
        const Scene& s = scenes[si];
        const LatticeSpec& spec = s.features.spec();
        for (int r = 0; r < spec.grid_h; ++r) {
            for (int c = 0; c < spec.grid_w; ++c) {
                const ImagePos q = l0_of({r, c}, spec);
                const auto& objs = s.annotations.objects;
                if (!objs.empty() && std::none_of(objs.begin(), objs.end(), [&](const auto& o) {
                        return o.box.contains(q);
                    }))
                    continue;
                bool far = true;
                for (const auto& p : s.annotations.parts)
                    if (p.part_id == part && pixel_distance(q, p.center) < min_dist_px) far = false;
                if (far) pool.push_back({si, q});
            }
        }
    }
    if (pool.size() < count)
        throw Error(Errc::infeasible,
                    "part " + std::to_string(part) + ": need " + std::to_string(count) +
                        " negatives but only " + std::to_string(pool.size()) +
                        " object-box cells lie at least " + std::to_string(min_dist_px) +
                        " px from every part center");
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i)
        std::swap(pool[i], pool[std::uniform_int_distribution<std::size_t>(i, pool.size() - 1)(rng)]);
    pool.resize(count);
    return pool;
}

/// r(q) = min over N_{v,s}(q) of the concept distance; +inf when N_{v,s}(q) is empty.
inline std::vector<double> restricted_min_distances(std::span<const SamplePoint> points,
                                                    std::span<const DistanceField> fields,
                                                    const OffsetMap& offsets, double radius_px) {
    std::vector<double> out;
    out.reserve(points.size());
    for (const SamplePoint& s : points) {
        const DistanceField& f = fields[s.scene];
        const auto cells = restricted_neighborhood(s.q, offsets, f.spec, radius_px);
        const auto best = best_match_in(cells, f);
        out.push_back(best ? best->distance : kInfinity);
    }
    return out;
}

/// Nearest-rank percentile (pct in (0,100]) of the values; +inf entries count as large.
inline double nearest_rank(std::vector<double> values, double pct) {
    if (values.empty()) throw Error(Errc::invalid_argument, "percentile of empty set");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    std::size_t rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

/// Activation threshold T^A: the (1 − fnr_target) nearest-rank percentile of positive
/// distances. An infinite percentile falls back to the largest finite distance.
inline double calibrate_threshold(std::span<const double> positive_r, double fnr_target = 0.05) {
    std::vector<double> v(positive_r.begin(), positive_r.end());
    double t = nearest_rank(v, 100.0 * (1.0 - fnr_target));
    if (std::isinf(t)) {
        t = 0.0;
        for (double r : v)
            if (std::isfinite(r)) t = std::max(t, r);
    }
    return t;
}

inline double false_negative_rate(std::span<const double> positive_r, double threshold) {
    if (positive_r.empty()) return 0.0;
    const auto miss = std::count_if(positive_r.begin(), positive_r.end(),
                                    [&](double r) { return !(r <= threshold); });
    return static_cast<double>(miss) / static_cast<double>(positive_r.size());
}

inline double false_positive_rate(std::span<const double> negative_r, double threshold) {
    if (negative_r.empty()) return 0.0;
    const auto hit = std::count_if(negative_r.begin(), negative_r.end(),
                                   [&](double r) { return r <= threshold; });
    return static_cast<double>(hit) / static_cast<double>(negative_r.size());
}

struct CueModelOptions {
    int bins = 100;
    double epsilon = 1e-7;
    double fnr_target = 0.05;
    double range_percentile = 99.5;
};

/// Evidence model for one (concept, part) pair.
struct CueModel {
    int concept_id = 0;
    double r_max = 1.0;
    std::vector<double> hist_pos; // F+ bin masses, sums to 1
    std::vector<double> hist_neg; // F- bin masses, sums to 1
    std::vector<double> score_table;
    double threshold = 0.0;
    double fnr = 0.0;
    double fpr = 0.0;
    double epsilon = 1e-7;

    int bins() const { return static_cast<int>(score_table.size()); }

    int bin_of(double r) const {
        const int b = bins();
        if (!(r < kInfinity)) return b - 1;
        const double t = r / r_max * b;
        if (t >= b) return b - 1;
        return std::max(0, static_cast<int>(std::floor(t)));
    }

    double score(double r) const { return score_table[bin_of(r)]; }

    bool operator==(const CueModel&) const = default;
};

inline std::vector<double> normalized_histogram(std::span<const double> r, double r_max, int bins) {
    std::vector<double> h(bins, 0.0);
    if (r.empty()) return h;
    CueModel probe;
    probe.r_max = r_max;
    probe.score_table.assign(bins, 0.0);
    for (double v : r) h[probe.bin_of(v)] += 1.0;
    for (double& m : h) m /= static_cast<double>(r.size());
    return h;
}

inline std::vector<double> score_table(std::span<const double> hist_pos,
                                       std::span<const double> hist_neg, double epsilon) {
    std::vector<double> s(hist_pos.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        s[i] = std::log(hist_pos[i] + epsilon) - std::log(hist_neg[i] + epsilon);
    return s;
}

/// Histograms over [0, r_max] (r_max = range_percentile of pooled finite distances),
/// threshold, rates and score table from raw positive/negative distances.
inline CueModel build_cue_model(int concept_id, std::span<const double> positive_r,
                                std::span<const double> negative_r,
                                const CueModelOptions& opt = {}) {
    if (opt.bins < 1) throw Error(Errc::invalid_argument, "histogram needs at least one bin");
    CueModel m;
    m.concept_id = concept_id;
    m.epsilon = opt.epsilon;
    std::vector<double> pooled;
    for (double r : positive_r)
        if (std::isfinite(r)) pooled.push_back(r);
    for (double r : negative_r)
        if (std::isfinite(r)) pooled.push_back(r);
    m.r_max = pooled.empty() ? 1.0 : nearest_rank(pooled, opt.range_percentile);
    if (!(m.r_max > 0.0)) m.r_max = std::numeric_limits<double>::min();
    m.hist_pos = normalized_histogram(positive_r, m.r_max, opt.bins);
    m.hist_neg = normalized_histogram(negative_r, m.r_max, opt.bins);
    m.score_table = score_table(m.hist_pos, m.hist_neg, opt.epsilon);
    m.threshold = calibrate_threshold(positive_r, opt.fnr_target);
    m.fnr = false_negative_rate(positive_r, m.threshold);
    m.fpr = false_positive_rate(negative_r, m.threshold);
    return m;
}

/// The k concepts with the smallest FPR; ties by smaller concept index.
inline std::vector<int> select_supporting(std::span<const CueModel> cues, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > cues.size())
        throw Error(Errc::invalid_argument, "supporting-set size " + std::to_string(k) +
                                                " not in [1, " + std::to_string(cues.size()) + "]");
    std::vector<std::size_t> idx(cues.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (cues[a].fpr != cues[b].fpr) return cues[a].fpr < cues[b].fpr;
        return cues[a].concept_id < cues[b].concept_id;
    });
    std::vector<int> out;
    for (int i = 0; i < k; ++i) out.push_back(cues[idx[i]].concept_id);
    return out;
}

} // namespace vcvote
