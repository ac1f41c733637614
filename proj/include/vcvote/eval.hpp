#pragma once

// IoU matching, average precision, and the scale-prediction loss.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "annotation.hpp"
#include "detection.hpp"
#include "error.hpp"

namespace vcvote {

inline double iou(const Box& a, const Box& b) {
    const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

/// A ground-truth part instance tagged with the image it belongs to.
struct GroundTruth {
    std::string image_id;
    PartAnnotation part;
};

struct MatchResult {
    std::vector<std::size_t> order; // detection indices by descending score
    std::vector<bool> true_positive; // aligned with order
    std::vector<int> matched_gt;     // per ground truth: rank in order, or -1
    double ap = 0.0;
};

/// Area under the precision/recall curve with the precision envelope (all points).
inline double average_precision(const std::vector<bool>& tp_by_rank, std::size_t gt_count) {
    if (gt_count == 0 || tp_by_rank.empty()) return 0.0;
    const std::size_t n = tp_by_rank.size();
    std::vector<double> prec(n), rec(n);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        tp += tp_by_rank[i] ? 1 : 0;
        prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        rec[i] = static_cast<double>(tp) / static_cast<double>(gt_count);
    }
    for (std::size_t i = n - 1; i-- > 0;) prec[i] = std::max(prec[i], prec[i + 1]);
    double ap = 0.0, prev_rec = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (rec[i] > prev_rec) {
            ap += (rec[i] - prev_rec) * prec[i];
            prev_rec = rec[i];
        }
    }
    return ap;
}

/// Greedy matching in descending score order: each detection takes the unmatched ground truth
/// of the same image and part with the highest IoU, if that IoU ≥ iou_thresh. Duplicates are
/// false positives.
inline MatchResult match_and_ap(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                double iou_thresh = 0.5) {
    MatchResult res;
    res.order.resize(dets.size());
    std::iota(res.order.begin(), res.order.end(), 0);
    std::stable_sort(res.order.begin(), res.order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    res.matched_gt.assign(gts.size(), -1);

    std::map<std::string, std::vector<std::size_t>> by_image;
    for (std::size_t g = 0; g < gts.size(); ++g) by_image[gts[g].image_id].push_back(g);

    for (std::size_t rank = 0; rank < res.order.size(); ++rank) {
        const Detection& d = dets[res.order[rank]];
        double best = -1.0;
        long arg = -1;
        if (auto it = by_image.find(d.image_id); it != by_image.end()) {
            for (std::size_t g : it->second) {
                if (res.matched_gt[g] >= 0 || gts[g].part.part_id != d.part_id) continue;
                const double o = iou(d.box, gts[g].part.box);
                if (o > best) {
                    best = o;
                    arg = static_cast<long>(g);
                }
            }
        }
        const bool tp = arg >= 0 && best >= iou_thresh;
        if (tp) res.matched_gt[arg] = static_cast<int>(rank);
        res.true_positive.push_back(tp);
    }
    res.ap = average_precision(res.true_positive, gts.size());
    return res;
}

/// ln(max(a,b) / min(a,b)) between actual and predicted short edges.
inline double scale_loss(double actual, double predicted) {
    if (!(actual > 0.0) || !(predicted > 0.0))
        throw Error(Errc::invalid_argument, "scale loss needs positive sizes");
    return std::log(std::max(actual, predicted) / std::min(actual, predicted));
}

struct PartResult {
    std::string object_class;
    int part_id = 0;
    double ap = 0.0;
    std::size_t gt_count = 0;
    std::size_t detections = 0;
};

struct OcclusionStratum {
    double lo = 0.0, hi = 0.0;
    std::size_t gt_count = 0;
    std::size_t recalled = 0;
    double recall() const { return gt_count ? static_cast<double>(recalled) / gt_count : 0.0; }
};

struct EvalReport {
    std::vector<PartResult> parts;
    std::map<std::string, double> class_mean_ap;
    std::vector<OcclusionStratum> strata;
    double mean_scale_loss = 0.0;
    std::size_t scale_samples = 0;

    double mean_ap() const {
        if (class_mean_ap.empty()) return 0.0;
        double s = 0.0;
        for (const auto& [c, ap] : class_mean_ap) s += ap;
        return s / static_cast<double>(class_mean_ap.size());
    }
};

/// Per-part AP (grouped by object class), class mean AP, and recall by occluded fraction.
/// `image_class` maps image id → object class; ground truths and detections for images
/// absent from it are ignored.
inline EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                           const std::map<std::string, std::string>& image_class,
                           double iou_thresh = 0.5) {
    EvalReport rep;
    std::map<std::pair<std::string, int>, std::pair<std::vector<Detection>, std::vector<GroundTruth>>>
        groups;
    for (const auto& g : gts) {
        auto it = image_class.find(g.image_id);
        if (it != image_class.end()) groups[{it->second, g.part.part_id}].second.push_back(g);
    }
    for (const auto& d : dets) {
        auto it = image_class.find(d.image_id);
        if (it != image_class.end()) groups[{it->second, d.part_id}].first.push_back(d);
    }

    const double edges[] = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    for (int i = 0; i < 5; ++i) rep.strata.push_back({edges[i], edges[i + 1], 0, 0});
    auto stratum = [&](double f) { return std::min(4, static_cast<int>(std::floor(f / 0.2))); };

    std::map<std::string, std::vector<double>> per_class;
    for (const auto& [key, group] : groups) {
        const auto& [gd, gg] = group;
        const MatchResult m = match_and_ap(gd, gg, iou_thresh);
        rep.parts.push_back({key.first, key.second, m.ap, gg.size(), gd.size()});
        if (!gg.empty()) per_class[key.first].push_back(m.ap);
        for (std::size_t g = 0; g < gg.size(); ++g) {
            auto& st = rep.strata[stratum(gg[g].part.occluded_fraction)];
            ++st.gt_count;
            if (m.matched_gt[g] >= 0) ++st.recalled;
        }
    }
    for (const auto& [c, aps] : per_class)
        rep.class_mean_ap[c] = std::accumulate(aps.begin(), aps.end(), 0.0) / aps.size();
    return rep;
}

} // namespace vcvote
