#pragma once

// Dataset-level drivers shared by the command-line tool and the acceptance harness.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "concepts.hpp"
#include "dataset.hpp"
#include "detection.hpp"
#include "eval.hpp"
#include "image.hpp"
#include "io.hpp"
#include "model.hpp"
#include "multiscale.hpp"
#include "voting.hpp"

namespace vcvote {

struct GroundTruthSet {
    std::vector<GroundTruth> parts;
    std::map<std::string, std::string> image_class;
    std::map<std::string, double> actual_scale; // short edge bringing the object to training scale
};

inline GroundTruthSet load_ground_truth(const DatasetManifest& m, double training_short_edge = 224.0) {
    GroundTruthSet g;
    for (const auto& e : m.entries) {
        const SceneAnnotations a = read_scene_annotations(m.resolve(e.annotations));
        g.image_class[e.id] = e.object_class;
        for (const auto& p : a.parts) g.parts.push_back({e.id, p});
        if (!a.objects.empty())
            g.actual_scale[e.id] = oracle_scale(a.objects.front().box, e.short_edge(), training_short_edge);
    }
    return g;
}

struct DetectOptions {
    VoteParams vote;
    bool multiscale = false;
    std::vector<int> scales; // restricts the scaled features used; empty = all listed
    bool oracle_scale = false;
    bool exact_rerun = false;
    std::size_t max_detections = 100;
    int jobs = 1;
    std::optional<std::filesystem::path> score_maps; // writes <id>_part<s>.ppm heatmaps here
};

struct ScaleRecord {
    std::string image_id;
    double predicted = 0.0;
    int rerun = 0;
    std::map<int, int> part_scale;
};

struct DetectOutput {
    std::vector<Detection> detections;
    std::vector<ScaleRecord> scales;
};

namespace detail {

inline void write_score_map(const Grid<double>& l0, const std::filesystem::path& dir, const std::string& id, int part) {
    std::filesystem::create_directories(dir);
    heatmap(l0).write(dir / (id + "_part" + std::to_string(part) + ".ppm"));
}

} // namespace detail

inline DetectOutput detect_dataset(const DatasetManifest& m, const Model& model, const DetectOptions& opt) {
    std::vector<DetectOutput> per(m.entries.size());
    detail::parallel_for(m.entries.size(), opt.jobs, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const ManifestEntry& e = m.entries[i];
            DetectOutput& out = per[i];
            if (!opt.multiscale && !opt.oracle_scale) {
                if (e.features.empty())
                    throw Error(Errc::invalid_argument, "scene " + e.id + " has no single-scale features");
                const FeatureMap fm = read_feature_map(m.resolve(e.features));
                const double factor = static_cast<double>(e.short_edge()) / fm.spec().short_edge();
                for (const PartModel* p : parts_of_class(model, e.object_class)) {
                    const Grid<double> l0 = upsample(part_score_map(fm, *p, model.dictionary, opt.vote), fm.spec());
                    if (opt.score_maps) detail::write_score_map(l0, *opt.score_maps, e.id, p->part_id);
                    for (auto d : extract_detections(l0, p->part_id, e.id,
                                                     {p->box_w, p->box_h, p->nms_radius,
                                                      model.params.score_floor, opt.max_detections})) {
                        d.box = d.box.scaled(factor);
                        out.detections.push_back(std::move(d));
                    }
                }
                continue;
            }
            std::map<int, FeatureMap> maps;
            for (const auto& [t, path] : e.scaled_features)
                if (opt.scales.empty() || std::find(opt.scales.begin(), opt.scales.end(), t) != opt.scales.end())
                    maps.emplace(t, read_feature_map(m.resolve(path)));
            if (maps.empty()) throw Error(Errc::invalid_argument, "scene " + e.id + " has no usable scaled features");
            MultiScaleOptions mo;
            mo.exact_rerun = opt.exact_rerun;
            mo.max_detections = opt.max_detections;
            if (opt.oracle_scale) {
                const SceneAnnotations a = read_scene_annotations(m.resolve(e.annotations));
                if (a.objects.empty()) throw Error(Errc::invalid_argument, "oracle scale needs an object box in " + e.id);
                mo.forced_scale = static_cast<int>(std::lround(
                    oracle_scale(a.objects.front().box, e.short_edge(), model.params.training_short_edge)));
            }
            MultiScaleResult r = detect_multiscale(maps, model, e.object_class, e.id, e.short_edge(), opt.vote, mo);
            if (opt.score_maps) {
                const FeatureMap& fm = maps.at(r.rerun_scale);
                for (const PartModel* p : parts_of_class(model, e.object_class))
                    detail::write_score_map(upsample(part_score_map(fm, *p, model.dictionary, opt.vote), fm.spec()),
                                            *opt.score_maps, e.id, p->part_id);
            }
            out.detections = std::move(r.detections);
            out.scales.push_back({e.id, r.prediction.aggregate, r.rerun_scale, r.prediction.part_scale});
        }
    });
    DetectOutput all;
    for (auto& o : per) {
        all.detections.insert(all.detections.end(), o.detections.begin(), o.detections.end());
        all.scales.insert(all.scales.end(), o.scales.begin(), o.scales.end());
    }
    return all;
}

// Scale prediction files:
//   # vcvote scales v1
//   <image_id> <predicted Sc*> <rerun scale> <part>:<Sc_s> ...

inline void write_scale_records(const std::vector<ScaleRecord>& recs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    out << "# vcvote scales v1\n";
    char buf[64];
    for (const auto& r : recs) {
        std::snprintf(buf, sizeof buf, " %.17g %d", r.predicted, r.rerun);
        out << r.image_id << buf;
        for (const auto& [p, s] : r.part_scale) out << ' ' << p << ':' << s;
        out << '\n';
    }
}

inline std::vector<ScaleRecord> read_scale_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    std::vector<ScaleRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        ScaleRecord r;
        if (!(ls >> r.image_id >> r.predicted >> r.rerun))
            throw Error(Errc::parse, "scales line " + std::to_string(lineno));
        std::string tok;
        while (ls >> tok) {
            const auto c = tok.find(':');
            try {
                if (c == std::string::npos) throw std::invalid_argument(tok);
                r.part_scale[std::stoi(tok.substr(0, c))] = std::stoi(tok.substr(c + 1));
            } catch (const std::exception&) {
                throw Error(Errc::parse, "scales line " + std::to_string(lineno) + ": bad token " + tok);
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

/// Fills the scale-loss fields from predictions against known actual scales.
inline void add_scale_loss(EvalReport& rep, const std::vector<ScaleRecord>& recs, const GroundTruthSet& gt) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : recs) {
        auto it = gt.actual_scale.find(r.image_id);
        if (it == gt.actual_scale.end()) continue;
        sum += scale_loss(it->second, r.predicted);
        ++n;
    }
    rep.scale_samples = n;
    rep.mean_scale_loss = n ? sum / static_cast<double>(n) : 0.0;
}

inline std::string format_report(const EvalReport& rep) {
    std::ostringstream out;
    char buf[256];
    out << "# vcvote evaluation v1\n";
    out << "# class part ap gt detections\n";
    for (const auto& p : rep.parts) {
        std::snprintf(buf, sizeof buf, "part %s %d %.6f %zu %zu\n", p.object_class.c_str(), p.part_id, p.ap,
                      p.gt_count, p.detections);
        out << buf;
    }
    for (const auto& [c, ap] : rep.class_mean_ap) {
        std::snprintf(buf, sizeof buf, "class %s %.6f\n", c.c_str(), ap);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "mean_ap %.6f\n", rep.mean_ap());
    out << buf;
    for (const auto& s : rep.strata) {
        std::snprintf(buf, sizeof buf, "occluded [%.1f,%.1f) gt %zu recalled %zu recall %.6f\n", s.lo, s.hi,
                      s.gt_count, s.recalled, s.recall());
        out << buf;
    }
    if (rep.scale_samples > 0) {
        std::snprintf(buf, sizeof buf, "scale_loss %.6f over %zu images\n", rep.mean_scale_loss, rep.scale_samples);
        out << buf;
    }
    return out.str();
}

} // namespace vcvote
