#pragma once

#include <algorithm>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "annotation.hpp"
#include "feature_map.hpp"
#include "io.hpp"

namespace vcvote {

/// One feature map with its annotations, as consumed by training and detection.
struct Scene {
    std::string id;
    std::string object_class;
    FeatureMap features;
    SceneAnnotations annotations;
};

inline std::vector<int> part_ids(std::span<const Scene> scenes) {
    std::set<int> ids;
    for (const auto& s : scenes)
        for (const auto& p : s.annotations.parts) ids.insert(p.part_id);
    return {ids.begin(), ids.end()};
}

/// Loads the single-scale feature map of every manifest entry.
inline std::vector<Scene> load_scenes(const DatasetManifest& m) {
    std::vector<Scene> out;
    out.reserve(m.entries.size());
    for (const auto& e : m.entries) {
        if (e.features.empty())
            throw Error(Errc::invalid_argument, "scene " + e.id + " has no single-scale features");
        Scene s{e.id, e.object_class, read_feature_map(m.resolve(e.features)),
                read_scene_annotations(m.resolve(e.annotations))};
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace vcvote
