#pragma once

#include <map>
#include <string>
#include <vector>

#include "concepts.hpp"
#include "error.hpp"
#include "likelihood.hpp"
#include "spatial.hpp"

namespace vcvote {

/// Which offsets of a concept's map cast votes.
enum class VoteOffsets { all_nonzero, selected };

/// Normalizer U in the spatial term: mean over every cell, or over the selected cells.
enum class SpatialMean { all_cells, selected_cells };

inline const char* to_string(VoteOffsets v) {
    return v == VoteOffsets::all_nonzero ? "all-nonzero" : "selected";
}
inline const char* to_string(SpatialMean m) {
    return m == SpatialMean::all_cells ? "all-cells" : "selected-cells";
}

/// Constants fixed at training time that inference must reproduce.
struct ModelParams {
    double neighborhood_radius = 120.0;
    int stride = 16;
    double beta = 0.7;
    double epsilon = 1e-7;
    int bins = 100;
    double fnr_target = 0.05;
    int supporting = 45;
    VoteOffsets vote_offsets = VoteOffsets::all_nonzero;
    SpatialMean spatial_mean = SpatialMean::all_cells;
    int training_short_edge = 224;
    double score_floor = 0.0;

    bool operator==(const ModelParams&) const = default;
};

struct CueEntry {
    CueModel cue;
    OffsetMap offsets;

    bool operator==(const CueEntry&) const = default;
};

struct PartModel {
    int part_id = 0;
    std::string object_class;
    std::vector<int> supporting;  // V_s, ranked by FPR
    std::map<int, CueEntry> cues; // one per supporting concept
    double box_w = 0.0;           // median training box
    double box_h = 0.0;
    double nms_radius = 0.0;

    const CueEntry& cue(int v) const {
        auto it = cues.find(v);
        if (it == cues.end())
            throw Error(Errc::integrity, "part " + std::to_string(part_id) + " has no cue for concept " +
                                             std::to_string(v));
        return it->second;
    }

    bool operator==(const PartModel&) const = default;
};

struct Model {
    ModelParams params;
    ConceptDictionary dictionary;
    std::vector<PartModel> parts;

    const PartModel& part(int id) const {
        for (const auto& p : parts)
            if (p.part_id == id) return p;
        throw Error(Errc::out_of_range, "no model for part " + std::to_string(id));
    }

    /// Every supporting concept has a cue entry and a valid dictionary index.
    void check_integrity() const {
        for (const auto& p : parts) {
            for (int v : p.supporting) {
                if (v < 0 || v >= dictionary.size())
                    throw Error(Errc::integrity, "part " + std::to_string(p.part_id) +
                                                     " references concept " + std::to_string(v) +
                                                     " outside the dictionary");
                (void)p.cue(v);
            }
        }
    }
};

} // namespace vcvote
