#pragma once

// Run configuration: one JSON object, every field optional, unknown keys rejected.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "model.hpp"
#include "multiscale.hpp"
#include "training.hpp"

namespace vcvote {

enum class NmsPolicy { half_diagonal, fixed };

struct Config {
    double neighborhood_radius = 120.0;
    int stride = 16;
    int concepts = 200;
    int supporting = 45;
    double fnr_target = 0.05;
    double epsilon = 1e-7;
    double beta = 0.7;
    int bins = 100;
    double neg_ratio = 5.0;
    double min_neg_distance = 160.0;
    double range_percentile = 99.5;
    std::vector<int> scales = ScaleSchedule{}.scales;
    int training_short_edge = 224;
    std::uint64_t kmeans_seed = 0;
    std::uint64_t negative_seed = 1;
    int kmeans_max_iterations = 300;
    double kmeans_tolerance = 1e-4;
    std::size_t kmeans_max_samples = 1'000'000;
    bool cluster_object_interior = true;
    VoteOffsets vote_offsets = VoteOffsets::all_nonzero;
    SpatialMean spatial_mean = SpatialMean::all_cells;
    NmsPolicy nms_policy = NmsPolicy::half_diagonal;
    double nms_radius = 0.0; // used by the fixed policy
    double score_floor = 0.0;
    std::size_t max_detections = 100;
    int jobs = 1;

    /// Field-level problems, empty when valid.
    std::vector<std::string> problems() const {
        std::vector<std::string> p;
        auto need = [&](bool ok, const char* field, const char* what) {
            if (!ok) p.push_back(std::string("field '") + field + "': " + what);
        };
        need(neighborhood_radius > 0, "neighborhood_radius", "must be positive");
        need(stride > 0, "stride", "must be positive");
        need(concepts >= 1, "concepts", "must be at least 1");
        need(supporting >= 1, "supporting", "must be at least 1");
        need(supporting <= concepts, "supporting", "cannot exceed concepts");
        need(fnr_target >= 0 && fnr_target < 1, "fnr_target", "must be in [0, 1)");
        need(epsilon > 0, "epsilon", "must be positive");
        need(beta >= 0 && beta <= 1, "beta", "must be in [0, 1]");
        need(bins >= 1, "bins", "must be at least 1");
        need(neg_ratio > 0, "neg_ratio", "must be positive");
        need(min_neg_distance >= 0, "min_neg_distance", "must be non-negative");
        need(range_percentile > 0 && range_percentile <= 100, "range_percentile", "must be in (0, 100]");
        try {
            ScaleSchedule{scales}.validate();
        } catch (const Error& e) {
            p.push_back(std::string("field 'scales': ") + e.what());
        }
        need(training_short_edge > 0, "training_short_edge", "must be positive");
        need(kmeans_max_iterations >= 1, "kmeans_max_iterations", "must be at least 1");
        need(kmeans_tolerance >= 0, "kmeans_tolerance", "must be non-negative");
        need(kmeans_max_samples >= 1, "kmeans_max_samples", "must be at least 1");
        need(nms_policy != NmsPolicy::fixed || nms_radius > 0, "nms_radius", "must be positive with the fixed policy");
        need(nms_radius >= 0, "nms_radius", "must be non-negative");
        need(score_floor >= 0, "score_floor", "must be non-negative");
        need(max_detections >= 1, "max_detections", "must be at least 1");
        need(jobs >= 1, "jobs", "must be at least 1");
        return p;
    }

    void validate() const {
        const auto p = problems();
        if (p.empty()) return;
        std::string msg = "invalid config";
        for (const auto& s : p) msg += "\n  " + s;
        throw Error(Errc::validation, msg);
    }

    ModelParams model_params() const {
        ModelParams m;
        m.neighborhood_radius = neighborhood_radius;
        m.stride = stride;
        m.beta = beta;
        m.epsilon = epsilon;
        m.bins = bins;
        m.fnr_target = fnr_target;
        m.supporting = supporting;
        m.vote_offsets = vote_offsets;
        m.spatial_mean = spatial_mean;
        m.training_short_edge = training_short_edge;
        m.score_floor = score_floor;
        return m;
    }

    TrainOptions train_options() const {
        TrainOptions t;
        t.params = model_params();
        t.concepts = concepts;
        t.kmeans.max_iterations = kmeans_max_iterations;
        t.kmeans.tolerance = kmeans_tolerance;
        t.kmeans.seed = kmeans_seed;
        t.kmeans.max_samples = kmeans_max_samples;
        t.kmeans.jobs = jobs;
        t.cluster_object_interior = cluster_object_interior;
        t.neg_ratio = neg_ratio;
        t.min_neg_distance = min_neg_distance;
        t.range_percentile = range_percentile;
        t.negative_seed = negative_seed;
        t.jobs = jobs;
        return t;
    }

    /// Applies the NMS radius policy to trained part models.
    void apply_nms(Model& m) const {
        if (nms_policy == NmsPolicy::fixed)
            for (auto& p : m.parts) p.nms_radius = nms_radius;
    }
};

namespace detail {

template <class E>
bool parse_enum(const std::string& s, const char* a, const char* b, E ea, E eb, E& out) {
    if (s == a) {
        out = ea;
        return true;
    }
    if (s == b) {
        out = eb;
        return true;
    }
    return false;
}

} // namespace detail

inline Config parse_config(const std::string& text) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(Errc::parse, std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(Errc::parse, "config must be a JSON object");

    Config c;
    std::vector<std::string> problems;
    auto read = [&](const std::string& key, auto& field) {
        try {
            j.at(key).get_to(field);
        } catch (const json::exception&) {
            problems.push_back("field '" + key + "': wrong type");
        }
    };
    for (const auto& [key, val] : j.items()) {
        if (key == "neighborhood_radius") read(key, c.neighborhood_radius);
        else if (key == "stride") read(key, c.stride);
        else if (key == "concepts") read(key, c.concepts);
        else if (key == "supporting") read(key, c.supporting);
        else if (key == "fnr_target") read(key, c.fnr_target);
        else if (key == "epsilon") read(key, c.epsilon);
        else if (key == "beta") read(key, c.beta);
        else if (key == "bins") read(key, c.bins);
        else if (key == "neg_ratio") read(key, c.neg_ratio);
        else if (key == "min_neg_distance") read(key, c.min_neg_distance);
        else if (key == "range_percentile") read(key, c.range_percentile);
        else if (key == "scales") read(key, c.scales);
        else if (key == "training_short_edge") read(key, c.training_short_edge);
        else if (key == "kmeans_seed") read(key, c.kmeans_seed);
        else if (key == "negative_seed") read(key, c.negative_seed);
        else if (key == "kmeans_max_iterations") read(key, c.kmeans_max_iterations);
        else if (key == "kmeans_tolerance") read(key, c.kmeans_tolerance);
        else if (key == "kmeans_max_samples") read(key, c.kmeans_max_samples);
        else if (key == "cluster_object_interior") read(key, c.cluster_object_interior);
        else if (key == "nms_radius") read(key, c.nms_radius);
        else if (key == "score_floor") read(key, c.score_floor);
        else if (key == "max_detections") read(key, c.max_detections);
        else if (key == "jobs") read(key, c.jobs);
        else if (key == "vote_offsets" || key == "spatial_mean" || key == "nms_policy") {
            std::string s;
            read(key, s);
            bool ok = key == "vote_offsets"
                          ? detail::parse_enum(s, "all-nonzero", "selected", VoteOffsets::all_nonzero,
                                               VoteOffsets::selected, c.vote_offsets)
                      : key == "spatial_mean"
                          ? detail::parse_enum(s, "all-cells", "selected-cells", SpatialMean::all_cells,
                                               SpatialMean::selected_cells, c.spatial_mean)
                          : detail::parse_enum(s, "half-diagonal", "fixed", NmsPolicy::half_diagonal,
                                               NmsPolicy::fixed, c.nms_policy);
            if (!ok && val.is_string()) problems.push_back("field '" + key + "': unknown value '" + s + "'");
        } else {
            problems.push_back("unknown field '" + key + "'");
        }
    }
    for (auto& p : c.problems()) problems.push_back(std::move(p));
    if (!problems.empty()) {
        std::string msg = "invalid config";
        for (const auto& s : problems) msg += "\n  " + s;
        throw Error(Errc::validation, msg);
    }
    return c;
}

inline Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline std::string format_config(const Config& c) {
    nlohmann::ordered_json j;
    j["neighborhood_radius"] = c.neighborhood_radius;
    j["stride"] = c.stride;
    j["concepts"] = c.concepts;
    j["supporting"] = c.supporting;
    j["fnr_target"] = c.fnr_target;
    j["epsilon"] = c.epsilon;
    j["beta"] = c.beta;
    j["bins"] = c.bins;
    j["neg_ratio"] = c.neg_ratio;
    j["min_neg_distance"] = c.min_neg_distance;
    j["range_percentile"] = c.range_percentile;
    j["scales"] = c.scales;
    j["training_short_edge"] = c.training_short_edge;
    j["kmeans_seed"] = c.kmeans_seed;
    j["negative_seed"] = c.negative_seed;
    j["kmeans_max_iterations"] = c.kmeans_max_iterations;
    j["kmeans_tolerance"] = c.kmeans_tolerance;
    j["kmeans_max_samples"] = c.kmeans_max_samples;
    j["cluster_object_interior"] = c.cluster_object_interior;
    j["vote_offsets"] = to_string(c.vote_offsets);
    j["spatial_mean"] = to_string(c.spatial_mean);
    j["nms_policy"] = c.nms_policy == NmsPolicy::fixed ? "fixed" : "half-diagonal";
    j["nms_radius"] = c.nms_radius;
    j["score_floor"] = c.score_floor;
    j["max_detections"] = c.max_detections;
    j["jobs"] = c.jobs;
    return j.dump(2) + "\n";
}

} // namespace vcvote
