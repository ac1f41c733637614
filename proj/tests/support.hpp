#pragma once

// Shared fixtures: the tuned synthetic regime, random instances, scratch directories.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vcvote/vcvote.hpp"

namespace vcvote::testing {

/// Four parts of six planted concepts each, compact background, rare decoys.
inline SynthSpec tuned_spec(std::uint64_t seed = 7) {
    SynthSpec s = SynthSpec::make_default(seed);
    s.prototype_spread = 10.0;
    s.prototype_separation = 10.0;
    s.background_scale = 1.0;
    s.noise_sigma = 0.05;
    s.decoy_rate = 0.02;
    return s;
}

inline TrainOptions tuned_training() {
    TrainOptions t;
    t.concepts = 40;
    t.params.supporting = 8;
    t.kmeans.max_samples = 200000;
    return t;
}

inline std::vector<Scene> scenes_of(const std::vector<SynthScene>& s) {
    std::vector<Scene> out;
    out.reserve(s.size());
    for (const auto& x : s) out.push_back(x.scene);
    return out;
}

class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("vcvote_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline LatticeSpec random_lattice(std::mt19937_64& rng, int max_cells = 20) {
    std::uniform_int_distribution<int> n(3, max_cells);
    const int gh = n(rng), gw = n(rng);
    return LatticeSpec::for_image(gh * 16, gw * 16);
}

/// Features in [-1,1]^d; about one cell in eight repeats an earlier vector to exercise ties.
inline FeatureMap random_features(const LatticeSpec& spec, int depth, std::mt19937_64& rng) {
    FeatureMap fm(spec, depth);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::uniform_int_distribution<int> coin(0, 7);
    std::vector<std::vector<float>> seen;
    for (int r = 0; r < spec.grid_h; ++r)
        for (int c = 0; c < spec.grid_w; ++c) {
            auto dst = fm.at({r, c});
            if (!seen.empty() && coin(rng) == 0) {
                const auto& src = seen[std::uniform_int_distribution<std::size_t>(0, seen.size() - 1)(rng)];
                std::copy(src.begin(), src.end(), dst.begin());
            } else {
                for (auto& x : dst) x = u(rng);
            }
            seen.emplace_back(dst.begin(), dst.end());
        }
    return fm;
}

inline ImagePos random_position(const LatticeSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> y(0.0, spec.image_h - 1e-9), x(0.0, spec.image_w - 1e-9);
    return {y(rng), x(rng)};
}

/// Sparse random offset counts with at least one nonzero cell.
inline OffsetMap random_offset_map(int half, std::mt19937_64& rng) {
    const int side = 2 * half + 1;
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(side) * side, 0);
    std::uniform_int_distribution<int> coin(0, 3), cnt(1, 9);
    for (auto& c : counts)
        if (coin(rng) == 0) c = static_cast<std::uint64_t>(cnt(rng));
    counts[std::uniform_int_distribution<std::size_t>(0, counts.size() - 1)(rng)] += 1;
    return OffsetMap::from_counts(half, std::move(counts));
}

inline CueEntry random_cue(int half, int bins, std::mt19937_64& rng) {
    CueEntry e;
    e.offsets = random_offset_map(half, rng);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    e.cue.r_max = 2.0;
    e.cue.score_table.resize(static_cast<std::size_t>(bins));
    for (auto& s : e.cue.score_table) s = u(rng);
    e.cue.hist_pos.assign(static_cast<std::size_t>(bins), 1.0 / bins);
    e.cue.hist_neg.assign(static_cast<std::size_t>(bins), 1.0 / bins);
    e.cue.threshold = 1.0;
    return e;
}

inline std::vector<Activation> random_activations(int rows, int cols, std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> r(0, rows - 1), c(0, cols - 1);
    std::uniform_real_distribution<double> d(0.0, 2.5);
    std::vector<Activation> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({{r(rng), c(rng)}, d(rng)});
    return out;
}

} // namespace vcvote::testing
