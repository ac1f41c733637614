#pragma once

// Synthetic feature-map scenes with known ground truth. Each part is a constellation of
// prototype vectors planted at fixed cell offsets from the part center; all other cells
// hold background vectors kept far from every prototype, optionally with decoys (stray
// prototypes at random cells).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "annotation.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "feature_map.hpp"
#include "io.hpp"
#include "lattice.hpp"

namespace vcvote {

struct ConstellationElement {
    int prototype = 0;
    Offset offset; // part cell − element cell
    double firing_probability = 1.0;
};

struct PartTemplate {
    int part_id = 0;
    std::vector<ConstellationElement> elements;
    double box_w = 64.0;
    double box_h = 64.0;
};

struct SynthSpec {
    int depth = 16;
    int prototype_count = 24;
    double prototype_spread = 10.0;    // prototypes uniform in [-spread, spread]^depth
    double prototype_separation = 10.0; // minimum pairwise prototype distance
    double noise_sigma = 0.05;
    double background_scale = 1.0;     // background ~ N(0, scale²·I) outside the exclusion zone
    double decoy_rate = 0.0;           // chance a background cell holds a random prototype
    double scale_drift = 0.0;          // appearance shift per unit |ln(scale ratio)|
    std::vector<PartTemplate> parts;
    int grid_h = 14; // training object, in cells
    int grid_w = 28;
    int stride = 16;
    std::string object_class = "synthetic";
    std::uint64_t seed = 0;

    void validate() const {
        auto fail = [](const std::string& m) { throw Error(Errc::validation, "synth spec: " + m); };
        if (depth < 1) fail("depth must be positive");
        if (prototype_count < 1) fail("need at least one prototype");
        if (noise_sigma < 0.0) fail("noise sigma must be non-negative");
        if (decoy_rate < 0.0 || decoy_rate > 1.0) fail("decoy rate outside [0,1]");
        if (grid_h < 1 || grid_w < 1 || stride < 1) fail("bad grid");
        for (const auto& p : parts)
            for (const auto& e : p.elements) {
                if (e.prototype < 0 || e.prototype >= prototype_count) fail("prototype id out of range");
                if (std::abs(e.offset.drow) > 7 || std::abs(e.offset.dcol) > 7)
                    fail("offsets must lie in [-7,7]^2");
                if (e.firing_probability < 0.0 || e.firing_probability > 1.0)
                    fail("firing probability outside [0,1]");
            }
    }

    /// n_parts parts with `elements` distinct prototypes each, offsets drawn from
    /// 2 ≤ max(|Δr|,|Δc|) ≤ max_offset with at least one element at the outer ring.
    static SynthSpec make_default(std::uint64_t seed, int n_parts = 4, int elements = 6,
                                  int depth = 16, int max_offset = 5) {
        SynthSpec s;
        s.seed = seed;
        s.depth = depth;
        s.prototype_count = n_parts * elements;
        std::mt19937_64 rng(seed ^ 0x5eedULL);
        std::vector<Offset> ring;
        for (int r = -max_offset; r <= max_offset; ++r)
            for (int c = -max_offset; c <= max_offset; ++c)
                if (std::max(std::abs(r), std::abs(c)) >= 2) ring.push_back({r, c});
        for (int p = 0; p < n_parts; ++p) {
            PartTemplate t;
            t.part_id = p;
            t.box_w = 64.0 + 16.0 * std::uniform_int_distribution<int>(0, 2)(rng);
            t.box_h = 64.0 + 16.0 * std::uniform_int_distribution<int>(0, 2)(rng);
            for (;;) {
                std::vector<Offset> pool = ring;
                std::shuffle(pool.begin(), pool.end(), rng);
                pool.resize(elements);
                const bool outer = std::any_of(pool.begin(), pool.end(), [&](Offset d) {
                    return std::max(std::abs(d.drow), std::abs(d.dcol)) >= max_offset - 1;
                });
                int rmin = 0, rmax = 0, cmin = 0, cmax = 0;
                for (const auto& d : pool) {
                    rmin = std::min(rmin, d.drow);
                    rmax = std::max(rmax, d.drow);
                    cmin = std::min(cmin, d.dcol);
                    cmax = std::max(cmax, d.dcol);
                }
                if (!outer || rmax - rmin > 9 || cmax - cmin > 9) continue;
                t.elements.clear();
                for (int e = 0; e < elements; ++e) t.elements.push_back({p * elements + e, pool[e], 1.0});
                break;
            }
            s.parts.push_back(std::move(t));
        }
        return s;
    }
};

/// A cell that received (or was meant to receive) a constellation prototype.
struct PlantedCell {
    int part_id = 0;
    int prototype = 0;
    GridPos cell;
    bool fired = true;
};

struct SynthScene {
    Scene scene;
    std::vector<PlantedCell> planted;
};

/// One object rendered at several image scales; annotations at the original resolution.
struct MultiScaleScene {
    std::string id;
    std::string object_class;
    int original_h = 0;
    int original_w = 0;
    double actual_short_edge = 0.0; // short edge that brings the object to training scale
    SceneAnnotations annotations;
    std::map<int, FeatureMap> features; // keyed by short edge
    std::map<int, std::vector<PlantedCell>> planted;
};

class SynthGenerator {
public:
    explicit SynthGenerator(SynthSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        make_prototypes();
    }

    const SynthSpec& spec() const noexcept { return spec_; }
    const std::vector<std::vector<float>>& prototypes() const noexcept { return prototypes_; }

    /// Minimum distance a background vector keeps from every prototype.
    double background_exclusion() const {
        return 10.0 * spec_.noise_sigma + spec_.prototype_separation;
    }

    /// A scene at training scale: the object box is the whole image.
    SynthScene generate_scene(std::uint64_t scene_seed, const std::string& id) const {
        std::mt19937_64 rng(mix(spec_.seed, scene_seed));
        const LatticeSpec lat = LatticeSpec::for_image(spec_.grid_h * spec_.stride,
                                                       spec_.grid_w * spec_.stride, spec_.stride);
        const auto layout = place_parts(lat, rng);
        std::vector<bool> fires = draw_firing(rng);

        SynthScene out;
        out.scene.id = id;
        out.scene.object_class = spec_.object_class;
        out.scene.features = FeatureMap(lat, spec_.depth);
        fill_background(out.scene.features, rng);
        std::size_t k = 0;
        for (std::size_t pi = 0; pi < spec_.parts.size(); ++pi) {
            const PartTemplate& t = spec_.parts[pi];
            for (const auto& e : t.elements) {
                const GridPos cell = layout[pi] - e.offset;
                const bool fired = fires[k++];
                if (fired) plant(out.scene.features, cell, e.prototype, 0.0, nullptr, rng);
                out.planted.push_back({t.part_id, e.prototype, cell, fired});
            }
        }
        out.scene.annotations.objects.push_back(
            {0, spec_.object_class, Box{0.0, 0.0, double(lat.image_w), double(lat.image_h)}});
        for (std::size_t pi = 0; pi < spec_.parts.size(); ++pi) {
            const ImagePos c = l0_of(layout[pi], lat);
            out.scene.annotations.parts.push_back(
                {spec_.parts[pi].part_id, c, Box::centered(c, spec_.parts[pi].box_w, spec_.parts[pi].box_h), 0, 0.0});
        }
        return out;
    }

    std::vector<SynthScene> generate(std::size_t n, std::uint64_t first_seed = 0,
                                     const std::string& prefix = "scene") const {
        std::vector<SynthScene> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            char id[64];
            std::snprintf(id, sizeof id, "%s%05zu", prefix.c_str(), i);
            out.push_back(generate_scene(first_seed + i, id));
        }
        return out;
    }

    /// Renders one object whose ideal short edge is `actual_short_edge` into square images
    /// at each requested short edge. The object occupies object_cells × object_cells cells
    /// at training scale. Constellations scale with the image; appearance drifts by
    /// scale_drift·|ln ρ| along a fixed random direction per element, ρ = scale / ideal.
    MultiScaleScene generate_multiscale(std::uint64_t scene_seed, const std::string& id,
                                        double actual_short_edge, int original_short_edge,
                                        const std::vector<int>& scales, int object_cells = 14) const {
        const double train_edge = object_cells * spec_.stride;
        if (actual_short_edge < train_edge)
            throw Error(Errc::invalid_argument, "object larger than the image at its ideal scale");
        std::mt19937_64 rng(mix(spec_.seed, scene_seed));
        const LatticeSpec obj = LatticeSpec::for_image(int(train_edge), int(train_edge), spec_.stride);
        const auto layout = place_parts(obj, rng);
        const std::vector<bool> fires = draw_firing(rng);
        std::vector<std::vector<double>> drift_dirs;
        for (std::size_t k = 0; k < fires.size(); ++k) drift_dirs.push_back(unit_vector(rng));
        const int slack_cells = static_cast<int>(std::floor((actual_short_edge - train_edge) / spec_.stride));
        const double origin_y = spec_.stride * std::uniform_int_distribution<int>(0, slack_cells)(rng);
        const double origin_x = spec_.stride * std::uniform_int_distribution<int>(0, slack_cells)(rng);

        MultiScaleScene out;
        out.id = id;
        out.object_class = spec_.object_class;
        out.original_h = out.original_w = original_short_edge;
        out.actual_short_edge = actual_short_edge;
        const double to_orig = original_short_edge / actual_short_edge;
        out.annotations.objects.push_back(
            {0, spec_.object_class,
             Box{origin_x, origin_y, origin_x + train_edge, origin_y + train_edge}.scaled(to_orig)});
        for (std::size_t pi = 0; pi < spec_.parts.size(); ++pi) {
            const ImagePos c = l0_of(layout[pi], obj);
            const ImagePos o{(origin_y + c.y) * to_orig, (origin_x + c.x) * to_orig};
            out.annotations.parts.push_back(
                {spec_.parts[pi].part_id, o,
                 Box::centered(o, spec_.parts[pi].box_w * to_orig, spec_.parts[pi].box_h * to_orig), 0, 0.0});
        }

        for (int t : scales) {
            const double rho = t / actual_short_edge;
            std::mt19937_64 srng(mix(mix(spec_.seed, scene_seed), static_cast<std::uint64_t>(t)));
            const LatticeSpec lat = LatticeSpec::for_image(t, t, spec_.stride);
            FeatureMap fm(lat, spec_.depth);
            fill_background(fm, srng);
            std::vector<PlantedCell> planted;
            std::size_t k = 0;
            for (std::size_t pi = 0; pi < spec_.parts.size(); ++pi) {
                const ImagePos c = l0_of(layout[pi], obj);
                for (const auto& e : spec_.parts[pi].elements) {
                    const ImagePos px{(origin_y + c.y - spec_.stride * e.offset.drow) * rho,
                                      (origin_x + c.x - spec_.stride * e.offset.dcol) * rho};
                    const std::size_t idx = k++;
                    if (!lat.inside_image(px)) continue;
                    const GridPos cell = l4_of(px, lat);
                    if (fires[idx])
                        plant(fm, cell, e.prototype, spec_.scale_drift * std::abs(std::log(rho)),
                              &drift_dirs[idx], srng);
                    planted.push_back({spec_.parts[pi].part_id, e.prototype, cell, fires[idx]});
                }
            }
            out.features.emplace(t, std::move(fm));
            out.planted.emplace(t, std::move(planted));
        }
        return out;
    }

    /// Background vector (possibly a decoy when allow_decoy).
    std::vector<float> background_vector(std::mt19937_64& rng, bool allow_decoy = true) const {
        std::vector<float> v(spec_.depth);
        if (allow_decoy && spec_.decoy_rate > 0.0 &&
            std::uniform_real_distribution<double>(0.0, 1.0)(rng) < spec_.decoy_rate) {
            const int p = std::uniform_int_distribution<int>(0, spec_.prototype_count - 1)(rng);
            std::normal_distribution<double> noise(0.0, spec_.noise_sigma);
            for (int d = 0; d < spec_.depth; ++d)
                v[d] = static_cast<float>(prototypes_[p][d] + (spec_.noise_sigma > 0 ? noise(rng) : 0.0));
            return v;
        }
        std::normal_distribution<double> g(0.0, spec_.background_scale);
        const double excl = background_exclusion();
        for (int attempt = 0; attempt < 10000; ++attempt) {
            for (int d = 0; d < spec_.depth; ++d) v[d] = static_cast<float>(g(rng));
            bool ok = true;
            for (const auto& p : prototypes_)
                if (distance_f(v, p) < excl) {
                    ok = false;
                    break;
                }
            if (ok) return v;
        }
        throw Error(Errc::infeasible, "cannot draw background vectors outside the prototype exclusion zone");
    }

    /// A pool of background vectors for feature corruption.
    std::vector<std::vector<float>> background_pool(std::size_t n, std::uint64_t seed,
                                                    bool allow_decoy = true) const {
        std::mt19937_64 rng(mix(spec_.seed, seed ^ 0xb9c0ULL));
        std::vector<std::vector<float>> out;
        for (std::size_t i = 0; i < n; ++i) out.push_back(background_vector(rng, allow_decoy));
        return out;
    }

private:
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static double distance_f(const std::vector<float>& a, const std::vector<float>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = double(a[i]) - double(b[i]);
            s += d * d;
        }
        return std::sqrt(s);
    }

    std::vector<double> unit_vector(std::mt19937_64& rng) const {
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<double> u(spec_.depth);
        double n = 0.0;
        for (auto& x : u) {
            x = g(rng);
            n += x * x;
        }
        n = std::sqrt(n);
        for (auto& x : u) x /= n;
        return u;
    }

    void make_prototypes() {
        std::mt19937_64 rng(mix(spec_.seed, 0x9807ULL));
        std::uniform_real_distribution<double> u(-spec_.prototype_spread, spec_.prototype_spread);
        for (int p = 0; p < spec_.prototype_count; ++p) {
            for (int attempt = 0;; ++attempt) {
                if (attempt > 100000)
                    throw Error(Errc::infeasible, "cannot place prototypes with the requested separation");
                std::vector<float> v(spec_.depth);
                for (auto& x : v) x = static_cast<float>(u(rng));
                const bool ok = std::all_of(prototypes_.begin(), prototypes_.end(), [&](const auto& q) {
                    return distance_f(v, q) >= spec_.prototype_separation;
                });
                if (ok) {
                    prototypes_.push_back(std::move(v));
                    break;
                }
            }
        }
    }

    std::vector<bool> draw_firing(std::mt19937_64& rng) const {
        std::vector<bool> out;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (const auto& t : spec_.parts)
            for (const auto& e : t.elements) out.push_back(u(rng) < e.firing_probability);
        return out;
    }

    // Part cells such that every element cell is on the grid, no two elements share a
    // cell, and each part box lies inside the image.
    std::vector<GridPos> place_parts(const LatticeSpec& lat, std::mt19937_64& rng) const {
        for (int restart = 0; restart < 200; ++restart) {
            std::vector<GridPos> centers;
            std::vector<GridPos> used;
            bool ok = true;
            for (const auto& t : spec_.parts) {
                bool placed = false;
                for (int attempt = 0; attempt < 500 && !placed; ++attempt) {
                    const GridPos c{std::uniform_int_distribution<int>(0, lat.grid_h - 1)(rng),
                                    std::uniform_int_distribution<int>(0, lat.grid_w - 1)(rng)};
                    const ImagePos q = l0_of(c, lat);
                    if (q.x - t.box_w / 2 < 0 || q.x + t.box_w / 2 > lat.image_w ||
                        q.y - t.box_h / 2 < 0 || q.y + t.box_h / 2 > lat.image_h)
                        continue;
                    std::vector<GridPos> cells;
                    bool fits = true;
                    for (const auto& e : t.elements) {
                        const GridPos p = c - e.offset;
                        if (!lat.contains(p) || std::find(used.begin(), used.end(), p) != used.end() ||
                            std::find(cells.begin(), cells.end(), p) != cells.end()) {
                            fits = false;
                            break;
                        }
                        cells.push_back(p);
                    }
                    if (!fits) continue;
                    used.insert(used.end(), cells.begin(), cells.end());
                    centers.push_back(c);
                    placed = true;
                }
                if (!placed) {
                    ok = false;
                    break;
                }
            }
            if (ok) return centers;
        }
        throw Error(Errc::infeasible, "cannot place all part constellations on the grid");
    }

    void fill_background(FeatureMap& fm, std::mt19937_64& rng) const {
        for (int r = 0; r < fm.rows(); ++r)
            for (int c = 0; c < fm.cols(); ++c) {
                const auto v = background_vector(rng);
                std::copy(v.begin(), v.end(), fm.at({r, c}).begin());
            }
    }

    void plant(FeatureMap& fm, GridPos cell, int prototype, double drift,
               const std::vector<double>* drift_dir, std::mt19937_64& rng) const {
        std::normal_distribution<double> noise(0.0, spec_.noise_sigma);
        auto dst = fm.at(cell);
        for (int d = 0; d < spec_.depth; ++d) {
            double x = prototypes_[prototype][d];
            if (spec_.noise_sigma > 0.0) x += noise(rng);
            if (drift_dir && drift > 0.0) x += drift * (*drift_dir)[d];
            dst[d] = static_cast<float>(x);
        }
    }

    SynthSpec spec_;
    std::vector<std::vector<float>> prototypes_;
};

/// Writes scenes as .vcf/.vca files plus a manifest in `dir`; returns the manifest.
inline DatasetManifest write_synth_dataset(const std::vector<SynthScene>& scenes,
                                           const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    DatasetManifest m;
    m.base_dir = dir;
    for (const auto& s : scenes) {
        ManifestEntry e;
        e.id = s.scene.id;
        e.object_class = s.scene.object_class;
        e.image_h = s.scene.features.spec().image_h;
        e.image_w = s.scene.features.spec().image_w;
        e.features = s.scene.id + ".vcf";
        e.annotations = s.scene.id + ".vca";
        write_feature_map(s.scene.features, dir / e.features);
        write_scene_annotations(s.scene.annotations, dir / e.annotations);
        m.entries.push_back(std::move(e));
    }
    write_manifest(m, dir / "manifest.txt");
    return m;
}

inline DatasetManifest write_multiscale_dataset(const std::vector<MultiScaleScene>& scenes,
                                                const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    DatasetManifest m;
    m.base_dir = dir;
    for (const auto& s : scenes) {
        ManifestEntry e;
        e.id = s.id;
        e.object_class = s.object_class;
        e.image_h = s.original_h;
        e.image_w = s.original_w;
        e.annotations = s.id + ".vca";
        write_scene_annotations(s.annotations, dir / e.annotations);
        for (const auto& [t, fm] : s.features) {
            const std::string name = s.id + "@" + std::to_string(t) + ".vcf";
            write_feature_map(fm, dir / name);
            e.scaled_features[t] = name;
        }
        m.entries.push_back(std::move(e));
    }
    write_manifest(m, dir / "manifest.txt");
    return m;
}

} // namespace vcvote
