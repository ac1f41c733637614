#pragma once

// Visual-concept dictionary: K-means centers over pooled feature vectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "annotation.hpp"
#include "error.hpp"
#include "feature_map.hpp"
#include "grid.hpp"

namespace vcvote {

struct ConceptDictionary {
    int depth = 0;
    std::vector<double> centers; // size() × depth, row-major
    std::uint64_t seed = 0;
    int iterations = 0;
    double inertia = 0.0;
    std::vector<double> inertia_history; // one entry per assignment step; not persisted

    int size() const { return depth == 0 ? 0 : static_cast<int>(centers.size() / depth); }

    std::span<const double> center(int v) const {
        if (v < 0 || v >= size()) throw Error(Errc::out_of_range, "concept index out of range");
        return {centers.data() + static_cast<std::size_t>(v) * depth,
                static_cast<std::size_t>(depth)};
    }
};

struct KMeansOptions {
    int max_iterations = 300;
    double tolerance = 1e-4; // relative inertia improvement
    std::uint64_t seed = 0;
    std::size_t max_samples = 1'000'000;
    int jobs = 1;
};

inline double squared_distance(std::span<const float> f, std::span<const double> c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double d = static_cast<double>(f[i]) - c[i];
        acc += d * d;
    }
    return acc;
}

inline double distance(std::span<const float> f, std::span<const double> c) {
    if (f.size() != c.size()) throw Error(Errc::dim_mismatch, "feature/center depth differ");
    return std::sqrt(squared_distance(f, c));
}

inline double distance(std::span<const float> f, int v, const ConceptDictionary& dict) {
    return distance(f, dict.center(v));
}

namespace detail {

template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    if (jobs <= 1 || n < 2) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t parts = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    std::vector<std::exception_ptr> errors(parts);
    {
        std::vector<std::jthread> workers;
        for (std::size_t t = 0; t < parts; ++t) {
            const std::size_t lo = n * t / parts, hi = n * (t + 1) / parts;
            workers.emplace_back([&fn, &errors, t, lo, hi] {
                try {
                    fn(lo, hi);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct Assignment {
    std::vector<int> label;
    std::vector<double> sq_dist;
    double inertia = 0.0;
};

inline void assign(std::span<const float> samples, int depth, const std::vector<double>& centers,
                   int jobs, Assignment& out) {
    const std::size_t n = samples.size() / depth;
    const int k = static_cast<int>(centers.size() / depth);
    out.label.resize(n);
    out.sq_dist.resize(n);
    parallel_for(n, jobs, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const std::span<const float> f = samples.subspan(i * depth, depth);
            double best = std::numeric_limits<double>::infinity();
            int arg = 0;
            for (int c = 0; c < k; ++c) {
                const double d = squared_distance(
                    f, std::span<const double>(centers.data() + static_cast<std::size_t>(c) * depth,
                                               depth));
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            out.label[i] = arg;
            out.sq_dist[i] = best;
        }
    });
    out.inertia = std::accumulate(out.sq_dist.begin(), out.sq_dist.end(), 0.0);
}

// Greedy k-means++: each step draws 2 + floor(ln k) D²-weighted candidates and keeps the
// one that lowers the potential most.
inline std::vector<double> kmeans_pp_init(std::span<const float> samples, int depth, int k,
                                          std::mt19937_64& rng) {
    const std::size_t n = samples.size() / depth;
    const int trials = 2 + static_cast<int>(std::floor(std::log(static_cast<double>(k))));
    std::vector<double> centers;
    centers.reserve(static_cast<std::size_t>(k) * depth);
    auto push = [&](std::size_t i) {
        for (int d = 0; d < depth; ++d) centers.push_back(samples[i * depth + d]);
    };
    auto row = [&](std::size_t i) {
        std::vector<double> c(depth);
        for (int d = 0; d < depth; ++d) c[d] = samples[i * depth + d];
        return c;
    };
    const std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    push(first);
    std::vector<double> nearest(n);
    {
        const auto c0 = row(first);
        for (std::size_t i = 0; i < n; ++i) nearest[i] = squared_distance(samples.subspan(i * depth, depth), c0);
    }
    std::vector<double> cand_dist(n), best_dist(n);
    for (int c = 1; c < k; ++c) {
        const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
        double best_pot = std::numeric_limits<double>::infinity();
        std::size_t best = 0;
        for (int t = 0; t < trials; ++t) {
            std::size_t pick = 0;
            if (total > 0.0) {
                double u = std::uniform_real_distribution<double>(0.0, total)(rng);
                for (pick = 0; pick + 1 < n; ++pick) {
                    u -= nearest[pick];
                    if (u < 0.0) break;
                }
            } else {
                pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
            }
            const auto cand = row(pick);
            double pot = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cand_dist[i] = std::min(nearest[i], squared_distance(samples.subspan(i * depth, depth), cand));
                pot += cand_dist[i];
            }
            if (pot < best_pot) {
                best_pot = pot;
                best = pick;
                best_dist.swap(cand_dist);
            }
        }
        push(best);
        nearest.swap(best_dist);
    }
    return centers;
}

} // namespace detail

/// K-means (k-means++ seeding, Lloyd iterations) over n × depth samples.
/// Empty clusters are re-seeded from the samples farthest from their center.
inline ConceptDictionary fit_dictionary(std::span<const float> samples, int depth, int k,
                                        const KMeansOptions& opt = {}) {
    if (depth <= 0 || samples.size() % depth != 0)
        throw Error(Errc::dim_mismatch, "sample buffer is not a whole number of vectors");
    const std::size_t n_all = samples.size() / depth;
    if (k < 1) throw Error(Errc::invalid_argument, "k must be at least 1");
    if (static_cast<std::size_t>(k) > n_all)
        throw Error(Errc::invalid_argument, "k = " + std::to_string(k) + " exceeds sample count " +
                                                std::to_string(n_all));

    std::mt19937_64 rng(opt.seed);

    std::vector<float> subsampled;
    if (n_all > opt.max_samples && opt.max_samples >= static_cast<std::size_t>(k)) {
        std::vector<std::size_t> idx(n_all);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < opt.max_samples; ++i)
            std::swap(idx[i], idx[std::uniform_int_distribution<std::size_t>(i, n_all - 1)(rng)]);
        idx.resize(opt.max_samples);
        std::sort(idx.begin(), idx.end());
        subsampled.reserve(opt.max_samples * depth);
        for (std::size_t i : idx)
            subsampled.insert(subsampled.end(), samples.begin() + i * depth,
                              samples.begin() + (i + 1) * depth);
        samples = subsampled;
    }
    const std::size_t n = samples.size() / depth;

    ConceptDictionary dict;
    dict.depth = depth;
    dict.seed = opt.seed;
    dict.centers = detail::kmeans_pp_init(samples, depth, k, rng);

    detail::Assignment a;
    detail::assign(samples, depth, dict.centers, opt.jobs, a);
    dict.inertia_history.push_back(a.inertia);

    for (int it = 0; it < opt.max_iterations; ++it) {
        std::vector<double> sums(static_cast<std::size_t>(k) * depth, 0.0);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const int c = a.label[i];
            ++counts[c];
            for (int d = 0; d < depth; ++d)
                sums[static_cast<std::size_t>(c) * depth + d] += samples[i * depth + d];
        }
        std::vector<std::size_t> order; // samples by decreasing distance, for re-seeding
        std::size_t next_far = 0;
        for (int c = 0; c < k; ++c) {
            double* center = dict.centers.data() + static_cast<std::size_t>(c) * depth;
            if (counts[c] > 0) {
                for (int d = 0; d < depth; ++d)
                    center[d] = sums[static_cast<std::size_t>(c) * depth + d] /
                                static_cast<double>(counts[c]);
                continue;
            }
            if (order.empty()) {
                order.resize(n);
                std::iota(order.begin(), order.end(), 0);
                std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
                    return a.sq_dist[x] > a.sq_dist[y];
                });
            }
            const std::size_t i = order[std::min(next_far++, n - 1)];
            for (int d = 0; d < depth; ++d) center[d] = samples[i * depth + d];
        }

        const double previous = a.inertia;
        detail::assign(samples, depth, dict.centers, opt.jobs, a);
        dict.inertia_history.push_back(a.inertia);
        dict.iterations = it + 1;
        if (previous <= 0.0 || (previous - a.inertia) <= opt.tolerance * previous) break;
    }
    dict.inertia = a.inertia;

    for (int c = 0; c < k; ++c)
        for (int e = c + 1; e < k; ++e)
            if (std::equal(dict.center(c).begin(), dict.center(c).end(), dict.center(e).begin()))
                throw Error(Errc::infeasible, "fewer distinct vectors than k = " + std::to_string(k));
    return dict;
}

/// Pools feature vectors for clustering. With object_interior_only, only cells whose center
/// falls inside an annotated object box are taken (all cells when a scene has no objects).
inline void append_cluster_samples(const FeatureMap& map, const SceneAnnotations& ann,
                                   bool object_interior_only, std::vector<float>& out) {
    for (int r = 0; r < map.rows(); ++r) {
        for (int c = 0; c < map.cols(); ++c) {
            const GridPos p{r, c};
            if (object_interior_only && !ann.objects.empty()) {
                const ImagePos q = l0_of(p, map.spec());
                const bool inside = std::any_of(ann.objects.begin(), ann.objects.end(),
                                                [&](const auto& o) { return o.box.contains(q); });
                if (!inside) continue;
            }
            const auto f = map.at(p);
            out.insert(out.end(), f.begin(), f.end());
        }
    }
}

/// Distances from every cell of one feature map to one concept center.
struct DistanceField {
    LatticeSpec spec;
    Grid<double> dist;

    double at(GridPos p) const { return dist(p.row, p.col); }
};

inline DistanceField distance_field(const FeatureMap& map, std::span<const double> center) {
    DistanceField df{map.spec(), Grid<double>(map.rows(), map.cols())};
    for (int r = 0; r < map.rows(); ++r)
        for (int c = 0; c < map.cols(); ++c) df.dist(r, c) = distance(map.at({r, c}), center);
    return df;
}

inline DistanceField distance_field(const FeatureMap& map, int v, const ConceptDictionary& dict) {
    return distance_field(map, dict.center(v));
}

struct BestMatch {
    GridPos pos;
    double distance = 0.0;
};

/// Minimum-distance cell among candidates; ties toward the lexicographically smallest cell.
inline std::optional<BestMatch> best_match_in(std::span<const GridPos> candidates,
                                              const DistanceField& field) {
    std::optional<BestMatch> best;
    for (const GridPos& p : candidates) {
        const double d = field.at(p);
        if (!best || d < best->distance || (d == best->distance && p < best->pos))
            best = BestMatch{p, d};
    }
    return best;
}

inline std::optional<BestMatch> best_match_in(std::span<const GridPos> candidates,
                                              const FeatureMap& map, int v,
                                              const ConceptDictionary& dict) {
    std::optional<BestMatch> best;
    for (const GridPos& p : candidates) {
        const double d = distance(map.at(p), v, dict);
        if (!best || d < best->distance || (d == best->distance && p < best->pos))
            best = BestMatch{p, d};
    }
    return best;
}

} // namespace vcvote
