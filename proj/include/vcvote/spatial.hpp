#pragma once

// Spatial offset maps: how often the best-matching position of a concept sits at each
// displacement from an annotated part.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "concepts.hpp"
#include "error.hpp"
#include "lattice.hpp"

namespace vcvote {

/// (2h+1)² table of displacement frequencies Fr(Δp), Δp = L4(q) − p*.
class OffsetMap {
public:
    OffsetMap() = default;

    /// Builds frequencies, mean and the above-average mask from raw counts.
    static OffsetMap from_counts(int half_extent, std::vector<std::uint64_t> counts) {
        OffsetMap m;
        m.half_ = half_extent;
        const std::size_t cells = static_cast<std::size_t>(m.side()) * m.side();
        if (counts.size() != cells) throw Error(Errc::dim_mismatch, "offset count table size");
        m.counts_ = std::move(counts);
        m.samples_ = 0;
        for (auto c : m.counts_) m.samples_ += c;
        m.freq_.assign(cells, 0.0);
        m.selected_.assign(cells, 0);
        if (m.samples_ == 0) return m;
        for (std::size_t i = 0; i < cells; ++i)
            m.freq_[i] = static_cast<double>(m.counts_[i]) / static_cast<double>(m.samples_);
        m.mean_ = 1.0 / static_cast<double>(cells);
        bool any = false;
        for (std::size_t i = 0; i < cells; ++i) {
            // Count comparison is exact: Fr > mean  <=>  count·cells > samples.
            m.selected_[i] = m.counts_[i] * cells > m.samples_;
            any = any || m.selected_[i];
        }
        if (!any) std::fill(m.selected_.begin(), m.selected_.end(), std::uint8_t{1});
        double sel_sum = 0.0;
        std::size_t sel_n = 0;
        for (std::size_t i = 0; i < cells; ++i)
            if (m.selected_[i]) {
                sel_sum += m.freq_[i];
                ++sel_n;
            }
        m.selected_mean_ = sel_sum / static_cast<double>(sel_n);
        return m;
    }

    int half_extent() const noexcept { return half_; }
    int side() const noexcept { return 2 * half_ + 1; }
    std::uint64_t sample_count() const noexcept { return samples_; }

    bool in_range(Offset d) const {
        return d.drow >= -half_ && d.drow <= half_ && d.dcol >= -half_ && d.dcol <= half_;
    }
    double frequency(Offset d) const { return in_range(d) ? freq_[index(d)] : 0.0; }
    std::uint64_t count(Offset d) const { return in_range(d) ? counts_[index(d)] : 0; }
    bool is_selected(Offset d) const { return in_range(d) && selected_[index(d)] != 0; }

    /// Mean frequency over all cells, zeros included.
    double mean_frequency() const noexcept { return mean_; }
    /// Mean frequency over the above-average cells only.
    double selected_mean_frequency() const noexcept { return selected_mean_; }

    std::vector<Offset> offsets() const {
        std::vector<Offset> out;
        for (int r = -half_; r <= half_; ++r)
            for (int c = -half_; c <= half_; ++c) out.push_back({r, c});
        return out;
    }
    std::vector<Offset> selected_offsets() const {
        std::vector<Offset> out;
        for (const Offset& d : offsets())
            if (is_selected(d)) out.push_back(d);
        return out;
    }
    std::vector<Offset> nonzero_offsets() const {
        std::vector<Offset> out;
        for (const Offset& d : offsets())
            if (count(d) > 0) out.push_back(d);
        return out;
    }

    /// Shannon entropy (nats) of the frequency table; 0 for a single-offset map.
    double entropy() const {
        double h = 0.0;
        for (double f : freq_)
            if (f > 0.0) h -= f * std::log(f);
        return h;
    }

    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
    const std::vector<double>& frequencies() const noexcept { return freq_; }

    bool operator==(const OffsetMap&) const = default;

private:
    std::size_t index(Offset d) const {
        return static_cast<std::size_t>(d.drow + half_) * side() + (d.dcol + half_);
    }

    int half_ = 0;
    std::uint64_t samples_ = 0;
    std::vector<std::uint64_t> counts_;
    std::vector<double> freq_;
    std::vector<std::uint8_t> selected_;
    double mean_ = 0.0;
    double selected_mean_ = 0.0;
};

/// A position on one training scene.
struct SamplePoint {
    std::size_t scene = 0;
    ImagePos q;

    bool operator==(const SamplePoint&) const = default;
};

/// Tallies Δp* = L4(q) − p*, p* the best match to the concept inside N(q).
/// `fields` holds one distance field per scene for the concept under study.
inline OffsetMap estimate_offset_map(std::span<const SamplePoint> positives,
                                     std::span<const DistanceField> fields, double radius_px) {
    if (positives.empty())
        throw Error(Errc::invalid_argument, "offset map needs at least one annotated part");
    const int stride = fields.empty() ? 16 : fields.front().spec.stride;
    const int h = offset_half_extent(radius_px, stride);
    const int side = 2 * h + 1;
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(side) * side, 0);
    for (const SamplePoint& s : positives) {
        const DistanceField& f = fields[s.scene];
        const Neighborhood n = neighborhood(s.q, f.spec, radius_px);
        const auto best = best_match_in(n.members, f);
        if (!best) continue; // radius smaller than the distance to every cell center
        const Offset d = l4_of(s.q, f.spec) - best->pos;
        if (d.drow < -h || d.drow > h || d.dcol < -h || d.dcol > h)
            throw Error(Errc::integrity, "offset outside the neighborhood extent");
        ++counts[static_cast<std::size_t>(d.drow + h) * side + (d.dcol + h)];
    }
    return OffsetMap::from_counts(h, std::move(counts));
}

/// N_{v,s}(q): cells L4(q) − Δp for selected Δp, kept only if inside N(q) and the grid.
inline std::vector<GridPos> restricted_neighborhood(ImagePos q, const OffsetMap& offsets,
                                                    const LatticeSpec& spec, double radius_px) {
    const GridPos c = l4_of(q, spec);
    std::vector<GridPos> out;
    for (const Offset& d : offsets.selected_offsets()) {
        const GridPos p = c - d;
        if (!spec.contains(p)) continue;
        if (pixel_distance(q, l0_of(p, spec)) < radius_px) out.push_back(p);
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace vcvote
