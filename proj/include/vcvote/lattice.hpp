#pragma once

// Coordinate arithmetic between the image lattice (L0, pixels) and the
// stride-16 feature lattice (L4, grid cells).

#include <cmath>
#include <compare>
#include <string>
#include <vector>

#include "error.hpp"

namespace vcvote {

/// A cell on the feature lattice.
struct GridPos {
    int row = 0;
    int col = 0;

    auto operator<=>(const GridPos&) const = default;
};

/// Displacement between two feature-lattice cells.
struct Offset {
    int drow = 0;
    int dcol = 0;

    auto operator<=>(const Offset&) const = default;
};

inline GridPos operator+(GridPos p, Offset d) { return {p.row + d.drow, p.col + d.dcol}; }
inline GridPos operator-(GridPos p, Offset d) { return {p.row - d.drow, p.col - d.dcol}; }
inline Offset operator-(GridPos a, GridPos b) { return {a.row - b.row, a.col - b.col}; }

/// A position on the image lattice, in pixels.
struct ImagePos {
    double y = 0.0;
    double x = 0.0;

    bool operator==(const ImagePos&) const = default;
};

inline double pixel_distance(ImagePos a, ImagePos b) { return std::hypot(a.y - b.y, a.x - b.x); }

struct LatticeSpec {
    int stride = 16;
    double receptive_offset = 8.0;
    int image_h = 0;
    int image_w = 0;
    int grid_h = 0;
    int grid_w = 0;

    bool operator==(const LatticeSpec&) const = default;

    /// Largest grid whose cell centers all lie inside an image_h × image_w image,
    /// using the cell-center convention receptive_offset = stride / 2.
    static LatticeSpec for_image(int image_h, int image_w, int stride = 16) {
        LatticeSpec s;
        s.stride = stride;
        s.receptive_offset = stride / 2.0;
        s.image_h = image_h;
        s.image_w = image_w;
        s.grid_h = cells_along(image_h, stride, s.receptive_offset);
        s.grid_w = cells_along(image_w, stride, s.receptive_offset);
        s.validate();
        return s;
    }

    bool contains(GridPos p) const {
        return p.row >= 0 && p.row < grid_h && p.col >= 0 && p.col < grid_w;
    }

    bool inside_image(ImagePos q) const {
        return q.y >= 0.0 && q.x >= 0.0 && q.y < image_h && q.x < image_w;
    }

    int cell_count() const { return grid_h * grid_w; }
    int short_edge() const { return image_h < image_w ? image_h : image_w; }

    void validate() const {
        if (stride <= 0) throw Error(Errc::validation, "lattice stride must be positive");
        if (grid_h <= 0 || grid_w <= 0)
            throw Error(Errc::validation, "lattice grid must be non-empty");
        if (receptive_offset < 0.0)
            throw Error(Errc::validation, "receptive offset must be non-negative");
        const double last_y = receptive_offset + stride * (grid_h - 1.0);
        const double last_x = receptive_offset + stride * (grid_w - 1.0);
        if (last_y >= image_h || last_x >= image_w)
            throw Error(Errc::validation,
                        "grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                            " does not fit image " + std::to_string(image_h) + "x" +
                            std::to_string(image_w));
    }

private:
    static int cells_along(int extent, int stride, double offset) {
        if (extent - 1 < offset) return 0;
        return static_cast<int>(std::floor((extent - 1 - offset) / stride)) + 1;
    }
};

/// Pixel position of a cell center.
inline ImagePos l0_of(GridPos p, const LatticeSpec& spec) {
    if (!spec.contains(p))
        throw Error(Errc::out_of_range, "cell (" + std::to_string(p.row) + "," +
                                            std::to_string(p.col) + ") outside grid");
    return {spec.receptive_offset + spec.stride * static_cast<double>(p.row),
            spec.receptive_offset + spec.stride * static_cast<double>(p.col)};
}

namespace detail {

// Nearest knot index along one axis; equidistant ties go to the smaller index.
inline int nearest_axis_cell(double v, double offset, int stride, int n) {
    const double t = (v - offset) / stride;
    int lo = static_cast<int>(std::floor(t));
    if (lo < 0) return 0;
    if (lo >= n - 1) return n - 1;
    const double d_lo = v - (offset + stride * static_cast<double>(lo));
    const double d_hi = (offset + stride * static_cast<double>(lo + 1)) - v;
    return d_hi < d_lo ? lo + 1 : lo;
}

} // namespace detail

/// Cell whose center is closest to q; ties toward smaller row, then smaller column.
/// Squared pixel distance is separable, so the per-axis argmin is the joint argmin.
inline GridPos l4_of(ImagePos q, const LatticeSpec& spec) {
    if (!spec.inside_image(q))
        throw Error(Errc::out_of_range, "position outside image");
    return {detail::nearest_axis_cell(q.y, spec.receptive_offset, spec.stride, spec.grid_h),
            detail::nearest_axis_cell(q.x, spec.receptive_offset, spec.stride, spec.grid_w)};
}

/// Largest |Δ| (in cells, per axis) a neighborhood of this radius can reach
/// relative to l4_of(q). 7 for radius 120 / stride 16; 3 for radius 56.
inline int offset_half_extent(double radius_px, int stride) {
    if (radius_px <= 0.0) return 0;
    const int h = static_cast<int>(std::ceil((radius_px + stride / 2.0) / stride)) - 1;
    return h < 0 ? 0 : h;
}

struct Neighborhood {
    ImagePos center;
    double radius_px = 120.0;
    std::vector<GridPos> members; // row-major order
};

/// All cells whose center lies strictly closer than radius_px to q.
inline Neighborhood neighborhood(ImagePos q, const LatticeSpec& spec, double radius_px = 120.0) {
    if (!spec.inside_image(q)) throw Error(Errc::out_of_range, "position outside image");
    Neighborhood n{q, radius_px, {}};
    if (radius_px <= 0.0) return n;
    const GridPos c = l4_of(q, spec);
    const int h = offset_half_extent(radius_px, spec.stride) + 1;
    for (int r = c.row - h; r <= c.row + h; ++r) {
        for (int cc = c.col - h; cc <= c.col + h; ++cc) {
            const GridPos p{r, cc};
            if (!spec.contains(p)) continue;
            if (pixel_distance(q, l0_of(p, spec)) < radius_px) n.members.push_back(p);
        }
    }
    return n;
}

} // namespace vcvote
