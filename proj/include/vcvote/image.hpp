#pragma once

// Netpbm raster output (PGM masks, PPM plots) and the small drawing helpers behind `plot`.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "grid.hpp"
#include "occlusion.hpp"
#include "spatial.hpp"

namespace vcvote {

using Rgb = std::array<std::uint8_t, 3>;

class Canvas {
public:
    Canvas(int h, int w, Rgb fill = {255, 255, 255}) : h_(h), w_(w), px_(static_cast<std::size_t>(h) * w, fill) {
        if (h <= 0 || w <= 0) throw Error(Errc::invalid_argument, "canvas must be non-empty");
    }

    int height() const noexcept { return h_; }
    int width() const noexcept { return w_; }

    void set(int y, int x, Rgb c) {
        if (y >= 0 && y < h_ && x >= 0 && x < w_) px_[static_cast<std::size_t>(y) * w_ + x] = c;
    }
    Rgb get(int y, int x) const { return px_.at(static_cast<std::size_t>(y) * w_ + x); }

    void fill_rect(int y0, int x0, int y1, int x1, Rgb c) {
        for (int y = std::max(0, y0); y < std::min(h_, y1); ++y)
            for (int x = std::max(0, x0); x < std::min(w_, x1); ++x) set(y, x, c);
    }

    void line(int y0, int x0, int y1, int x1, Rgb c) {
        const int n = std::max(std::abs(y1 - y0), std::abs(x1 - x0));
        for (int i = 0; i <= n; ++i) {
            const double t = n ? double(i) / n : 0.0;
            set(static_cast<int>(std::lround(y0 + t * (y1 - y0))), static_cast<int>(std::lround(x0 + t * (x1 - x0))), c);
        }
    }

    std::string encode() const {
        std::string out = "P6\n" + std::to_string(w_) + " " + std::to_string(h_) + "\n255\n";
        for (const Rgb& p : px_) out.append(reinterpret_cast<const char*>(p.data()), 3);
        return out;
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw Error(Errc::io, "cannot write " + path.string());
        const std::string s = encode();
        f.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

private:
    int h_, w_;
    std::vector<Rgb> px_;
};

/// Black → red → yellow → white ramp for t ∈ [0,1].
inline Rgb heat_color(double t) {
    t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
    const double r = std::min(1.0, 3.0 * t), g = std::clamp(3.0 * t - 1.0, 0.0, 1.0), b = std::clamp(3.0 * t - 2.0, 0.0, 1.0);
    return {static_cast<std::uint8_t>(std::lround(255 * r)), static_cast<std::uint8_t>(std::lround(255 * g)),
            static_cast<std::uint8_t>(std::lround(255 * b))};
}

/// Each grid cell drawn as a cell_px square, normalized to the finite range of the grid.
inline Canvas heatmap(const Grid<double>& g, int cell_px = 1) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : g.data())
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(hi > lo)) {
        lo = std::isfinite(lo) ? lo : 0.0;
        hi = lo + 1.0;
    }
    Canvas c(g.rows() * cell_px, g.cols() * cell_px);
    for (int r = 0; r < g.rows(); ++r)
        for (int col = 0; col < g.cols(); ++col)
            c.fill_rect(r * cell_px, col * cell_px, (r + 1) * cell_px, (col + 1) * cell_px,
                        heat_color((g(r, col) - lo) / (hi - lo)));
    return c;
}

/// Offset-map frequencies, selected cells outlined in green.
inline Canvas plot_offset_map(const OffsetMap& om, int cell_px = 24) {
    const int side = om.side(), h = om.half_extent();
    Grid<double> g(side, side, 0.0);
    for (int r = -h; r <= h; ++r)
        for (int c = -h; c <= h; ++c) g(r + h, c + h) = om.frequency({r, c});
    Canvas cv = heatmap(g, cell_px);
    const Rgb green{0, 200, 0};
    for (int r = -h; r <= h; ++r)
        for (int c = -h; c <= h; ++c) {
            if (!om.is_selected({r, c})) continue;
            const int y0 = (r + h) * cell_px, x0 = (c + h) * cell_px, y1 = y0 + cell_px - 1, x1 = x0 + cell_px - 1;
            cv.line(y0, x0, y0, x1, green);
            cv.line(y1, x0, y1, x1, green);
            cv.line(y0, x0, y1, x0, green);
            cv.line(y0, x1, y1, x1, green);
        }
    return cv;
}

/// Overlaid bar histograms: positives blue, negatives red, overlap purple.
inline Canvas plot_distributions(std::span<const double> pos, std::span<const double> neg, int height = 200,
                                 int bar_px = 4) {
    if (pos.size() != neg.size()) throw Error(Errc::dim_mismatch, "histograms differ in length");
    const double top = std::max(*std::max_element(pos.begin(), pos.end()), *std::max_element(neg.begin(), neg.end()));
    Canvas cv(height, static_cast<int>(pos.size()) * bar_px);
    for (std::size_t i = 0; i < pos.size(); ++i) {
        const int hp = top > 0 ? static_cast<int>(std::lround(pos[i] / top * (height - 1))) : 0;
        const int hn = top > 0 ? static_cast<int>(std::lround(neg[i] / top * (height - 1))) : 0;
        const int x0 = static_cast<int>(i) * bar_px;
        for (int y = 0; y < height; ++y) {
            const bool p = height - 1 - y < hp, n = height - 1 - y < hn;
            if (!p && !n) continue;
            const Rgb c = p && n ? Rgb{140, 60, 170} : p ? Rgb{40, 90, 220} : Rgb{220, 50, 50};
            cv.fill_rect(y, x0, y + 1, x0 + bar_px - 1, c);
        }
    }
    return cv;
}

/// Polyline of a curve over its index, with the zero line in gray.
inline Canvas plot_curve(std::span<const double> ys, int height = 200, int step_px = 4) {
    if (ys.empty()) throw Error(Errc::invalid_argument, "empty curve");
    double lo = 0.0, hi = 0.0;
    for (double v : ys) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) hi = lo + 1.0;
    Canvas cv(height, static_cast<int>(ys.size()) * step_px);
    auto ypix = [&](double v) { return static_cast<int>(std::lround((hi - v) / (hi - lo) * (height - 1))); };
    cv.line(ypix(0.0), 0, ypix(0.0), cv.width() - 1, {160, 160, 160});
    for (std::size_t i = 1; i < ys.size(); ++i)
        cv.line(ypix(ys[i - 1]), static_cast<int>(i - 1) * step_px, ypix(ys[i]), static_cast<int>(i) * step_px,
                {20, 20, 20});
    return cv;
}

inline std::string encode_pgm(const BinaryMask& m) {
    std::string out = "P5\n" + std::to_string(m.cols()) + " " + std::to_string(m.rows()) + "\n255\n";
    for (std::uint8_t v : m.data()) out.push_back(static_cast<char>(v ? 255 : 0));
    return out;
}

inline void write_mask(const BinaryMask& m, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::io, "cannot write " + path.string());
    const std::string s = encode_pgm(m);
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

/// Binary PGM; any nonzero sample is set.
inline BinaryMask read_mask(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::io, "cannot open " + path.string());
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    auto token = [&](auto& v) {
        f >> std::ws;
        while (f.peek() == '#') {
            std::string skip;
            std::getline(f, skip);
            f >> std::ws;
        }
        if (!(f >> v)) throw Error(Errc::parse, path.string() + ": bad PGM header");
    };
    token(magic);
    if (magic != "P5") throw Error(Errc::bad_magic, path.string() + ": not a binary PGM");
    token(w);
    token(h);
    token(maxval);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw Error(Errc::validation, path.string() + ": unsupported PGM geometry");
    f.get();
    BinaryMask m(h, w, 0);
    std::vector<char> buf(m.size());
    if (!f.read(buf.data(), static_cast<std::streamsize>(buf.size())))
        throw Error(Errc::unexpected_eof, path.string() + ": truncated PGM payload");
    for (std::size_t i = 0; i < buf.size(); ++i) m.data()[i] = buf[i] != 0 ? 1 : 0;
    return m;
}

} // namespace vcvote
