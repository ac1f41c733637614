#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "lattice.hpp"

namespace vcvote {

/// Dense grid_h × grid_w × depth float32 tensor on the feature lattice, row-major.
class FeatureMap {
public:
    FeatureMap() = default;

    FeatureMap(const LatticeSpec& spec, int depth)
        : spec_(spec), depth_(depth),
          data_(static_cast<std::size_t>(spec.cell_count()) * depth, 0.0f) {
        spec_.validate();
        if (depth <= 0) throw Error(Errc::validation, "feature depth must be positive");
    }

    FeatureMap(const LatticeSpec& spec, int depth, std::vector<float> data)
        : spec_(spec), depth_(depth), data_(std::move(data)) {
        spec_.validate();
        if (depth <= 0) throw Error(Errc::validation, "feature depth must be positive");
        const std::size_t expected = static_cast<std::size_t>(spec.cell_count()) * depth;
        if (data_.size() != expected)
            throw Error(Errc::dim_mismatch, "payload has " + std::to_string(data_.size()) +
                                                " values, header implies " +
                                                std::to_string(expected));
    }

    const LatticeSpec& spec() const noexcept { return spec_; }
    int depth() const noexcept { return depth_; }
    int rows() const noexcept { return spec_.grid_h; }
    int cols() const noexcept { return spec_.grid_w; }

    std::span<const float> at(GridPos p) const {
        return {data_.data() + index(p), static_cast<std::size_t>(depth_)};
    }
    std::span<float> at(GridPos p) {
        return {data_.data() + index(p), static_cast<std::size_t>(depth_)};
    }

    const std::vector<float>& data() const noexcept { return data_; }

    bool all_finite() const {
        for (float v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const FeatureMap&) const = default;

private:
    std::size_t index(GridPos p) const {
        if (!spec_.contains(p)) throw Error(Errc::out_of_range, "feature cell outside grid");
        return (static_cast<std::size_t>(p.row) * spec_.grid_w + p.col) * depth_;
    }

    LatticeSpec spec_;
    int depth_ = 0;
    std::vector<float> data_;
};

} // namespace vcvote
