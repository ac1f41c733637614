#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "lattice.hpp"

namespace vcvote {

/// Axis-aligned box in pixels, (x1, y1) top-left and (x2, y2) bottom-right.
struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
    ImagePos center() const { return {(y1 + y2) / 2.0, (x1 + x2) / 2.0}; }
    bool valid() const { return x2 > x1 && y2 > y1; }
    bool contains(ImagePos q) const { return q.x >= x1 && q.x <= x2 && q.y >= y1 && q.y <= y2; }
    Box scaled(double f) const { return {x1 * f, y1 * f, x2 * f, y2 * f}; }

    static Box centered(ImagePos c, double w, double h) {
        return {c.x - w / 2.0, c.y - h / 2.0, c.x + w / 2.0, c.y + h / 2.0};
    }

    bool operator==(const Box&) const = default;
};

struct PartAnnotation {
    int part_id = 0;
    ImagePos center;
    Box box;
    int object_id = 0;
    double occluded_fraction = 0.0;

    bool operator==(const PartAnnotation&) const = default;
};

struct ObjectAnnotation {
    int object_id = 0;
    std::string object_class;
    Box box;

    bool operator==(const ObjectAnnotation&) const = default;
};

struct SceneAnnotations {
    std::vector<ObjectAnnotation> objects;
    std::vector<PartAnnotation> parts;

    bool operator==(const SceneAnnotations&) const = default;
};

} // namespace vcvote
