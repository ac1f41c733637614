#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "annotation.hpp"
#include "error.hpp"

namespace vcvote {

struct Detection {
    std::string image_id;
    int part_id = 0;
    Box box;
    double score = 0.0;

    bool operator==(const Detection&) const = default;
};

// Detection files:
//   # vcvote detections v1
//   <image_id> <part_id> <x1> <y1> <x2> <y2> <score>

inline void format_detections(std::ostream& out, const std::vector<Detection>& dets) {
    out << "# vcvote detections v1\n";
    char buf[256];
    for (const auto& d : dets) {
        std::snprintf(buf, sizeof buf, " %d %.17g %.17g %.17g %.17g %.17g\n", d.part_id, d.box.x1,
                      d.box.y1, d.box.x2, d.box.y2, d.score);
        out << d.image_id << buf;
    }
}

inline void write_detections(const std::vector<Detection>& dets, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    format_detections(out, dets);
}

inline std::vector<Detection> read_detections(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    std::vector<Detection> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        Detection d;
        if (!(ls >> d.image_id >> d.part_id >> d.box.x1 >> d.box.y1 >> d.box.x2 >> d.box.y2 >> d.score))
            throw Error(Errc::parse, "detections line " + std::to_string(lineno));
        if (!d.box.valid())
            throw Error(Errc::validation, "detections line " + std::to_string(lineno) + ": empty box");
        out.push_back(std::move(d));
    }
    return out;
}

} // namespace vcvote
