#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fxda/data/image_set.hpp"

namespace fxda {

/// Plain-text USPS: one sample per line, label followed by 256 grayscale
/// values in [0,1]. Out-of-range values are clamped and reported through the
/// warning sink.
inline ImageSet load_usps(const std::string& path,
                          std::vector<std::string>* warnings = nullptr) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);

    std::vector<double> pixels;
    std::vector<int> labels;
    std::string line;
    int line_no = 0;
    int max_label = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ls(line);
        double label_raw = 0.0;
        if (!(ls >> label_raw) || label_raw != std::floor(label_raw) || label_raw < 0) {
            throw FormatError(path + ": bad label on line " + std::to_string(line_no));
        }
        int clamped = 0;
        double v = 0.0;
        for (int got = 0; got < 256; ++got) {
            if (!(ls >> v)) {
                throw FormatError(path + ": expected 256 values on line " +
                                  std::to_string(line_no));
            }
            if (v < 0.0 || v > 1.0) {
                v = std::clamp(v, 0.0, 1.0);
                ++clamped;
            }
            pixels.push_back(v);
        }
        std::string trailing;
        if (ls >> trailing) {
            throw FormatError(path + ": expected 256 values on line " + std::to_string(line_no));
        }
        if (clamped > 0 && warnings) {
            warnings->push_back(path + ": line " + std::to_string(line_no) + ": " +
                                std::to_string(clamped) + " values clamped to [0,1]");
        }
        labels.push_back(static_cast<int>(label_raw));
        max_label = std::max(max_label, static_cast<int>(label_raw));
    }
    if (labels.empty()) throw FormatError(path + ": no samples");

    ImageSet set;
    const int64_t n = static_cast<int64_t>(labels.size());
    set.images = Tensor({n, 16, 16, 1}, std::move(pixels));
    set.labels = std::move(labels);
    set.class_count = max_label + 1;
    set.validate("load_usps");
    return set;
}

}  // namespace fxda
