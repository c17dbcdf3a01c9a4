#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fxda/data/image_set.hpp"

namespace fxda {

namespace detail {

inline std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
    return buf;
}

inline uint32_t read_u32_be(const std::vector<uint8_t>& buf, size_t offset,
                            const std::string& path) {
    if (offset + 4 > buf.size()) {
        throw FormatError(path + ": truncated at byte offset " + std::to_string(offset));
    }
    return (uint32_t(buf[offset]) << 24) | (uint32_t(buf[offset + 1]) << 16) |
           (uint32_t(buf[offset + 2]) << 8) | uint32_t(buf[offset + 3]);
}

}  // namespace detail

inline ImageSet load_idx(const std::string& images_path, const std::string& labels_path) {
    std::vector<uint8_t> img = detail::read_file(images_path);
    uint32_t magic = detail::read_u32_be(img, 0, images_path);
    if (magic != 0x00000803u) {
        throw FormatError(images_path + ": bad image magic at byte offset 0");
    }
    const int64_t n = detail::read_u32_be(img, 4, images_path);
    const int64_t h = detail::read_u32_be(img, 8, images_path);
    const int64_t w = detail::read_u32_be(img, 12, images_path);
    const size_t need = 16 + size_t(n) * h * w;
    if (img.size() < need) {
        throw FormatError(images_path + ": truncated at byte offset " + std::to_string(img.size()));
    }

    std::vector<uint8_t> lab = detail::read_file(labels_path);
    uint32_t lmagic = detail::read_u32_be(lab, 0, labels_path);
    if (lmagic != 0x00000801u) {
        throw FormatError(labels_path + ": bad label magic at byte offset 0");
    }
    const int64_t ln = detail::read_u32_be(lab, 4, labels_path);
    if (ln != n) {
        throw FormatError(labels_path + ": label count " + std::to_string(ln) +
                          " does not pair with " + std::to_string(n) + " images");
    }
    if (lab.size() < 8 + size_t(n)) {
        throw FormatError(labels_path + ": truncated at byte offset " + std::to_string(lab.size()));
    }

    ImageSet set;
    set.images = Tensor({n, h, w, 1});
    double* px = set.images.data();
    for (int64_t i = 0; i < n * h * w; ++i) px[i] = img[16 + i] / 255.0;
    set.labels.reserve(n);
    int max_label = 0;
    for (int64_t i = 0; i < n; ++i) {
        int v = lab[8 + i];
        max_label = std::max(max_label, v);
        set.labels.push_back(v);
    }
    set.class_count = max_label + 1;
    set.validate("load_idx");
    return set;
}

/// Single-path form: derives the label file from the stock naming scheme
/// (…-images-idx3-ubyte → …-labels-idx1-ubyte).
inline ImageSet load_idx(const std::string& images_path) {
    std::string labels_path = images_path;
    size_t a = labels_path.find("images");
    if (a == std::string::npos) {
        throw ContractError("load_idx: cannot derive label path from " + images_path +
                            "; pass both paths");
    }
    labels_path.replace(a, 6, "labels");
    size_t b = labels_path.find("idx3");
    if (b != std::string::npos) labels_path.replace(b, 4, "idx1");
    return load_idx(images_path, labels_path);
}

}  // namespace fxda
