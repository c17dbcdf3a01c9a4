#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "fxda/core/error.hpp"
#include "fxda/core/tensor.hpp"
#include "fxda/data/image_set.hpp"
#include "fxda/io/png.hpp"

namespace fxda {

/// Lays rows of same-sized images onto a white canvas with a fixed gutter.
/// Rows may have different lengths; shorter rows leave blank cells.
inline Tensor compose_grid(const std::vector<std::vector<Tensor>>& rows, int64_t pad = 2) {
    if (rows.empty()) throw ContractError("compose_grid: no rows");
    int64_t h = -1, w = -1, c = -1, cols = 0;
    for (const auto& row : rows) {
        if (row.empty()) throw ContractError("compose_grid: empty row");
        cols = std::max<int64_t>(cols, static_cast<int64_t>(row.size()));
        for (const Tensor& img : row) {
            if (img.ndim() != 3)
                throw ContractError("compose_grid: images must be [h,w,c]");
            if (h < 0) {
                h = img.dim(0);
                w = img.dim(1);
                c = img.dim(2);
            } else if (img.dim(0) != h || img.dim(1) != w || img.dim(2) != c) {
                throw ContractError("compose_grid: all tiles must share one shape");
            }
        }
    }
    const int64_t nr = static_cast<int64_t>(rows.size());
    Tensor canvas({nr * h + (nr + 1) * pad, cols * w + (cols + 1) * pad, c});
    canvas.fill(1.0);
    for (int64_t r = 0; r < nr; ++r) {
        const auto& row = rows[static_cast<size_t>(r)];
        for (int64_t k = 0; k < static_cast<int64_t>(row.size()); ++k) {
            const Tensor& img = row[static_cast<size_t>(k)];
            const int64_t y0 = pad + r * (h + pad), x0 = pad + k * (w + pad);
            for (int64_t y = 0; y < h; ++y)
                for (int64_t x = 0; x < w; ++x)
                    for (int64_t ch = 0; ch < c; ++ch)
                        canvas[((y0 + y) * canvas.dim(1) + (x0 + x)) * c + ch] =
                            img[(y * w + x) * c + ch];
        }
    }
    return canvas;
}

inline void render_grid(const std::vector<std::vector<Tensor>>& rows,
                        const std::string& path) {
    write_png(path, compose_grid(rows));
}

/// One [h,w,c] view of a single sample inside a [n,h,w,c] batch tensor.
inline Tensor slice_image(const Tensor& batch, int64_t index) {
    if (batch.ndim() != 4) throw ContractError("slice_image: batch must be [n,h,w,c]");
    if (index < 0 || index >= batch.dim(0))
        throw ContractError("slice_image: index out of range");
    const int64_t h = batch.dim(1), w = batch.dim(2), c = batch.dim(3);
    Tensor img({h, w, c});
    const double* src = batch.data() + index * h * w * c;
    std::copy(src, src + h * w * c, img.data());
    return img;
}

/// Dumps every sample of a set as <index>_<label>.png under dir.
inline void export_images(const ImageSet& set, const std::string& dir) {
    set.validate("export_images");
    for (int64_t i = 0; i < set.count(); ++i) {
        const std::string name = dir + "/" + std::to_string(i) + "_" +
                                 std::to_string(set.labels[static_cast<size_t>(i)]) + ".png";
        write_png(name, slice_image(set.images, i));
    }
}

}  // namespace fxda
