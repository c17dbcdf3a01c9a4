#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "fxda/core/rng.hpp"
#include "fxda/data/image_set.hpp"

// Procedural two-domain glyph corpus: ten 16x16 shape families rendered in two
// styles. Style A draws thin high-contrast strokes on a dark field; style B
// draws thickened, dimmer strokes on a lighter field with stronger jitter.
// The shape family is the class; everything else is domain nuisance.

namespace fxda {

enum class GlyphStyle { A, B };

namespace detail {

constexpr int kGlyphSize = 16;
constexpr int kGlyphFamilies = 10;

inline std::vector<std::pair<int, int>> glyph_strokes(int family) {
    std::vector<std::pair<int, int>> pts;  // (y, x)
    auto hline = [&](int y, int x0, int x1) {
        for (int x = x0; x <= x1; ++x) pts.emplace_back(y, x);
    };
    auto vline = [&](int x, int y0, int y1) {
        for (int y = y0; y <= y1; ++y) pts.emplace_back(y, x);
    };
    switch (family) {
        case 0: hline(8, 3, 12); break;
        case 1: vline(8, 3, 12); break;
        case 2:  // plus
            hline(8, 3, 12);
            vline(8, 3, 12);
            break;
        case 3:  // X
            for (int i = 0; i <= 9; ++i) {
                pts.emplace_back(3 + i, 3 + i);
                pts.emplace_back(3 + i, 12 - i);
            }
            break;
        case 4:  // ring
            for (int y = 0; y < kGlyphSize; ++y) {
                for (int x = 0; x < kGlyphSize; ++x) {
                    double d = std::hypot(y - 8.0, x - 8.0);
                    if (d >= 3.4 && d <= 4.6) pts.emplace_back(y, x);
                }
            }
            break;
        case 5:  // filled square
            for (int y = 5; y <= 10; ++y) hline(y, 5, 10);
            break;
        case 6:  // triangle outline
            for (int i = 0; i <= 9; ++i) {
                int half = (5 * i + 4) / 9;
                pts.emplace_back(3 + i, 8 - half);
                pts.emplace_back(3 + i, 8 + half);
            }
            hline(12, 3, 12);
            break;
        case 7:  // double bars
            hline(5, 3, 12);
            hline(11, 3, 12);
            break;
        case 8:  // L
            vline(4, 3, 12);
            hline(12, 4, 12);
            break;
        case 9:  // T
            hline(3, 3, 12);
            vline(8, 4, 12);
            break;
        default:
            break;
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

inline std::vector<std::pair<int, int>> dilate(const std::vector<std::pair<int, int>>& pts) {
    std::vector<std::pair<int, int>> out;
    for (auto [y, x] : pts) {
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) out.emplace_back(y + dy, x + dx);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace detail

inline ImageSet generate_toy_glyphs(int class_count, int per_class, GlyphStyle style,
                                    uint64_t seed) {
    if (class_count < 2) throw ContractError("generate_toy_glyphs: need at least 2 classes");
    if (per_class < 1) throw ContractError("generate_toy_glyphs: per_class must be positive");
    if (class_count > detail::kGlyphFamilies) {
        throw CapabilityError("generate_toy_glyphs: only " +
                              std::to_string(detail::kGlyphFamilies) + " shape families exist, " +
                              std::to_string(class_count) + " requested");
    }
    const int n = class_count * per_class;
    const int hw = detail::kGlyphSize;
    ImageSet set;
    set.images = Tensor({n, hw, hw, 1});
    set.labels.reserve(n);
    set.class_count = class_count;
    Rng rng(seed);

    int row = 0;
    for (int cls = 0; cls < class_count; ++cls) {
        std::vector<std::pair<int, int>> pts = detail::glyph_strokes(cls);
        if (style == GlyphStyle::B) pts = detail::dilate(pts);
        for (int k = 0; k < per_class; ++k, ++row) {
            double* img = set.images.data() + static_cast<int64_t>(row) * hw * hw;
            int jit = style == GlyphStyle::A ? 1 : 2;
            int dy = static_cast<int>(rng.below(2 * jit + 1)) - jit;
            int dx = static_cast<int>(rng.below(2 * jit + 1)) - jit;
            double bg, stroke;
            if (style == GlyphStyle::A) {
                bg = 0.02 + 0.06 * rng.uniform();
                stroke = 0.75 + 0.2 * rng.uniform();
            } else {
                bg = 0.18 + 0.12 * rng.uniform();
                stroke = 0.60 + 0.2 * rng.uniform();
            }
            for (int i = 0; i < hw * hw; ++i) {
                img[i] = std::clamp(bg + 0.03 * (rng.uniform() - 0.5), 0.0, 1.0);
            }
            for (auto [y, x] : pts) {
                int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= hw || xx < 0 || xx >= hw) continue;
                img[yy * hw + xx] = std::clamp(stroke + 0.06 * (rng.uniform() - 0.5), 0.0, 1.0);
            }
            set.labels.push_back(cls);
        }
    }
    set.validate("generate_toy_glyphs");
    return set;
}

}  // namespace fxda
