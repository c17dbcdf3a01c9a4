#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fxda/core/error.hpp"
#include "fxda/core/tensor.hpp"

namespace fxda {

enum class Domain { source, target };

inline std::string domain_name(Domain d) { return d == Domain::source ? "source" : "target"; }

/// A labeled image collection. Pixels live in [0,1], shape [count, H, W, C].
/// Treated as immutable once built.
struct ImageSet {
    Tensor images;
    std::vector<int> labels;
    Domain domain_id = Domain::source;
    int class_count = 0;

    int64_t count() const { return images.empty() ? 0 : images.dim(0); }
    int64_t height() const { return images.dim(1); }
    int64_t width() const { return images.dim(2); }
    int64_t channels() const { return images.dim(3); }

    void validate(const char* who) const {
        if (images.empty() || images.ndim() != 4) {
            throw ContractError(std::string(who) + ": images must be [count,H,W,C]");
        }
        if (static_cast<int64_t>(labels.size()) != count()) {
            throw ContractError(std::string(who) + ": label count " +
                                std::to_string(labels.size()) + " != image count " +
                                std::to_string(count()));
        }
        for (size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] < 0 || labels[i] >= class_count) {
                throw ContractError(std::string(who) + ": label " + std::to_string(labels[i]) +
                                    " at index " + std::to_string(i) + " outside [0," +
                                    std::to_string(class_count) + ")");
            }
        }
        const double* p = images.data();
        for (int64_t i = 0; i < images.size(); ++i) {
            if (p[i] < 0.0 || p[i] > 1.0) {
                throw ContractError(std::string(who) + ": pixel outside [0,1]");
            }
        }
    }
};

/// Copies the rows named by idx into a fresh [n,H,W,C] tensor.
inline Tensor gather_images(const Tensor& images, const std::vector<int64_t>& idx) {
    const int64_t row = images.size() / images.dim(0);
    Tensor out({static_cast<int64_t>(idx.size()), images.dim(1), images.dim(2), images.dim(3)});
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= images.dim(0)) {
            throw ContractError("gather_images: index out of range");
        }
        const double* src = images.data() + idx[i] * row;
        std::copy(src, src + row, out.data() + static_cast<int64_t>(i) * row);
    }
    return out;
}

inline ImageSet select_rows(const ImageSet& set, const std::vector<int64_t>& idx) {
    ImageSet out;
    out.images = gather_images(set.images, idx);
    out.labels.reserve(idx.size());
    for (int64_t i : idx) out.labels.push_back(set.labels[i]);
    out.domain_id = set.domain_id;
    out.class_count = set.class_count;
    return out;
}

}  // namespace fxda
