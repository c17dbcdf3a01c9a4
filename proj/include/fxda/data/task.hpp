#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fxda/core/rng.hpp"
#include "fxda/data/image_set.hpp"

namespace fxda {

struct Protocol {
    enum class Kind { full, subsampled, partial };
    Kind kind = Kind::full;
    int64_t n_source = 0, n_target = 0;       // subsampled
    std::vector<int> class_subset;            // partial

    static Protocol full() { return {}; }
    static Protocol subsampled(int64_t ns, int64_t nt) {
        Protocol p;
        p.kind = Kind::subsampled;
        p.n_source = ns;
        p.n_target = nt;
        return p;
    }
    static Protocol partial(std::vector<int> subset) {
        Protocol p;
        p.kind = Kind::partial;
        p.class_subset = std::move(subset);
        return p;
    }

    std::string describe() const {
        switch (kind) {
            case Kind::full: return "full";
            case Kind::subsampled:
                return "subsampled(" + std::to_string(n_source) + "," +
                       std::to_string(n_target) + ")";
            case Kind::partial: {
                std::string s = "partial({";
                for (size_t i = 0; i < class_subset.size(); ++i) {
                    if (i) s += ",";
                    s += std::to_string(class_subset[i]);
                }
                return s + "})";
            }
        }
        return "?";
    }
};

struct TransferTask {
    ImageSet source;
    ImageSet target;
    Protocol protocol;
    int64_t image_size = 0;
    uint64_t seed = 0;
};

struct PairedBatch {
    Tensor source_images;
    std::vector<int> source_labels;
    Tensor target_images;  // unlabeled by construction
};

/// Bilinear resize to a square size, half-pixel centers, channels preserved.
inline Tensor resize_bilinear(const Tensor& images, int64_t out_hw) {
    if (images.ndim() != 4) throw ContractError("resize_bilinear: images must be [N,H,W,C]");
    const int64_t n = images.dim(0), h = images.dim(1), w = images.dim(2), c = images.dim(3);
    if (h == out_hw && w == out_hw) return images;
    Tensor out({n, out_hw, out_hw, c});
    const double sy = double(h) / out_hw, sx = double(w) / out_hw;
    for (int64_t i = 0; i < n; ++i) {
        const double* src = images.data() + i * h * w * c;
        double* dst = out.data() + i * out_hw * out_hw * c;
        for (int64_t oy = 0; oy < out_hw; ++oy) {
            double fy = (oy + 0.5) * sy - 0.5;
            int64_t y0 = static_cast<int64_t>(std::floor(fy));
            double wy = fy - y0;
            int64_t y0c = std::clamp<int64_t>(y0, 0, h - 1);
            int64_t y1c = std::clamp<int64_t>(y0 + 1, 0, h - 1);
            for (int64_t ox = 0; ox < out_hw; ++ox) {
                double fx = (ox + 0.5) * sx - 0.5;
                int64_t x0 = static_cast<int64_t>(std::floor(fx));
                double wx = fx - x0;
                int64_t x0c = std::clamp<int64_t>(x0, 0, w - 1);
                int64_t x1c = std::clamp<int64_t>(x0 + 1, 0, w - 1);
                for (int64_t ch = 0; ch < c; ++ch) {
                    double v00 = src[(y0c * w + x0c) * c + ch];
                    double v01 = src[(y0c * w + x1c) * c + ch];
                    double v10 = src[(y1c * w + x0c) * c + ch];
                    double v11 = src[(y1c * w + x1c) * c + ch];
                    double top = v00 + wx * (v01 - v00);
                    double bot = v10 + wx * (v11 - v10);
                    dst[(oy * out_hw + ox) * c + ch] = top + wy * (bot - top);
                }
            }
        }
    }
    return out;
}

inline TransferTask make_task(ImageSet source, ImageSet target, Protocol protocol,
                              int64_t image_size, uint64_t seed) {
    source.validate("make_task(source)");
    target.validate("make_task(target)");
    if (image_size < 1) throw ConfigError("make_task: image_size must be positive");

    Rng root(seed);
    switch (protocol.kind) {
        case Protocol::Kind::full:
            break;
        case Protocol::Kind::subsampled: {
            if (protocol.n_source < 1 || protocol.n_source > source.count() ||
                protocol.n_target < 1 || protocol.n_target > target.count()) {
                throw ConfigError("make_task: subsampled counts must fit set sizes " +
                                  std::to_string(source.count()) + "/" +
                                  std::to_string(target.count()));
            }
            Rng rs = root.fork(0), rt = root.fork(1);
            std::vector<int64_t> si = rs.permutation(source.count());
            si.resize(protocol.n_source);
            std::vector<int64_t> ti = rt.permutation(target.count());
            ti.resize(protocol.n_target);
            source = select_rows(source, si);
            target = select_rows(target, ti);
            break;
        }
        case Protocol::Kind::partial: {
            std::set<int> subset(protocol.class_subset.begin(), protocol.class_subset.end());
            if (subset.empty()) throw ConfigError("make_task: partial subset empty");
            for (int cls : subset) {
                if (cls < 0 || cls >= source.class_count) {
                    throw ConfigError("make_task: class " + std::to_string(cls) +
                                      " outside source label space");
                }
            }
            if (static_cast<int>(subset.size()) >= source.class_count) {
                throw ConfigError("make_task: partial subset must be strict");
            }
            std::set<int> present(target.labels.begin(), target.labels.end());
            for (int cls : subset) {
                if (!present.count(cls)) {
                    throw ConfigError("make_task: class " + std::to_string(cls) +
                                      " absent from target set");
                }
            }
            std::vector<int64_t> keep;
            for (int64_t i = 0; i < target.count(); ++i) {
                if (subset.count(target.labels[i])) keep.push_back(i);
            }
            target = select_rows(target, keep);
            break;
        }
    }

    TransferTask task;
    task.protocol = std::move(protocol);
    task.image_size = image_size;
    task.seed = seed;
    task.source = std::move(source);
    task.target = std::move(target);
    task.source.images = resize_bilinear(task.source.images, image_size);
    task.target.images = resize_bilinear(task.target.images, image_size);
    task.source.domain_id = Domain::source;
    task.target.domain_id = Domain::target;
    return task;
}

/// Epoch-exact shuffled index streams, one per domain, independent of each
/// other. Copyable; two equal samplers draw identical batches.
struct Sampler {
    Rng rng_src{0}, rng_tgt{0};
    std::vector<int64_t> order_src, order_tgt;
    size_t cur_src = 0, cur_tgt = 0;

    std::string save_state() const {
        std::ostringstream os;
        os << "sampler 1\n" << rng_src.save_state() << "\n" << rng_tgt.save_state() << "\n";
        auto dump = [&os](const std::vector<int64_t>& order, size_t cur) {
            os << order.size() << ' ' << cur;
            for (int64_t i : order) os << ' ' << i;
            os << "\n";
        };
        dump(order_src, cur_src);
        dump(order_tgt, cur_tgt);
        return os.str();
    }

    void restore_state(const std::string& text) {
        std::istringstream is(text);
        std::string tag;
        int version = 0;
        is >> tag >> version;
        if (tag != "sampler" || version != 1) {
            throw IntegrityError("sampler state: unrecognized header");
        }
        std::string line;
        std::getline(is, line);  // finish header line
        if (!std::getline(is, line)) throw IntegrityError("sampler state: truncated");
        rng_src.restore_state(line);
        if (!std::getline(is, line)) throw IntegrityError("sampler state: truncated");
        rng_tgt.restore_state(line);
        auto slurp = [&is](std::vector<int64_t>& order, size_t& cur) {
            size_t n = 0;
            if (!(is >> n >> cur)) throw IntegrityError("sampler state: truncated");
            order.resize(n);
            for (size_t i = 0; i < n; ++i) {
                if (!(is >> order[i])) throw IntegrityError("sampler state: truncated");
            }
            if (cur > n) throw IntegrityError("sampler state: cursor out of range");
        };
        slurp(order_src, cur_src);
        slurp(order_tgt, cur_tgt);
    }

    bool operator==(const Sampler& o) const {
        return rng_src == o.rng_src && rng_tgt == o.rng_tgt && order_src == o.order_src &&
               order_tgt == o.order_tgt && cur_src == o.cur_src && cur_tgt == o.cur_tgt;
    }
};

inline Sampler make_sampler(uint64_t seed) {
    Sampler s;
    Rng root(seed);
    s.rng_src = root.fork(0);
    s.rng_tgt = root.fork(1);
    return s;
}

namespace detail {

inline std::vector<int64_t> draw_indices(std::vector<int64_t>& order, size_t& cur, Rng& rng,
                                         int64_t count, int64_t batch) {
    std::vector<int64_t> out;
    out.reserve(batch);
    for (int64_t k = 0; k < batch; ++k) {
        if (cur >= order.size()) {
            order = rng.permutation(count);
            cur = 0;
        }
        out.push_back(order[cur++]);
    }
    return out;
}

}  // namespace detail

inline PairedBatch next_batch(const TransferTask& task, int64_t batch_size, Sampler& s) {
    const int64_t limit = std::min(task.source.count(), task.target.count());
    if (batch_size < 1 || batch_size > limit) {
        throw ContractError("next_batch: batch_size " + std::to_string(batch_size) +
                            " outside [1," + std::to_string(limit) + "]");
    }
    std::vector<int64_t> si =
        detail::draw_indices(s.order_src, s.cur_src, s.rng_src, task.source.count(), batch_size);
    std::vector<int64_t> ti =
        detail::draw_indices(s.order_tgt, s.cur_tgt, s.rng_tgt, task.target.count(), batch_size);
    PairedBatch b;
    b.source_images = gather_images(task.source.images, si);
    b.source_labels.reserve(batch_size);
    for (int64_t i : si) b.source_labels.push_back(task.source.labels[i]);
    b.target_images = gather_images(task.target.images, ti);
    return b;
}

}  // namespace fxda
