#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fxda/nn/layers.hpp"

// The eight networks of the framework, grouped by architecture family.
// Digits family (32x32x1) follows the LeNet-style tables; the signs family
// (40x40x3) adds batch norm and ELU; "digits_sm" inserts the extra leading
// fully-connected layer into the generator; "toy" is a scaled-down family of
// the same shape grammar for desk-scale runs on 16x16 glyphs.

namespace fxda {

enum class ArchFamily { digits, digits_sm, signs, toy };

inline std::string family_name(ArchFamily f) {
    switch (f) {
        case ArchFamily::digits: return "digits";
        case ArchFamily::digits_sm: return "digits_sm";
        case ArchFamily::signs: return "signs";
        case ArchFamily::toy: return "toy";
    }
    return "?";
}

inline ArchFamily family_from_name(const std::string& s) {
    if (s == "digits") return ArchFamily::digits;
    if (s == "digits_sm") return ArchFamily::digits_sm;
    if (s == "signs") return ArchFamily::signs;
    if (s == "toy") return ArchFamily::toy;
    throw ConfigError("unknown arch family: " + s);
}

struct ArchConfig {
    ArchFamily family = ArchFamily::digits;
    int64_t num_classes = 10;

    int64_t image_h() const {
        switch (family) {
            case ArchFamily::digits:
            case ArchFamily::digits_sm: return 32;
            case ArchFamily::signs: return 40;
            case ArchFamily::toy: return 16;
        }
        return 0;
    }
    int64_t image_w() const { return image_h(); }
    int64_t image_c() const { return family == ArchFamily::signs ? 3 : 1; }

    /// Unbatched spatial shape of one feature part at the generator input.
    Shape part_shape() const {
        switch (family) {
            case ArchFamily::digits:
            case ArchFamily::digits_sm: return {1, 1, 128};
            case ArchFamily::signs: return {2, 2, 256};
            case ArchFamily::toy: return {1, 1, 24};
        }
        return {};
    }
    int64_t part_dim() const { return shape_count(part_shape()); }
};

struct FeaturePair {
    NodeId specific;
    NodeId common;
};

struct DiscOut {
    NodeId class_logits;
    NodeId type_logit;
};

namespace detail {

inline void check_batched(const Tensor& v, const char* who) {
    if (v.ndim() < 1 || v.dim(0) < 1) {
        throw ContractError(std::string(who) + ": batch must be non-empty");
    }
}

inline void check_images(const Tensor& v, const ArchConfig& arch, const char* who) {
    check_batched(v, who);
    if (v.ndim() != 4 || v.dim(1) != arch.image_h() || v.dim(2) != arch.image_w() ||
        v.dim(3) != arch.image_c()) {
        throw ContractError(std::string(who) + ": expected [N," + std::to_string(arch.image_h()) +
                            "," + std::to_string(arch.image_w()) + "," +
                            std::to_string(arch.image_c()) + "], got " + shape_str(v.shape()));
    }
}

inline void check_flat(const Tensor& v, int64_t dim, const char* who) {
    check_batched(v, who);
    if (v.ndim() != 2 || v.dim(1) != dim) {
        throw ContractError(std::string(who) + ": expected [N," + std::to_string(dim) + "], got " +
                            shape_str(v.shape()));
    }
}

}  // namespace detail

// ------------------------------------------------------------------ extractor

struct Extractor {
    ArchConfig arch;
    Sequential stack;              // convolutional rows
    bool has_head = false;         // digits/toy end in a fully-connected row
    Layer head;
    bool spatial_split = false;    // signs splits channels before flattening
    int64_t split_at = 0;          // size of the specific block along the last axis

    FeaturePair extract(Tape& t, NodeId images, bool training, Trace* trace = nullptr) {
        detail::check_images(t.val(images), arch, "extract");
        const int64_t n = t.val(images).dim(0);
        NodeId y = stack.forward(t, images, training, trace);
        if (has_head) {
            y = ops::reshape(t, y, {n, shape_count(unbatched(t.val(y).shape()))});
            y = head.forward(t, y, training);
            if (trace) trace->emplace_back(head.label, unbatched(t.val(y).shape()));
        }
        const int64_t pd = arch.part_dim();
        NodeId spec = ops::slice_last(t, y, 0, split_at);
        NodeId comm = ops::slice_last(t, y, split_at, split_at);
        if (spatial_split) {
            spec = ops::reshape(t, spec, {n, pd});
            comm = ops::reshape(t, comm, {n, pd});
        }
        return {spec, comm};
    }

    void collect_params(std::vector<Param*>& out) {
        stack.collect_params(out);
        if (has_head) head.collect_params(out);
    }
    void collect_stats(std::vector<Tensor*>& out) { stack.collect_stats(out); }
};

// ------------------------------------------------------------------ generator

struct Generator {
    ArchConfig arch;
    bool spatial_input = false;    // signs concatenates parts channel-wise
    std::optional<Layer> pre;      // leading fully-connected row, when the table has one
    Shape stack_input;             // unbatched shape entering the deconv stack
    Sequential stack;

    NodeId generate(Tape& t, NodeId specific, NodeId common, bool training,
                    Trace* trace = nullptr) {
        const int64_t pd = arch.part_dim();
        detail::check_flat(t.val(specific), pd, "generate(specific)");
        detail::check_flat(t.val(common), pd, "generate(common)");
        const int64_t n = t.val(specific).dim(0);
        if (t.val(common).dim(0) != n) throw ContractError("generate: batch mismatch");
        NodeId x;
        if (spatial_input) {
            Shape ps = arch.part_shape();
            NodeId rs = ops::reshape(t, specific, {n, ps[0], ps[1], ps[2]});
            NodeId rc = ops::reshape(t, common, {n, ps[0], ps[1], ps[2]});
            x = ops::concat_last(t, rs, rc);
        } else {
            x = ops::concat_last(t, specific, common);
        }
        if (trace) trace->emplace_back("input", unbatched(t.val(x).shape()));
        if (pre) {
            x = pre->forward(t, x, training);
            if (trace) trace->emplace_back(pre->label, unbatched(t.val(x).shape()));
        }
        Shape si = stack_input;
        x = ops::reshape(t, x, {n, si[0], si[1], si[2]});
        return stack.forward(t, x, training, trace);
    }

    void collect_params(std::vector<Param*>& out) {
        if (pre) pre->collect_params(out);
        stack.collect_params(out);
    }
    void collect_stats(std::vector<Tensor*>& out) { stack.collect_stats(out); }
};

// -------------------------------------------------------------- discriminators

struct ImageDiscriminator {
    ArchConfig arch;
    Sequential stack;    // convolutional trunk (layer-identical to the extractor)
    Sequential head;     // fully-connected rows ending in num_classes + 1 logits

    DiscOut discriminate(Tape& t, NodeId images, bool training, Trace* trace = nullptr) {
        detail::check_images(t.val(images), arch, "discriminate_image");
        const int64_t n = t.val(images).dim(0);
        NodeId y = stack.forward(t, images, training, trace);
        y = ops::reshape(t, y, {n, shape_count(unbatched(t.val(y).shape()))});
        y = head.forward(t, y, training, trace);
        const int64_t nc = arch.num_classes;
        return {ops::slice_last(t, y, 0, nc), ops::slice_last(t, y, nc, 1)};
    }

    void collect_params(std::vector<Param*>& out) {
        stack.collect_params(out);
        head.collect_params(out);
    }
    void collect_stats(std::vector<Tensor*>& out) {
        stack.collect_stats(out);
        head.collect_stats(out);
    }
};

struct FeatureDiscriminator {
    ArchConfig arch;
    Sequential head;

    DiscOut discriminate(Tape& t, NodeId common, bool training, Trace* trace = nullptr) {
        detail::check_flat(t.val(common), arch.part_dim(), "discriminate_feature");
        NodeId y = head.forward(t, common, training, trace);
        const int64_t nc = arch.num_classes;
        return {ops::slice_last(t, y, 0, nc), ops::slice_last(t, y, nc, 1)};
    }

    void collect_params(std::vector<Param*>& out) { head.collect_params(out); }
    void collect_stats(std::vector<Tensor*>& out) { head.collect_stats(out); }
};

struct Classifier {
    ArchConfig arch;
    Sequential head;

    NodeId classify(Tape& t, NodeId common, bool training, Trace* trace = nullptr) {
        detail::check_flat(t.val(common), arch.part_dim(), "classify");
        return head.forward(t, common, training, trace);
    }

    void collect_params(std::vector<Param*>& out) { head.collect_params(out); }
    void collect_stats(std::vector<Tensor*>& out) { head.collect_stats(out); }
};

// ------------------------------------------------------------------- builders

namespace detail {

using Act = Layer::Act;

inline Extractor build_extractor(const ArchConfig& arch, Rng& rng) {
    Extractor e;
    e.arch = arch;
    switch (arch.family) {
        case ArchFamily::digits:
        case ArchFamily::digits_sm:
            e.stack.layers.push_back(make_conv("Conv 5 x 5 x 64, pad 2, ReLU", 5, 1, 64, 2, Act::relu, false, rng));
            e.stack.layers.push_back(make_maxpool("Max-pool, 2 x 2"));
            e.stack.layers.push_back(make_conv("Conv 5 x 5 x 128, ReLU", 5, 64, 128, 0, Act::relu, false, rng));
            e.stack.layers.push_back(make_maxpool("Max-pool, 2 x 2"));
            e.stack.layers.push_back(make_conv("Conv 5 x 5 x 256, ReLU", 5, 128, 256, 0, Act::relu, false, rng));
            e.stack.layers.push_back(make_maxpool("Max-pool, 2 x 2"));
            e.has_head = true;
            e.head = make_dense("Fully connected, 256 units", 256, 256, Act::none, false, rng);
            e.split_at = 128;
            break;
        case ArchFamily::signs:
            e.stack.layers.push_back(make_conv("Conv 5 x 5 x 128, batch norm, ELU", 5, 3, 128, 0, Act::elu, true, rng));
            e.stack.layers.push_back(make_maxpool("Max-pool, 2 x 2"));
            e.stack.layers.push_back(make_conv("Conv 3 x 3 x 256, batch norm, ELU", 3, 128, 256, 0, Act::elu, true, rng));
            e.stack.layers.push_back(make_maxpool("Max-pool, 2 x 2"));
            e.stack.layers.push_back(make_conv("Conv 5 x 5 x 512, batch norm, ELU", 5, 256, 512, 0, Act::elu, true, rng));
            e.stack.layers.push_back(make_maxpool("Max-pool, 2 x 2"));
            e.spatial_split = true;
            e.split_at = 256;
            break;
        case ArchFamily::toy:
            e.stack.layers.push_back(make_conv("Conv 3 x 3 x 8, pad 1, ReLU", 3, 1, 8, 1, Act::relu, false, rng));
            e.stack.layers.push_back(make_maxpool("Max-pool, 2 x 2"));
            e.stack.layers.push_back(make_conv("Conv 3 x 3 x 16, pad 1, ReLU", 3, 8, 16, 1, Act::relu, false, rng));
            e.stack.layers.push_back(make_maxpool("Max-pool, 2 x 2"));
            e.has_head = true;
            e.head = make_dense("Fully connected, 48 units", 256, 48, Act::none, false, rng);
            e.split_at = 24;
            break;
    }
    return e;
}

inline Generator build_generator(const ArchConfig& arch, Rng& rng) {
    Generator g;
    g.arch = arch;
    switch (arch.family) {
        case ArchFamily::digits:
        case ArchFamily::digits_sm:
            if (arch.family == ArchFamily::digits_sm) {
                g.pre = make_dense("Fully connected, 256 units, ReLU", 256, 256, Act::relu, false, rng);
            }
            g.stack_input = {1, 1, 256};
            g.stack.layers.push_back(make_upsample("Unpool, 2 x 2"));
            g.stack.layers.push_back(make_deconv("Deconv 5 x 5 x 512, ReLU", 5, 256, 512, 0, Act::relu, false, rng));
            g.stack.layers.push_back(make_upsample("Unpool, 2 x 2"));
            g.stack.layers.push_back(make_deconv("Deconv 5 x 5 x 256, ReLU", 5, 512, 256, 0, Act::relu, false, rng));
            g.stack.layers.push_back(make_upsample("Unpool, 2 x 2"));
            g.stack.layers.push_back(make_deconv("Deconv 5 x 5 x 128, pad 2, ReLU", 5, 256, 128, 2, Act::relu, false, rng));
            g.stack.layers.push_back(make_deconv("Deconv 5 x 5 x 1, pad 2, Sigmoid", 5, 128, 1, 2, Act::sigmoid, false, rng));
            break;
        case ArchFamily::signs:
            g.spatial_input = true;
            g.stack_input = {2, 2, 512};
            g.stack.layers.push_back(make_upsample("Unpool, 2 x 2"));
            g.stack.layers.push_back(make_deconv("Deconv 5 x 5 x 128, batch norm, ELU", 5, 512, 128, 0, Act::elu, true, rng));
            g.stack.layers.push_back(make_upsample("Unpool, 2 x 2"));
            g.stack.layers.push_back(make_deconv("Deconv 5 x 5 x 32, batch norm, ELU", 5, 128, 32, 0, Act::elu, true, rng));
            g.stack.layers.push_back(make_upsample("Unpool, 2 x 2"));
            g.stack.layers.push_back(make_deconv("Deconv 3 x 3 x 16, pad 1, batch norm, ELU", 3, 32, 16, 1, Act::elu, true, rng));
            g.stack.layers.push_back(make_deconv("Deconv 3 x 3 x 3, pad 1, Sigmoid", 3, 16, 3, 1, Act::sigmoid, false, rng));
            break;
        case ArchFamily::toy:
            g.pre = make_dense("Fully connected, 64 units, ReLU", 48, 64, Act::relu, false, rng);
            g.stack_input = {2, 2, 16};
            g.stack.layers.push_back(make_upsample("Unpool, 2 x 2"));
            g.stack.layers.push_back(make_deconv("Deconv 3 x 3 x 16, pad 1, ReLU", 3, 16, 16, 1, Act::relu, false, rng));
            g.stack.layers.push_back(make_upsample("Unpool, 2 x 2"));
            g.stack.layers.push_back(make_deconv("Deconv 3 x 3 x 8, pad 1, ReLU", 3, 16, 8, 1, Act::relu, false, rng));
            g.stack.layers.push_back(make_upsample("Unpool, 2 x 2"));
            g.stack.layers.push_back(make_deconv("Deconv 3 x 3 x 1, pad 1, Sigmoid", 3, 8, 1, 1, Act::sigmoid, false, rng));
            break;
    }
    return g;
}

inline ImageDiscriminator build_image_discriminator(const ArchConfig& arch, Rng& rng) {
    ImageDiscriminator d;
    d.arch = arch;
    const int64_t heads = arch.num_classes + 1;
    switch (arch.family) {
        case ArchFamily::digits:
        case ArchFamily::digits_sm: {
            Extractor e = build_extractor(arch, rng);  // trunk rows are layer-identical
            d.stack = std::move(e.stack);
            d.head.layers.push_back(make_dense("Fully connected, 128 units, ReLU", 256, 128, Act::relu, false, rng));
            d.head.layers.push_back(make_dense("Fully connected, 11 units", 128, heads, Act::none, false, rng));
            break;
        }
        case ArchFamily::signs: {
            Extractor e = build_extractor(arch, rng);
            d.stack = std::move(e.stack);
            d.head.layers.push_back(make_dense("Fully connected, 512 units, batch norm, ELU", 2048, 512, Act::elu, true, rng));
            d.head.layers.push_back(make_dense("Fully connected, 256 units, batch norm, ELU", 512, 256, Act::elu, true, rng));
            d.head.layers.push_back(make_dense("Fully connected, 44 units", 256, heads, Act::none, false, rng));
            break;
        }
        case ArchFamily::toy: {
            Extractor e = build_extractor(arch, rng);
            d.stack = std::move(e.stack);
            d.head.layers.push_back(make_dense("Fully connected, 32 units, ReLU", 256, 32, Act::relu, false, rng));
            d.head.layers.push_back(make_dense("Fully connected, " + std::to_string(heads) + " units", 32, heads, Act::none, false, rng));
            break;
        }
    }
    return d;
}

inline FeatureDiscriminator build_feature_discriminator(const ArchConfig& arch, Rng& rng) {
    FeatureDiscriminator d;
    d.arch = arch;
    const int64_t heads = arch.num_classes + 1;
    switch (arch.family) {
        case ArchFamily::digits:
        case ArchFamily::digits_sm:
            d.head.layers.push_back(make_dense("Fully connected, 128 units, ReLU", 128, 128, Act::relu, false, rng));
            d.head.layers.push_back(make_dense("Fully connected, 128 units, ReLU", 128, 128, Act::relu, false, rng));
            d.head.layers.push_back(make_dense("Fully connected, 11 units", 128, heads, Act::none, false, rng));
            break;
        case ArchFamily::signs:
            d.head.layers.push_back(make_dense("Fully connected, 512 units, batch norm, ELU", 1024, 512, Act::elu, true, rng));
            d.head.layers.push_back(make_dense("Fully connected, 256 units, batch norm, ELU", 512, 256, Act::elu, true, rng));
            d.head.layers.push_back(make_dense("Fully connected, 44 units", 256, heads, Act::none, false, rng));
            break;
        case ArchFamily::toy:
            d.head.layers.push_back(make_dense("Fully connected, 32 units, ReLU", 24, 32, Act::relu, false, rng));
            d.head.layers.push_back(make_dense("Fully connected, 32 units, ReLU", 32, 32, Act::relu, false, rng));
            d.head.layers.push_back(make_dense("Fully connected, " + std::to_string(heads) + " units", 32, heads, Act::none, false, rng));
            break;
    }
    return d;
}

inline Classifier build_classifier(const ArchConfig& arch, Rng& rng) {
    Classifier c;
    c.arch = arch;
    const int64_t nc = arch.num_classes;
    switch (arch.family) {
        case ArchFamily::digits:
        case ArchFamily::digits_sm:
            c.head.layers.push_back(make_dense("Fully connected, 128 units, ReLU", 128, 128, Act::relu, false, rng));
            c.head.layers.push_back(make_dense("Fully connected, 128 units, ReLU", 128, 128, Act::relu, false, rng));
            c.head.layers.push_back(make_dense("Fully connected, 10 units", 128, nc, Act::none, false, rng));
            break;
        case ArchFamily::signs:
            c.head.layers.push_back(make_dense("Fully connected, 512 units, batch norm, ELU", 1024, 512, Act::elu, true, rng));
            c.head.layers.push_back(make_dense("Fully connected, 256 units, batch norm, ELU", 512, 256, Act::elu, true, rng));
            c.head.layers.push_back(make_dense("Fully connected, 43 units", 256, nc, Act::none, false, rng));
            break;
        case ArchFamily::toy:
            c.head.layers.push_back(make_dense("Fully connected, 32 units, ReLU", 24, 32, Act::relu, false, rng));
            c.head.layers.push_back(make_dense("Fully connected, 32 units, ReLU", 32, 32, Act::relu, false, rng));
            c.head.layers.push_back(make_dense("Fully connected, " + std::to_string(nc) + " units", 32, nc, Act::none, false, rng));
            break;
    }
    return c;
}

}  // namespace detail

// -------------------------------------------------------------------- models

/// A named handle on one network's parameters and batch-norm statistics.
struct NetRef {
    std::string name;
    std::vector<Param*> params;
    std::vector<Tensor*> stats;

    int64_t param_count() const {
        int64_t n = 0;
        for (const Param* p : params) n += p->value.size();
        return n;
    }
};

struct ModelSet {
    ArchConfig arch;
    uint64_t seed = 0;
    Extractor f_s, f_t;
    Generator g_s, g_t;
    ImageDiscriminator d_s, d_t;
    FeatureDiscriminator d_f;
    Classifier f_c;

    std::vector<NetRef> networks() {
        auto make = [](std::string name, auto& net) {
            NetRef r;
            r.name = std::move(name);
            net.collect_params(r.params);
            net.collect_stats(r.stats);
            return r;
        };
        return {make("f_s", f_s), make("f_t", f_t), make("g_s", g_s), make("g_t", g_t),
                make("d_s", d_s), make("d_t", d_t), make("d_f", d_f), make("f_c", f_c)};
    }

    NetRef net(const std::string& name) {
        for (NetRef& r : networks()) {
            if (r.name == name) return r;
        }
        throw ContractError("unknown network: " + name);
    }

    void zero_grads() {
        for (NetRef& r : networks()) {
            for (Param* p : r.params) p->zero_grad();
        }
    }
};

inline void validate_arch(const ArchConfig& arch) {
    switch (arch.family) {
        case ArchFamily::digits:
        case ArchFamily::digits_sm:
            if (arch.num_classes != 10) throw ConfigError("digits family requires 10 classes");
            break;
        case ArchFamily::signs:
            if (arch.num_classes != 43) throw ConfigError("signs family requires 43 classes");
            break;
        case ArchFamily::toy:
            if (arch.num_classes < 2 || arch.num_classes > 10) {
                throw ConfigError("toy family supports 2..10 classes");
            }
            break;
    }
}

inline ModelSet init_models(const ArchConfig& arch, uint64_t seed) {
    validate_arch(arch);
    ModelSet m;
    m.arch = arch;
    m.seed = seed;
    Rng root(seed);
    Rng r0 = root.fork(0), r1 = root.fork(1), r2 = root.fork(2), r3 = root.fork(3);
    Rng r4 = root.fork(4), r5 = root.fork(5), r6 = root.fork(6), r7 = root.fork(7);
    m.f_s = detail::build_extractor(arch, r0);
    m.f_t = detail::build_extractor(arch, r1);
    m.g_s = detail::build_generator(arch, r2);
    m.g_t = detail::build_generator(arch, r3);
    m.d_s = detail::build_image_discriminator(arch, r4);
    m.d_t = detail::build_image_discriminator(arch, r5);
    m.d_f = detail::build_feature_discriminator(arch, r6);
    m.f_c = detail::build_classifier(arch, r7);
    return m;
}

/// Copies every parameter (and batch-norm statistic) of one network onto
/// another of identical architecture.
template <class Net>
inline void copy_network(Net& from, Net& to) {
    std::vector<Param*> pf, pt;
    from.collect_params(pf);
    to.collect_params(pt);
    copy_params(pf, pt);
    std::vector<Tensor*> sf, st;
    from.collect_stats(sf);
    to.collect_stats(st);
    copy_stats(sf, st);
}

/// Seeds an image discriminator's convolutional trunk from a trained
/// extractor. The printed trunks are layer-identical; the fully-connected
/// head keeps its fresh initialization since its widths differ.
inline void seed_discriminator_from_extractor(Extractor& from, ImageDiscriminator& to) {
    std::vector<Param*> pf, pt;
    from.stack.collect_params(pf);
    to.stack.collect_params(pt);
    copy_params(pf, pt);
    std::vector<Tensor*> sf, st;
    from.stack.collect_stats(sf);
    to.stack.collect_stats(st);
    copy_stats(sf, st);
}

}  // namespace fxda
