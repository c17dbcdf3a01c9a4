#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fxda/core/ops.hpp"
#include "fxda/core/rng.hpp"
#include "fxda/core/tape.hpp"

// Layer building blocks. One Layer corresponds to one printed row of an
// architecture table: the linear op plus its fused batch norm and activation.

namespace fxda {

/// Rows of (label, unbatched output shape) recorded during a forward pass.
using Trace = std::vector<std::pair<std::string, Shape>>;

inline Shape unbatched(const Shape& s) {
    return Shape(s.begin() + 1, s.end());
}

struct Layer {
    enum class Op { conv, deconv, dense, maxpool, upsample };
    enum class Act { none, relu, elu, sigmoid };

    Op op = Op::dense;
    Act act = Act::none;
    bool has_bn = false;
    std::string label;
    int64_t pad = 0;

    Param w, b;           // conv / deconv / dense
    Param gamma, beta;    // batch norm scale / shift
    Tensor run_mean, run_var;

    NodeId forward(Tape& t, NodeId x, bool training) {
        NodeId y = x;
        switch (op) {
            case Op::conv: y = ops::conv2d(t, y, t.param(w), t.param(b), pad); break;
            case Op::deconv: y = ops::deconv2d(t, y, t.param(w), t.param(b), pad); break;
            case Op::dense: y = ops::dense(t, y, t.param(w), t.param(b)); break;
            case Op::maxpool: y = ops::maxpool2(t, y); break;
            case Op::upsample: y = ops::upsample2(t, y); break;
        }
        if (has_bn) {
            y = ops::batchnorm(t, y, t.param(gamma), t.param(beta), run_mean, run_var, training);
        }
        switch (act) {
            case Act::none: break;
            case Act::relu: y = ops::relu(t, y); break;
            case Act::elu: y = ops::elu(t, y); break;
            case Act::sigmoid: y = ops::sigmoid(t, y); break;
        }
        return y;
    }

    void collect_params(std::vector<Param*>& out) {
        if (op == Op::conv || op == Op::deconv || op == Op::dense) {
            out.push_back(&w);
            out.push_back(&b);
        }
        if (has_bn) {
            out.push_back(&gamma);
            out.push_back(&beta);
        }
    }

    void collect_stats(std::vector<Tensor*>& out) {
        if (has_bn) {
            out.push_back(&run_mean);
            out.push_back(&run_var);
        }
    }
};

/// Weights are fan-in-scaled uniform, biases zero; deterministic in draw order.
inline void init_linear(Param& w, Param& b, int64_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int64_t i = 0; i < w.value.size(); ++i) w.value[i] = rng.uniform(-bound, bound);
    b.value.fill(0.0);
}

inline Layer make_conv(std::string label, int64_t k, int64_t cin, int64_t cout, int64_t pad,
                       Layer::Act act, bool bn, Rng& rng) {
    Layer l;
    l.op = Layer::Op::conv;
    l.act = act;
    l.has_bn = bn;
    l.label = std::move(label);
    l.pad = pad;
    l.w = Param(l.label + ".w", {k, k, cin, cout});
    l.b = Param(l.label + ".b", {cout});
    init_linear(l.w, l.b, k * k * cin, rng);
    if (bn) {
        l.gamma = Param(l.label + ".gamma", {cout});
        l.gamma.value.fill(1.0);
        l.beta = Param(l.label + ".beta", {cout});
        l.run_mean = Tensor({cout});
        l.run_var = Tensor::full({cout}, 1.0);
    }
    return l;
}

inline Layer make_deconv(std::string label, int64_t k, int64_t cin, int64_t cout, int64_t pad,
                         Layer::Act act, bool bn, Rng& rng) {
    Layer l = make_conv(std::move(label), k, cin, cout, pad, act, bn, rng);
    l.op = Layer::Op::deconv;
    return l;
}

inline Layer make_dense(std::string label, int64_t in, int64_t out, Layer::Act act, bool bn,
                        Rng& rng) {
    Layer l;
    l.op = Layer::Op::dense;
    l.act = act;
    l.has_bn = bn;
    l.label = std::move(label);
    l.w = Param(l.label + ".w", {in, out});
    l.b = Param(l.label + ".b", {out});
    init_linear(l.w, l.b, in, rng);
    if (bn) {
        l.gamma = Param(l.label + ".gamma", {out});
        l.gamma.value.fill(1.0);
        l.beta = Param(l.label + ".beta", {out});
        l.run_mean = Tensor({out});
        l.run_var = Tensor::full({out}, 1.0);
    }
    return l;
}

inline Layer make_maxpool(std::string label) {
    Layer l;
    l.op = Layer::Op::maxpool;
    l.label = std::move(label);
    return l;
}

inline Layer make_upsample(std::string label) {
    Layer l;
    l.op = Layer::Op::upsample;
    l.label = std::move(label);
    return l;
}

/// An ordered layer stack; each layer contributes one trace row.
struct Sequential {
    std::vector<Layer> layers;

    NodeId forward(Tape& t, NodeId x, bool training, Trace* trace = nullptr) {
        for (Layer& l : layers) {
            x = l.forward(t, x, training);
            if (trace) trace->emplace_back(l.label, unbatched(t.val(x).shape()));
        }
        return x;
    }

    void collect_params(std::vector<Param*>& out) {
        for (Layer& l : layers) l.collect_params(out);
    }
    void collect_stats(std::vector<Tensor*>& out) {
        for (Layer& l : layers) l.collect_stats(out);
    }
};

/// Copies parameters and batch-norm statistics from one identically shaped
/// network piece to another. Shapes must match exactly.
inline void copy_params(std::vector<Param*> from, std::vector<Param*> to) {
    if (from.size() != to.size()) throw ContractError("copy_params: network mismatch");
    for (size_t i = 0; i < from.size(); ++i) {
        if (!from[i]->value.same_shape(to[i]->value)) {
            throw ContractError("copy_params: shape mismatch at " + from[i]->name);
        }
        to[i]->value = from[i]->value.clone();
    }
}

inline void copy_stats(std::vector<Tensor*> from, std::vector<Tensor*> to) {
    if (from.size() != to.size()) throw ContractError("copy_stats: network mismatch");
    for (size_t i = 0; i < from.size(); ++i) *to[i] = from[i]->clone();
}

}  // namespace fxda
