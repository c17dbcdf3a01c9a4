#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fxda/core/tape.hpp"

// Differentiable tensor operations. Forward values are computed eagerly;
// each op appends a node whose closure accumulates into parent grad buffers.
// Image layout is NHWC throughout; all convolutions are stride 1.

namespace fxda {
namespace ops {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ContractError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                            " vs " + shape_str(b.shape()));
    }
}

// ---------------------------------------------------------------- elementwise

inline NodeId add(Tape& t, NodeId a, NodeId b) {
    const Tensor &av = t.val(a), &bv = t.val(b);
    check_same_shape(av, bv, "add");
    Tensor y(av.shape());
    for (int64_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
    const bool ng = t.needs_grad(a) || t.needs_grad(b);
    return t.make(std::move(y), ng, [a, b](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        if (t2.needs_grad(a)) {
            Tensor& ga = t2.grad_buf(a);
            for (int64_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        }
        if (t2.needs_grad(b)) {
            Tensor& gb = t2.grad_buf(b);
            for (int64_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
        }
    });
}

inline NodeId sub(Tape& t, NodeId a, NodeId b) {
    const Tensor &av = t.val(a), &bv = t.val(b);
    check_same_shape(av, bv, "sub");
    Tensor y(av.shape());
    for (int64_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
    const bool ng = t.needs_grad(a) || t.needs_grad(b);
    return t.make(std::move(y), ng, [a, b](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        if (t2.needs_grad(a)) {
            Tensor& ga = t2.grad_buf(a);
            for (int64_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        }
        if (t2.needs_grad(b)) {
            Tensor& gb = t2.grad_buf(b);
            for (int64_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
        }
    });
}

inline NodeId mul(Tape& t, NodeId a, NodeId b) {
    const Tensor &av = t.val(a), &bv = t.val(b);
    check_same_shape(av, bv, "mul");
    Tensor y(av.shape());
    for (int64_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
    const bool ng = t.needs_grad(a) || t.needs_grad(b);
    return t.make(std::move(y), ng, [a, b](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        const Tensor &av2 = t2.val(a), &bv2 = t2.val(b);
        if (t2.needs_grad(a)) {
            Tensor& ga = t2.grad_buf(a);
            for (int64_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv2[i];
        }
        if (t2.needs_grad(b)) {
            Tensor& gb = t2.grad_buf(b);
            for (int64_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av2[i];
        }
    });
}

inline NodeId scale(Tape& t, NodeId x, double s) {
    const Tensor& xv = t.val(x);
    Tensor y(xv.shape());
    for (int64_t i = 0; i < y.size(); ++i) y[i] = s * xv[i];
    const bool ng = t.needs_grad(x);
    return t.make(std::move(y), ng, [x, s](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        Tensor& gx = t2.grad_buf(x);
        for (int64_t i = 0; i < gy.size(); ++i) gx[i] += s * gy[i];
    });
}

/// a + s * b
inline NodeId add_scaled(Tape& t, NodeId a, NodeId b, double s) {
    const Tensor &av = t.val(a), &bv = t.val(b);
    check_same_shape(av, bv, "add_scaled");
    Tensor y(av.shape());
    for (int64_t i = 0; i < y.size(); ++i) y[i] = av[i] + s * bv[i];
    const bool ng = t.needs_grad(a) || t.needs_grad(b);
    return t.make(std::move(y), ng, [a, b, s](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        if (t2.needs_grad(a)) {
            Tensor& ga = t2.grad_buf(a);
            for (int64_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        }
        if (t2.needs_grad(b)) {
            Tensor& gb = t2.grad_buf(b);
            for (int64_t i = 0; i < gy.size(); ++i) gb[i] += s * gy[i];
        }
    });
}

// ---------------------------------------------------------------- structure

inline NodeId reshape(Tape& t, NodeId x, Shape shape) {
    Tensor y = t.val(x).reshaped(std::move(shape));
    const bool ng = t.needs_grad(x);
    return t.make(std::move(y), ng, [x](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        Tensor& gx = t2.grad_buf(x);
        for (int64_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    });
}

/// Stops gradient flow; value is shared, not copied.
inline NodeId detach(Tape& t, NodeId x) { return t.leaf(t.val(x), false); }

inline NodeId concat_last(Tape& t, NodeId a, NodeId b) {
    const Tensor &av = t.val(a), &bv = t.val(b);
    if (av.ndim() != bv.ndim()) throw ContractError("concat_last: rank mismatch");
    Shape shape = av.shape();
    for (int i = 0; i + 1 < av.ndim(); ++i) {
        if (av.dim(i) != bv.dim(i)) throw ContractError("concat_last: leading dim mismatch");
    }
    const int64_t da = av.dim(av.ndim() - 1), db = bv.dim(bv.ndim() - 1);
    shape.back() = da + db;
    const int64_t rows = av.size() / da;
    Tensor y(shape);
    for (int64_t r = 0; r < rows; ++r) {
        double* yr = y.data() + r * (da + db);
        const double* ar = av.data() + r * da;
        const double* br = bv.data() + r * db;
        std::copy(ar, ar + da, yr);
        std::copy(br, br + db, yr + da);
    }
    const bool ng = t.needs_grad(a) || t.needs_grad(b);
    return t.make(std::move(y), ng, [a, b, da, db, rows](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        if (t2.needs_grad(a)) {
            Tensor& ga = t2.grad_buf(a);
            for (int64_t r = 0; r < rows; ++r) {
                const double* gr = gy.data() + r * (da + db);
                double* a_r = ga.data() + r * da;
                for (int64_t i = 0; i < da; ++i) a_r[i] += gr[i];
            }
        }
        if (t2.needs_grad(b)) {
            Tensor& gb = t2.grad_buf(b);
            for (int64_t r = 0; r < rows; ++r) {
                const double* gr = gy.data() + r * (da + db) + da;
                double* b_r = gb.data() + r * db;
                for (int64_t i = 0; i < db; ++i) b_r[i] += gr[i];
            }
        }
    });
}

inline NodeId slice_last(Tape& t, NodeId x, int64_t start, int64_t len) {
    const Tensor& xv = t.val(x);
    const int64_t d = xv.dim(xv.ndim() - 1);
    if (start < 0 || len <= 0 || start + len > d) throw ContractError("slice_last: range out of bounds");
    Shape shape = xv.shape();
    shape.back() = len;
    const int64_t rows = xv.size() / d;
    Tensor y(shape);
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = xv.data() + r * d + start;
        std::copy(xr, xr + len, y.data() + r * len);
    }
    const bool ng = t.needs_grad(x);
    return t.make(std::move(y), ng, [x, start, len, d, rows](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        Tensor& gx = t2.grad_buf(x);
        for (int64_t r = 0; r < rows; ++r) {
            const double* gr = gy.data() + r * len;
            double* xr = gx.data() + r * d + start;
            for (int64_t i = 0; i < len; ++i) xr[i] += gr[i];
        }
    });
}

/// Gathers rows (first axis). Backward scatter-adds, so repeated indices are fine.
inline NodeId gather_rows(Tape& t, NodeId x, std::vector<int64_t> idx) {
    const Tensor& xv = t.val(x);
    const int64_t n = xv.dim(0), row = xv.size() / n;
    for (int64_t i : idx) {
        if (i < 0 || i >= n) throw ContractError("gather_rows: index out of range");
    }
    Shape shape = xv.shape();
    shape[0] = static_cast<int64_t>(idx.size());
    Tensor y(shape);
    for (size_t r = 0; r < idx.size(); ++r) {
        const double* src = xv.data() + idx[r] * row;
        std::copy(src, src + row, y.data() + static_cast<int64_t>(r) * row);
    }
    const bool ng = t.needs_grad(x);
    return t.make(std::move(y), ng, [x, idx = std::move(idx), row](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        Tensor& gx = t2.grad_buf(x);
        for (size_t r = 0; r < idx.size(); ++r) {
            const double* gr = gy.data() + static_cast<int64_t>(r) * row;
            double* dst = gx.data() + idx[r] * row;
            for (int64_t i = 0; i < row; ++i) dst[i] += gr[i];
        }
    });
}

// ---------------------------------------------------------------- activations

inline NodeId relu(Tape& t, NodeId x) {
    const Tensor& xv = t.val(x);
    Tensor y(xv.shape());
    for (int64_t i = 0; i < y.size(); ++i) y[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    const bool ng = t.needs_grad(x);
    return t.make(std::move(y), ng, [x](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        const Tensor& yv = t2.val(self);
        Tensor& gx = t2.grad_buf(x);
        for (int64_t i = 0; i < gy.size(); ++i) {
            if (yv[i] > 0.0) gx[i] += gy[i];
        }
    });
}

inline NodeId elu(Tape& t, NodeId x, double alpha = 1.0) {
    const Tensor& xv = t.val(x);
    Tensor y(xv.shape());
    for (int64_t i = 0; i < y.size(); ++i) {
        y[i] = xv[i] > 0.0 ? xv[i] : alpha * std::expm1(xv[i]);
    }
    const bool ng = t.needs_grad(x);
    return t.make(std::move(y), ng, [x, alpha](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        const Tensor& yv = t2.val(self);
        Tensor& gx = t2.grad_buf(x);
        for (int64_t i = 0; i < gy.size(); ++i) {
            gx[i] += gy[i] * (yv[i] > 0.0 ? 1.0 : yv[i] + alpha);
        }
    });
}

inline double sigmoid_scalar(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

inline NodeId sigmoid(Tape& t, NodeId x) {
    const Tensor& xv = t.val(x);
    Tensor y(xv.shape());
    for (int64_t i = 0; i < y.size(); ++i) y[i] = sigmoid_scalar(xv[i]);
    const bool ng = t.needs_grad(x);
    return t.make(std::move(y), ng, [x](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        const Tensor& yv = t2.val(self);
        Tensor& gx = t2.grad_buf(x);
        for (int64_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * yv[i] * (1.0 - yv[i]);
    });
}

// ---------------------------------------------------------------- dense

/// y[N,O] = x[N,I] * w[I,O] + b[O]
inline NodeId dense(Tape& t, NodeId x, NodeId w, NodeId b) {
    const Tensor &xv = t.val(x), &wv = t.val(w), &bv = t.val(b);
    if (xv.ndim() != 2 || wv.ndim() != 2 || xv.dim(1) != wv.dim(0) || bv.size() != wv.dim(1)) {
        throw ContractError("dense: incompatible shapes " + shape_str(xv.shape()) + " x " +
                            shape_str(wv.shape()));
    }
    const int64_t n = xv.dim(0), in = wv.dim(0), out = wv.dim(1);
    Tensor y({n, out});
    for (int64_t r = 0; r < n; ++r) {
        double* yr = y.data() + r * out;
        std::copy(bv.data(), bv.data() + out, yr);
        const double* xr = xv.data() + r * in;
        for (int64_t i = 0; i < in; ++i) {
            const double xi = xr[i];
            const double* wr = wv.data() + i * out;
            for (int64_t o = 0; o < out; ++o) yr[o] += xi * wr[o];
        }
    }
    const bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
    return t.make(std::move(y), ng, [x, w, b, n, in, out](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        const Tensor &xv2 = t2.val(x), &wv2 = t2.val(w);
        if (t2.needs_grad(x)) {
            Tensor& gx = t2.grad_buf(x);
            for (int64_t r = 0; r < n; ++r) {
                const double* gr = gy.data() + r * out;
                double* xr = gx.data() + r * in;
                for (int64_t i = 0; i < in; ++i) {
                    const double* wr = wv2.data() + i * out;
                    double s = 0.0;
                    for (int64_t o = 0; o < out; ++o) s += gr[o] * wr[o];
                    xr[i] += s;
                }
            }
        }
        if (t2.needs_grad(w)) {
            Tensor& gw = t2.grad_buf(w);
            for (int64_t r = 0; r < n; ++r) {
                const double* gr = gy.data() + r * out;
                const double* xr = xv2.data() + r * in;
                for (int64_t i = 0; i < in; ++i) {
                    const double xi = xr[i];
                    double* wr = gw.data() + i * out;
                    for (int64_t o = 0; o < out; ++o) wr[o] += xi * gr[o];
                }
            }
        }
        if (t2.needs_grad(b)) {
            Tensor& gb = t2.grad_buf(b);
            for (int64_t r = 0; r < n; ++r) {
                const double* gr = gy.data() + r * out;
                for (int64_t o = 0; o < out; ++o) gb[o] += gr[o];
            }
        }
    });
}

// ---------------------------------------------------------------- convolution

/// x[N,H,W,Ci] * w[K,K,Ci,Co] + b, stride 1, symmetric zero padding.
inline NodeId conv2d(Tape& t, NodeId x, NodeId w, NodeId b, int64_t pad) {
    const Tensor &xv = t.val(x), &wv = t.val(w), &bv = t.val(b);
    if (xv.ndim() != 4 || wv.ndim() != 4 || wv.dim(0) != wv.dim(1) || xv.dim(3) != wv.dim(2)) {
        throw ContractError("conv2d: incompatible shapes " + shape_str(xv.shape()) + " * " +
                            shape_str(wv.shape()));
    }
    const int64_t n = xv.dim(0), h = xv.dim(1), wd = xv.dim(2), ci = xv.dim(3);
    const int64_t k = wv.dim(0), co = wv.dim(3);
    const int64_t ho = h + 2 * pad - k + 1, wo = wd + 2 * pad - k + 1;
    if (ho <= 0 || wo <= 0) throw ContractError("conv2d: kernel larger than padded input");
    Tensor y({n, ho, wo, co});
    for (int64_t in = 0; in < n; ++in) {
        const double* xb = xv.data() + in * h * wd * ci;
        double* yb = y.data() + in * ho * wo * co;
        for (int64_t oy = 0; oy < ho; ++oy) {
            for (int64_t ox = 0; ox < wo; ++ox) {
                double* yr = yb + (oy * wo + ox) * co;
                std::copy(bv.data(), bv.data() + co, yr);
                for (int64_t ky = 0; ky < k; ++ky) {
                    const int64_t iy = oy + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int64_t kx = 0; kx < k; ++kx) {
                        const int64_t ix = ox + kx - pad;
                        if (ix < 0 || ix >= wd) continue;
                        const double* xr = xb + (iy * wd + ix) * ci;
                        const double* wr = wv.data() + (ky * k + kx) * ci * co;
                        for (int64_t c = 0; c < ci; ++c) {
                            const double xc = xr[c];
                            const double* wc = wr + c * co;
                            for (int64_t o = 0; o < co; ++o) yr[o] += xc * wc[o];
                        }
                    }
                }
            }
        }
    }
    const bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
    return t.make(std::move(y), ng, [x, w, b, pad, n, h, wd, ci, k, co, ho, wo](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        const Tensor &xv2 = t2.val(x), &wv2 = t2.val(w);
        const bool gx_on = t2.needs_grad(x), gw_on = t2.needs_grad(w), gb_on = t2.needs_grad(b);
        Tensor* gx = gx_on ? &t2.grad_buf(x) : nullptr;
        Tensor* gw = gw_on ? &t2.grad_buf(w) : nullptr;
        Tensor* gb = gb_on ? &t2.grad_buf(b) : nullptr;
        for (int64_t in = 0; in < n; ++in) {
            const double* xb = xv2.data() + in * h * wd * ci;
            const double* gyb = gy.data() + in * ho * wo * co;
            double* gxb = gx_on ? gx->data() + in * h * wd * ci : nullptr;
            for (int64_t oy = 0; oy < ho; ++oy) {
                for (int64_t ox = 0; ox < wo; ++ox) {
                    const double* gr = gyb + (oy * wo + ox) * co;
                    if (gb_on) {
                        double* gbd = gb->data();
                        for (int64_t o = 0; o < co; ++o) gbd[o] += gr[o];
                    }
                    for (int64_t ky = 0; ky < k; ++ky) {
                        const int64_t iy = oy + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        for (int64_t kx = 0; kx < k; ++kx) {
                            const int64_t ix = ox + kx - pad;
                            if (ix < 0 || ix >= wd) continue;
                            const int64_t off = (iy * wd + ix) * ci;
                            const int64_t woff = (ky * k + kx) * ci * co;
                            if (gx_on) {
                                double* xr = gxb + off;
                                for (int64_t c = 0; c < ci; ++c) {
                                    const double* wc = wv2.data() + woff + c * co;
                                    double s = 0.0;
                                    for (int64_t o = 0; o < co; ++o) s += gr[o] * wc[o];
                                    xr[c] += s;
                                }
                            }
                            if (gw_on) {
                                const double* xr = xb + off;
                                for (int64_t c = 0; c < ci; ++c) {
                                    const double xc = xr[c];
                                    double* wc = gw->data() + woff + c * co;
                                    for (int64_t o = 0; o < co; ++o) wc[o] += xc * gr[o];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
}

/// Transposed convolution, stride 1: out H = H + K - 1 - 2*pad.
/// Computed in gather form so every output element is written once.
inline NodeId deconv2d(Tape& t, NodeId x, NodeId w, NodeId b, int64_t pad) {
    const Tensor &xv = t.val(x), &wv = t.val(w), &bv = t.val(b);
    if (xv.ndim() != 4 || wv.ndim() != 4 || wv.dim(0) != wv.dim(1) || xv.dim(3) != wv.dim(2)) {
        throw ContractError("deconv2d: incompatible shapes " + shape_str(xv.shape()) + " * " +
                            shape_str(wv.shape()));
    }
    const int64_t n = xv.dim(0), h = xv.dim(1), wd = xv.dim(2), ci = xv.dim(3);
    const int64_t k = wv.dim(0), co = wv.dim(3);
    const int64_t ho = h + k - 1 - 2 * pad, wo = wd + k - 1 - 2 * pad;
    if (ho <= 0 || wo <= 0) throw ContractError("deconv2d: empty output");
    Tensor y({n, ho, wo, co});
    for (int64_t in = 0; in < n; ++in) {
        const double* xb = xv.data() + in * h * wd * ci;
        double* yb = y.data() + in * ho * wo * co;
        for (int64_t oy = 0; oy < ho; ++oy) {
            for (int64_t ox = 0; ox < wo; ++ox) {
                double* yr = yb + (oy * wo + ox) * co;
                std::copy(bv.data(), bv.data() + co, yr);
                for (int64_t ky = 0; ky < k; ++ky) {
                    const int64_t iy = oy - ky + pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int64_t kx = 0; kx < k; ++kx) {
                        const int64_t ix = ox - kx + pad;
                        if (ix < 0 || ix >= wd) continue;
                        const double* xr = xb + (iy * wd + ix) * ci;
                        const double* wr = wv.data() + (ky * k + kx) * ci * co;
                        for (int64_t c = 0; c < ci; ++c) {
                            const double xc = xr[c];
                            const double* wc = wr + c * co;
                            for (int64_t o = 0; o < co; ++o) yr[o] += xc * wc[o];
                        }
                    }
                }
            }
        }
    }
    const bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
    return t.make(std::move(y), ng, [x, w, b, pad, n, h, wd, ci, k, co, ho, wo](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        const Tensor &xv2 = t2.val(x), &wv2 = t2.val(w);
        const bool gx_on = t2.needs_grad(x), gw_on = t2.needs_grad(w), gb_on = t2.needs_grad(b);
        Tensor* gx = gx_on ? &t2.grad_buf(x) : nullptr;
        Tensor* gw = gw_on ? &t2.grad_buf(w) : nullptr;
        if (gb_on) {
            Tensor& gb = t2.grad_buf(b);
            for (int64_t in = 0; in < n; ++in) {
                const double* gyb = gy.data() + in * ho * wo * co;
                for (int64_t p = 0; p < ho * wo; ++p) {
                    for (int64_t o = 0; o < co; ++o) gb[o] += gyb[p * co + o];
                }
            }
        }
        if (!gx_on && !gw_on) return;
        // Scatter relation: y[iy+ky-pad, ix+kx-pad] += x[iy,ix] * w[ky,kx].
        for (int64_t in = 0; in < n; ++in) {
            const double* xb = xv2.data() + in * h * wd * ci;
            const double* gyb = gy.data() + in * ho * wo * co;
            double* gxb = gx_on ? gx->data() + in * h * wd * ci : nullptr;
            for (int64_t iy = 0; iy < h; ++iy) {
                for (int64_t ix = 0; ix < wd; ++ix) {
                    const int64_t off = (iy * wd + ix) * ci;
                    for (int64_t ky = 0; ky < k; ++ky) {
                        const int64_t oy = iy + ky - pad;
                        if (oy < 0 || oy >= ho) continue;
                        for (int64_t kx = 0; kx < k; ++kx) {
                            const int64_t ox = ix + kx - pad;
                            if (ox < 0 || ox >= wo) continue;
                            const double* gr = gyb + (oy * wo + ox) * co;
                            const int64_t woff = (ky * k + kx) * ci * co;
                            if (gx_on) {
                                double* xr = gxb + off;
                                for (int64_t c = 0; c < ci; ++c) {
                                    const double* wc = wv2.data() + woff + c * co;
                                    double s = 0.0;
                                    for (int64_t o = 0; o < co; ++o) s += gr[o] * wc[o];
                                    xr[c] += s;
                                }
                            }
                            if (gw_on) {
                                const double* xr = xb + off;
                                for (int64_t c = 0; c < ci; ++c) {
                                    const double xc = xr[c];
                                    double* wc = gw->data() + woff + c * co;
                                    for (int64_t o = 0; o < co; ++o) wc[o] += xc * gr[o];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
}

// ---------------------------------------------------------------- pooling

/// 2x2 max pooling, stride 2. Requires even spatial dims. Ties resolve to the
/// first element in scan order, which keeps the backward routing deterministic.
inline NodeId maxpool2(Tape& t, NodeId x) {
    const Tensor& xv = t.val(x);
    if (xv.ndim() != 4 || xv.dim(1) % 2 != 0 || xv.dim(2) % 2 != 0) {
        throw ContractError("maxpool2: needs NHWC with even H,W, got " + shape_str(xv.shape()));
    }
    const int64_t n = xv.dim(0), h = xv.dim(1), wd = xv.dim(2), c = xv.dim(3);
    const int64_t ho = h / 2, wo = wd / 2;
    Tensor y({n, ho, wo, c});
    auto arg = std::make_shared<std::vector<uint8_t>>(static_cast<size_t>(y.size()));
    for (int64_t in = 0; in < n; ++in) {
        for (int64_t oy = 0; oy < ho; ++oy) {
            for (int64_t ox = 0; ox < wo; ++ox) {
                for (int64_t ch = 0; ch < c; ++ch) {
                    double best = -1e300;
                    uint8_t which = 0;
                    for (uint8_t q = 0; q < 4; ++q) {
                        const int64_t iy = 2 * oy + (q >> 1), ix = 2 * ox + (q & 1);
                        const double v = xv[((in * h + iy) * wd + ix) * c + ch];
                        if (v > best) {
                            best = v;
                            which = q;
                        }
                    }
                    const int64_t oi = ((in * ho + oy) * wo + ox) * c + ch;
                    y[oi] = best;
                    (*arg)[static_cast<size_t>(oi)] = which;
                }
            }
        }
    }
    const bool ng = t.needs_grad(x);
    return t.make(std::move(y), ng, [x, arg, n, h, wd, c, ho, wo](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        Tensor& gx = t2.grad_buf(x);
        for (int64_t in = 0; in < n; ++in) {
            for (int64_t oy = 0; oy < ho; ++oy) {
                for (int64_t ox = 0; ox < wo; ++ox) {
                    for (int64_t ch = 0; ch < c; ++ch) {
                        const int64_t oi = ((in * ho + oy) * wo + ox) * c + ch;
                        const uint8_t q = (*arg)[static_cast<size_t>(oi)];
                        const int64_t iy = 2 * oy + (q >> 1), ix = 2 * ox + (q & 1);
                        gx[((in * h + iy) * wd + ix) * c + ch] += gy[oi];
                    }
                }
            }
        }
    });
}

/// Nearest-neighbor 2x upsampling (the index-free "unpool").
inline NodeId upsample2(Tape& t, NodeId x) {
    const Tensor& xv = t.val(x);
    if (xv.ndim() != 4) throw ContractError("upsample2: needs NHWC, got " + shape_str(xv.shape()));
    const int64_t n = xv.dim(0), h = xv.dim(1), wd = xv.dim(2), c = xv.dim(3);
    Tensor y({n, 2 * h, 2 * wd, c});
    for (int64_t in = 0; in < n; ++in) {
        for (int64_t iy = 0; iy < h; ++iy) {
            for (int64_t ix = 0; ix < wd; ++ix) {
                const double* xr = xv.data() + ((in * h + iy) * wd + ix) * c;
                for (int64_t dy = 0; dy < 2; ++dy) {
                    for (int64_t dx = 0; dx < 2; ++dx) {
                        double* yr = y.data() + ((in * 2 * h + 2 * iy + dy) * 2 * wd + 2 * ix + dx) * c;
                        std::copy(xr, xr + c, yr);
                    }
                }
            }
        }
    }
    const bool ng = t.needs_grad(x);
    return t.make(std::move(y), ng, [x, n, h, wd, c](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        Tensor& gx = t2.grad_buf(x);
        for (int64_t in = 0; in < n; ++in) {
            for (int64_t iy = 0; iy < h; ++iy) {
                for (int64_t ix = 0; ix < wd; ++ix) {
                    double* xr = gx.data() + ((in * h + iy) * wd + ix) * c;
                    for (int64_t dy = 0; dy < 2; ++dy) {
                        for (int64_t dx = 0; dx < 2; ++dx) {
                            const double* yr =
                                gy.data() + ((in * 2 * h + 2 * iy + dy) * 2 * wd + 2 * ix + dx) * c;
                            for (int64_t ch = 0; ch < c; ++ch) xr[ch] += yr[ch];
                        }
                    }
                }
            }
        }
    });
}

// ---------------------------------------------------------------- batch norm

/// Per-feature batch norm over the last axis (features or NHWC channels).
/// Training mode uses batch statistics and updates the running buffers as a
/// forward side effect; eval mode reads the running buffers.
inline NodeId batchnorm(Tape& t, NodeId x, NodeId gamma, NodeId beta, Tensor& running_mean,
                        Tensor& running_var, bool training, double momentum = 0.9,
                        double eps = 1e-5) {
    const Tensor& xv = t.val(x);
    const int64_t c = xv.dim(xv.ndim() - 1);
    const int64_t m = xv.size() / c;
    if (t.val(gamma).size() != c || t.val(beta).size() != c || running_mean.size() != c ||
        running_var.size() != c) {
        throw ContractError("batchnorm: channel count mismatch");
    }
    const Tensor &gv = t.val(gamma), &bv = t.val(beta);
    Tensor mean({c}), var({c});
    if (training) {
        for (int64_t r = 0; r < m; ++r) {
            const double* xr = xv.data() + r * c;
            for (int64_t ch = 0; ch < c; ++ch) mean[ch] += xr[ch];
        }
        for (int64_t ch = 0; ch < c; ++ch) mean[ch] /= static_cast<double>(m);
        for (int64_t r = 0; r < m; ++r) {
            const double* xr = xv.data() + r * c;
            for (int64_t ch = 0; ch < c; ++ch) {
                const double d = xr[ch] - mean[ch];
                var[ch] += d * d;
            }
        }
        for (int64_t ch = 0; ch < c; ++ch) var[ch] /= static_cast<double>(m);
        for (int64_t ch = 0; ch < c; ++ch) {
            running_mean[ch] = momentum * running_mean[ch] + (1.0 - momentum) * mean[ch];
            running_var[ch] = momentum * running_var[ch] + (1.0 - momentum) * var[ch];
        }
    } else {
        mean = running_mean.clone();
        var = running_var.clone();
    }
    Tensor inv_std({c});
    for (int64_t ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + eps);
    Tensor xhat(xv.shape());
    Tensor y(xv.shape());
    for (int64_t r = 0; r < m; ++r) {
        const double* xr = xv.data() + r * c;
        double* hr = xhat.data() + r * c;
        double* yr = y.data() + r * c;
        for (int64_t ch = 0; ch < c; ++ch) {
            hr[ch] = (xr[ch] - mean[ch]) * inv_std[ch];
            yr[ch] = gv[ch] * hr[ch] + bv[ch];
        }
    }
    const bool ng = t.needs_grad(x) || t.needs_grad(gamma) || t.needs_grad(beta);
    return t.make(std::move(y), ng,
                  [x, gamma, beta, xhat, inv_std, training, m, c](Tape& t2, NodeId self) {
                      const Tensor& gy = t2.node(self).grad;
                      const Tensor& gv2 = t2.val(gamma);
                      if (t2.needs_grad(beta)) {
                          Tensor& gb = t2.grad_buf(beta);
                          for (int64_t r = 0; r < m; ++r) {
                              const double* gr = gy.data() + r * c;
                              for (int64_t ch = 0; ch < c; ++ch) gb[ch] += gr[ch];
                          }
                      }
                      if (t2.needs_grad(gamma)) {
                          Tensor& gg = t2.grad_buf(gamma);
                          for (int64_t r = 0; r < m; ++r) {
                              const double* gr = gy.data() + r * c;
                              const double* hr = xhat.data() + r * c;
                              for (int64_t ch = 0; ch < c; ++ch) gg[ch] += gr[ch] * hr[ch];
                          }
                      }
                      if (!t2.needs_grad(x)) return;
                      Tensor& gx = t2.grad_buf(x);
                      if (!training) {
                          for (int64_t r = 0; r < m; ++r) {
                              const double* gr = gy.data() + r * c;
                              double* xr = gx.data() + r * c;
                              for (int64_t ch = 0; ch < c; ++ch) {
                                  xr[ch] += gr[ch] * gv2[ch] * inv_std[ch];
                              }
                          }
                          return;
                      }
                      // Batch statistics contribute: gx = inv_std * gamma *
                      // (gy - mean(gy) - xhat * mean(gy*xhat)), means over rows.
                      Tensor sum_g({c}), sum_gh({c});
                      for (int64_t r = 0; r < m; ++r) {
                          const double* gr = gy.data() + r * c;
                          const double* hr = xhat.data() + r * c;
                          for (int64_t ch = 0; ch < c; ++ch) {
                              sum_g[ch] += gr[ch];
                              sum_gh[ch] += gr[ch] * hr[ch];
                          }
                      }
                      const double inv_m = 1.0 / static_cast<double>(m);
                      for (int64_t r = 0; r < m; ++r) {
                          const double* gr = gy.data() + r * c;
                          const double* hr = xhat.data() + r * c;
                          double* xr = gx.data() + r * c;
                          for (int64_t ch = 0; ch < c; ++ch) {
                              xr[ch] += gv2[ch] * inv_std[ch] *
                                        (gr[ch] - inv_m * sum_g[ch] - hr[ch] * inv_m * sum_gh[ch]);
                          }
                      }
                  });
}

// ---------------------------------------------------------------- reductions

inline NodeId mean_all(Tape& t, NodeId x) {
    const Tensor& xv = t.val(x);
    double s = 0.0;
    for (int64_t i = 0; i < xv.size(); ++i) s += xv[i];
    const int64_t n = xv.size();
    Tensor y = Tensor::scalar(s / static_cast<double>(n));
    const bool ng = t.needs_grad(x);
    return t.make(std::move(y), ng, [x, n](Tape& t2, NodeId self) {
        const double g = t2.node(self).grad[0] / static_cast<double>(n);
        Tensor& gx = t2.grad_buf(x);
        for (int64_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
}

/// Mean over every element of the squared difference.
inline NodeId mse_mean(Tape& t, NodeId a, NodeId b) {
    const Tensor &av = t.val(a), &bv = t.val(b);
    check_same_shape(av, bv, "mse_mean");
    const int64_t n = av.size();
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = av[i] - bv[i];
        s += d * d;
    }
    Tensor y = Tensor::scalar(s / static_cast<double>(n));
    const bool ng = t.needs_grad(a) || t.needs_grad(b);
    return t.make(std::move(y), ng, [a, b, n](Tape& t2, NodeId self) {
        const double g = 2.0 * t2.node(self).grad[0] / static_cast<double>(n);
        const Tensor &av2 = t2.val(a), &bv2 = t2.val(b);
        if (t2.needs_grad(a)) {
            Tensor& ga = t2.grad_buf(a);
            for (int64_t i = 0; i < n; ++i) ga[i] += g * (av2[i] - bv2[i]);
        }
        if (t2.needs_grad(b)) {
            Tensor& gb = t2.grad_buf(b);
            for (int64_t i = 0; i < n; ++i) gb[i] -= g * (av2[i] - bv2[i]);
        }
    });
}

/// Squared L2 distance summed within each row, then averaged over rows.
inline NodeId row_sse_mean(Tape& t, NodeId a, NodeId b) {
    const Tensor &av = t.val(a), &bv = t.val(b);
    check_same_shape(av, bv, "row_sse_mean");
    const int64_t rows = av.dim(0), n = av.size();
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = av[i] - bv[i];
        s += d * d;
    }
    Tensor y = Tensor::scalar(s / static_cast<double>(rows));
    const bool ng = t.needs_grad(a) || t.needs_grad(b);
    return t.make(std::move(y), ng, [a, b, rows, n](Tape& t2, NodeId self) {
        const double g = 2.0 * t2.node(self).grad[0] / static_cast<double>(rows);
        const Tensor &av2 = t2.val(a), &bv2 = t2.val(b);
        if (t2.needs_grad(a)) {
            Tensor& ga = t2.grad_buf(a);
            for (int64_t i = 0; i < n; ++i) ga[i] += g * (av2[i] - bv2[i]);
        }
        if (t2.needs_grad(b)) {
            Tensor& gb = t2.grad_buf(b);
            for (int64_t i = 0; i < n; ++i) gb[i] -= g * (av2[i] - bv2[i]);
        }
    });
}

// ---------------------------------------------------------------- soft heads

inline NodeId softmax_rows(Tape& t, NodeId x) {
    const Tensor& xv = t.val(x);
    const int64_t c = xv.dim(xv.ndim() - 1), rows = xv.size() / c;
    Tensor y(xv.shape());
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = xv.data() + r * c;
        double* yr = y.data() + r * c;
        double mx = xr[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, xr[j]);
        double s = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            s += yr[j];
        }
        for (int64_t j = 0; j < c; ++j) yr[j] /= s;
    }
    const bool ng = t.needs_grad(x);
    return t.make(std::move(y), ng, [x, c, rows](Tape& t2, NodeId self) {
        const Tensor& gy = t2.node(self).grad;
        const Tensor& yv = t2.val(self);
        Tensor& gx = t2.grad_buf(x);
        for (int64_t r = 0; r < rows; ++r) {
            const double* gr = gy.data() + r * c;
            const double* yr = yv.data() + r * c;
            double* xr = gx.data() + r * c;
            double dot = 0.0;
            for (int64_t j = 0; j < c; ++j) dot += gr[j] * yr[j];
            for (int64_t j = 0; j < c; ++j) xr[j] += yr[j] * (gr[j] - dot);
        }
    });
}

/// Softmax cross-entropy against integer labels, averaged over rows.
inline NodeId softmax_xent_mean(Tape& t, NodeId logits, std::vector<int> labels) {
    const Tensor& xv = t.val(logits);
    if (xv.ndim() != 2) throw ContractError("softmax_xent_mean: logits must be [N,C]");
    const int64_t n = xv.dim(0), c = xv.dim(1);
    if (static_cast<int64_t>(labels.size()) != n) {
        throw ContractError("softmax_xent_mean: label count mismatch");
    }
    for (int lb : labels) {
        if (lb < 0 || lb >= c) throw ContractError("softmax_xent_mean: label out of range");
    }
    auto probs = std::make_shared<Tensor>(Shape{n, c});
    double total = 0.0;
    for (int64_t r = 0; r < n; ++r) {
        const double* xr = xv.data() + r * c;
        double* pr = probs->data() + r * c;
        double mx = xr[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, xr[j]);
        double s = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            pr[j] = std::exp(xr[j] - mx);
            s += pr[j];
        }
        for (int64_t j = 0; j < c; ++j) pr[j] /= s;
        total += (std::log(s) + mx) - xr[labels[static_cast<size_t>(r)]];
    }
    Tensor y = Tensor::scalar(total / static_cast<double>(n));
    const bool ng = t.needs_grad(logits);
    return t.make(std::move(y), ng,
                  [logits, probs, labels = std::move(labels), n, c](Tape& t2, NodeId self) {
                      const double g = t2.node(self).grad[0] / static_cast<double>(n);
                      Tensor& gx = t2.grad_buf(logits);
                      for (int64_t r = 0; r < n; ++r) {
                          const double* pr = probs->data() + r * c;
                          double* xr = gx.data() + r * c;
                          for (int64_t j = 0; j < c; ++j) xr[j] += g * pr[j];
                          xr[labels[static_cast<size_t>(r)]] -= g;
                      }
                  });
}

/// Binary cross-entropy on a logit column against a constant target,
/// averaged over rows. Stable form: max(z,0) - z*t + log(1+exp(-|z|)).
inline NodeId bce_logit_mean(Tape& t, NodeId logits, double target) {
    const Tensor& xv = t.val(logits);
    const int64_t n = xv.size();
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double z = xv[i];
        total += std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
    }
    Tensor y = Tensor::scalar(total / static_cast<double>(n));
    const bool ng = t.needs_grad(logits);
    return t.make(std::move(y), ng, [logits, target, n](Tape& t2, NodeId self) {
        const double g = t2.node(self).grad[0] / static_cast<double>(n);
        const Tensor& xv2 = t2.val(logits);
        Tensor& gx = t2.grad_buf(logits);
        for (int64_t i = 0; i < n; ++i) gx[i] += g * (sigmoid_scalar(xv2[i]) - target);
    });
}

/// Mean Shannon entropy of probability rows, with the 0*log(0) := 0 convention.
inline NodeId entropy_probs_mean(Tape& t, NodeId probs) {
    const Tensor& pv = t.val(probs);
    const int64_t c = pv.dim(pv.ndim() - 1), rows = pv.size() / c;
    double total = 0.0;
    for (int64_t i = 0; i < pv.size(); ++i) {
        const double p = pv[i];
        if (p > 0.0) total -= p * std::log(p);
    }
    Tensor y = Tensor::scalar(total / static_cast<double>(rows));
    const bool ng = t.needs_grad(probs);
    return t.make(std::move(y), ng, [probs, rows](Tape& t2, NodeId self) {
        const double g = t2.node(self).grad[0] / static_cast<double>(rows);
        const Tensor& pv2 = t2.val(probs);
        Tensor& gp = t2.grad_buf(probs);
        for (int64_t i = 0; i < pv2.size(); ++i) {
            if (pv2[i] > 0.0) gp[i] -= g * (std::log(pv2[i]) + 1.0);
        }
    });
}

}  // namespace ops
}  // namespace fxda
