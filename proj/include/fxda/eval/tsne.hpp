#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fxda/core/error.hpp"
#include "fxda/core/rng.hpp"
#include "fxda/core/tensor.hpp"
#include "fxda/io/metrics.hpp"

namespace fxda {

namespace detail {

// Conditional gaussian P with per-row bandwidth found by bisecting the
// entropy to log(perplexity). Reference algorithm, dense O(n^2).
inline std::vector<double> tsne_affinities(const std::vector<double>& d2, int64_t n,
                                           double perplexity) {
    std::vector<double> p(static_cast<size_t>(n * n), 0.0);
    const double target = std::log(perplexity);
    std::vector<double> row(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        double beta = 1.0, lo = -1e300, hi = 1e300;
        for (int iter = 0; iter < 64; ++iter) {
            double sum = 0.0;
            for (int64_t j = 0; j < n; ++j) {
                double v = j == i ? 0.0 : std::exp(-d2[static_cast<size_t>(i * n + j)] * beta);
                row[static_cast<size_t>(j)] = v;
                sum += v;
            }
            if (sum <= 0.0) sum = 1e-300;
            double h = 0.0;  // Shannon entropy of the row distribution
            for (int64_t j = 0; j < n; ++j) {
                const double v = row[static_cast<size_t>(j)] / sum;
                if (v > 1e-300) h -= v * std::log(v);
            }
            const double diff = h - target;
            if (std::abs(diff) < 1e-7) break;
            if (diff > 0) {  // too flat, sharpen
                lo = beta;
                beta = hi > 1e299 ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = lo < -1e299 ? beta * 0.5 : 0.5 * (beta + lo);
            }
        }
        double sum = 0.0;
        for (int64_t j = 0; j < n; ++j) sum += row[static_cast<size_t>(j)];
        if (sum <= 0.0) sum = 1e-300;
        for (int64_t j = 0; j < n; ++j)
            p[static_cast<size_t>(i * n + j)] = row[static_cast<size_t>(j)] / sum;
    }
    return p;
}

}  // namespace detail

/// Dense t-SNE to two dimensions: perplexity-calibrated affinities, early
/// exaggeration, momentum descent with per-entry gains. Deterministic under
/// the seed.
inline Tensor embed_2d(const Tensor& features, double perplexity, uint64_t seed) {
    if (features.ndim() != 2) throw ContractError("embed_2d: features must be [n,d]");
    const int64_t n = features.dim(0), d = features.dim(1);
    if (!(perplexity > 0)) throw ParameterError("embed_2d: perplexity must be positive");
    if (n < 4 * perplexity)
        throw ParameterError("embed_2d: need at least 4*perplexity = " +
                             std::to_string(static_cast<int64_t>(4 * perplexity)) +
                             " samples, got " + std::to_string(n));

    // collapse exact duplicate rows: the descent runs on unique rows and the
    // duplicates inherit their representative's point afterwards
    std::vector<int64_t> owner(static_cast<size_t>(n));
    std::vector<int64_t> uniq;
    for (int64_t i = 0; i < n; ++i) {
        const double* a = features.data() + i * d;
        int64_t found = -1;
        for (size_t u = 0; u < uniq.size() && found < 0; ++u) {
            const double* b = features.data() + uniq[u] * d;
            bool same = true;
            for (int64_t k = 0; k < d && same; ++k) same = a[k] == b[k];
            if (same) found = static_cast<int64_t>(u);
        }
        if (found < 0) {
            found = static_cast<int64_t>(uniq.size());
            uniq.push_back(i);
        }
        owner[static_cast<size_t>(i)] = found;
    }
    const int64_t m = static_cast<int64_t>(uniq.size());
    if (m == 1) return Tensor({n, 2});  // all rows identical: one point at origin

    std::vector<double> d2(static_cast<size_t>(m * m), 0.0);
    for (int64_t i = 0; i < m; ++i) {
        const double* a = features.data() + uniq[static_cast<size_t>(i)] * d;
        for (int64_t j = i + 1; j < m; ++j) {
            const double* b = features.data() + uniq[static_cast<size_t>(j)] * d;
            double s = 0.0;
            for (int64_t k = 0; k < d; ++k) {
                const double diff = a[k] - b[k];
                s += diff * diff;
            }
            d2[static_cast<size_t>(i * m + j)] = s;
            d2[static_cast<size_t>(j * m + i)] = s;
        }
    }

    std::vector<double> p = detail::tsne_affinities(d2, m, perplexity);
    for (int64_t i = 0; i < m; ++i) {  // symmetrize and normalize to sum 1
        for (int64_t j = i + 1; j < m; ++j) {
            const double v = (p[static_cast<size_t>(i * m + j)] +
                              p[static_cast<size_t>(j * m + i)]) /
                             (2.0 * static_cast<double>(m));
            p[static_cast<size_t>(i * m + j)] = v;
            p[static_cast<size_t>(j * m + i)] = v;
        }
        p[static_cast<size_t>(i * m + i)] = 0.0;
    }
    for (double& v : p) v = std::max(v, 1e-12);

    Rng rng(seed);
    const int64_t kIters = 1000, kExaggerateUntil = 250;
    const double kExaggeration = 12.0;
    // learning rate follows the m/(exaggeration*4) auto rule with a floor
    const double kEta = std::max(static_cast<double>(m) / (kExaggeration * 4.0), 50.0);
    std::vector<double> y(static_cast<size_t>(m * 2));
    for (double& v : y) v = rng.normal() * 1e-4;
    std::vector<double> vel(static_cast<size_t>(m * 2), 0.0);
    std::vector<double> gain(static_cast<size_t>(m * 2), 1.0);
    std::vector<double> num(static_cast<size_t>(m * m), 0.0);
    std::vector<double> grad(static_cast<size_t>(m * 2), 0.0);

    for (int64_t it = 0; it < kIters; ++it) {
        const double ex = it < kExaggerateUntil ? kExaggeration : 1.0;
        const double momentum = it < kExaggerateUntil ? 0.5 : 0.8;

        double qsum = 0.0;
        for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = i + 1; j < m; ++j) {
                const double dx = y[static_cast<size_t>(2 * i)] - y[static_cast<size_t>(2 * j)];
                const double dy =
                    y[static_cast<size_t>(2 * i + 1)] - y[static_cast<size_t>(2 * j + 1)];
                const double v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[static_cast<size_t>(i * m + j)] = v;
                num[static_cast<size_t>(j * m + i)] = v;
                qsum += 2.0 * v;
            }
        }
        if (qsum < 1e-300) qsum = 1e-300;

        std::fill(grad.begin(), grad.end(), 0.0);
        for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = 0; j < m; ++j) {
                if (j == i) continue;
                const double nij = num[static_cast<size_t>(i * m + j)];
                const double q = std::max(nij / qsum, 1e-12);
                const double mult = (ex * p[static_cast<size_t>(i * m + j)] - q) * nij;
                grad[static_cast<size_t>(2 * i)] +=
                    4.0 * mult *
                    (y[static_cast<size_t>(2 * i)] - y[static_cast<size_t>(2 * j)]);
                grad[static_cast<size_t>(2 * i + 1)] +=
                    4.0 * mult *
                    (y[static_cast<size_t>(2 * i + 1)] - y[static_cast<size_t>(2 * j + 1)]);
            }
        }

        for (size_t k = 0; k < y.size(); ++k) {
            const bool same_dir = (grad[k] > 0.0) == (vel[k] > 0.0);
            gain[k] = same_dir ? gain[k] * 0.8 : gain[k] + 0.2;
            gain[k] = std::max(gain[k], 0.01);
            vel[k] = momentum * vel[k] - kEta * gain[k] * grad[k];
            y[k] += vel[k];
        }
        double cx = 0.0, cy = 0.0;
        for (int64_t i = 0; i < m; ++i) {
            cx += y[static_cast<size_t>(2 * i)];
            cy += y[static_cast<size_t>(2 * i + 1)];
        }
        cx /= static_cast<double>(m);
        cy /= static_cast<double>(m);
        for (int64_t i = 0; i < m; ++i) {
            y[static_cast<size_t>(2 * i)] -= cx;
            y[static_cast<size_t>(2 * i + 1)] -= cy;
        }
    }

    Tensor out({n, 2});
    for (int64_t i = 0; i < n; ++i) {
        out[2 * i] = y[static_cast<size_t>(2 * owner[static_cast<size_t>(i)])];
        out[2 * i + 1] = y[static_cast<size_t>(2 * owner[static_cast<size_t>(i)] + 1)];
    }
    return out;
}

/// Labeled point cloud export for 2D embedding figures.
inline void write_embedding_tsv(const std::string& path, const Tensor& points,
                                const std::vector<std::string>& domains,
                                const std::vector<int>& classes,
                                const std::vector<std::string>& parts) {
    if (points.ndim() != 2 || points.dim(1) != 2)
        throw ContractError("write_embedding_tsv: points must be [n,2]");
    const size_t n = static_cast<size_t>(points.dim(0));
    if (domains.size() != n || classes.size() != n || parts.size() != n)
        throw ContractError("write_embedding_tsv: label vectors must match point count");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IntegrityError("cannot open " + path + " for writing");
    out << "x\ty\tdomain\tclass\tpart\n";
    for (size_t i = 0; i < n; ++i) {
        out << g17(points[static_cast<int64_t>(2 * i)]) << '\t'
            << g17(points[static_cast<int64_t>(2 * i + 1)]) << '\t' << domains[i] << '\t'
            << classes[i] << '\t' << parts[i] << '\n';
    }
    if (!out) throw IntegrityError("short write to " + path);
}

}  // namespace fxda
