#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

// Straight-line scalar reference computations for the loss values, written
// against the printed formulas and kept free of the library's tensor/tape
// machinery so both sides can disagree.

namespace oracles {

/// Mean binary cross-entropy of sigmoid(logits) against one fixed target.
inline double bce_mean(const std::vector<double>& logits, double target) {
    double total = 0;
    for (double z : logits) {
        double p = 1.0 / (1.0 + std::exp(-z));
        total += -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
    }
    return total / double(logits.size());
}

inline std::vector<double> softmax_row(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double denom = 0;
    std::vector<double> out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) denom += std::exp(logits[i] - mx);
    for (size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - mx) / denom;
    return out;
}

/// Mean softmax cross-entropy over rows of a [n, c] logit matrix.
inline double xent_mean(const std::vector<std::vector<double>>& logits,
                        const std::vector<int>& labels) {
    double total = 0;
    for (size_t r = 0; r < logits.size(); ++r) {
        std::vector<double> p = softmax_row(logits[r]);
        total += -std::log(p[size_t(labels[r])]);
    }
    return total / double(logits.size());
}

/// Mean over every element of the squared difference.
inline double mse_mean(const std::vector<double>& a, const std::vector<double>& b) {
    double total = 0;
    for (size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
    return total / double(a.size());
}

/// Per-row sum of squared differences, then mean over rows.
inline double row_sse_mean(const std::vector<std::vector<double>>& a,
                           const std::vector<std::vector<double>>& b) {
    double total = 0;
    for (size_t r = 0; r < a.size(); ++r) {
        for (size_t i = 0; i < a[r].size(); ++i) {
            total += (a[r][i] - b[r][i]) * (a[r][i] - b[r][i]);
        }
    }
    return total / double(a.size());
}

/// Mean Shannon entropy over rows of probabilities, 0·ln0 := 0.
inline double entropy_mean(const std::vector<std::vector<double>>& probs) {
    double total = 0;
    for (const auto& row : probs) {
        for (double p : row) {
            if (p > 0) total += -p * std::log(p);
        }
    }
    return total / double(probs.size());
}

}  // namespace oracles
