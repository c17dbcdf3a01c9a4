#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fxda/core/error.hpp"

namespace fxda {

/// Deterministic random source. Wraps std::mt19937_64 (whose raw output is
/// specified by the standard) and derives all distributions from the raw
/// stream itself, so sequences are identical across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    int64_t below(int64_t n) {
        if (n <= 0) throw ContractError("rng.below: n must be positive");
        // Rejection sampling keeps the draw unbiased.
        const uint64_t un = static_cast<uint64_t>(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return static_cast<int64_t>(r % un);
    }

    /// Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Fisher-Yates shuffle.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(below(i + 1))]);
        }
    }

    std::vector<int64_t> permutation(int64_t n) {
        std::vector<int64_t> p(static_cast<size_t>(n));
        std::iota(p.begin(), p.end(), 0);
        shuffle(p);
        return p;
    }

    /// Derive an independent child stream; mixing keeps distinct indices apart.
    Rng fork(uint64_t stream_index) {
        uint64_t s = next_u64();
        s ^= 0x9e3779b97f4a7c15ull * (stream_index + 1);
        return Rng(s);
    }

    /// Serialized engine + cache state; round trips exactly.
    std::string save_state() const {
        std::ostringstream os;
        os << engine_ << ' ' << (have_cached_ ? 1 : 0) << ' ';
        os.precision(17);
        os << cached_;
        return os.str();
    }

    void restore_state(const std::string& s) {
        std::istringstream is(s);
        int flag = 0;
        is >> engine_ >> flag >> cached_;
        have_cached_ = flag != 0;
    }

    bool operator==(const Rng& o) const {
        return engine_ == o.engine_ && have_cached_ == o.have_cached_ &&
               (!have_cached_ || cached_ == o.cached_);
    }

private:
    std::mt19937_64 engine_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace fxda
