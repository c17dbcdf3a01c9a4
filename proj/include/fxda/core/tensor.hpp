#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fxda/core/error.hpp"

namespace fxda {

using Shape = std::vector<int64_t>;

inline int64_t shape_count(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

/// Dense row-major double tensor. Copies are shallow (data is shared);
/// use clone() for an independent buffer. All ops allocate fresh outputs,
/// so sharing is only observable where it is intended (parameter/grad
/// aliasing inside the tape).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape)
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<double>>(static_cast<size_t>(shape_count(shape_)), 0.0)) {}

    Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
        if (static_cast<int64_t>(values.size()) != shape_count(shape_)) {
            throw ContractError("tensor literal size does not match shape " + shape_str(shape_));
        }
        data_ = std::make_shared<std::vector<double>>(std::move(values));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, double v) {
        Tensor t(std::move(shape));
        std::fill(t.data_->begin(), t.data_->end(), v);
        return t;
    }

    static Tensor scalar(double v) { return full({1}, v); }

    bool empty() const { return !data_; }
    const Shape& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

    double* data() { return data_->data(); }
    const double* data() const { return data_->data(); }

    double& operator[](int64_t i) { return (*data_)[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }

    void fill(double v) { std::fill(data_->begin(), data_->end(), v); }

    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        if (data_) t.data_ = std::make_shared<std::vector<double>>(*data_);
        return t;
    }

    /// Same buffer, new shape. Element count must match.
    Tensor reshaped(Shape shape) const {
        if (shape_count(shape) != size()) {
            throw ContractError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                                " changes element count");
        }
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool shares_data(const Tensor& o) const { return data_ && data_ == o.data_; }

    bool all_finite() const {
        for (double v : *data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

private:
    Shape shape_;
    std::shared_ptr<std::vector<double>> data_;
};

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (int64_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return false;
    }
    return true;
}

}  // namespace fxda
