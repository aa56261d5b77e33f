#pragma once

// Dense D-way tensors stored first-index-fastest, plus the index/shape
// algebra (linear index, reshape, permute, matricization, mode product).
//
// Public mode and index arguments are 1-based; everything below the API
// boundary is 0-based and goes through `zero_based_mode`.

#include "ttmera/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ttmera {

using Dims = std::vector<std::size_t>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Largest dense tensor any routine is allowed to materialize.
inline constexpr std::size_t kMaxDenseEntries = 100'000'000;

inline std::size_t product(std::span<const std::size_t> dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string dims_to_string(std::span<const std::size_t> dims) {
    std::string s = "[";
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (k) s += ",";
        s += std::to_string(dims[k]);
    }
    return s + "]";
}

// Converts a 1-based mode number into a 0-based position, checking range.
inline std::size_t zero_based_mode(std::size_t mode, std::size_t order) {
    if (mode < 1 || mode > order) {
        throw BoundsError("mode " + std::to_string(mode) + " outside 1.." + std::to_string(order));
    }
    return mode - 1;
}

inline void check_capacity(std::size_t entries, const char* what) {
    if (entries > kMaxDenseEntries) {
        throw CapacityError(std::string(what) + ": " + std::to_string(entries) +
                            " dense entries exceed the limit of " + std::to_string(kMaxDenseEntries));
    }
}

// 1-based multi-index [i_1 ... i_D].
struct MultiIndex {
    std::vector<std::size_t> indices;
};

// Linear position (1-based) of a multi-index: i_1 + sum_k (i_k - 1) prod_{l<k} I_l.
inline std::size_t linear_index(const MultiIndex& m, std::span<const std::size_t> dims) {
    if (m.indices.size() != dims.size()) {
        throw ShapeError("multi-index of length " + std::to_string(m.indices.size()) +
                         " against order " + std::to_string(dims.size()));
    }
    std::size_t pos = 0;
    std::size_t stride = 1;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        const std::size_t i = m.indices[k];
        if (i < 1 || i > dims[k]) {
            throw BoundsError("index " + std::to_string(i) + " out of range 1.." +
                              std::to_string(dims[k]) + " in mode " + std::to_string(k + 1));
        }
        pos += (i - 1) * stride;
        stride *= dims[k];
    }
    return pos + 1;
}

// Inverse of linear_index.
inline MultiIndex multi_index(std::size_t linear, std::span<const std::size_t> dims) {
    const std::size_t n = product(dims);
    if (linear < 1 || linear > n) {
        throw BoundsError("linear index " + std::to_string(linear) + " outside 1.." + std::to_string(n));
    }
    MultiIndex m{std::vector<std::size_t>(dims.size())};
    std::size_t rest = linear - 1;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        m.indices[k] = rest % dims[k] + 1;
        rest /= dims[k];
    }
    return m;
}

class DenseTensor {
public:
    DenseTensor() = default;

    // Zero tensor of the given shape.
    explicit DenseTensor(Dims dims) : dims_(std::move(dims)) {
        validate_dims();
        data_.assign(product(dims_), 0.0);
    }

    DenseTensor(Dims dims, std::vector<double> data) : dims_(std::move(dims)), data_(std::move(data)) {
        validate_dims();
        if (data_.size() != product(dims_)) {
            throw ShapeError("data length " + std::to_string(data_.size()) + " does not match dims " +
                             dims_to_string(dims_));
        }
        for (double v : data_) {
            if (!std::isfinite(v)) throw NumericError("non-finite tensor entry");
        }
    }

    static DenseTensor from_matrix(const Matrix& m) {
        return {Dims{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                std::vector<double>(m.data(), m.data() + m.size())};
    }

    static DenseTensor from_matrix(const Matrix& m, Dims dims) {
        if (product(dims) != static_cast<std::size_t>(m.size())) {
            throw ShapeError("matrix of " + std::to_string(m.size()) + " entries cannot take dims " +
                             dims_to_string(dims));
        }
        return {std::move(dims), std::vector<double>(m.data(), m.data() + m.size())};
    }

    const Dims& dims() const noexcept { return dims_; }
    std::size_t order() const noexcept { return dims_.size(); }
    std::size_t dim(std::size_t mode0) const { return dims_.at(mode0); }
    std::size_t size() const noexcept { return data_.size(); }
    std::span<const double> data() const noexcept { return data_; }

    // 1-based element access.
    double at(const MultiIndex& m) const { return data_[linear_index(m, dims_) - 1]; }

    // 0-based flat access.
    double operator[](std::size_t pos) const { return data_[pos]; }

    // View of the flat data as a rows x cols column-major matrix.
    Eigen::Map<const Matrix> as_matrix(std::size_t rows, std::size_t cols) const {
        if (rows * cols != data_.size()) {
            throw ShapeError("cannot view " + std::to_string(data_.size()) + " entries as " +
                             std::to_string(rows) + "x" + std::to_string(cols));
        }
        return {data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
    }

    Matrix to_matrix(std::size_t rows, std::size_t cols) const { return as_matrix(rows, cols); }

    std::vector<double> release() && { return std::move(data_); }

    friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

private:
    void validate_dims() const {
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            if (dims_[k] == 0) throw ShapeError("dimension " + std::to_string(k + 1) + " is zero");
        }
    }

    Dims dims_;
    std::vector<double> data_;
};

inline DenseTensor reshape(const DenseTensor& t, Dims new_dims) {
    if (product(new_dims) != t.size()) {
        throw ShapeError("reshape " + dims_to_string(t.dims()) + " -> " + dims_to_string(new_dims) +
                         " changes the element count");
    }
    return {std::move(new_dims), std::vector<double>(t.data().begin(), t.data().end())};
}

inline DenseTensor reshape(DenseTensor&& t, Dims new_dims) {
    if (product(new_dims) != t.size()) {
        throw ShapeError("reshape " + dims_to_string(t.dims()) + " -> " + dims_to_string(new_dims) +
                         " changes the element count");
    }
    return {std::move(new_dims), std::move(t).release()};
}

namespace detail {

// out.dims[k] = dims[p[k]] with 0-based p; gathers by odometer over the output.
inline std::vector<double> permute_data(std::span<const double> in, std::span<const std::size_t> dims,
                                        std::span<const std::size_t> p) {
    const std::size_t order = dims.size();
    std::vector<std::size_t> in_stride(order);
    std::size_t s = 1;
    for (std::size_t k = 0; k < order; ++k) {
        in_stride[k] = s;
        s *= dims[k];
    }
    std::vector<std::size_t> out_dims(order), step(order);
    for (std::size_t k = 0; k < order; ++k) {
        out_dims[k] = dims[p[k]];
        step[k] = in_stride[p[k]];
    }
    std::vector<double> out(in.size());
    if (in.empty()) return out;
    if (order == 0) {
        out[0] = in[0];
        return out;
    }
    std::vector<std::size_t> counter(order, 0);
    std::size_t src = 0;
    const std::size_t n0 = out_dims[0];
    const std::size_t step0 = step[0];
    for (std::size_t dst = 0; dst < out.size();) {
        for (std::size_t i = 0; i < n0; ++i) out[dst++] = in[src + i * step0];
        // advance modes >= 1
        std::size_t k = 1;
        for (; k < order; ++k) {
            src += step[k];
            if (++counter[k] < out_dims[k]) break;
            src -= step[k] * out_dims[k];
            counter[k] = 0;
        }
        if (k == order) break;
    }
    return out;
}

inline std::vector<std::size_t> checked_permutation(std::span<const std::size_t> p1, std::size_t order) {
    if (p1.size() != order) {
        throw ArgumentError("permutation of length " + std::to_string(p1.size()) + " for order " +
                            std::to_string(order));
    }
    std::vector<std::size_t> p(order);
    std::vector<bool> seen(order, false);
    for (std::size_t k = 0; k < order; ++k) {
        if (p1[k] < 1 || p1[k] > order || seen[p1[k] - 1]) {
            throw ArgumentError("not a permutation of 1.." + std::to_string(order));
        }
        seen[p1[k] - 1] = true;
        p[k] = p1[k] - 1;
    }
    return p;
}

// 0-based permutation for internal callers.
inline DenseTensor permute0(const DenseTensor& t, std::span<const std::size_t> p) {
    Dims out_dims(t.order());
    for (std::size_t k = 0; k < t.order(); ++k) out_dims[k] = t.dims()[p[k]];
    return {std::move(out_dims), permute_data(t.data(), t.dims(), p)};
}

// Sizes of the (before, at, after) split of a shape around mode0.
struct ModeSplit {
    std::size_t left, mid, right;
};

inline ModeSplit split_at(std::span<const std::size_t> dims, std::size_t mode0) {
    return {product(dims.first(mode0)), dims[mode0], product(dims.subspan(mode0 + 1))};
}

} // namespace detail

// Rearranges modes so that out.dims[k] = t.dims[p[k]] (1-based p).
inline DenseTensor permute(const DenseTensor& t, std::span<const std::size_t> p) {
    return detail::permute0(t, detail::checked_permutation(p, t.order()));
}

inline DenseTensor permute(const DenseTensor& t, std::initializer_list<std::size_t> p) {
    return permute(t, std::span<const std::size_t>(p.begin(), p.size()));
}

inline std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> p1) {
    auto p = detail::checked_permutation(p1, p1.size());
    std::vector<std::size_t> inv(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) inv[p[k]] = k + 1;
    return inv;
}

// Mode-d matricization: I_d x prod_{k != d} I_k, remaining modes in order.
inline Matrix unfold(const DenseTensor& t, std::size_t mode) {
    const std::size_t d = zero_based_mode(mode, t.order());
    const auto [left, mid, right] = detail::split_at(t.dims(), d);
    Matrix out(mid, left * right);
    const auto data = t.data();
    for (std::size_t r = 0; r < right; ++r) {
        Eigen::Map<const Matrix> slice(data.data() + r * left * mid, left, mid);
        out.middleCols(r * left, left) = slice.transpose();
    }
    return out;
}

// Inverse of unfold for a target shape.
inline DenseTensor fold(const Matrix& m, std::size_t mode, Dims dims) {
    const std::size_t d = zero_based_mode(mode, dims.size());
    const auto [left, mid, right] = detail::split_at(dims, d);
    if (static_cast<std::size_t>(m.rows()) != mid || static_cast<std::size_t>(m.cols()) != left * right) {
        throw ShapeError("fold: matrix shape does not match dims " + dims_to_string(dims));
    }
    std::vector<double> data(product(dims));
    for (std::size_t r = 0; r < right; ++r) {
        Eigen::Map<Matrix> slice(data.data() + r * left * mid, left, mid);
        slice = m.middleCols(r * left, left).transpose();
    }
    return {std::move(dims), std::move(data)};
}

// t x_d U with U of shape S_d x I_d.
inline DenseTensor mode_product(const DenseTensor& t, std::size_t mode, const Matrix& u) {
    const std::size_t d = zero_based_mode(mode, t.order());
    const auto [left, mid, right] = detail::split_at(t.dims(), d);
    if (static_cast<std::size_t>(u.cols()) != mid) {
        throw ShapeError("mode_product: matrix has " + std::to_string(u.cols()) + " columns, mode " +
                         std::to_string(mode) + " has dimension " + std::to_string(mid));
    }
    const std::size_t out_mid = u.rows();
    check_capacity(left * out_mid * right, "mode_product");
    Dims out_dims = t.dims();
    out_dims[d] = out_mid;
    std::vector<double> out(left * out_mid * right);
    const auto data = t.data();
    for (std::size_t r = 0; r < right; ++r) {
        Eigen::Map<const Matrix> in_slice(data.data() + r * left * mid, left, mid);
        Eigen::Map<Matrix> out_slice(out.data() + r * left * out_mid, left, out_mid);
        out_slice.noalias() = in_slice * u.transpose();
    }
    return {std::move(out_dims), std::move(out)};
}

inline double frobenius_norm(const DenseTensor& t) {
    const auto d = t.data();
    return Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(d.size())).norm();
}

inline DenseTensor operator-(const DenseTensor& a, const DenseTensor& b) {
    if (a.dims() != b.dims()) throw ShapeError("subtraction of tensors with different dims");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return {a.dims(), std::move(out)};
}

inline double relative_error(const DenseTensor& reference, const DenseTensor& approx) {
    const double ref = frobenius_norm(reference);
    const double diff = frobenius_norm(reference - approx);
    return ref > 0 ? diff / ref : diff;
}

} // namespace ttmera
