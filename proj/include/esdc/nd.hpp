#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "esdc/error.hpp"

namespace esdc {

using Index = std::vector<std::size_t>;

inline std::size_t volume(std::span<const std::size_t> shape) {
    std::size_t v = 1;
    for (auto s : shape) v *= s;
    return v;
}

inline std::vector<std::size_t> row_major_strides(std::span<const std::size_t> shape) {
    std::vector<std::size_t> strides(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
    return strides;
}

inline std::size_t ravel(std::span<const std::size_t> idx, std::span<const std::size_t> shape) {
    std::size_t flat = 0;
    for (std::size_t i = 0; i < shape.size(); ++i) flat = flat * shape[i] + idx[i];
    return flat;
}

inline Index unravel(std::size_t flat, std::span<const std::size_t> shape) {
    Index idx(shape.size(), 0);
    for (std::size_t i = shape.size(); i-- > 0;) {
        idx[i] = flat % shape[i];
        flat /= shape[i];
    }
    return idx;
}

/// Advances a row-major multi-index within `shape`; returns false after the last one.
inline bool next_index(Index& idx, std::span<const std::size_t> shape) {
    for (std::size_t i = shape.size(); i-- > 0;) {
        if (++idx[i] < shape[i]) return true;
        idx[i] = 0;
    }
    return false;
}

/// Dense row-major array of doubles. NA cells hold IEEE NaN.
struct NdArray {
    Index shape;
    std::vector<double> data;

    NdArray() = default;
    explicit NdArray(Index s, double fill = 0.0)
        : shape(std::move(s)), data(volume(shape), fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }

    double& at(std::span<const std::size_t> idx) { return data[ravel(idx, shape)]; }
    double at(std::span<const std::size_t> idx) const { return data[ravel(idx, shape)]; }
};

inline constexpr double kNa = std::numeric_limits<double>::quiet_NaN();

inline bool is_na(double x) { return x != x; }

/// Equality that treats NaN == NaN as true (cube payload comparison).
inline bool value_equal(double a, double b) {
    return (is_na(a) && is_na(b)) || a == b;
}

/// Copies the `shape`-sized window starting at `origin` out of a full array.
void copy_window_out(const double* full, std::span<const std::size_t> full_shape,
                     std::span<const std::size_t> origin, std::span<const std::size_t> shape,
                     double* out);

/// Writes a dense window into a full array at `origin`.
void copy_window_in(double* full, std::span<const std::size_t> full_shape,
                    std::span<const std::size_t> origin, std::span<const std::size_t> shape,
                    const double* values);

}  // namespace esdc
