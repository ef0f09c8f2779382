#include "esdc/nd.hpp"

#include <cstring>

namespace esdc {

namespace {

// Visits each contiguous row of the window: f(full_offset, window_offset, row_len).
void for_each_row(std::span<const std::size_t> full_shape, std::span<const std::size_t> origin,
                  std::span<const std::size_t> shape,
                  const std::function<void(std::size_t, std::size_t, std::size_t)>& f) {
    if (volume(shape) == 0) return;
    const std::size_t nd = full_shape.size();
    if (nd == 0) {
        f(0, 0, 1);
        return;
    }
    const auto full_strides = row_major_strides(full_shape);
    const auto win_strides = row_major_strides(shape);
    const std::size_t row_len = shape[nd - 1];
    Index idx(nd > 1 ? nd - 1 : 0, 0);
    while (true) {
        std::size_t full_flat = origin[nd - 1];
        std::size_t win_flat = 0;
        for (std::size_t d = 0; d + 1 < nd; ++d) {
            full_flat += (origin[d] + idx[d]) * full_strides[d];
            win_flat += idx[d] * win_strides[d];
        }
        f(full_flat, win_flat, row_len);
        if (!next_index(idx, shape.first(idx.size()))) break;
    }
}

}  // namespace

void copy_window_out(const double* full, std::span<const std::size_t> full_shape,
                     std::span<const std::size_t> origin, std::span<const std::size_t> shape,
                     double* out) {
    for_each_row(full_shape, origin, shape, [&](std::size_t src, std::size_t dst, std::size_t n) {
        std::memcpy(out + dst, full + src, n * sizeof(double));
    });
}

void copy_window_in(double* full, std::span<const std::size_t> full_shape,
                    std::span<const std::size_t> origin, std::span<const std::size_t> shape,
                    const double* values) {
    for_each_row(full_shape, origin, shape, [&](std::size_t dst, std::size_t src, std::size_t n) {
        std::memcpy(full + dst, values + src, n * sizeof(double));
    });
}

}  // namespace esdc
