#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "esdc/core.hpp"

namespace esdc {

/// Declares how apply_split_combine maps a cube through a user function:
/// `input_dims` are consumed per call, every other dimension is looped over
/// ("split"), and the function emits a slice over `output_dims`.
struct ApplySpec {
    std::vector<std::string> input_dims;
    std::vector<std::pair<Dimension, Grid>> output_dims;
    std::size_t memory_budget_bytes = std::size_t{1} << 30;
    unsigned workers = 1;
};

/// Pure function from one input slice to one output slice. `in_shape` lists
/// the input-dimension extents in cube dimension order; the returned vector
/// must have exactly the declared output volume.
using SliceFunction = std::function<std::vector<double>(const double* in, const Index& in_shape)>;

/// Splits the cube along all dimensions not consumed by `f`, applies `f` to
/// every sub-cube, and combines results along the same split axes. The
/// combine order is fixed row-major over the split indices, so the output is
/// identical for any worker count. Work is scheduled per stored-chunk
/// projection onto the split axes when the memory budget allows, so each
/// chunk is decoded once per pass; under tight budgets it falls back to
/// slice-at-a-time reads.
DataCube apply_split_combine(const DataCube& cube, const SliceFunction& f, const ApplySpec& spec);

/// Peak engine-managed slice bytes since the last reset (windows, input
/// slices, and output staging; the result array itself is the product, not
/// working memory).
std::size_t engine_peak_slice_bytes();
void reset_engine_memory_stats();

namespace detail {

void track_alloc(std::size_t bytes);
void track_free(std::size_t bytes);

/// Instrumented scratch buffer; all engine working memory goes through this
/// so the budget contract is testable.
class TrackedBuffer {
  public:
    explicit TrackedBuffer(std::size_t count) : data_(count) { track_alloc(count * sizeof(double)); }
    ~TrackedBuffer() { track_free(data_.size() * sizeof(double)); }
    TrackedBuffer(const TrackedBuffer&) = delete;
    TrackedBuffer& operator=(const TrackedBuffer&) = delete;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::size_t size() const { return data_.size(); }

  private:
    std::vector<double> data_;
};

/// Runs tasks 0..count-1 on `workers` threads pulling from a shared counter.
void run_tasks(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& task);

}  // namespace detail

/// Result of a streaming reduction: one accumulator per surviving index,
/// row-major over the kept dimensions.
template <typename Acc>
struct StreamingReduction {
    std::vector<std::size_t> kept_dims;  // cube dimension indices that survive
    Index kept_shape;
    std::vector<Acc> cells;
};

/// One pass over every stored chunk, accumulating NA-skipped values into
/// per-surviving-index accumulators. Per-chunk partials are merged in fixed
/// chunk-key order, so results do not depend on the worker count.
/// `weight_of(full_index)` supplies the observation weight per cell.
template <typename Acc, typename WeightFn>
StreamingReduction<Acc> reduce_streaming(const DataCube& cube, std::size_t var,
                                         const std::vector<std::string>& dims,
                                         WeightFn&& weight_of, unsigned workers = 1) {
    const CubeSchema& schema = cube.schema();
    std::vector<bool> reduced(schema.dims.size(), false);
    for (const auto& name : dims) reduced[schema.require(name)] = true;

    StreamingReduction<Acc> out;
    for (std::size_t d = 0; d < schema.dims.size(); ++d)
        if (!reduced[d]) {
            out.kept_dims.push_back(d);
            out.kept_shape.push_back(schema.grids[d].size());
        }
    out.cells.assign(volume(out.kept_shape), Acc{});

    const Index full = schema.shape();
    const Index& chunks = cube.source()->chunk_shape();
    Index counts(full.size());
    for (std::size_t d = 0; d < full.size(); ++d)
        counts[d] = (full[d] + chunks[d] - 1) / chunks[d];
    const std::size_t n_tasks = volume(counts);

    struct Partial {
        Index kept_origin;
        Index kept_extent;
        std::vector<Acc> cells;
    };
    std::vector<Partial> partials(n_tasks);

    detail::run_tasks(n_tasks, workers, [&](std::size_t task) {
        const Index key = unravel(task, counts);
        Index origin(full.size()), extent(full.size());
        for (std::size_t d = 0; d < full.size(); ++d) {
            origin[d] = key[d] * chunks[d];
            extent[d] = std::min(chunks[d], full[d] - origin[d]);
        }
        Partial& p = partials[task];
        for (auto d : out.kept_dims) {
            p.kept_origin.push_back(origin[d]);
            p.kept_extent.push_back(extent[d]);
        }
        p.cells.assign(volume(p.kept_extent), Acc{});

        NdArray window = cube.read_window(var, origin, extent);
        Index local(full.size(), 0);
        Index full_index(full.size());
        Index kept_local(out.kept_dims.size());
        std::size_t flat = 0;
        do {
            const double x = window.data[flat++];
            if (!is_na(x)) {
                for (std::size_t d = 0; d < full.size(); ++d) full_index[d] = origin[d] + local[d];
                for (std::size_t k = 0; k < out.kept_dims.size(); ++k)
                    kept_local[k] = local[out.kept_dims[k]];
                p.cells[ravel(kept_local, p.kept_extent)].add(x, weight_of(full_index));
            }
        } while (next_index(local, extent));
    });

    // deterministic combine: chunk-key order regardless of completion order
    for (const Partial& p : partials) {
        Index local(p.kept_extent.size(), 0);
        if (p.cells.empty()) continue;
        std::size_t flat = 0;
        do {
            Index global(p.kept_extent.size());
            for (std::size_t k = 0; k < p.kept_extent.size(); ++k)
                global[k] = p.kept_origin[k] + local[k];
            out.cells[ravel(global, out.kept_shape)].merge(p.cells[flat++]);
        } while (next_index(local, p.kept_extent));
    }
    return out;
}

}  // namespace esdc
