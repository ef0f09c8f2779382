#include "esdc/engine.hpp"

#include <algorithm>
#include <mutex>

namespace esdc {

namespace {

std::atomic<std::size_t> g_current_bytes{0};
std::atomic<std::size_t> g_peak_bytes{0};

void bump_peak(std::size_t current) {
    std::size_t peak = g_peak_bytes.load(std::memory_order_relaxed);
    while (current > peak &&
           !g_peak_bytes.compare_exchange_weak(peak, current, std::memory_order_relaxed)) {
    }
}

}  // namespace

std::size_t engine_peak_slice_bytes() { return g_peak_bytes.load(); }

void reset_engine_memory_stats() {
    g_current_bytes.store(0);
    g_peak_bytes.store(0);
}

namespace detail {

void track_alloc(std::size_t bytes) {
    bump_peak(g_current_bytes.fetch_add(bytes, std::memory_order_relaxed) + bytes);
}

void track_free(std::size_t bytes) { g_current_bytes.fetch_sub(bytes, std::memory_order_relaxed); }

void run_tasks(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& task) {
    workers = std::max(1u, workers);
    if (workers == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::mutex error_mutex;
    std::exception_ptr error;
    const unsigned n = static_cast<unsigned>(std::min<std::size_t>(workers, count));
    for (unsigned w = 0; w < n; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

namespace {

std::string dims_to_json(const std::vector<std::string>& names) {
    std::string s = "[";
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) s += ",";
        s += "\"" + names[i] + "\"";
    }
    return s + "]";
}

}  // namespace

DataCube apply_split_combine(const DataCube& cube, const SliceFunction& f, const ApplySpec& spec) {
    const CubeSchema& schema = cube.schema();
    std::vector<bool> consumed(schema.dims.size(), false);
    for (const auto& name : spec.input_dims) consumed[schema.require(name)] = true;

    std::vector<std::size_t> split_dims, input_dims;
    for (std::size_t d = 0; d < schema.dims.size(); ++d)
        (consumed[d] ? input_dims : split_dims).push_back(d);

    const Index full = schema.shape();
    Index loop_shape, in_shape;
    for (auto d : split_dims) loop_shape.push_back(full[d]);
    for (auto d : input_dims) in_shape.push_back(full[d]);

    Index out_shape;
    for (const auto& [dim, grid] : spec.output_dims) {
        validate_grid(grid);
        out_shape.push_back(grid.size());
    }

    const std::size_t in_slice = volume(in_shape);
    const std::size_t out_slice = volume(out_shape);
    const std::size_t loop_count = volume(loop_shape);
    const std::size_t per_slice_bytes = (in_slice + out_slice) * sizeof(double);
    if (per_slice_bytes > spec.memory_budget_bytes)
        throw Error(ErrorCode::BudgetTooSmall,
                    "budget holds less than one input and one output slice (" +
                        std::to_string(per_slice_bytes) + " bytes needed)");

    // result schema: split dims in cube order, then the declared output dims
    CubeSchema out_schema;
    out_schema.variables = schema.variables;
    for (auto d : split_dims) {
        out_schema.dims.push_back(schema.dims[d]);
        out_schema.grids.push_back(schema.grids[d]);
        out_schema.chunk_shape.push_back(std::min(schema.chunk_shape[d], full[d]));
    }
    for (const auto& [dim, grid] : spec.output_dims) {
        out_schema.dims.push_back(dim);
        out_schema.grids.push_back(grid);
        out_schema.chunk_shape.push_back(grid.size());
    }

    const std::size_t nvar = schema.variables.size();
    std::vector<double> result(nvar * loop_count * out_slice, kNa);

    // tasks follow the stored chunking projected onto the split axes so each
    // chunk is decoded once per pass
    const Index& chunk_shape = cube.source()->chunk_shape();
    Index task_counts, task_extent;
    for (auto d : split_dims) {
        task_counts.push_back((full[d] + chunk_shape[d] - 1) / chunk_shape[d]);
        task_extent.push_back(chunk_shape[d]);
    }
    const std::size_t n_tasks = std::max<std::size_t>(1, volume(task_counts));

    std::size_t max_group = 1;
    for (std::size_t i = 0; i < task_extent.size(); ++i)
        max_group *= std::min(task_extent[i], loop_shape[i]);
    const std::size_t group_bytes = max_group * in_slice * sizeof(double) + per_slice_bytes;

    unsigned workers = std::max(1u, spec.workers);
    bool grouped = true;
    if (group_bytes <= spec.memory_budget_bytes) {
        workers = static_cast<unsigned>(
            std::min<std::size_t>(workers, spec.memory_budget_bytes / group_bytes));
    } else {
        grouped = false;  // trade throughput for memory: slice-at-a-time reads
        workers = static_cast<unsigned>(
            std::min<std::size_t>(workers, spec.memory_budget_bytes / per_slice_bytes));
    }
    workers = std::max(1u, workers);

    detail::run_tasks(n_tasks * nvar, workers, [&](std::size_t task) {
        const std::size_t var = task / n_tasks;
        const Index task_key = unravel(task % n_tasks, task_counts);

        Index group_origin(loop_shape.size()), group_extent(loop_shape.size());
        for (std::size_t i = 0; i < loop_shape.size(); ++i) {
            group_origin[i] = task_key[i] * task_extent[i];
            group_extent[i] = std::min(task_extent[i], loop_shape[i] - group_origin[i]);
        }

        // window over (task's split range) x (full input dims), cube order
        Index win_origin(full.size(), 0), win_shape(full.size());
        for (std::size_t i = 0; i < split_dims.size(); ++i) {
            win_origin[split_dims[i]] = group_origin[i];
            win_shape[split_dims[i]] = group_extent[i];
        }
        for (auto d : input_dims) win_shape[d] = full[d];

        std::unique_ptr<detail::TrackedBuffer> window;
        if (grouped) {
            window = std::make_unique<detail::TrackedBuffer>(volume(win_shape));
            cube.source()->read_window(var, win_origin, win_shape, window->data());
        }

        detail::TrackedBuffer slice(in_slice);
        Index local(loop_shape.size(), 0);
        do {
            Index loop_index(loop_shape.size());
            for (std::size_t i = 0; i < loop_shape.size(); ++i)
                loop_index[i] = group_origin[i] + local[i];

            if (grouped) {
                // gather the input slice out of the window
                Index s_origin(full.size(), 0), s_shape(full.size(), 1);
                for (std::size_t i = 0; i < split_dims.size(); ++i)
                    s_origin[split_dims[i]] = local[i];
                for (auto d : input_dims) s_shape[d] = full[d];
                copy_window_out(window->data(), win_shape, s_origin, s_shape, slice.data());
            } else {
                Index s_origin(full.size(), 0), s_shape(full.size(), 1);
                for (std::size_t i = 0; i < split_dims.size(); ++i)
                    s_origin[split_dims[i]] = loop_index[i];
                for (auto d : input_dims) s_shape[d] = full[d];
                cube.source()->read_window(var, s_origin, s_shape, slice.data());
            }

            std::vector<double> produced = f(slice.data(), in_shape);
            detail::track_alloc(out_slice * sizeof(double));
            if (produced.size() != out_slice) {
                detail::track_free(out_slice * sizeof(double));
                std::string at = "(";
                for (std::size_t i = 0; i < loop_index.size(); ++i)
                    at += (i ? "," : "") + std::to_string(loop_index[i]);
                throw Error(ErrorCode::ShapeMismatch,
                            "function returned " + std::to_string(produced.size()) +
                                " values, expected " + std::to_string(out_slice) +
                                " at loop index " + at + ")");
            }
            std::copy(produced.begin(), produced.end(),
                      result.begin() + (var * loop_count + ravel(loop_index, loop_shape)) * out_slice);
            detail::track_free(out_slice * sizeof(double));
        } while (next_index(local, group_extent));
    });

    DataCube out = DataCube::from_values(std::move(out_schema), cube.attributes(), std::move(result));
    std::string params = "{\"input_dims\":" + dims_to_json(spec.input_dims) + ",\"output_dims\":[";
    for (std::size_t i = 0; i < spec.output_dims.size(); ++i)
        params += (i ? ",\"" : "\"") + spec.output_dims[i].first.name + "\"";
    params += "]}";
    return with_provenance(out, "apply_split_combine", params);
}

}  // namespace esdc
