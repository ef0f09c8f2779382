#include "esdc/harmonise.hpp"

#include <algorithm>
#include <cmath>

#include "esdc/calendar.hpp"

namespace esdc {

const std::vector<std::string> kComponentLabels = {"raw", "trend", "seasonal", "residual"};

namespace {

std::size_t temporal_axis(const CubeSchema& schema) {
    for (std::size_t d = 0; d < schema.dims.size(); ++d)
        if (schema.dims[d].kind == DimKind::temporal) return d;
    throw Error(ErrorCode::NonTemporalCube, "cube has no temporal dimension");
}

bool time_axis_regular(const Grid& g, double* step_out = nullptr) {
    if (g.coords.size() < 2) return false;
    const double step = g.coords[1] - g.coords[0];
    for (std::size_t i = 1; i < g.coords.size(); ++i)
        if (g.coords[i] - g.coords[i - 1] != step) return false;
    if (step_out) *step_out = step;
    return step > 0;
}

/// Iterates every series along `axis`: calls f(base_offset, stride).
void for_each_series(const Index& shape, std::size_t axis,
                     const std::function<void(std::size_t, std::size_t)>& f) {
    const auto strides = row_major_strides(shape);
    Index outer_shape;
    std::vector<std::size_t> outer_dims;
    for (std::size_t d = 0; d < shape.size(); ++d)
        if (d != axis) {
            outer_dims.push_back(d);
            outer_shape.push_back(shape[d]);
        }
    Index outer(outer_shape.size(), 0);
    do {
        std::size_t base = 0;
        for (std::size_t i = 0; i < outer_dims.size(); ++i) base += outer[i] * strides[outer_dims[i]];
        f(base, strides[axis]);
    } while (next_index(outer, outer_shape));
}

}  // namespace

Grid day_of_year_grid() {
    Grid g = Grid::regular_axis("doy", 1.0, 1.0, 366, "day_of_year");
    return g;
}

DataCube regularise_time(const DataCube& cube, int step_days) {
    if (step_days <= 0)
        throw Error(ErrorCode::NonPositiveStep, "step must be a positive number of days");
    const CubeSchema& schema = cube.schema();
    const std::size_t tdim = temporal_axis(schema);
    const std::vector<double>& src_t = schema.grids[tdim].coords;

    const double t0 = *std::min_element(src_t.begin(), src_t.end());
    const double t1 = *std::max_element(src_t.begin(), src_t.end());
    const std::size_t steps =
        static_cast<std::size_t>(std::floor((t1 - t0) / step_days)) + 1;
    if (steps < 2)
        throw Error(ErrorCode::NonPositiveStep,
                    "time span shorter than one step; nothing to regularise");

    Grid target = Grid::regular_axis(schema.dims[tdim].name, t0, step_days, steps,
                                     schema.grids[tdim].units);

    // step slot per source timestamp; on-grid sources only (offsets within a
    // step collapse onto its left edge)
    std::vector<std::size_t> slot(src_t.size());
    for (std::size_t i = 0; i < src_t.size(); ++i)
        slot[i] = static_cast<std::size_t>(
            std::floor((src_t[i] - t0) / static_cast<double>(step_days)));

    CubeSchema out = schema;
    out.grids[tdim] = target;
    out.chunk_shape[tdim] = std::min(out.chunk_shape[tdim], steps);

    const Index src_shape = schema.shape();
    const Index dst_shape = out.shape();
    const auto src_strides = row_major_strides(src_shape);
    const auto dst_strides = row_major_strides(dst_shape);

    const std::size_t nvar = schema.variables.size();
    std::vector<double> result(nvar * volume(dst_shape), kNa);
    std::vector<double> sums(steps);
    std::vector<std::size_t> counts(steps);

    for (std::size_t v = 0; v < nvar; ++v) {
        const NdArray src = cube.materialise(v);
        double* dst = result.data() + v * volume(dst_shape);
        for_each_series(src_shape, tdim, [&](std::size_t src_base, std::size_t src_stride) {
            std::size_t dst_base = 0;
            {
                // same outer offsets, different time stride
                std::size_t rem = src_base;
                for (std::size_t d = 0; d < src_shape.size(); ++d) {
                    if (d == tdim) continue;
                    const std::size_t coord = rem / src_strides[d] % src_shape[d];
                    dst_base += coord * dst_strides[d];
                    rem %= src_strides[d];
                }
            }
            std::fill(sums.begin(), sums.end(), 0.0);
            std::fill(counts.begin(), counts.end(), 0);
            for (std::size_t i = 0; i < src_t.size(); ++i) {
                const double x = src.data[src_base + i * src_stride];
                if (!is_na(x)) {
                    sums[slot[i]] += x;
                    ++counts[slot[i]];
                }
            }
            for (std::size_t s = 0; s < steps; ++s)
                dst[dst_base + s * dst_strides[tdim]] =
                    counts[s] ? sums[s] / static_cast<double>(counts[s]) : kNa;
        });
    }

    DataCube cube_out = DataCube::from_values(std::move(out), cube.attributes(), std::move(result));
    return with_provenance(cube_out, "regularise_time",
                           "{\"step_days\":" + std::to_string(step_days) + "}");
}

DataCube gapfill_linear(const DataCube& cube, int max_gap) {
    const CubeSchema& schema = cube.schema();
    const std::size_t tdim = temporal_axis(schema);
    if (!time_axis_regular(schema.grids[tdim]))
        throw Error(ErrorCode::IrregularTimeGrid, "gapfill requires a regular time axis");
    const std::size_t nt = schema.grids[tdim].size();

    const Index shape = schema.shape();
    const std::size_t nvar = schema.variables.size();
    std::vector<double> result;
    result.reserve(nvar * volume(shape));
    for (std::size_t v = 0; v < nvar; ++v) {
        NdArray arr = cube.materialise(v);
        for_each_series(shape, tdim, [&](std::size_t base, std::size_t stride) {
            std::size_t i = 0;
            while (i < nt) {
                if (!is_na(arr.data[base + i * stride])) {
                    ++i;
                    continue;
                }
                std::size_t run_end = i;
                while (run_end < nt && is_na(arr.data[base + run_end * stride])) ++run_end;
                const bool interior = i > 0 && run_end < nt;
                const std::size_t run = run_end - i;
                if (interior && run <= static_cast<std::size_t>(std::max(max_gap, 0))) {
                    const double left = arr.data[base + (i - 1) * stride];
                    const double right = arr.data[base + run_end * stride];
                    const double span = static_cast<double>(run + 1);
                    for (std::size_t k = 0; k < run; ++k)
                        arr.data[base + (i + k) * stride] =
                            left + (right - left) * (static_cast<double>(k + 1) / span);
                }
                i = run_end;
            }
        });
        result.insert(result.end(), arr.data.begin(), arr.data.end());
    }

    DataCube out = DataCube::from_values(schema, cube.attributes(), std::move(result));
    return with_provenance(out, "gapfill_linear", "{\"max_gap\":" + std::to_string(max_gap) + "}");
}

namespace {

struct DoyLayout {
    std::vector<int> slot_of_step;  // day-of-year slot (1..366) per time index
};

DoyLayout doy_layout(const Grid& time_grid) {
    DoyLayout layout;
    layout.slot_of_step.reserve(time_grid.coords.size());
    for (double t : time_grid.coords)
        layout.slot_of_step.push_back(day_of_year_366(static_cast<std::int64_t>(std::llround(t))));
    return layout;
}

}  // namespace

namespace {
DataCube climatology_impl(const DataCube& cube, int smoothing_window);
}

DataCube climatology(const DataCube& cube, int smoothing_window) {
    const CubeSchema& schema = cube.schema();
    const Grid& time_grid = schema.grids[temporal_axis(schema)];
    const double span = std::abs(time_grid.coords.back() - time_grid.coords.front());
    if (span < 365.0)
        throw Error(ErrorCode::SpanTooShort, "climatology needs at least one year of data");
    return climatology_impl(cube, smoothing_window);
}

namespace {

DataCube climatology_impl(const DataCube& cube, int smoothing_window) {
    if (smoothing_window < 1 || smoothing_window % 2 == 0)
        throw Error(ErrorCode::WindowTooLarge, "smoothing window must be a positive odd integer");
    const CubeSchema& schema = cube.schema();
    const std::size_t tdim = temporal_axis(schema);
    const Grid& time_grid = schema.grids[tdim];

    const DoyLayout layout = doy_layout(time_grid);
    const int half = (smoothing_window - 1) / 2;
    const std::size_t nt = time_grid.size();

    CubeSchema out = schema;
    out.dims[tdim] = Dimension{"doy", DimKind::other};
    out.grids[tdim] = day_of_year_grid();
    out.chunk_shape[tdim] = 366;
    out.canonicalise();

    // canonicalisation moves the doy axis last; build in source order first
    CubeSchema staged = schema;
    staged.dims[tdim] = Dimension{"doy", DimKind::other};
    staged.grids[tdim] = day_of_year_grid();
    staged.chunk_shape[tdim] = 366;

    const Index src_shape = schema.shape();
    Index staged_shape = src_shape;
    staged_shape[tdim] = 366;
    const auto dst_strides = row_major_strides(staged_shape);

    const std::size_t nvar = schema.variables.size();
    std::vector<double> staged_values(nvar * volume(staged_shape), kNa);

    std::vector<double> slot_sum(367, 0.0);
    std::vector<std::size_t> slot_count(367, 0);

    for (std::size_t v = 0; v < nvar; ++v) {
        const NdArray src = cube.materialise(v);
        double* dst = staged_values.data() + v * volume(staged_shape);
        const auto src_strides = row_major_strides(src_shape);
        for_each_series(src_shape, tdim, [&](std::size_t base, std::size_t stride) {
            std::size_t dst_base = 0;
            std::size_t rem = base;
            for (std::size_t d = 0; d < src_shape.size(); ++d) {
                if (d == tdim) continue;
                const std::size_t coord = rem / src_strides[d] % src_shape[d];
                dst_base += coord * dst_strides[d];
                rem %= src_strides[d];
            }
            std::fill(slot_sum.begin(), slot_sum.end(), 0.0);
            std::fill(slot_count.begin(), slot_count.end(), 0);
            for (std::size_t i = 0; i < nt; ++i) {
                const double x = src.data[base + i * stride];
                if (is_na(x)) continue;
                slot_sum[layout.slot_of_step[i]] += x;
                ++slot_count[layout.slot_of_step[i]];
            }
            for (int slot = 1; slot <= 366; ++slot) {
                double sum = 0.0;
                std::size_t count = 0;
                for (int off = -half; off <= half; ++off) {
                    int s = slot + off;
                    while (s < 1) s += 366;
                    while (s > 366) s -= 366;
                    sum += slot_sum[s];
                    count += slot_count[s];
                }
                dst[dst_base + static_cast<std::size_t>(slot - 1) * dst_strides[tdim]] =
                    count ? sum / static_cast<double>(count) : kNa;
            }
        });
    }

    DataCube staged_cube =
        DataCube::from_values(std::move(staged), cube.attributes(), std::move(staged_values));

    // permute onto the canonical axis order
    AttributeSet attrs = staged_cube.attributes();
    attrs.cube["smoothing_window"] = std::to_string(smoothing_window);
    const CubeSchema& sc = staged_cube.schema();
    std::vector<std::size_t> perm;  // out dim -> staged dim
    for (const auto& dim : out.dims) perm.push_back(sc.require(dim.name));
    const Index out_shape = out.shape();
    std::vector<double> values(nvar * volume(out_shape));
    for (std::size_t v = 0; v < nvar; ++v) {
        const NdArray src = staged_cube.materialise(v);
        const auto src_strides = row_major_strides(src.shape);
        double* dst = values.data() + v * volume(out_shape);
        Index idx(out_shape.size(), 0);
        std::size_t flat = 0;
        do {
            std::size_t src_flat = 0;
            for (std::size_t d = 0; d < out_shape.size(); ++d)
                src_flat += idx[d] * src_strides[perm[d]];
            dst[flat++] = src.data[src_flat];
        } while (next_index(idx, out_shape));
    }

    DataCube result = DataCube::from_values(std::move(out), std::move(attrs), std::move(values));
    return with_provenance(result, "climatology",
                           "{\"window\":" + std::to_string(smoothing_window) + "}");
}

}  // namespace

DataCube anomalies(const DataCube& cube, const DataCube& clim) {
    const CubeSchema& schema = cube.schema();
    const CubeSchema& cs = clim.schema();
    const std::size_t tdim = temporal_axis(schema);
    const auto doy_dim = cs.find("doy");
    if (!doy_dim)
        throw Error(ErrorCode::GridMismatch, "climatology lacks a day-of-year dimension");
    if (cs.variables != schema.variables)
        throw Error(ErrorCode::GridMismatch, "climatology variables do not match the cube");
    for (std::size_t d = 0; d < schema.dims.size(); ++d) {
        if (d == tdim) continue;
        const auto cd = cs.find(schema.dims[d].name);
        if (!cd || cs.grids[*cd].size() != schema.grids[d].size())
            throw Error(ErrorCode::GridMismatch,
                        "climatology grid for '" + schema.dims[d].name + "' does not match");
    }

    const DoyLayout layout = doy_layout(schema.grids[tdim]);
    const Index shape = schema.shape();
    const auto strides = row_major_strides(shape);
    const auto clim_strides = row_major_strides(cs.shape());

    // cube dim -> climatology dim (time maps onto doy)
    std::vector<std::size_t> clim_dim_of(shape.size());
    for (std::size_t d = 0; d < shape.size(); ++d)
        clim_dim_of[d] = d == tdim ? *doy_dim : cs.require(schema.dims[d].name);

    const std::size_t nvar = schema.variables.size();
    std::vector<double> values;
    values.reserve(nvar * volume(shape));
    for (std::size_t v = 0; v < nvar; ++v) {
        const NdArray src = cube.materialise(v);
        const NdArray base = clim.materialise(v);
        NdArray out(shape);
        Index idx(shape.size(), 0);
        std::size_t flat = 0;
        do {
            std::size_t clim_flat = 0;
            for (std::size_t d = 0; d < shape.size(); ++d) {
                const std::size_t coord =
                    d == tdim ? static_cast<std::size_t>(layout.slot_of_step[idx[d]] - 1) : idx[d];
                clim_flat += coord * clim_strides[clim_dim_of[d]];
            }
            const double a = src.data[flat];
            const double b = base.data[clim_flat];
            out.data[flat] = (is_na(a) || is_na(b)) ? kNa : a - b;
            ++flat;
        } while (next_index(idx, shape));
        values.insert(values.end(), out.data.begin(), out.data.end());
    }

    AttributeSet attrs = cube.attributes();
    for (const auto& name : schema.variables) attrs.per_variable[name]["anomaly"] = "true";
    DataCube result = DataCube::from_values(schema, std::move(attrs), std::move(values));
    return with_provenance(result, "anomalies", "{}");
}

DataCube decompose(const DataCube& cube, int trend_window) {
    if (trend_window < 1 || trend_window % 2 == 0)
        throw Error(ErrorCode::WindowTooLarge, "trend window must be a positive odd integer");
    const CubeSchema& schema = cube.schema();
    const std::size_t tdim = temporal_axis(schema);
    if (!time_axis_regular(schema.grids[tdim]))
        throw Error(ErrorCode::IrregularTimeGrid, "decompose requires a regular time axis");
    const std::size_t nt = schema.grids[tdim].size();
    if (static_cast<std::size_t>(trend_window) > nt)
        throw Error(ErrorCode::WindowTooLarge, "trend window exceeds the time axis length");

    const Index shape = schema.shape();
    const std::size_t nvar = schema.variables.size();
    const int half = (trend_window - 1) / 2;

    std::vector<NdArray> raw(nvar), trend(nvar);
    for (std::size_t v = 0; v < nvar; ++v) {
        raw[v] = cube.materialise(v);
        for (double x : raw[v].data)
            if (is_na(x))
                throw Error(ErrorCode::GapsPresent,
                            "decompose requires a gap-filled cube (NA values present)");
        trend[v] = NdArray(shape, kNa);
        const std::size_t uhalf = static_cast<std::size_t>(half);
        for_each_series(shape, tdim, [&](std::size_t base, std::size_t stride) {
            for (std::size_t t = uhalf; t + uhalf < nt; ++t) {
                double sum = 0.0;  // windows summed independently to stay exact
                for (std::size_t k = t - uhalf; k <= t + uhalf; ++k)
                    sum += raw[v].data[base + k * stride];
                trend[v].data[base + t * stride] = sum / static_cast<double>(trend_window);
            }
        });
    }

    // detrended = raw - trend, then its unsmoothed climatology gives the
    // seasonal cycle
    std::vector<double> detrended_values;
    detrended_values.reserve(nvar * volume(shape));
    for (std::size_t v = 0; v < nvar; ++v)
        for (std::size_t i = 0; i < raw[v].data.size(); ++i) {
            const double t = trend[v].data[i];
            detrended_values.push_back(is_na(t) ? kNa : raw[v].data[i] - t);
        }
    DataCube detrended = DataCube::from_values(schema, cube.attributes(), std::move(detrended_values));
    const DataCube clim = climatology_impl(detrended, 1);
    const DoyLayout layout = doy_layout(schema.grids[tdim]);

    const CubeSchema& cs = clim.schema();
    const std::size_t doy_dim = cs.require("doy");
    const auto clim_strides = row_major_strides(cs.shape());
    std::vector<std::size_t> clim_dim_of(shape.size());
    for (std::size_t d = 0; d < shape.size(); ++d)
        clim_dim_of[d] = d == tdim ? doy_dim : cs.require(schema.dims[d].name);

    // output: component axis appended after the source dimensions
    CubeSchema out = schema;
    Grid component;
    component.dimension = "component";
    component.labels = kComponentLabels;
    out.dims.push_back(Dimension{"component", DimKind::categorical});
    out.grids.push_back(component);
    out.chunk_shape.push_back(kComponentLabels.size());

    const Index out_shape = out.shape();
    const auto out_strides = row_major_strides(out_shape);
    std::vector<double> values(nvar * volume(out_shape), kNa);

    for (std::size_t v = 0; v < nvar; ++v) {
        const NdArray seasonal_map = clim.materialise(v);
        double* dst = values.data() + v * volume(out_shape);
        Index idx(shape.size(), 0);
        std::size_t flat = 0;
        do {
            std::size_t base = 0;
            for (std::size_t d = 0; d < shape.size(); ++d) base += idx[d] * out_strides[d];
            std::size_t clim_flat = 0;
            for (std::size_t d = 0; d < shape.size(); ++d) {
                const std::size_t coord =
                    d == tdim ? static_cast<std::size_t>(layout.slot_of_step[idx[d]] - 1) : idx[d];
                clim_flat += coord * clim_strides[clim_dim_of[d]];
            }
            const double r = raw[v].data[flat];
            const double t = trend[v].data[flat];
            const double s = is_na(t) ? kNa : seasonal_map.data[clim_flat];
            dst[base + 0] = r;
            dst[base + 1] = t;
            dst[base + 2] = s;
            dst[base + 3] = (is_na(t) || is_na(s)) ? kNa : (r - t) - s;
            ++flat;
        } while (next_index(idx, shape));
    }

    DataCube result = DataCube::from_values(std::move(out), cube.attributes(), std::move(values));
    return with_provenance(result, "decompose",
                           "{\"trend_window\":" + std::to_string(trend_window) + "}");
}

}  // namespace esdc
