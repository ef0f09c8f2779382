#include "esdc/cubing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "esdc/calendar.hpp"

namespace esdc {

const char* regrid_method_name(RegridMethod m) {
    switch (m) {
        case RegridMethod::nearest: return "nearest";
        case RegridMethod::bilinear: return "bilinear";
        case RegridMethod::block_mean: return "block_mean";
        case RegridMethod::conservative: return "conservative";
    }
    return "nearest";
}

RegridMethod regrid_method_from_name(const std::string& name) {
    if (name == "nearest") return RegridMethod::nearest;
    if (name == "bilinear") return RegridMethod::bilinear;
    if (name == "block_mean" || name == "block-mean") return RegridMethod::block_mean;
    if (name == "conservative") return RegridMethod::conservative;
    throw Error(ErrorCode::Usage, "unknown regrid method '" + name + "'");
}

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct SpatialAxes {
    std::size_t lat = 0;
    std::size_t lon = 0;
};

SpatialAxes spatial_axes(const CubeSchema& schema) {
    std::optional<std::size_t> lat, lon;
    for (std::size_t d = 0; d < schema.dims.size(); ++d) {
        if (schema.dims[d].kind != DimKind::spatial) continue;
        const auto& n = schema.dims[d].name;
        if (n == "lat" || n == "latitude" || n == "y") lat = d;
        if (n == "lon" || n == "longitude" || n == "x") lon = d;
    }
    if (!lat || !lon)
        throw Error(ErrorCode::MissingSpatialDims, "cube has no lat/lon dimensions");
    return {*lat, *lon};
}

/// Cell edges from coordinate midpoints; outer edges extend by half the
/// adjacent spacing. Latitude edges are clamped to [-90, 90].
std::vector<double> cell_edges(const std::vector<double>& c, bool clamp_lat) {
    const std::size_t n = c.size();
    std::vector<double> e(n + 1);
    e[0] = c[0] - (c[1] - c[0]) / 2.0;
    for (std::size_t i = 1; i < n; ++i) e[i] = (c[i - 1] + c[i]) / 2.0;
    e[n] = c[n - 1] + (c[n - 1] - c[n - 2]) / 2.0;
    if (clamp_lat)
        for (auto& v : e) v = std::clamp(v, -90.0, 90.0);
    return e;
}

bool ascending_coords(const std::vector<double>& c) { return c.size() < 2 || c[1] > c[0]; }

/// Works on ascending copies; remembers whether the original was flipped.
struct Axis {
    std::vector<double> coords;
    bool flipped = false;

    explicit Axis(const std::vector<double>& c) : coords(c) {
        if (!ascending_coords(c)) {
            std::reverse(coords.begin(), coords.end());
            flipped = true;
        }
    }
    std::size_t source_index(std::size_t ascending_index) const {
        return flipped ? coords.size() - 1 - ascending_index : ascending_index;
    }
};

double wrap_lon(double lon) {
    double x = std::fmod(lon, 360.0);
    if (x < 0) x += 360.0;
    return x;
}

double circular_lon_distance(double a, double b) {
    double d = std::abs(wrap_lon(a) - wrap_lon(b));
    return std::min(d, 360.0 - d);
}

/// Nearest source index for a target coordinate; equidistant centers resolve
/// to the smaller source index.
std::size_t nearest_index(const Axis& axis, double target, bool periodic_lon) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < axis.coords.size(); ++i) {
        const std::size_t src = axis.source_index(i);
        const double d = periodic_lon ? circular_lon_distance(axis.coords[i], target)
                                      : std::abs(axis.coords[i] - target);
        if (d < best_d - 1e-12 || (std::abs(d - best_d) <= 1e-12 && src < best)) {
            best_d = std::min(d, best_d);
            best = src;
        }
    }
    return best;
}

struct Contribution {
    std::size_t index;
    double weight;
};

/// Overlap of [lo,hi) intervals on the latitude axis measured as the exact
/// spherical band area. Assumes ascending edges.
std::vector<std::vector<Contribution>> lat_overlaps(const std::vector<double>& src_edges,
                                                    const Axis& src,
                                                    const std::vector<double>& tgt_edges) {
    std::vector<std::vector<Contribution>> out(tgt_edges.size() - 1);
    for (std::size_t t = 0; t + 1 < tgt_edges.size(); ++t) {
        for (std::size_t s = 0; s + 1 < src_edges.size(); ++s) {
            const double lo = std::max(tgt_edges[t], src_edges[s]);
            const double hi = std::min(tgt_edges[t + 1], src_edges[s + 1]);
            if (hi <= lo) continue;
            const double band = std::sin(hi * kDegToRad) - std::sin(lo * kDegToRad);
            if (band > 0) out[t].push_back({src.source_index(s), band});
        }
    }
    return out;
}

/// Overlap lengths in degrees on the periodic longitude axis.
std::vector<std::vector<Contribution>> lon_overlaps(const std::vector<double>& src_edges,
                                                    const Axis& src,
                                                    const std::vector<double>& tgt_edges) {
    // split each cell into linear segments on [0, 360)
    auto segments = [](double lo, double hi) {
        std::vector<std::pair<double, double>> segs;
        double width = hi - lo;
        if (width >= 360.0 - 1e-9) {
            segs.emplace_back(0.0, 360.0);
            return segs;
        }
        double a = wrap_lon(lo);
        double b = a + width;
        if (b <= 360.0) {
            segs.emplace_back(a, b);
        } else {
            segs.emplace_back(a, 360.0);
            segs.emplace_back(0.0, b - 360.0);
        }
        return segs;
    };
    std::vector<std::vector<Contribution>> out(tgt_edges.size() - 1);
    for (std::size_t t = 0; t + 1 < tgt_edges.size(); ++t) {
        const auto tsegs = segments(tgt_edges[t], tgt_edges[t + 1]);
        for (std::size_t s = 0; s + 1 < src_edges.size(); ++s) {
            double overlap = 0.0;
            for (const auto& [tlo, thi] : tsegs)
                for (const auto& [slo, shi] : segments(src_edges[s], src_edges[s + 1]))
                    overlap += std::max(0.0, std::min(thi, shi) - std::max(tlo, slo));
            if (overlap > 1e-12) out[t].push_back({src.source_index(s), overlap});
        }
    }
    return out;
}

bool grid_regular_spacing(const Grid& g) {
    if (g.coords.size() < 2) return false;
    const double step = g.coords[1] - g.coords[0];
    for (std::size_t i = 1; i < g.coords.size(); ++i)
        if (std::abs((g.coords[i] - g.coords[i - 1]) - step) > 1e-9 * std::max(std::abs(step), 1.0))
            return false;
    return true;
}

/// Per-axis interpolation stencil for bilinear: the two bracketing source
/// indices and the fractional position between them.
struct Stencil {
    std::size_t i0, i1;
    double frac;  // weight of i1
};

Stencil lat_stencil(const Axis& axis, double target) {
    const auto& c = axis.coords;
    if (target <= c.front()) return {axis.source_index(0), axis.source_index(0), 0.0};
    if (target >= c.back())
        return {axis.source_index(c.size() - 1), axis.source_index(c.size() - 1), 0.0};
    const auto it = std::upper_bound(c.begin(), c.end(), target);
    const std::size_t hi = static_cast<std::size_t>(it - c.begin());
    const std::size_t lo = hi - 1;
    const double frac = (target - c[lo]) / (c[hi] - c[lo]);
    return {axis.source_index(lo), axis.source_index(hi), frac};
}

Stencil lon_stencil(const Axis& axis, double target) {
    const auto& c = axis.coords;
    const double t = wrap_lon(target);
    // candidate gaps include the wrap-around between last and first center
    std::size_t lo = c.size() - 1, hi = 0;
    double gap = 360.0 - (c.back() - c.front());
    double offset = t - wrap_lon(c.back());
    if (offset < 0) offset += 360.0;
    bool found = offset <= gap + 1e-12;
    for (std::size_t i = 0; i + 1 < c.size() && !found; ++i) {
        if (t >= c[i] - 1e-12 && t <= c[i + 1] + 1e-12) {
            lo = i;
            hi = i + 1;
            gap = c[i + 1] - c[i];
            offset = t - c[i];
            found = true;
        }
    }
    if (!found) {  // wrap segment after all
        lo = c.size() - 1;
        hi = 0;
        gap = 360.0 - (c.back() - c.front());
        offset = t - wrap_lon(c.back());
        if (offset < 0) offset += 360.0;
    }
    const double frac = gap > 0 ? std::clamp(offset / gap, 0.0, 1.0) : 0.0;
    return {axis.source_index(lo), axis.source_index(hi), frac};
}

/// Source index ranges whose centers fall inside each target cell. Longitude
/// membership is circular.
std::vector<std::vector<std::size_t>> block_members(const Axis& axis,
                                                    const std::vector<double>& tgt_edges,
                                                    bool periodic_lon) {
    std::vector<std::vector<std::size_t>> out(tgt_edges.size() - 1);
    for (std::size_t t = 0; t + 1 < tgt_edges.size(); ++t) {
        for (std::size_t i = 0; i < axis.coords.size(); ++i) {
            const double c = axis.coords[i];
            bool inside;
            if (periodic_lon) {
                const double width = tgt_edges[t + 1] - tgt_edges[t];
                double offset = wrap_lon(c) - wrap_lon(tgt_edges[t]);
                if (offset < 0) offset += 360.0;
                inside = width >= 360.0 - 1e-9 || offset < width;
            } else {
                const bool last = t + 2 == tgt_edges.size();
                inside = c >= tgt_edges[t] && (last ? c <= tgt_edges[t + 1] : c < tgt_edges[t + 1]);
            }
            if (inside) out[t].push_back(axis.source_index(i));
        }
    }
    return out;
}

}  // namespace

DataCube regrid_spatial(const DataCube& cube, const Grid& target_lat, const Grid& target_lon,
                        RegridMethod method) {
    const CubeSchema& schema = cube.schema();
    const SpatialAxes axes = spatial_axes(schema);
    validate_grid(target_lat);
    validate_grid(target_lon);
    const Grid& src_lat = schema.grids[axes.lat];
    const Grid& src_lon = schema.grids[axes.lon];

    if (method == RegridMethod::conservative &&
        (!grid_regular_spacing(src_lat) || !grid_regular_spacing(src_lon) ||
         !grid_regular_spacing(target_lat) || !grid_regular_spacing(target_lon)))
        throw Error(ErrorCode::ConservativeOnIrregularGrid,
                    "conservative regridding requires regular lat/lon grids");

    const Axis a_lat(src_lat.coords), a_lon(src_lon.coords);
    Axis t_lat(target_lat.coords), t_lon(target_lon.coords);

    const std::size_t n_tlat = target_lat.coords.size();
    const std::size_t n_tlon = target_lon.coords.size();

    // per-axis contributor tables, indexed by ascending target position
    std::vector<std::size_t> near_lat, near_lon;
    std::vector<Stencil> bil_lat, bil_lon;
    std::vector<std::vector<std::size_t>> blk_lat, blk_lon;
    std::vector<std::vector<Contribution>> con_lat, con_lon;

    const auto src_lat_edges = cell_edges(a_lat.coords, true);
    const auto src_lon_edges = cell_edges(a_lon.coords, false);
    const auto tgt_lat_edges = cell_edges(t_lat.coords, true);
    const auto tgt_lon_edges = cell_edges(t_lon.coords, false);

    switch (method) {
        case RegridMethod::nearest:
            for (double c : t_lat.coords) near_lat.push_back(nearest_index(a_lat, c, false));
            for (double c : t_lon.coords) near_lon.push_back(nearest_index(a_lon, c, true));
            break;
        case RegridMethod::bilinear:
            for (double c : t_lat.coords) bil_lat.push_back(lat_stencil(a_lat, c));
            for (double c : t_lon.coords) bil_lon.push_back(lon_stencil(a_lon, c));
            break;
        case RegridMethod::block_mean:
            blk_lat = block_members(a_lat, tgt_lat_edges, false);
            blk_lon = block_members(a_lon, tgt_lon_edges, true);
            break;
        case RegridMethod::conservative:
            con_lat = lat_overlaps(src_lat_edges, a_lat, tgt_lat_edges);
            con_lon = lon_overlaps(src_lon_edges, a_lon, tgt_lon_edges);
            break;
    }

    CubeSchema out = schema;
    out.grids[axes.lat] = target_lat;
    out.grids[axes.lon] = target_lon;
    out.chunk_shape[axes.lat] = std::min(out.chunk_shape[axes.lat], n_tlat);
    out.chunk_shape[axes.lon] = std::min(out.chunk_shape[axes.lon], n_tlon);

    const Index src_shape = schema.shape();
    const Index dst_shape = out.shape();
    const auto src_strides = row_major_strides(src_shape);
    const auto dst_strides = row_major_strides(dst_shape);

    Index outer_shape;  // all dims except lat/lon
    std::vector<std::size_t> outer_dims;
    for (std::size_t d = 0; d < schema.dims.size(); ++d)
        if (d != axes.lat && d != axes.lon) {
            outer_dims.push_back(d);
            outer_shape.push_back(src_shape[d]);
        }

    const std::size_t nvar = schema.variables.size();
    std::vector<double> result(nvar * volume(dst_shape), kNa);

    for (std::size_t v = 0; v < nvar; ++v) {
        const NdArray src = cube.materialise(v);
        double* dst = result.data() + v * volume(dst_shape);
        Index outer(outer_shape.size(), 0);
        do {
            std::size_t src_base = 0, dst_base = 0;
            for (std::size_t i = 0; i < outer_dims.size(); ++i) {
                src_base += outer[i] * src_strides[outer_dims[i]];
                dst_base += outer[i] * dst_strides[outer_dims[i]];
            }
            auto src_at = [&](std::size_t sy, std::size_t sx) {
                return src.data[src_base + sy * src_strides[axes.lat] + sx * src_strides[axes.lon]];
            };
            for (std::size_t ta = 0; ta < n_tlat; ++ta) {
                const std::size_t ty = t_lat.source_index(ta);
                for (std::size_t tb = 0; tb < n_tlon; ++tb) {
                    const std::size_t tx = t_lon.source_index(tb);
                    double value = kNa;
                    switch (method) {
                        case RegridMethod::nearest:
                            value = src_at(near_lat[ta], near_lon[tb]);
                            break;
                        case RegridMethod::bilinear: {
                            const Stencil& sy = bil_lat[ta];
                            const Stencil& sx = bil_lon[tb];
                            const double v00 = src_at(sy.i0, sx.i0), v01 = src_at(sy.i0, sx.i1);
                            const double v10 = src_at(sy.i1, sx.i0), v11 = src_at(sy.i1, sx.i1);
                            if (is_na(v00) || is_na(v01) || is_na(v10) || is_na(v11)) break;
                            value = v00 * (1 - sy.frac) * (1 - sx.frac) +
                                    v01 * (1 - sy.frac) * sx.frac + v10 * sy.frac * (1 - sx.frac) +
                                    v11 * sy.frac * sx.frac;
                            break;
                        }
                        case RegridMethod::block_mean: {
                            double sum = 0.0;
                            std::size_t n = 0;
                            for (auto sy : blk_lat[ta])
                                for (auto sx : blk_lon[tb]) {
                                    const double x = src_at(sy, sx);
                                    if (!is_na(x)) {
                                        sum += x;
                                        ++n;
                                    }
                                }
                            if (n > 0) value = sum / static_cast<double>(n);
                            break;
                        }
                        case RegridMethod::conservative: {
                            double sum = 0.0, wsum = 0.0;
                            for (const auto& cy : con_lat[ta])
                                for (const auto& cx : con_lon[tb]) {
                                    const double x = src_at(cy.index, cx.index);
                                    if (is_na(x)) continue;  // renormalise over the rest
                                    const double w = cy.weight * cx.weight;
                                    sum += w * x;
                                    wsum += w;
                                }
                            if (wsum > 0) value = sum / wsum;
                            break;
                        }
                    }
                    dst[dst_base + ty * dst_strides[axes.lat] + tx * dst_strides[axes.lon]] = value;
                }
            }
        } while (next_index(outer, outer_shape));
    }

    DataCube cube_out =
        DataCube::from_values(std::move(out), cube.attributes(), std::move(result));
    const std::string params = std::string("{\"method\":\"") + regrid_method_name(method) +
                               "\",\"nlat\":" + std::to_string(n_tlat) +
                               ",\"nlon\":" + std::to_string(n_tlon) + "}";
    return with_provenance(cube_out, "regrid_spatial", params);
}

namespace {

std::optional<std::size_t> temporal_axis(const CubeSchema& schema) {
    for (std::size_t d = 0; d < schema.dims.size(); ++d)
        if (schema.dims[d].kind == DimKind::temporal) return d;
    return std::nullopt;
}

double reduce_bin(TemporalReducer reducer, std::vector<double>& values, int min_count) {
    std::size_t n = 0;
    double sum = 0.0;
    std::vector<double> present;
    for (double x : values)
        if (!is_na(x)) {
            ++n;
            sum += x;
            if (reducer == TemporalReducer::median) present.push_back(x);
        }
    if (reducer == TemporalReducer::count) return static_cast<double>(n);
    if (n < static_cast<std::size_t>(std::max(min_count, 1))) return kNa;
    if (reducer == TemporalReducer::mean) return sum / static_cast<double>(n);
    std::sort(present.begin(), present.end());
    const std::size_t m = present.size();
    return m % 2 ? present[m / 2] : (present[m / 2 - 1] + present[m / 2]) / 2.0;
}

}  // namespace

DataCube aggregate_temporal(const DataCube& cube, const Grid& target_time, TemporalReducer reducer,
                            int min_count) {
    const CubeSchema& schema = cube.schema();
    const auto time_dim = temporal_axis(schema);
    if (!time_dim) throw Error(ErrorCode::NonTemporalCube, "cube has no temporal dimension");
    validate_grid(target_time);

    const std::vector<double>& src_t = schema.grids[*time_dim].coords;
    const std::vector<double>& tgt_t = target_time.coords;
    const std::size_t bins = tgt_t.size();
    const double last_edge = tgt_t[bins - 1] + (tgt_t[bins - 1] - tgt_t[bins - 2]);

    // bin index per source timestamp, or none when outside the target span
    std::vector<std::optional<std::size_t>> bin_of(src_t.size());
    bool any_member = false;
    for (std::size_t i = 0; i < src_t.size(); ++i) {
        const double ts = src_t[i];
        if (ts < tgt_t[0] || ts >= last_edge) continue;
        const auto it = std::upper_bound(tgt_t.begin(), tgt_t.end(), ts);
        bin_of[i] = static_cast<std::size_t>(it - tgt_t.begin()) - 1;
        any_member = true;
    }
    if (!any_member)
        throw Error(ErrorCode::TargetFinerThanSource,
                    "no source timestamp falls into any target bin");

    CubeSchema out = schema;
    out.grids[*time_dim] = target_time;
    out.chunk_shape[*time_dim] = std::min(out.chunk_shape[*time_dim], bins);

    const Index src_shape = schema.shape();
    const Index dst_shape = out.shape();
    const auto src_strides = row_major_strides(src_shape);
    const auto dst_strides = row_major_strides(dst_shape);

    Index outer_shape;
    std::vector<std::size_t> outer_dims;
    for (std::size_t d = 0; d < schema.dims.size(); ++d)
        if (d != *time_dim) {
            outer_dims.push_back(d);
            outer_shape.push_back(src_shape[d]);
        }

    const std::size_t nvar = schema.variables.size();
    std::vector<double> result(nvar * volume(dst_shape), kNa);
    std::vector<std::vector<double>> bin_values(bins);

    for (std::size_t v = 0; v < nvar; ++v) {
        const NdArray src = cube.materialise(v);
        double* dst = result.data() + v * volume(dst_shape);
        Index outer(outer_shape.size(), 0);
        do {
            std::size_t src_base = 0, dst_base = 0;
            for (std::size_t i = 0; i < outer_dims.size(); ++i) {
                src_base += outer[i] * src_strides[outer_dims[i]];
                dst_base += outer[i] * dst_strides[outer_dims[i]];
            }
            for (auto& b : bin_values) b.clear();
            for (std::size_t i = 0; i < src_t.size(); ++i)
                if (bin_of[i])
                    bin_values[*bin_of[i]].push_back(src.data[src_base + i * src_strides[*time_dim]]);
            for (std::size_t b = 0; b < bins; ++b)
                dst[dst_base + b * dst_strides[*time_dim]] =
                    reduce_bin(reducer, bin_values[b], min_count);
        } while (next_index(outer, outer_shape));
    }

    DataCube cube_out =
        DataCube::from_values(std::move(out), cube.attributes(), std::move(result));
    const char* rname = reducer == TemporalReducer::mean     ? "mean"
                        : reducer == TemporalReducer::median ? "median"
                                                             : "count";
    const std::string params = std::string("{\"bins\":") + std::to_string(bins) +
                               ",\"min_count\":" + std::to_string(min_count) + ",\"reducer\":\"" +
                               rname + "\"}";
    return with_provenance(cube_out, "aggregate_temporal", params);
}

namespace {

bool grids_equal(const Grid& a, const Grid& b) {
    if (a.categorical() != b.categorical()) return false;
    if (a.categorical()) return a.labels == b.labels;
    if (a.coords.size() != b.coords.size()) return false;
    for (std::size_t i = 0; i < a.coords.size(); ++i)
        if (std::abs(a.coords[i] - b.coords[i]) > 1e-9 * std::max(1.0, std::abs(a.coords[i])))
            return false;
    return true;
}

}  // namespace

DataCube align_to_schema(const std::vector<AlignInput>& inputs, const CubeSchema& target) {
    target.validate();
    CubeSchema out = target;
    out.variables.clear();

    std::map<std::string, std::string> units_seen;
    for (const auto& input : inputs) {
        if (input.cube.schema().variables.size() != 1)
            throw Error(ErrorCode::DuplicateVariableName,
                        "align_to_schema expects univariate inputs");
        const std::string& name = input.cube.schema().variables[0];
        std::string units;
        const auto it = input.cube.attributes().per_variable.find(name);
        if (it != input.cube.attributes().per_variable.end()) {
            const auto u = it->second.find("units");
            if (u != it->second.end()) units = u->second;
        }
        if (auto seen = units_seen.find(name); seen != units_seen.end()) {
            if (seen->second != units)
                throw Error(ErrorCode::IncompatibleUnits,
                            "variable '" + name + "' declared with units '" + seen->second +
                                "' and '" + units + "'");
            throw Error(ErrorCode::DuplicateVariableName,
                        "variable '" + name + "' provided twice");
        }
        units_seen[name] = units;
        out.variables.push_back(name);
    }

    const Index dst_shape = out.shape();
    const std::size_t var_cells = volume(dst_shape);
    std::vector<double> values(inputs.size() * var_cells, kNa);
    AttributeSet attrs;

    std::optional<SpatialAxes> target_spatial;
    try {
        target_spatial = spatial_axes(target);
    } catch (const Error&) {
    }
    const auto target_time = temporal_axis(target);

    for (std::size_t vi = 0; vi < inputs.size(); ++vi) {
        DataCube cube = inputs[vi].cube;

        // spatial alignment plus a coverage mask for value-propagating methods
        std::optional<SpatialAxes> cube_spatial;
        try {
            cube_spatial = spatial_axes(cube.schema());
        } catch (const Error&) {
        }
        std::optional<std::pair<double, double>> lat_cover, lon_cover;
        bool lon_full_circle = false;
        if (cube_spatial && target_spatial) {
            const Grid& src_lat = cube.schema().grids[cube_spatial->lat];
            const Grid& src_lon = cube.schema().grids[cube_spatial->lon];
            const Grid& tgt_lat = target.grids[target_spatial->lat];
            const Grid& tgt_lon = target.grids[target_spatial->lon];
            if (!grids_equal(src_lat, tgt_lat) || !grids_equal(src_lon, tgt_lon)) {
                Axis sa(src_lat.coords);
                const auto lat_edges = cell_edges(sa.coords, true);
                lat_cover = {lat_edges.front(), lat_edges.back()};
                Axis so(src_lon.coords);
                const auto lon_edges = cell_edges(so.coords, false);
                lon_full_circle = lon_edges.back() - lon_edges.front() >= 360.0 - 1e-9;
                lon_cover = {lon_edges.front(), lon_edges.back()};
                cube = regrid_spatial(cube, tgt_lat, tgt_lon, inputs[vi].method);
            }
        }

        // temporal alignment
        const auto cube_time = temporal_axis(cube.schema());
        if (target_time && cube_time &&
            !grids_equal(cube.schema().grids[*cube_time], target.grids[*target_time])) {
            cube = aggregate_temporal(cube, target.grids[*target_time], inputs[vi].reducer, 1);
        }

        // broadcast / copy into the target index space
        const CubeSchema& cs = cube.schema();
        std::vector<std::optional<std::size_t>> src_dim_of(target.dims.size());
        for (std::size_t td = 0; td < target.dims.size(); ++td) {
            if (auto sd = cs.find(target.dims[td].name)) {
                if (!grids_equal(cs.grids[*sd], target.grids[td]))
                    throw Error(ErrorCode::GridMismatch,
                                "input grid for '" + target.dims[td].name +
                                    "' does not match the target schema");
                src_dim_of[td] = *sd;
            }
        }
        for (const auto& dim : cs.dims)
            if (!target.find(dim.name))
                throw Error(ErrorCode::UnknownDimension,
                            "input has dimension '" + dim.name + "' absent from the target");

        const NdArray src = cube.materialise(0);
        const auto src_strides = row_major_strides(cs.shape());
        double* dst = values.data() + vi * var_cells;

        const bool mask_by_coverage =
            (inputs[vi].method == RegridMethod::nearest ||
             inputs[vi].method == RegridMethod::bilinear) &&
            lat_cover.has_value();

        Index idx(target.dims.size(), 0);
        std::size_t flat = 0;
        do {
            bool covered = true;
            if (mask_by_coverage && target_spatial) {
                const double lat = target.grids[target_spatial->lat].coords[idx[target_spatial->lat]];
                const double lon = target.grids[target_spatial->lon].coords[idx[target_spatial->lon]];
                if (lat < lat_cover->first - 1e-12 || lat > lat_cover->second + 1e-12)
                    covered = false;
                if (covered && !lon_full_circle) {
                    double off = wrap_lon(lon) - wrap_lon(lon_cover->first);
                    if (off < 0) off += 360.0;
                    covered = off <= lon_cover->second - lon_cover->first + 1e-12;
                }
            }
            if (covered) {
                std::size_t src_flat = 0;
                for (std::size_t td = 0; td < target.dims.size(); ++td)
                    if (src_dim_of[td]) src_flat += idx[td] * src_strides[*src_dim_of[td]];
                dst[flat] = src.data[src_flat];
            }
            ++flat;
        } while (next_index(idx, dst_shape));

        const std::string& name = cs.variables[0];
        const auto pv = cube.attributes().per_variable.find(name);
        if (pv != cube.attributes().per_variable.end()) attrs.per_variable[name] = pv->second;
    }

    DataCube result = DataCube::from_values(std::move(out), std::move(attrs), std::move(values));
    return with_provenance(result, "align_to_schema",
                           "{\"variables\":" + std::to_string(inputs.size()) + "}");
}

namespace {

Index distribute_budget(const Index& lengths, std::size_t budget_elems) {
    Index ext = lengths;
    if (lengths.empty()) return ext;
    long double prod = 1.0L;
    for (auto l : lengths) prod *= static_cast<long double>(l);
    if (prod <= static_cast<long double>(budget_elems)) return ext;

    const long double scale = std::pow(static_cast<long double>(budget_elems) / prod,
                                       1.0L / static_cast<long double>(lengths.size()));
    for (std::size_t i = 0; i < ext.size(); ++i) {
        const auto scaled = static_cast<std::size_t>(
            std::floor(static_cast<long double>(lengths[i]) * scale));
        ext[i] = std::clamp<std::size_t>(scaled, 1, lengths[i]);
    }
    // floor + clamping can still overshoot when many axes clamp to 1
    while (volume(ext) > budget_elems) {
        std::size_t largest = 0;
        for (std::size_t i = 1; i < ext.size(); ++i)
            if (ext[i] > ext[largest]) largest = i;
        if (ext[largest] == 1) break;
        ext[largest] = std::max<std::size_t>(1, ext[largest] / 2);
    }
    return ext;
}

}  // namespace

Index suggest_chunking(const CubeSchema& schema, AccessPattern pattern,
                       std::size_t target_chunk_bytes) {
    const Index shape = schema.shape();
    const std::size_t budget = std::max<std::size_t>(1, target_chunk_bytes / sizeof(double));

    const auto time_dim = temporal_axis(schema);
    std::optional<SpatialAxes> spatial;
    try {
        spatial = spatial_axes(schema);
    } catch (const Error&) {
    }

    Index chunks(shape.size(), 1);
    auto fill_remaining = [&](const std::vector<std::size_t>& fixed, std::size_t remaining) {
        std::vector<std::size_t> rest;
        Index rest_len;
        for (std::size_t d = 0; d < shape.size(); ++d)
            if (std::find(fixed.begin(), fixed.end(), d) == fixed.end()) {
                rest.push_back(d);
                rest_len.push_back(shape[d]);
            }
        const Index ext = distribute_budget(rest_len, remaining);
        for (std::size_t i = 0; i < rest.size(); ++i) chunks[rest[i]] = ext[i];
    };

    switch (pattern) {
        case AccessPattern::temporal: {
            std::vector<std::size_t> fixed;
            if (time_dim) {
                chunks[*time_dim] = std::min(shape[*time_dim], budget);
                fixed.push_back(*time_dim);
            }
            fill_remaining(fixed, budget / std::max<std::size_t>(1, time_dim ? chunks[*time_dim] : 1));
            break;
        }
        case AccessPattern::spatial: {
            std::vector<std::size_t> fixed;
            if (spatial) {
                Index sp = distribute_budget({shape[spatial->lat], shape[spatial->lon]}, budget);
                chunks[spatial->lat] = sp[0];
                chunks[spatial->lon] = sp[1];
                fixed = {spatial->lat, spatial->lon};
            }
            std::size_t used = 1;
            for (auto d : fixed) used *= chunks[d];
            fill_remaining(fixed, budget / std::max<std::size_t>(1, used));
            break;
        }
        case AccessPattern::hybrid:
            chunks = distribute_budget(shape, budget);
            break;
    }
    return chunks;
}

}  // namespace esdc
