#include "esdc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "esdc/engine.hpp"

namespace esdc {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

bool spacing_is_regular(const Grid& g) {
    if (g.coords.size() < 2) return false;
    const double step = g.coords[1] - g.coords[0];
    for (std::size_t i = 1; i < g.coords.size(); ++i)
        if (std::abs((g.coords[i] - g.coords[i - 1]) - step) > 1e-9 * std::max(std::abs(step), 1.0))
            return false;
    return true;
}

std::optional<std::size_t> latitude_axis(const CubeSchema& schema) {
    for (std::size_t d = 0; d < schema.dims.size(); ++d) {
        const auto& dim = schema.dims[d];
        if (dim.kind == DimKind::spatial &&
            (dim.name == "lat" || dim.name == "latitude" || dim.name == "y"))
            return d;
    }
    return std::nullopt;
}

}  // namespace

AreaWeights area_weights(const Grid& lat_grid, const Grid& lon_grid) {
    if (!spacing_is_regular(lat_grid))
        throw Error(ErrorCode::IrregularLatGrid,
                    "area weights need a regular latitude grid to derive the band half-width");
    const double half = std::abs(lat_grid.spacing()) / 2.0;
    AreaWeights w;
    w.lon_count = std::max<std::size_t>(1, lon_grid.size());
    w.band.resize(lat_grid.coords.size());
    double total = 0.0;
    for (std::size_t i = 0; i < lat_grid.coords.size(); ++i) {
        const double phi = lat_grid.coords[i];
        const double top = std::min(phi + half, 90.0);
        const double bottom = std::max(phi - half, -90.0);
        w.band[i] = std::sin(top * kDegToRad) - std::sin(bottom * kDegToRad);
        total += w.band[i];
    }
    const double norm = total * static_cast<double>(w.lon_count);
    for (auto& b : w.band) b /= norm;
    return w;
}

DataCube weighted_reduce_over(const DataCube& cube, const std::vector<std::string>& dims,
                              const ReduceOptions& options) {
    const CubeSchema& schema = cube.schema();
    for (const auto& name : dims) schema.require(name);

    std::optional<std::size_t> lat_dim;
    AreaWeights weights;
    if (options.weighted) {
        lat_dim = latitude_axis(schema);
        if (!lat_dim || std::find(dims.begin(), dims.end(), schema.dims[*lat_dim].name) == dims.end())
            throw Error(ErrorCode::UnknownDimension,
                        "area weighting requires the latitude dimension among the reduced ones");
        std::optional<std::size_t> lon_dim;
        for (std::size_t d = 0; d < schema.dims.size(); ++d)
            if (schema.dims[d].kind == DimKind::spatial && d != *lat_dim) lon_dim = d;
        Grid lon = lon_dim ? schema.grids[*lon_dim] : Grid{};
        weights = area_weights(schema.grids[*lat_dim], lon);
    }

    const auto weight_of = [&](const Index& full_index) -> double {
        return lat_dim ? weights.band[full_index[*lat_dim]] : 1.0;
    };

    std::vector<StreamingReduction<WeightedMoments>> reductions;
    reductions.reserve(schema.variables.size());
    for (std::size_t v = 0; v < schema.variables.size(); ++v)
        reductions.push_back(
            reduce_streaming<WeightedMoments>(cube, v, dims, weight_of, options.workers));

    const auto& kept_dims = reductions.front().kept_dims;
    CubeSchema out;
    for (auto d : kept_dims) {
        out.dims.push_back(schema.dims[d]);
        out.grids.push_back(schema.grids[d]);
        out.chunk_shape.push_back(std::min(schema.chunk_shape[d], schema.grids[d].size()));
    }

    AttributeSet attrs;
    attrs.cube = cube.attributes().cube;
    const std::size_t cells = volume(reductions.front().kept_shape);
    std::vector<double> values;
    for (std::size_t v = 0; v < schema.variables.size(); ++v) {
        const std::string& name = schema.variables[v];
        out.variables.push_back(name);
        const auto it = cube.attributes().per_variable.find(name);
        if (it != cube.attributes().per_variable.end()) attrs.per_variable[name] = it->second;
        for (std::size_t i = 0; i < cells; ++i)
            values.push_back(reductions[v].cells[i].finalized_mean());
    }
    if (options.emit_variance)
        for (std::size_t v = 0; v < schema.variables.size(); ++v) {
            out.variables.push_back(schema.variables[v] + "_variance");
            for (std::size_t i = 0; i < cells; ++i)
                values.push_back(reductions[v].cells[i].variance());
        }
    if (options.emit_count)
        for (std::size_t v = 0; v < schema.variables.size(); ++v) {
            out.variables.push_back(schema.variables[v] + "_count");
            for (std::size_t i = 0; i < cells; ++i)
                values.push_back(static_cast<double>(reductions[v].cells[i].count));
        }

    DataCube result = DataCube::from_values(std::move(out), std::move(attrs), std::move(values));
    std::string params = "{\"dims\":[";
    for (std::size_t i = 0; i < dims.size(); ++i) params += (i ? ",\"" : "\"") + dims[i] + "\"";
    params += std::string("],\"weighted\":") + (options.weighted ? "true" : "false") + "}";
    return with_provenance(result, "weighted_reduce_over", params);
}

std::vector<double> weighted_covariance(const DataCube& cube,
                                        const std::vector<std::string>& over_dims, bool weighted,
                                        unsigned workers) {
    const CubeSchema& schema = cube.schema();
    const std::size_t p = schema.variables.size();
    if (p < 2)
        throw Error(ErrorCode::FewerThanTwoComplete,
                    "covariance needs at least two variables");
    for (const auto& name : over_dims) schema.require(name);
    std::vector<bool> reduced(schema.dims.size(), false);
    for (const auto& name : over_dims) reduced[schema.require(name)] = true;
    for (std::size_t d = 0; d < schema.dims.size(); ++d)
        if (!reduced[d])
            throw Error(ErrorCode::UnknownDimension,
                        "covariance reduces every dimension; '" + schema.dims[d].name +
                            "' was not listed");

    std::optional<std::size_t> lat_dim;
    AreaWeights weights;
    if (weighted) {
        lat_dim = latitude_axis(schema);
        if (!lat_dim)
            throw Error(ErrorCode::UnknownDimension, "no latitude dimension to weight by");
        std::optional<std::size_t> lon_dim;
        for (std::size_t d = 0; d < schema.dims.size(); ++d)
            if (schema.dims[d].kind == DimKind::spatial && d != *lat_dim) lon_dim = d;
        weights = area_weights(schema.grids[*lat_dim], lon_dim ? schema.grids[*lon_dim] : Grid{});
    }

    // complete-case streaming over stored chunks, merged in key order
    const Index full = schema.shape();
    const Index& chunks = cube.source()->chunk_shape();
    Index counts(full.size());
    for (std::size_t d = 0; d < full.size(); ++d)
        counts[d] = (full[d] + chunks[d] - 1) / chunks[d];
    const std::size_t n_tasks = volume(counts);

    std::vector<WeightedCovAccumulator> partials(n_tasks, WeightedCovAccumulator(p));
    detail::run_tasks(n_tasks, workers, [&](std::size_t task) {
        const Index key = unravel(task, counts);
        Index origin(full.size()), extent(full.size());
        for (std::size_t d = 0; d < full.size(); ++d) {
            origin[d] = key[d] * chunks[d];
            extent[d] = std::min(chunks[d], full[d] - origin[d]);
        }
        std::vector<NdArray> windows;
        windows.reserve(p);
        for (std::size_t v = 0; v < p; ++v) windows.push_back(cube.read_window(v, origin, extent));

        std::vector<double> x(p);
        Index local(full.size(), 0);
        std::size_t flat = 0;
        do {
            bool complete = true;
            for (std::size_t v = 0; v < p; ++v) {
                x[v] = windows[v].data[flat];
                if (is_na(x[v])) complete = false;
            }
            ++flat;
            if (complete) {
                double w = 1.0;
                if (lat_dim) w = weights.band[origin[*lat_dim] + local[*lat_dim]];
                partials[task].add(x, w);
            }
        } while (next_index(local, extent));
    });

    WeightedCovAccumulator acc(p);
    for (const auto& partial : partials) acc.merge(partial);
    if (acc.count() < 2)
        throw Error(ErrorCode::FewerThanTwoComplete,
                    "fewer than two complete observations after NA filtering");
    return acc.covariance();
}

}  // namespace esdc
