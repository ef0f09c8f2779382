#pragma once

#include <string>
#include <vector>

#include "esdc/core.hpp"

namespace esdc {

enum class RegridMethod { nearest, bilinear, block_mean, conservative };

const char* regrid_method_name(RegridMethod m);
RegridMethod regrid_method_from_name(const std::string& name);

enum class AccessPattern { temporal, spatial, hybrid };

enum class TemporalReducer { mean, median, count };

/// Resamples the cube's lat/lon axes onto the target grids.
///  - nearest: closest source center per axis, ties to the smaller index
///  - bilinear: 4-point interpolation, strict NA, latitude clamped at the
///    poles, longitude wrapped
///  - block_mean: mean of source centers falling into the target cell,
///    NA contributors ignored
///  - conservative: spherical-area overlap-weighted mean; requires regular
///    source and target grids so mass balance is preserved exactly
DataCube regrid_spatial(const DataCube& cube, const Grid& target_lat, const Grid& target_lon,
                        RegridMethod method);

/// Reduces source timestamps into the bins [t_k, t_{k+1}) of the target time
/// grid (the last bin extends by the trailing spacing). Bins with fewer than
/// `min_count` non-NA values yield NA; the count reducer is NA-free.
DataCube aggregate_temporal(const DataCube& cube, const Grid& target_time, TemporalReducer reducer,
                            int min_count = 1);

struct AlignInput {
    DataCube cube;
    RegridMethod method = RegridMethod::nearest;
    TemporalReducer reducer = TemporalReducer::mean;
};

/// Assembles univariate cubes into one multivariate cube on the target
/// schema. Target cells not covered by a source stay NA.
DataCube align_to_schema(const std::vector<AlignInput>& inputs, const CubeSchema& target);

/// Picks a chunk shape for the access pattern within the byte budget:
/// temporal keeps the full time extent, spatial keeps the full lat/lon
/// extents, hybrid scales all axes proportionally. Chunk volume times eight
/// bytes never exceeds the budget and every extent is at least one.
Index suggest_chunking(const CubeSchema& schema, AccessPattern pattern,
                       std::size_t target_chunk_bytes);

}  // namespace esdc
