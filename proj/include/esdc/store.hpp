#pragma once

#include <filesystem>
#include <string>

#include "esdc/core.hpp"

namespace esdc {

enum class Compression { none, deflate_level_1 };

/// Writes the cube as a Zarr-v2 subset: one array directory per variable and
/// per numeric coordinate axis, `.zarray`/`.zattrs` metadata with sorted keys
/// and no insignificant whitespace, chunk files named by dot-joined indices,
/// C-order little-endian float64, edge chunks padded to full volume with NaN.
void write_cube(const DataCube& cube, const std::filesystem::path& root, Compression compression);

/// Opens a stored cube lazily: metadata is read now, chunk files only when a
/// read touches them.
DataCube open_cube(const std::filesystem::path& root);

/// Overwrites a window of a stored cube (read-modify-write on the chunk
/// files it intersects). The cube must be store-backed.
void write_window(const DataCube& cube, std::size_t var, std::span<const std::size_t> origin,
                  std::span<const std::size_t> shape, std::span<const double> values);

bool is_store_backed(const DataCube& cube);

}  // namespace esdc
