#include "esdc/store.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <mutex>

#include "json.hpp"

namespace esdc {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "chunk codec assumes a little-endian host");

namespace {

constexpr const char* kDimMetaKey = "_DIM_META";
constexpr const char* kDimOrderKey = "_DIMENSIONS";
constexpr const char* kStringCoordsKey = "_STRING_COORDS";
constexpr const char* kVariablesKey = "_VARIABLES";

std::string dump_sorted(const json& j) {
    // nlohmann::json object keys are already sorted (std::map); dump() emits
    // no insignificant whitespace.
    return j.dump();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

std::vector<std::byte> deflate_bytes(const double* values, std::size_t count) {
    const auto src_len = static_cast<uLong>(count * sizeof(double));
    uLongf dst_len = compressBound(src_len);
    std::vector<std::byte> out(dst_len);
    const int rc = compress2(reinterpret_cast<Bytef*>(out.data()), &dst_len,
                             reinterpret_cast<const Bytef*>(values), src_len, 1);
    if (rc != Z_OK) throw Error(ErrorCode::IoFailure, "zlib compression failed");
    out.resize(dst_len);
    return out;
}

void inflate_bytes(const std::vector<std::byte>& in, double* values, std::size_t count,
                   const std::string& what) {
    uLongf dst_len = static_cast<uLongf>(count * sizeof(double));
    const int rc = uncompress(reinterpret_cast<Bytef*>(values), &dst_len,
                              reinterpret_cast<const Bytef*>(in.data()),
                              static_cast<uLong>(in.size()));
    if (rc != Z_OK || dst_len != count * sizeof(double))
        throw Error(ErrorCode::CorruptChunk, what + " does not decode to the chunk volume");
}

std::string chunk_file_name(const ChunkKey& key) {
    std::string name;
    for (std::size_t i = 0; i < key.indices.size(); ++i) {
        if (i) name += '.';
        name += std::to_string(key.indices[i]);
    }
    return name.empty() ? "0" : name;
}

json zarray_document(const Index& shape, const Index& chunks, Compression compression) {
    json j;
    j["zarr_format"] = 2;
    j["shape"] = shape;
    j["chunks"] = chunks;
    j["dtype"] = "<f8";
    if (compression == Compression::none)
        j["compressor"] = nullptr;
    else
        j["compressor"] = {{"id", "zlib"}, {"level", 1}};
    j["fill_value"] = "NaN";
    j["order"] = "C";
    j["filters"] = nullptr;
    return j;
}

struct ArrayMeta {
    Index shape;
    Index chunks;
    Compression compression = Compression::none;
    std::vector<std::string> dimensions;
    std::map<std::string, std::string> attrs;
};

ArrayMeta read_array_meta(const fs::path& dir) {
    const fs::path zarray = dir / ".zarray";
    if (!fs::exists(zarray))
        throw Error(ErrorCode::MissingMetadata, "missing " + zarray.string());
    json j;
    try {
        j = json::parse(read_text(zarray));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MissingMetadata, zarray.string() + ": " + e.what());
    }
    ArrayMeta meta;
    if (j.value("zarr_format", 0) != 2)
        throw Error(ErrorCode::MissingMetadata, zarray.string() + ": unsupported zarr_format");
    if (j.value("dtype", "") != "<f8")
        throw Error(ErrorCode::UnsupportedDtype,
                    zarray.string() + ": only little-endian float64 arrays are supported");
    meta.shape = j.at("shape").get<Index>();
    meta.chunks = j.at("chunks").get<Index>();
    const auto& comp = j.at("compressor");
    if (comp.is_null()) {
        meta.compression = Compression::none;
    } else if (comp.value("id", "") == "zlib") {
        meta.compression = Compression::deflate_level_1;
    } else {
        throw Error(ErrorCode::UnsupportedDtype, zarray.string() + ": unsupported compressor");
    }

    const fs::path zattrs = dir / ".zattrs";
    if (fs::exists(zattrs)) {
        json a = json::parse(read_text(zattrs));
        for (auto& [k, v] : a.items()) {
            if (k == "_ARRAY_DIMENSIONS")
                meta.dimensions = v.get<std::vector<std::string>>();
            else if (v.is_string())
                meta.attrs[k] = v.get<std::string>();
        }
    }
    return meta;
}

Index chunk_grid_counts(const Index& shape, const Index& chunks) {
    Index counts(shape.size());
    for (std::size_t d = 0; d < shape.size(); ++d)
        counts[d] = (shape[d] + chunks[d] - 1) / chunks[d];
    return counts;
}

// Raw codec for one array directory. Chunks are always full-volume after
// decode; edge chunks carry NaN padding.
class ZarrArray {
  public:
    ZarrArray(fs::path dir, ArrayMeta meta) : dir_(std::move(dir)), meta_(std::move(meta)) {}

    const ArrayMeta& meta() const { return meta_; }

    std::vector<double> read_chunk(const ChunkKey& key) const {
        const fs::path file = dir_ / chunk_file_name(key);
        const std::size_t vol = volume(meta_.chunks);
        std::vector<double> cells(vol);
        std::ifstream in(file, std::ios::binary);
        if (!in) throw Error(ErrorCode::CorruptChunk, "missing chunk file " + file.string());
        std::vector<std::byte> raw((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
        if (meta_.compression == Compression::none) {
            if (raw.size() != vol * sizeof(double))
                throw Error(ErrorCode::CorruptChunk,
                            file.string() + " does not decode to the chunk volume");
            std::memcpy(cells.data(), raw.data(), raw.size());
        } else {
            inflate_bytes(raw, cells.data(), vol, file.string());
        }
        return cells;
    }

    void write_chunk(const ChunkKey& key, const double* cells) const {
        const fs::path file = dir_ / chunk_file_name(key);
        const std::size_t vol = volume(meta_.chunks);
        if (meta_.compression == Compression::none) {
            std::ofstream out(file, std::ios::binary | std::ios::trunc);
            if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + file.string());
            out.write(reinterpret_cast<const char*>(cells),
                      static_cast<std::streamsize>(vol * sizeof(double)));
            if (!out) throw Error(ErrorCode::IoFailure, "short write to " + file.string());
        } else {
            const auto packed = deflate_bytes(cells, vol);
            std::ofstream out(file, std::ios::binary | std::ios::trunc);
            if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + file.string());
            out.write(reinterpret_cast<const char*>(packed.data()),
                      static_cast<std::streamsize>(packed.size()));
            if (!out) throw Error(ErrorCode::IoFailure, "short write to " + file.string());
        }
    }

    /// Clipped extent of `key` (edge chunks are logically smaller).
    std::pair<Index, Index> chunk_window(const ChunkKey& key) const {
        Index origin(meta_.shape.size()), extent(meta_.shape.size());
        for (std::size_t d = 0; d < meta_.shape.size(); ++d) {
            origin[d] = key.indices[d] * meta_.chunks[d];
            extent[d] = std::min(meta_.chunks[d], meta_.shape[d] - origin[d]);
        }
        return {origin, extent};
    }

  private:
    fs::path dir_;
    ArrayMeta meta_;
};

void write_full_array(const fs::path& dir, const Index& shape, const Index& chunks,
                      Compression compression, const std::vector<std::string>& dim_names,
                      const std::map<std::string, std::string>& attrs, const double* values) {
    fs::create_directories(dir);
    write_text(dir / ".zarray", dump_sorted(zarray_document(shape, chunks, compression)));
    json zattrs;
    zattrs["_ARRAY_DIMENSIONS"] = dim_names;
    for (const auto& [k, v] : attrs) zattrs[k] = v;
    write_text(dir / ".zattrs", dump_sorted(zattrs));

    ZarrArray array(dir, ArrayMeta{shape, chunks, compression, dim_names, attrs});
    const Index counts = chunk_grid_counts(shape, chunks);
    const std::size_t vol = volume(chunks);
    Index key(shape.size(), 0);
    std::vector<double> cells(vol);
    do {
        std::fill(cells.begin(), cells.end(), kNa);
        const auto [origin, extent] = array.chunk_window(ChunkKey{key});
        // gather the clipped window into the padded chunk buffer
        NdArray window(extent);
        copy_window_out(values, shape, origin, extent, window.data.data());
        copy_window_in(cells.data(), chunks, Index(shape.size(), 0), extent, window.data.data());
        array.write_chunk(ChunkKey{key}, cells.data());
    } while (next_index(key, counts));
}

// ---------------------------------------------------------------------------
// Lazy store-backed source
// ---------------------------------------------------------------------------

class ZarrSource final : public CubeSource {
  public:
    ZarrSource(fs::path root, std::vector<std::string> variables, Index shape, Index chunks,
               Compression compression, std::vector<std::string> dim_names)
        : root_(std::move(root)),
          variables_(std::move(variables)),
          shape_(std::move(shape)),
          chunks_(std::move(chunks)),
          compression_(compression),
          dim_names_(std::move(dim_names)) {}

    std::size_t variable_count() const override { return variables_.size(); }
    const Index& shape() const override { return shape_; }
    const Index& chunk_shape() const override { return chunks_; }
    const fs::path& root() const { return root_; }
    Compression compression() const { return compression_; }

    ZarrArray array(std::size_t var) const {
        return ZarrArray(root_ / variables_[var],
                         ArrayMeta{shape_, chunks_, compression_, dim_names_, {}});
    }

    void read_window(std::size_t var, std::span<const std::size_t> origin,
                     std::span<const std::size_t> shape, double* out) const override {
        for (std::size_t d = 0; d < shape_.size(); ++d)
            if (origin[d] + shape[d] > shape_[d])
                throw Error(ErrorCode::OutOfBounds, "window exceeds array bounds");
        if (volume(shape) == 0) return;
        const ZarrArray arr = array(var);
        Index first(shape_.size()), count(shape_.size());
        for (std::size_t d = 0; d < shape_.size(); ++d) {
            first[d] = origin[d] / chunks_[d];
            count[d] = (origin[d] + shape[d] - 1) / chunks_[d] - first[d] + 1;
        }
        Index offset(count.size(), 0);
        do {
            ChunkKey key;
            key.indices.resize(count.size());
            for (std::size_t d = 0; d < count.size(); ++d) key.indices[d] = first[d] + offset[d];
            const std::vector<double> cells = arr.read_chunk(key);
            {
                std::lock_guard<std::mutex> lock(mutex_);
                log_.emplace_back(var, key);
            }
            // intersection of this chunk with the requested window
            Index src_org(shape_.size()), dst_org(shape_.size()), ext(shape_.size());
            for (std::size_t d = 0; d < shape_.size(); ++d) {
                const std::size_t chunk_start = key.indices[d] * chunks_[d];
                const std::size_t lo = std::max(chunk_start, origin[d]);
                const std::size_t hi = std::min(chunk_start + chunks_[d], origin[d] + shape[d]);
                src_org[d] = lo - chunk_start;
                dst_org[d] = lo - origin[d];
                ext[d] = hi - lo;
            }
            NdArray piece(ext);
            copy_window_out(cells.data(), chunks_, src_org, ext, piece.data.data());
            copy_window_in(out, shape, dst_org, ext, piece.data.data());
        } while (next_index(offset, count));
    }

    std::uint64_t chunk_reads() const override {
        std::lock_guard<std::mutex> lock(mutex_);
        return log_.size();
    }
    void reset_chunk_log() const override {
        std::lock_guard<std::mutex> lock(mutex_);
        log_.clear();
    }
    std::vector<std::pair<std::size_t, ChunkKey>> chunk_log() const override {
        std::lock_guard<std::mutex> lock(mutex_);
        return log_;
    }

  private:
    fs::path root_;
    std::vector<std::string> variables_;
    Index shape_;
    Index chunks_;
    Compression compression_;
    std::vector<std::string> dim_names_;
    mutable std::mutex mutex_;
    mutable std::vector<std::pair<std::size_t, ChunkKey>> log_;
};

json dimension_metadata(const CubeSchema& schema, const AttributeSet& attrs) {
    json meta = json::object();
    for (std::size_t d = 0; d < schema.dims.size(); ++d) {
        const Dimension& dim = schema.dims[d];
        const Grid& grid = schema.grids[d];
        json m;
        m["kind"] = dim_kind_name(dim.kind);
        m["units"] = grid.units;
        m["regular"] = grid.regular;
        if (grid.crs) m["crs"] = *grid.crs;
        const auto it = attrs.per_dimension.find(dim.name);
        if (it != attrs.per_dimension.end() && !it->second.empty()) {
            json extra = json::object();
            for (const auto& [k, v] : it->second) extra[k] = v;
            m["attrs"] = extra;
        }
        meta[dim.name] = m;
    }
    return meta;
}

}  // namespace

// ---------------------------------------------------------------------------
// public operations
// ---------------------------------------------------------------------------

void write_cube(const DataCube& cube, const fs::path& root, Compression compression) {
    const CubeSchema& schema = cube.schema();
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + root.string());

    // group metadata first, chunk payloads afterwards
    write_text(root / ".zgroup", dump_sorted(json{{"zarr_format", 2}}));

    json root_attrs = json::object();
    for (const auto& [k, v] : cube.attributes().cube) root_attrs[k] = v;
    json dim_order = json::array();
    for (const auto& d : schema.dims) dim_order.push_back(d.name);
    root_attrs[kDimOrderKey] = dim_order;
    root_attrs[kDimMetaKey] = dimension_metadata(schema, cube.attributes());
    root_attrs[kVariablesKey] = schema.variables;
    json string_coords = json::object();
    for (std::size_t d = 0; d < schema.dims.size(); ++d)
        if (schema.grids[d].categorical()) string_coords[schema.dims[d].name] = schema.grids[d].labels;
    if (!string_coords.empty()) root_attrs[kStringCoordsKey] = string_coords;
    write_text(root / ".zattrs", dump_sorted(root_attrs));

    // numeric coordinate axes, one single-chunk 1-D array each
    for (std::size_t d = 0; d < schema.dims.size(); ++d) {
        const Grid& grid = schema.grids[d];
        if (grid.categorical()) continue;
        write_full_array(root / grid.dimension, {grid.size()}, {grid.size()}, compression,
                         {grid.dimension}, {}, grid.coords.data());
    }

    // variable payloads
    std::vector<std::string> dim_names;
    for (const auto& d : schema.dims) dim_names.push_back(d.name);
    for (std::size_t v = 0; v < schema.variables.size(); ++v) {
        const NdArray full = cube.materialise(v);
        std::map<std::string, std::string> var_attrs;
        const auto it = cube.attributes().per_variable.find(schema.variables[v]);
        if (it != cube.attributes().per_variable.end()) var_attrs = it->second;
        write_full_array(root / schema.variables[v], schema.shape(), schema.chunk_shape,
                         compression, dim_names, var_attrs, full.data.data());
    }
}

DataCube open_cube(const fs::path& root) {
    const fs::path zattrs_path = root / ".zattrs";
    if (!fs::exists(root / ".zgroup") || !fs::exists(zattrs_path))
        throw Error(ErrorCode::MissingMetadata, "no cube metadata under " + root.string());

    json root_attrs;
    try {
        root_attrs = json::parse(read_text(zattrs_path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MissingMetadata, zattrs_path.string() + ": " + e.what());
    }
    if (!root_attrs.contains(kDimOrderKey) || !root_attrs.contains(kVariablesKey))
        throw Error(ErrorCode::MissingMetadata, zattrs_path.string() + ": not a cube group");

    const auto dim_order = root_attrs[kDimOrderKey].get<std::vector<std::string>>();
    const auto variables = root_attrs[kVariablesKey].get<std::vector<std::string>>();
    const json dim_meta = root_attrs.value(kDimMetaKey, json::object());
    const json string_coords = root_attrs.value(kStringCoordsKey, json::object());

    AttributeSet attrs;
    for (auto& [k, v] : root_attrs.items())
        if (v.is_string()) attrs.cube[k] = v.get<std::string>();

    CubeSchema schema;
    schema.variables = variables;
    for (const auto& name : dim_order) {
        Dimension dim{name, DimKind::other};
        Grid grid;
        grid.dimension = name;
        const json m = dim_meta.value(name, json::object());
        dim.kind = dim_kind_from_name(m.value("kind", "other"));
        grid.units = m.value("units", "");
        grid.regular = m.value("regular", false);
        if (m.contains("crs")) grid.crs = m["crs"].get<std::string>();
        if (m.contains("attrs"))
            for (auto& [k, v] : m["attrs"].items())
                attrs.per_dimension[name][k] = v.get<std::string>();
        if (string_coords.contains(name)) {
            grid.labels = string_coords[name].get<std::vector<std::string>>();
        } else {
            const ArrayMeta axis = read_array_meta(root / name);
            ZarrArray arr(root / name, axis);
            if (axis.shape.size() != 1)
                throw Error(ErrorCode::MissingMetadata, "coordinate axis '" + name + "' is not 1-D");
            grid.coords = arr.read_chunk(ChunkKey{{0}});
            grid.coords.resize(axis.shape[0]);
        }
        schema.dims.push_back(dim);
        schema.grids.push_back(std::move(grid));
    }

    if (variables.empty())
        throw Error(ErrorCode::MissingMetadata, "cube lists no variables");
    ArrayMeta first = read_array_meta(root / variables[0]);
    schema.chunk_shape = first.chunks;
    for (const auto& var : variables) {
        const ArrayMeta meta = read_array_meta(root / var);
        if (meta.shape != first.shape || meta.chunks != first.chunks)
            throw Error(ErrorCode::MissingMetadata, "variable arrays disagree on shape/chunks");
        for (auto& [k, v] : meta.attrs) attrs.per_variable[var][k] = v;
    }

    std::vector<std::string> dim_names;
    for (const auto& d : schema.dims) dim_names.push_back(d.name);
    auto source = std::make_shared<ZarrSource>(root, variables, first.shape, first.chunks,
                                               first.compression, dim_names);
    return DataCube(std::move(schema), std::move(attrs), std::move(source));
}

bool is_store_backed(const DataCube& cube) {
    return dynamic_cast<const ZarrSource*>(cube.source().get()) != nullptr;
}

void write_window(const DataCube& cube, std::size_t var, std::span<const std::size_t> origin,
                  std::span<const std::size_t> shape, std::span<const double> values) {
    const auto* src = dynamic_cast<const ZarrSource*>(cube.source().get());
    if (!src)
        throw Error(ErrorCode::IoFailure, "write_window requires a store-backed cube");
    const Index& full = src->shape();
    const Index& chunks = src->chunk_shape();
    for (std::size_t d = 0; d < full.size(); ++d)
        if (origin[d] + shape[d] > full[d])
            throw Error(ErrorCode::OutOfBounds, "window exceeds array bounds");
    if (values.size() != volume(shape))
        throw Error(ErrorCode::OutOfBounds, "value buffer does not match window volume");
    if (values.empty()) return;

    const ZarrArray arr = src->array(var);
    Index first(full.size()), count(full.size());
    for (std::size_t d = 0; d < full.size(); ++d) {
        first[d] = origin[d] / chunks[d];
        count[d] = (origin[d] + shape[d] - 1) / chunks[d] - first[d] + 1;
    }
    Index offset(count.size(), 0);
    do {
        ChunkKey key;
        key.indices.resize(count.size());
        for (std::size_t d = 0; d < count.size(); ++d) key.indices[d] = first[d] + offset[d];
        std::vector<double> cells = arr.read_chunk(key);
        Index src_org(full.size()), dst_org(full.size()), ext(full.size());
        for (std::size_t d = 0; d < full.size(); ++d) {
            const std::size_t chunk_start = key.indices[d] * chunks[d];
            const std::size_t lo = std::max(chunk_start, origin[d]);
            const std::size_t hi = std::min(chunk_start + chunks[d], origin[d] + shape[d]);
            dst_org[d] = lo - chunk_start;
            src_org[d] = lo - origin[d];
            ext[d] = hi - lo;
        }
        NdArray piece(ext);
        copy_window_out(values.data(), shape, src_org, ext, piece.data.data());
        copy_window_in(cells.data(), chunks, dst_org, ext, piece.data.data());
        arr.write_chunk(key, cells.data());
    } while (next_index(offset, count));
}

}  // namespace esdc
