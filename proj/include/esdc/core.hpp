#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esdc/error.hpp"
#include "esdc/nd.hpp"

namespace esdc {

enum class DimKind { spatial, temporal, variable, categorical, other };

const char* dim_kind_name(DimKind kind);
DimKind dim_kind_from_name(const std::string& name);

struct Dimension {
    std::string name;
    DimKind kind = DimKind::other;
};

/// Coordinate axis of one dimension. Numeric coordinates are doubles
/// (temporal ones are integer day offsets from 1970-01-01); categorical
/// dimensions carry string labels instead.
struct Grid {
    std::string dimension;
    std::vector<double> coords;
    std::vector<std::string> labels;
    std::string units;
    bool regular = false;
    std::optional<std::string> crs;

    bool categorical() const { return !labels.empty(); }
    std::size_t size() const { return categorical() ? labels.size() : coords.size(); }
    bool ascending() const { return coords.size() < 2 || coords[1] > coords[0]; }
    /// Signed spacing of a regular numeric grid.
    double spacing() const { return coords[1] - coords[0]; }

    static Grid regular_axis(std::string dimension, double first, double step, std::size_t count,
                             std::string units = "");
};

/// Throws on the first violated grid invariant: fewer than two coordinates,
/// non-monotonic numeric coordinates, or regular=true with uneven spacing.
void validate_grid(const Grid& grid);

struct CubeSchema {
    std::vector<Dimension> dims;
    std::vector<Grid> grids;  // one per dimension, same order
    std::vector<std::string> variables;
    Index chunk_shape;  // per dimension

    std::optional<std::size_t> find(const std::string& dim_name) const;
    std::size_t require(const std::string& dim_name) const;
    Index shape() const;  // per-dimension grid lengths
    std::optional<std::size_t> variable_index(const std::string& name) const;

    /// Reorders dimensions to (time, lat, lon, extras); variables stay a
    /// separate axis in front of these in the backing array.
    void canonicalise();
    void validate() const;
};

/// One line of the cube's history attribute:
/// "<timestamp>: <operation> <parameters>".
struct ProvenanceRecord {
    std::string timestamp;  // ISO-8601 UTC
    std::string operation;
    std::string parameters;  // canonical single-line serialisation (JSON object)

    std::string line() const;
    static ProvenanceRecord parse(const std::string& line);
};

/// Current provenance timestamp; frozen by set_fixed_provenance_time for
/// reproducible runs.
std::string provenance_now();
void set_fixed_provenance_time(const std::string& iso_or_empty);

struct AttributeSet {
    std::map<std::string, std::string> cube;
    std::map<std::string, std::map<std::string, std::string>> per_dimension;
    std::map<std::string, std::map<std::string, std::string>> per_variable;

    std::vector<std::string> history_lines() const;
};

struct ChunkKey {
    Index indices;
    auto operator<=>(const ChunkKey&) const = default;
};

/// Backing storage of a cube: an in-memory array or an on-disk chunked
/// store. Reads are windowed; implementations log which chunks a read
/// touched so tests and the engine can count chunk I/O. Logical index space
/// is variables-major: (variable, dim0, dim1, ...).
class CubeSource {
  public:
    virtual ~CubeSource() = default;

    virtual std::size_t variable_count() const = 0;
    virtual const Index& shape() const = 0;        // per-dimension lengths
    virtual const Index& chunk_shape() const = 0;  // per-dimension chunk extents

    virtual void read_window(std::size_t var, std::span<const std::size_t> origin,
                             std::span<const std::size_t> shape, double* out) const = 0;

    // chunk-read instrumentation
    virtual std::uint64_t chunk_reads() const = 0;
    virtual void reset_chunk_log() const = 0;
    virtual std::vector<std::pair<std::size_t, ChunkKey>> chunk_log() const = 0;
};

std::shared_ptr<CubeSource> make_memory_source(Index shape, Index chunk_shape,
                                               std::size_t variables,
                                               std::vector<double> values);

/// A labelled, chunked multidimensional array: schema + attributes + data
/// handle. Immutable after construction; operations return new cubes.
class DataCube {
  public:
    DataCube() = default;
    DataCube(CubeSchema schema, AttributeSet attributes, std::shared_ptr<CubeSource> source);

    /// Builds an in-memory cube; `values` is variables-major row-major and
    /// may be empty to zero-initialise.
    static DataCube from_values(CubeSchema schema, AttributeSet attributes,
                                std::vector<double> values);

    const CubeSchema& schema() const { return schema_; }
    const AttributeSet& attributes() const { return attrs_; }
    const std::shared_ptr<CubeSource>& source() const { return source_; }

    NdArray read_window(std::size_t var, std::span<const std::size_t> origin,
                        std::span<const std::size_t> shape) const;
    /// Whole array for one variable.
    NdArray materialise(std::size_t var) const;

    DataCube with_attributes(AttributeSet attrs) const;

  private:
    CubeSchema schema_;
    AttributeSet attrs_;
    std::shared_ptr<CubeSource> source_;
};

/// Number of dimensions; the variable axis counts only when the cube holds
/// two or more variables.
int order(const DataCube& cube);

/// Selection along one dimension: a closed coordinate interval, an inclusive
/// index range, or an exact label match (categorical grids only).
struct Range {
    std::optional<std::pair<double, double>> coord;
    std::optional<std::pair<std::size_t, std::size_t>> index;
    std::optional<std::string> label;

    static Range coords(double lo, double hi) { return {{{lo, hi}}, {}, {}}; }
    static Range indices(std::size_t first, std::size_t last) { return {{}, {{first, last}}, {}}; }
    static Range exact(std::string l) { return {{}, {}, std::move(l)}; }
};

/// Restricts the cube to the selected coordinates. A dimension whose
/// selection keeps exactly one coordinate is dropped (grids need at least
/// two); the result is order-reduced. Appends one provenance record.
DataCube subset(const DataCube& cube, const std::map<std::string, Range>& ranges);

DataCube append_provenance(const DataCube& cube, const ProvenanceRecord& record);

/// Convenience: append a record stamped now for `operation`.
DataCube with_provenance(const DataCube& cube, const std::string& operation,
                         const std::string& parameters);

}  // namespace esdc
