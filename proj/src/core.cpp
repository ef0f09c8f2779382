#include "esdc/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <mutex>

namespace esdc {

const char* dim_kind_name(DimKind kind) {
    switch (kind) {
        case DimKind::spatial: return "spatial";
        case DimKind::temporal: return "temporal";
        case DimKind::variable: return "variable";
        case DimKind::categorical: return "categorical";
        case DimKind::other: return "other";
    }
    return "other";
}

DimKind dim_kind_from_name(const std::string& name) {
    if (name == "spatial") return DimKind::spatial;
    if (name == "temporal") return DimKind::temporal;
    if (name == "variable") return DimKind::variable;
    if (name == "categorical") return DimKind::categorical;
    return DimKind::other;
}

Grid Grid::regular_axis(std::string dimension, double first, double step, std::size_t count,
                        std::string units) {
    Grid g;
    g.dimension = std::move(dimension);
    g.units = std::move(units);
    g.regular = true;
    g.coords.resize(count);
    for (std::size_t i = 0; i < count; ++i) g.coords[i] = first + step * static_cast<double>(i);
    return g;
}

void validate_grid(const Grid& grid) {
    if (grid.size() < 2)
        throw Error(ErrorCode::TooFewCoordinates,
                    "grid '" + grid.dimension + "' must have at least two coordinates");
    if (grid.categorical()) {
        for (const auto& l : grid.labels)
            if (l.empty())
                throw Error(ErrorCode::NonMonotonic,
                            "grid '" + grid.dimension + "' has an empty label");
        return;
    }
    const bool up = grid.coords[1] > grid.coords[0];
    for (std::size_t i = 1; i < grid.coords.size(); ++i) {
        const double d = grid.coords[i] - grid.coords[i - 1];
        if ((up && d <= 0) || (!up && d >= 0))
            throw Error(ErrorCode::NonMonotonic,
                        "grid '" + grid.dimension + "' is not strictly monotonic at position " +
                            std::to_string(i));
    }
    if (grid.regular) {
        const double step = grid.coords[1] - grid.coords[0];
        const double tol = 1e-9 * std::max(std::abs(step), 1e-300);
        for (std::size_t i = 1; i < grid.coords.size(); ++i) {
            const double d = grid.coords[i] - grid.coords[i - 1];
            if (std::abs(d - step) > tol)
                throw Error(ErrorCode::IrregularSpacingDeclaredRegular,
                            "grid '" + grid.dimension + "' declared regular but spacing varies");
        }
    }
}

std::optional<std::size_t> CubeSchema::find(const std::string& dim_name) const {
    for (std::size_t i = 0; i < dims.size(); ++i)
        if (dims[i].name == dim_name) return i;
    return std::nullopt;
}

std::size_t CubeSchema::require(const std::string& dim_name) const {
    if (auto i = find(dim_name)) return *i;
    throw Error(ErrorCode::UnknownDimension, "no dimension named '" + dim_name + "'");
}

Index CubeSchema::shape() const {
    Index s(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) s[i] = grids[i].size();
    return s;
}

std::optional<std::size_t> CubeSchema::variable_index(const std::string& name) const {
    for (std::size_t i = 0; i < variables.size(); ++i)
        if (variables[i] == name) return i;
    return std::nullopt;
}

namespace {

bool is_y_axis(const Dimension& d) {
    return d.kind == DimKind::spatial && (d.name == "lat" || d.name == "latitude" || d.name == "y");
}
bool is_x_axis(const Dimension& d) {
    return d.kind == DimKind::spatial &&
           (d.name == "lon" || d.name == "longitude" || d.name == "x");
}

int canonical_rank(const Dimension& d) {
    if (d.kind == DimKind::temporal) return 0;
    if (is_y_axis(d)) return 1;
    if (is_x_axis(d)) return 2;
    return 3;
}

}  // namespace

void CubeSchema::canonicalise() {
    std::vector<std::size_t> perm(dims.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        return canonical_rank(dims[a]) < canonical_rank(dims[b]);
    });
    std::vector<Dimension> nd;
    std::vector<Grid> ng;
    Index nc;
    for (auto i : perm) {
        nd.push_back(dims[i]);
        ng.push_back(grids[i]);
        if (i < chunk_shape.size()) nc.push_back(chunk_shape[i]);
    }
    dims = std::move(nd);
    grids = std::move(ng);
    if (nc.size() == dims.size()) chunk_shape = std::move(nc);
}

void CubeSchema::validate() const {
    if (grids.size() != dims.size())
        throw Error(ErrorCode::UnknownDimension, "schema needs exactly one grid per dimension");
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (grids[i].dimension != dims[i].name)
            throw Error(ErrorCode::UnknownDimension,
                        "grid order does not match dimension order at '" + dims[i].name + "'");
        for (std::size_t j = i + 1; j < dims.size(); ++j)
            if (dims[i].name == dims[j].name)
                throw Error(ErrorCode::UnknownDimension,
                            "duplicate dimension '" + dims[i].name + "'");
        validate_grid(grids[i]);
    }
    if (chunk_shape.size() != dims.size())
        throw Error(ErrorCode::UnknownDimension, "chunk_shape must cover every dimension");
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (chunk_shape[i] < 1 || chunk_shape[i] > grids[i].size())
            throw Error(ErrorCode::OutOfBounds,
                        "chunk extent for '" + dims[i].name + "' must be in [1, grid length]");
    }
    if (variables.empty())
        throw Error(ErrorCode::UnknownVariable, "schema needs at least one variable");
    for (std::size_t i = 0; i < variables.size(); ++i)
        for (std::size_t j = i + 1; j < variables.size(); ++j)
            if (variables[i] == variables[j])
                throw Error(ErrorCode::DuplicateVariableName,
                            "duplicate variable '" + variables[i] + "'");
}

std::string ProvenanceRecord::line() const {
    const std::string s = timestamp + ": " + operation + " " + parameters;
    if (s.find('\n') != std::string::npos)
        throw Error(ErrorCode::MalformedRecord, "provenance record must serialise to one line");
    return s;
}

ProvenanceRecord ProvenanceRecord::parse(const std::string& line) {
    const auto colon = line.find(": ");
    if (colon == std::string::npos)
        throw Error(ErrorCode::MalformedRecord, "missing ': ' separator");
    const auto space = line.find(' ', colon + 2);
    if (space == std::string::npos)
        throw Error(ErrorCode::MalformedRecord, "missing parameters field");
    return {line.substr(0, colon), line.substr(colon + 2, space - colon - 2),
            line.substr(space + 1)};
}

namespace {
std::mutex g_clock_mutex;
std::string g_fixed_time;
}  // namespace

std::string provenance_now() {
    {
        std::lock_guard<std::mutex> lock(g_clock_mutex);
        if (!g_fixed_time.empty()) return g_fixed_time;
    }
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void set_fixed_provenance_time(const std::string& iso_or_empty) {
    std::lock_guard<std::mutex> lock(g_clock_mutex);
    g_fixed_time = iso_or_empty;
}

std::vector<std::string> AttributeSet::history_lines() const {
    std::vector<std::string> lines;
    const auto it = cube.find("history");
    if (it == cube.end() || it->second.empty()) return lines;
    std::size_t pos = 0;
    while (pos <= it->second.size()) {
        const auto nl = it->second.find('\n', pos);
        if (nl == std::string::npos) {
            lines.push_back(it->second.substr(pos));
            break;
        }
        lines.push_back(it->second.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

// ---------------------------------------------------------------------------
// In-memory source
// ---------------------------------------------------------------------------

namespace {

class MemorySource final : public CubeSource {
  public:
    MemorySource(Index shape, Index chunk_shape, std::size_t variables, std::vector<double> values)
        : shape_(std::move(shape)), chunk_shape_(std::move(chunk_shape)), variables_(variables) {
        const std::size_t want = volume(shape_) * variables_;
        if (values.empty()) values.assign(want, 0.0);
        if (values.size() != want)
            throw Error(ErrorCode::ShapeMismatch, "backing array size does not match schema shape");
        data_ = std::move(values);
    }

    std::size_t variable_count() const override { return variables_; }
    const Index& shape() const override { return shape_; }
    const Index& chunk_shape() const override { return chunk_shape_; }

    void read_window(std::size_t var, std::span<const std::size_t> origin,
                     std::span<const std::size_t> shape, double* out) const override {
        log_window(var, origin, shape);
        copy_window_out(data_.data() + var * volume(shape_), shape_, origin, shape, out);
    }

    double* variable_data(std::size_t var) { return data_.data() + var * volume(shape_); }
    const std::vector<double>& raw() const { return data_; }

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
    // Records the virtual chunks a window read touches, mirroring what a
    // persistent store would fetch.
    void log_window(std::size_t var, std::span<const std::size_t> origin,
                    std::span<const std::size_t> shape) const {
        Index first(shape_.size()), count(shape_.size());
        for (std::size_t d = 0; d < shape_.size(); ++d) {
            if (origin[d] + shape[d] > shape_[d])
                throw Error(ErrorCode::OutOfBounds, "window exceeds array bounds");
            first[d] = origin[d] / chunk_shape_[d];
            const std::size_t last = shape[d] == 0 ? first[d]
                                                   : (origin[d] + shape[d] - 1) / chunk_shape_[d];
            count[d] = last - first[d] + 1;
        }
        std::lock_guard<std::mutex> lock(mutex_);
        Index offset(count.size(), 0);
        do {
            Index key(count.size());
            for (std::size_t d = 0; d < count.size(); ++d) key[d] = first[d] + offset[d];
            log_.emplace_back(var, ChunkKey{std::move(key)});
        } while (next_index(offset, count));
    }

    Index shape_;
    Index chunk_shape_;
    std::size_t variables_;
    std::vector<double> data_;
    mutable std::mutex mutex_;
    mutable std::vector<std::pair<std::size_t, ChunkKey>> log_;
};

}  // namespace

std::shared_ptr<CubeSource> make_memory_source(Index shape, Index chunk_shape,
                                               std::size_t variables,
                                               std::vector<double> values) {
    return std::make_shared<MemorySource>(std::move(shape), std::move(chunk_shape), variables,
                                          std::move(values));
}

// ---------------------------------------------------------------------------
// DataCube
// ---------------------------------------------------------------------------

DataCube::DataCube(CubeSchema schema, AttributeSet attributes, std::shared_ptr<CubeSource> source)
    : schema_(std::move(schema)), attrs_(std::move(attributes)), source_(std::move(source)) {
    schema_.validate();
    if (source_->shape() != schema_.shape() || source_->variable_count() != schema_.variables.size())
        throw Error(ErrorCode::ShapeMismatch, "source shape does not match schema");
}

DataCube DataCube::from_values(CubeSchema schema, AttributeSet attributes,
                               std::vector<double> values) {
    schema.validate();
    auto src = make_memory_source(schema.shape(), schema.chunk_shape, schema.variables.size(),
                                  std::move(values));
    return DataCube(std::move(schema), std::move(attributes), std::move(src));
}

NdArray DataCube::read_window(std::size_t var, std::span<const std::size_t> origin,
                              std::span<const std::size_t> shape) const {
    if (var >= schema_.variables.size())
        throw Error(ErrorCode::UnknownVariable, "variable index out of range");
    const Index full = schema_.shape();
    if (origin.size() != full.size() || shape.size() != full.size())
        throw Error(ErrorCode::OutOfBounds, "window rank does not match cube rank");
    for (std::size_t d = 0; d < full.size(); ++d)
        if (origin[d] + shape[d] > full[d])
            throw Error(ErrorCode::OutOfBounds, "window exceeds cube bounds");
    NdArray out(Index(shape.begin(), shape.end()));
    source_->read_window(var, origin, shape, out.data.data());
    return out;
}

NdArray DataCube::materialise(std::size_t var) const {
    const Index full = schema_.shape();
    const Index origin(full.size(), 0);
    return read_window(var, origin, full);
}

DataCube DataCube::with_attributes(AttributeSet attrs) const {
    DataCube copy = *this;
    copy.attrs_ = std::move(attrs);
    return copy;
}

int order(const DataCube& cube) {
    const int dims = static_cast<int>(cube.schema().dims.size());
    return dims + (cube.schema().variables.size() >= 2 ? 1 : 0);
}

DataCube append_provenance(const DataCube& cube, const ProvenanceRecord& record) {
    const std::string line = record.line();  // throws MalformedRecord on newlines
    AttributeSet attrs = cube.attributes();
    auto& history = attrs.cube["history"];
    if (history.empty())
        history = line;
    else
        history += "\n" + line;
    return cube.with_attributes(std::move(attrs));
}

DataCube with_provenance(const DataCube& cube, const std::string& operation,
                         const std::string& parameters) {
    return append_provenance(cube, {provenance_now(), operation, parameters});
}

// ---------------------------------------------------------------------------
// subset
// ---------------------------------------------------------------------------

namespace {

std::pair<std::size_t, std::size_t> resolve_range(const Grid& grid, const Range& range) {
    if (range.index) {
        const auto [first, last] = *range.index;
        if (first > last || last >= grid.size())
            throw Error(ErrorCode::EmptySelection,
                        "index range invalid for dimension '" + grid.dimension + "'");
        return {first, last};
    }
    if (range.label) {
        if (!grid.categorical())
            throw Error(ErrorCode::EmptySelection,
                        "label selection on non-categorical dimension '" + grid.dimension + "'");
        for (std::size_t i = 0; i < grid.labels.size(); ++i)
            if (grid.labels[i] == *range.label) return {i, i};
        throw Error(ErrorCode::EmptySelection,
                    "label '" + *range.label + "' not found in '" + grid.dimension + "'");
    }
    if (!range.coord)
        throw Error(ErrorCode::EmptySelection, "empty range for '" + grid.dimension + "'");
    if (grid.categorical())
        throw Error(ErrorCode::EmptySelection,
                    "categorical dimension '" + grid.dimension + "' requires exact-label selection");
    const auto [lo, hi] = *range.coord;
    std::size_t first = grid.size(), last = 0;
    bool any = false;
    for (std::size_t i = 0; i < grid.coords.size(); ++i) {
        const double c = grid.coords[i];
        if (c >= std::min(lo, hi) && c <= std::max(lo, hi)) {
            if (!any) first = i;
            last = i;
            any = true;
        }
    }
    if (!any)
        throw Error(ErrorCode::EmptySelection,
                    "coordinate range selects nothing on '" + grid.dimension + "'");
    return {first, last};
}

std::string ranges_to_params(const std::map<std::string, Range>& ranges);

}  // namespace

DataCube subset(const DataCube& cube, const std::map<std::string, Range>& ranges) {
    const CubeSchema& schema = cube.schema();
    Index origin(schema.dims.size(), 0);
    Index extent = schema.shape();
    for (const auto& [name, range] : ranges) {
        const std::size_t d = schema.require(name);
        const auto [first, last] = resolve_range(schema.grids[d], range);
        origin[d] = first;
        extent[d] = last - first + 1;
    }

    CubeSchema out;
    out.variables = schema.variables;
    std::vector<bool> kept(schema.dims.size());
    for (std::size_t d = 0; d < schema.dims.size(); ++d) {
        kept[d] = extent[d] >= 2;  // single-coordinate axes are dropped
        if (!kept[d]) continue;
        Grid g = schema.grids[d];
        if (g.categorical())
            g.labels.assign(g.labels.begin() + origin[d], g.labels.begin() + origin[d] + extent[d]);
        else
            g.coords.assign(g.coords.begin() + origin[d], g.coords.begin() + origin[d] + extent[d]);
        out.dims.push_back(schema.dims[d]);
        out.grids.push_back(std::move(g));
        out.chunk_shape.push_back(std::min(schema.chunk_shape[d], extent[d]));
    }

    const std::size_t nvar = schema.variables.size();
    std::vector<double> values;
    values.reserve(volume(extent) * nvar);
    for (std::size_t v = 0; v < nvar; ++v) {
        NdArray window = cube.read_window(v, origin, extent);
        values.insert(values.end(), window.data.begin(), window.data.end());
    }

    AttributeSet attrs = cube.attributes();
    for (std::size_t d = 0; d < schema.dims.size(); ++d)
        if (!kept[d]) attrs.per_dimension.erase(schema.dims[d].name);

    DataCube result = DataCube::from_values(std::move(out), std::move(attrs), std::move(values));
    return with_provenance(result, "subset", ranges_to_params(ranges));
}

namespace {

std::string double_to_param(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string ranges_to_params(const std::map<std::string, Range>& ranges) {
    std::string s = "{";
    bool first = true;
    for (const auto& [name, r] : ranges) {
        if (!first) s += ",";
        first = false;
        s += "\"" + name + "\":";
        if (r.index)
            s += "[\"i\"," + std::to_string(r.index->first) + "," + std::to_string(r.index->second) +
                 "]";
        else if (r.label)
            s += "[\"l\",\"" + *r.label + "\"]";
        else if (r.coord)
            s += "[\"c\"," + double_to_param(r.coord->first) + "," +
                 double_to_param(r.coord->second) + "]";
    }
    return s + "}";
}

}  // namespace

}  // namespace esdc
