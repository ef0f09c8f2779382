#include "esdc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "json.hpp"

namespace esdc {

using nlohmann::json;

std::uint64_t SampleRng::next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double SampleRng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t SampleRng::next_below(std::uint64_t bound) {
    // rejection sampling keeps the draw unbiased
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % bound;
}

namespace {

std::optional<std::size_t> find_axis(const CubeSchema& schema, DimKind kind,
                                     std::initializer_list<const char*> names) {
    for (std::size_t d = 0; d < schema.dims.size(); ++d) {
        if (schema.dims[d].kind != kind) continue;
        for (const char* n : names)
            if (schema.dims[d].name == n) return d;
    }
    return std::nullopt;
}

}  // namespace

std::vector<SamplePoint> weighted_sample_points(const DataCube& mask, const AreaWeights& weights,
                                                std::size_t n, std::uint64_t seed) {
    const CubeSchema& schema = mask.schema();
    const Index shape = schema.shape();
    const NdArray field = mask.materialise(0);
    const auto lat_dim = find_axis(schema, DimKind::spatial, {"lat", "latitude", "y"});

    struct Candidate {
        double key;
        std::size_t flat;
    };
    std::vector<Candidate> candidates;
    SampleRng rng(seed);
    Index idx(shape.size(), 0);
    std::size_t flat = 0;
    do {
        const double v = field.data[flat];
        const bool eligible = !is_na(v) && v != 0.0;
        const double u = rng.next_double();  // one draw per cell keeps seeds stable
        if (eligible) {
            double w = 1.0;
            if (lat_dim && !weights.band.empty()) w = weights.band[idx[*lat_dim]];
            // log(u)/w is monotone in u^(1/w); avoids pow underflow
            candidates.push_back({std::log(std::max(u, 1e-300)) / w, flat});
        }
        ++flat;
    } while (next_index(idx, shape));

    if (candidates.size() < n)
        throw Error(ErrorCode::NotEnoughEligibleCells,
                    std::to_string(candidates.size()) + " eligible cells, " + std::to_string(n) +
                        " requested");
    std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (a.key != b.key) return a.key > b.key;
        return a.flat < b.flat;
    });
    candidates.resize(n);

    std::vector<SamplePoint> points;
    points.reserve(n);
    for (const auto& c : candidates) {
        SamplePoint p;
        p.indices = unravel(c.flat, shape);
        p.coordinates.resize(shape.size());
        for (std::size_t d = 0; d < shape.size(); ++d)
            p.coordinates[d] = schema.grids[d].categorical()
                                   ? static_cast<double>(p.indices[d])
                                   : schema.grids[d].coords[p.indices[d]];
        points.push_back(std::move(p));
    }
    return points;
}

namespace {

ChunkKey chunk_key_of(const SamplePoint& p, const Index& chunk_shape) {
    ChunkKey key;
    key.indices.resize(p.indices.size());
    for (std::size_t d = 0; d < p.indices.size(); ++d)
        key.indices[d] = p.indices[d] / chunk_shape[d];
    return key;
}

ReadPlan plan_for(const std::vector<SamplePoint>& points, const Index& chunk_shape) {
    std::map<ChunkKey, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < points.size(); ++i)
        groups[chunk_key_of(points[i], chunk_shape)].push_back(i);
    ReadPlan plan;
    for (auto& [key, members] : groups) plan.groups.push_back({key, std::move(members)});
    return plan;
}

}  // namespace

std::vector<Batch> coalesced_batches(const std::vector<SamplePoint>& points, const Index& shape,
                                     const Index& chunk_shape, std::size_t batch_size,
                                     std::uint64_t seed, bool chunk_aligned) {
    for (const auto& p : points)
        for (std::size_t d = 0; d < shape.size(); ++d)
            if (p.indices[d] >= shape[d])
                throw Error(ErrorCode::OutOfBounds, "sample point outside the array");
    batch_size = std::max<std::size_t>(1, batch_size);

    std::vector<SamplePoint> shuffled = points;
    SampleRng rng(seed);
    rng.shuffle(shuffled);

    std::vector<std::vector<SamplePoint>> batches_points;
    if (chunk_aligned) {
        // whole per-chunk groups, packed in shuffled first-appearance order
        std::map<ChunkKey, std::vector<SamplePoint>> by_chunk;
        std::vector<ChunkKey> order;
        for (auto& p : shuffled) {
            ChunkKey key = chunk_key_of(p, chunk_shape);
            if (!by_chunk.count(key)) order.push_back(key);
            by_chunk[key].push_back(std::move(p));
        }
        std::vector<SamplePoint> current;
        for (const auto& key : order) {
            auto& group = by_chunk[key];
            if (!current.empty() && current.size() + group.size() > batch_size) {
                batches_points.push_back(std::move(current));
                current.clear();
            }
            for (auto& p : group) {
                current.push_back(std::move(p));
                if (current.size() == batch_size) {
                    batches_points.push_back(std::move(current));
                    current.clear();
                }
            }
        }
        if (!current.empty()) batches_points.push_back(std::move(current));
    } else {
        for (std::size_t i = 0; i < shuffled.size(); i += batch_size) {
            const std::size_t end = std::min(shuffled.size(), i + batch_size);
            batches_points.emplace_back(shuffled.begin() + static_cast<std::ptrdiff_t>(i),
                                        shuffled.begin() + static_cast<std::ptrdiff_t>(end));
        }
    }

    std::vector<Batch> batches;
    batches.reserve(batches_points.size());
    for (auto& pts : batches_points) {
        Batch b;
        b.plan = plan_for(pts, chunk_shape);
        b.points = std::move(pts);
        batches.push_back(std::move(b));
    }
    return batches;
}

std::vector<double> execute_read_plan(const DataCube& cube, std::size_t var, const Batch& batch) {
    const Index full = cube.schema().shape();
    const Index& chunks = cube.source()->chunk_shape();
    std::vector<double> values(batch.points.size(), kNa);
    for (const auto& group : batch.plan.groups) {
        Index origin(full.size()), extent(full.size());
        for (std::size_t d = 0; d < full.size(); ++d) {
            origin[d] = group.key.indices[d] * chunks[d];
            extent[d] = std::min(chunks[d], full[d] - origin[d]);
        }
        const NdArray chunk = cube.read_window(var, origin, extent);
        for (std::size_t member : group.members) {
            Index local = batch.points[member].indices;
            for (std::size_t d = 0; d < full.size(); ++d) local[d] -= origin[d];
            values[member] = chunk.at(local);
        }
    }
    return values;
}

// ---------------------------------------------------------------------------
// block cross-validation
// ---------------------------------------------------------------------------

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

/// Equirectangular distance in degrees, longitude difference scaled by the
/// cosine of the mean latitude.
double approx_distance_deg(double lat_a, double lon_a, double lat_b, double lon_b) {
    const double dphi = lat_a - lat_b;
    double dl = std::abs(lon_a - lon_b);
    dl = std::fmod(dl, 360.0);
    if (dl > 180.0) dl = 360.0 - dl;
    const double scale = std::cos(0.5 * (lat_a + lat_b) * kDegToRad);
    return std::sqrt(dphi * dphi + dl * scale * dl * scale);
}

std::pair<double, double> point_lat_lon(const SamplePoint& p) {
    // spatial coordinates are the trailing (y, x) pair
    const std::size_t n = p.coordinates.size();
    if (n < 2)
        throw Error(ErrorCode::UnknownDimension, "points need lat/lon coordinates for blocking");
    return {p.coordinates[n - 2], p.coordinates[n - 1]};
}

}  // namespace

FoldAssignment block_cv_folds(const std::vector<SamplePoint>& points, double block_size_deg, int k,
                              double buffer_deg, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorCode::Usage, "need at least two folds");
    if (!(block_size_deg > 0)) throw Error(ErrorCode::Usage, "block size must be positive");

    using BlockId = std::pair<long, long>;
    std::vector<BlockId> block_of(points.size());
    std::map<BlockId, int> blocks;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto [lat, lon] = point_lat_lon(points[i]);
        const BlockId b{static_cast<long>(std::floor(lat / block_size_deg)),
                        static_cast<long>(std::floor(lon / block_size_deg))};
        block_of[i] = b;
        blocks.emplace(b, -1);
    }
    if (blocks.size() < static_cast<std::size_t>(k))
        throw Error(ErrorCode::FewerBlocksThanFolds,
                    std::to_string(blocks.size()) + " occupied blocks for " + std::to_string(k) +
                        " folds");

    std::vector<BlockId> order;
    order.reserve(blocks.size());
    for (const auto& [b, unused] : blocks) order.push_back(b);
    SampleRng rng(seed);
    rng.shuffle(order);
    for (std::size_t i = 0; i < order.size(); ++i) blocks[order[i]] = static_cast<int>(i % k);

    FoldAssignment out;
    out.k = k;
    out.fold_of_point.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out.fold_of_point[i] = blocks[block_of[i]];

    out.roles.assign(static_cast<std::size_t>(k),
                     std::vector<FoldRole>(points.size(), FoldRole::train));
    for (int f = 0; f < k; ++f) {
        auto& roles = out.roles[static_cast<std::size_t>(f)];
        for (std::size_t i = 0; i < points.size(); ++i)
            if (out.fold_of_point[i] == f) roles[i] = FoldRole::test;
        if (buffer_deg <= 0) continue;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (roles[i] != FoldRole::train) continue;
            const auto [lat_i, lon_i] = point_lat_lon(points[i]);
            for (std::size_t j = 0; j < points.size(); ++j) {
                if (roles[j] != FoldRole::test) continue;
                const auto [lat_j, lon_j] = point_lat_lon(points[j]);
                if (approx_distance_deg(lat_i, lon_i, lat_j, lon_j) <= buffer_deg) {
                    roles[i] = FoldRole::excluded_by_buffer;
                    break;
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// extreme events
// ---------------------------------------------------------------------------

namespace {

class UnionFind {
  public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
    }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

  private:
    std::vector<std::size_t> parent_;
};

}  // namespace

std::vector<EventRecord> detect_extreme_events(const DataCube& anomaly_cube, double z_threshold,
                                               std::size_t min_size, int connectivity) {
    if (connectivity != 6 && connectivity != 26)
        throw Error(ErrorCode::Usage, "connectivity must be 6 or 26");
    const CubeSchema& schema = anomaly_cube.schema();
    if (schema.variables.size() != 1)
        throw Error(ErrorCode::NonAnomalyInput, "event detection expects a univariate cube");
    const auto pv = anomaly_cube.attributes().per_variable.find(schema.variables[0]);
    if (pv == anomaly_cube.attributes().per_variable.end() ||
        pv->second.find("anomaly") == pv->second.end() || pv->second.at("anomaly") != "true")
        throw Error(ErrorCode::NonAnomalyInput,
                    "variable '" + schema.variables[0] + "' is not marked as an anomaly");
    const auto tdim = find_axis(schema, DimKind::temporal, {"time"});
    const auto ydim = find_axis(schema, DimKind::spatial, {"lat", "latitude", "y"});
    const auto xdim = find_axis(schema, DimKind::spatial, {"lon", "longitude", "x"});
    if (!tdim || !ydim || !xdim || schema.dims.size() != 3)
        throw Error(ErrorCode::NonAnomalyInput, "event detection expects a (time, lat, lon) cube");

    const Index shape = schema.shape();
    const std::size_t nt = shape[*tdim], ny = shape[*ydim], nx = shape[*xdim];
    const NdArray data = anomaly_cube.materialise(0);
    const auto strides = row_major_strides(shape);
    auto value_at = [&](std::size_t t, std::size_t y, std::size_t x) {
        return data.data[t * strides[*tdim] + y * strides[*ydim] + x * strides[*xdim]];
    };

    // per-cell mean/std of the anomaly series (the input is seasonality-free)
    std::vector<double> mean(ny * nx, 0.0), stddev(ny * nx, 0.0);
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x) {
            WeightedMoments acc;
            for (std::size_t t = 0; t < nt; ++t) {
                const double v = value_at(t, y, x);
                if (!is_na(v)) acc.add(v, 1.0);
            }
            mean[y * nx + x] = acc.finalized_mean();
            stddev[y * nx + x] = acc.stddev();
        }

    std::vector<bool> fg(nt * ny * nx, false);
    for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t x = 0; x < nx; ++x) {
                const double v = value_at(t, y, x);
                const double s = stddev[y * nx + x];
                if (is_na(v) || is_na(s) || s == 0.0) continue;  // zero variance: background
                if (std::abs((v - mean[y * nx + x]) / s) > z_threshold)
                    fg[(t * ny + y) * nx + x] = true;
            }

    UnionFind uf(nt * ny * nx);
    auto flat_of = [&](std::size_t t, std::size_t y, std::size_t x) {
        return (t * ny + y) * nx + x;
    };
    for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t x = 0; x < nx; ++x) {
                const std::size_t here = flat_of(t, y, x);
                if (!fg[here]) continue;
                if (connectivity == 6) {
                    if (t > 0 && fg[flat_of(t - 1, y, x)]) uf.unite(here, flat_of(t - 1, y, x));
                    if (y > 0 && fg[flat_of(t, y - 1, x)]) uf.unite(here, flat_of(t, y - 1, x));
                    if (x > 0 && fg[flat_of(t, y, x - 1)]) uf.unite(here, flat_of(t, y, x - 1));
                } else {
                    for (int dt = -1; dt <= 0; ++dt)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                if (dt == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
                                const long t2 = static_cast<long>(t) + dt;
                                const long y2 = static_cast<long>(y) + dy;
                                const long x2 = static_cast<long>(x) + dx;
                                if (t2 < 0 || y2 < 0 || x2 < 0 ||
                                    y2 >= static_cast<long>(ny) || x2 >= static_cast<long>(nx))
                                    continue;
                                const std::size_t there =
                                    flat_of(static_cast<std::size_t>(t2),
                                            static_cast<std::size_t>(y2),
                                            static_cast<std::size_t>(x2));
                                if (fg[there]) uf.unite(here, there);
                            }
                }
            }

    std::map<std::size_t, EventRecord> components;
    for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t x = 0; x < nx; ++x) {
                const std::size_t here = flat_of(t, y, x);
                if (!fg[here]) continue;
                const std::size_t root = uf.find(here);
                auto [it, fresh] = components.try_emplace(root);
                EventRecord& e = it->second;
                const double magnitude = std::abs(value_at(t, y, x));
                if (fresh) {
                    e.t_start = e.t_end = t;
                    e.bbox_min = {t, y, x};
                    e.bbox_max = {t, y, x};
                    e.max_intensity = magnitude;
                } else {
                    e.t_start = std::min(e.t_start, t);
                    e.t_end = std::max(e.t_end, t);
                    const Index idx{t, y, x};
                    for (std::size_t d = 0; d < 3; ++d) {
                        e.bbox_min[d] = std::min(e.bbox_min[d], idx[d]);
                        e.bbox_max[d] = std::max(e.bbox_max[d], idx[d]);
                    }
                    e.max_intensity = std::max(e.max_intensity, magnitude);
                }
                e.mean_intensity += magnitude;  // sum for now
                ++e.cell_count;
                e.cells.push_back({t, y, x});
            }

    std::vector<EventRecord> events;
    for (auto& [root, e] : components) {
        if (e.cell_count < min_size) continue;
        e.mean_intensity /= static_cast<double>(e.cell_count);
        events.push_back(std::move(e));
    }
    std::sort(events.begin(), events.end(), [](const EventRecord& a, const EventRecord& b) {
        if (a.t_start != b.t_start) return a.t_start < b.t_start;
        return a.bbox_min < b.bbox_min;
    });
    for (std::size_t i = 0; i < events.size(); ++i) events[i].label = static_cast<int>(i + 1);
    return events;
}

// ---------------------------------------------------------------------------
// mini cubes
// ---------------------------------------------------------------------------

namespace {

struct Purity {
    int dominant = 0;
    double value = 1.0;
};

Purity window_purity(const NdArray& landcover, std::size_t y, std::size_t x, int half) {
    std::map<int, std::size_t> histogram;
    std::size_t present = 0;
    for (long dy = -half; dy <= half; ++dy)
        for (long dx = -half; dx <= half; ++dx) {
            const Index idx{static_cast<std::size_t>(static_cast<long>(y) + dy),
                            static_cast<std::size_t>(static_cast<long>(x) + dx)};
            const double v = landcover.at(idx);
            if (is_na(v)) continue;
            ++histogram[static_cast<int>(std::llround(v))];
            ++present;
        }
    Purity p;
    if (present == 0) return p;
    std::size_t best = 0;
    for (const auto& [cls, count] : histogram) {
        if (count > best) {  // ties keep the smaller class id (map order)
            best = count;
            p.dominant = cls;
        }
    }
    p.value = static_cast<double>(best) / static_cast<double>(present);
    return p;
}

}  // namespace

std::vector<MiniCubeSpec> sample_minicubes(const DataCube& cube,
                                           const std::vector<EventRecord>& events,
                                           int spatial_window, std::size_t time_pad,
                                           const DataCube* landcover, double purity_threshold,
                                           std::size_t per_event, std::uint64_t seed) {
    if (spatial_window < 1 || spatial_window % 2 == 0)
        throw Error(ErrorCode::Usage, "spatial window must be a positive odd integer");
    const CubeSchema& schema = cube.schema();
    const auto tdim = find_axis(schema, DimKind::temporal, {"time"});
    const auto ydim = find_axis(schema, DimKind::spatial, {"lat", "latitude", "y"});
    const auto xdim = find_axis(schema, DimKind::spatial, {"lon", "longitude", "x"});
    if (!tdim || !ydim || !xdim)
        throw Error(ErrorCode::UnknownDimension, "mini-cube sampling expects (time, lat, lon)");
    const Index shape = schema.shape();
    const std::size_t nt = shape[*tdim], ny = shape[*ydim], nx = shape[*xdim];
    const int half = (spatial_window - 1) / 2;

    NdArray lc;
    if (landcover) {
        const CubeSchema& ls = landcover->schema();
        const auto ly = find_axis(ls, DimKind::spatial, {"lat", "latitude", "y"});
        const auto lx = find_axis(ls, DimKind::spatial, {"lon", "longitude", "x"});
        if (!ly || !lx || ls.grids[*ly].size() != ny || ls.grids[*lx].size() != nx)
            throw Error(ErrorCode::GridMismatch,
                        "land-cover field is not aligned to the cube's spatial grid");
        lc = landcover->materialise(0);
    }

    SampleRng rng(seed);
    std::vector<MiniCubeSpec> specs;
    bool any_valid_center = false;
    for (const auto& event : events) {
        std::vector<Index> cells = event.cells;
        rng.shuffle(cells);
        std::size_t taken = 0;
        for (const auto& cell : cells) {
            if (taken == per_event) break;
            const std::size_t t = cell[0], y = cell[1], x = cell[2];
            if (y < static_cast<std::size_t>(half) || y + static_cast<std::size_t>(half) >= ny ||
                x < static_cast<std::size_t>(half) || x + static_cast<std::size_t>(half) >= nx)
                continue;  // window would cross the domain edge
            any_valid_center = true;
            ++taken;
            MiniCubeSpec spec;
            spec.center = {t, y, x};
            spec.spatial_window = spatial_window;
            spec.t_start = event.t_start > time_pad ? event.t_start - time_pad : 0;
            spec.t_end = std::min(nt - 1, event.t_end + time_pad);
            spec.event_label = event.label;
            if (landcover) {
                const Purity p = window_purity(lc, y, x, half);
                spec.dominant_class = p.dominant;
                spec.purity = p.value;
            }
            if (spec.purity < purity_threshold) continue;  // discarded, not retried
            specs.push_back(spec);
        }
    }
    if (!events.empty() && !any_valid_center)
        throw Error(ErrorCode::WindowExceedsDomain,
                    "no event member cell can host the requested spatial window");
    return specs;
}

// ---------------------------------------------------------------------------
// serialisation
// ---------------------------------------------------------------------------

std::string events_to_jsonl(const std::vector<EventRecord>& events) {
    std::string out;
    for (const auto& e : events) {
        json j;
        j["label"] = e.label;
        j["t_start"] = e.t_start;
        j["t_end"] = e.t_end;
        j["duration"] = e.duration();
        j["bbox_min"] = e.bbox_min;
        j["bbox_max"] = e.bbox_max;
        j["cell_count"] = e.cell_count;
        j["mean_intensity"] = e.mean_intensity;
        j["max_intensity"] = e.max_intensity;
        j["cells"] = e.cells;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string minicubes_to_jsonl(const std::vector<MiniCubeSpec>& specs) {
    std::string out;
    for (const auto& s : specs) {
        json j;
        j["center"] = s.center;
        j["spatial_window"] = s.spatial_window;
        j["t_start"] = s.t_start;
        j["t_end"] = s.t_end;
        j["event_label"] = s.event_label;
        j["dominant_class"] = s.dominant_class;
        j["purity"] = s.purity;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string points_to_jsonl(const std::vector<SamplePoint>& points) {
    std::string out;
    for (const auto& p : points) {
        json j;
        j["indices"] = p.indices;
        j["coordinates"] = p.coordinates;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<SamplePoint> points_from_jsonl(const std::string& text) {
    std::vector<SamplePoint> points;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedRecord, std::string("bad point record: ") + e.what());
        }
        SamplePoint p;
        p.indices = j.at("indices").get<Index>();
        p.coordinates = j.at("coordinates").get<std::vector<double>>();
        points.push_back(std::move(p));
    }
    return points;
}

std::string folds_to_jsonl(const FoldAssignment& folds, const std::vector<SamplePoint>& points) {
    std::string out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        json j;
        j["point"] = i;
        j["indices"] = points[i].indices;
        j["fold"] = folds.fold_of_point[i];
        json excluded = json::array();
        for (int f = 0; f < folds.k; ++f)
            if (folds.roles[static_cast<std::size_t>(f)][i] == FoldRole::excluded_by_buffer)
                excluded.push_back(f);
        j["excluded_in"] = excluded;
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace esdc
