#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esdc/core.hpp"
#include "esdc/stats.hpp"

namespace esdc {

struct SamplePoint {
    Index indices;                   // per-dimension indices into the sampled field
    std::vector<double> coordinates;  // resolved coordinates, same order
};

/// Deterministic 64-bit generator (xoshiro-free splitmix-seeded mt19937_64
/// would do, but we keep the draw paths self-contained so identical seeds
/// give identical samples on every platform/build).
class SampleRng {
  public:
    explicit SampleRng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53-bit resolution.
    double next_double();
    /// Uniform integer in [0, bound).
    std::uint64_t next_below(std::uint64_t bound);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i)
            std::swap(items[i - 1], items[next_below(i)]);
    }

  private:
    std::uint64_t state_;
};

/// Samples n distinct eligible cells without replacement with probability
/// proportional to weight (exponential-keys method: key = log(u)/w, keep the
/// n largest). Eligible cells are the non-NA, non-zero entries of the mask.
std::vector<SamplePoint> weighted_sample_points(const DataCube& mask, const AreaWeights& weights,
                                                std::size_t n, std::uint64_t seed);

struct ChunkGroup {
    ChunkKey key;
    std::vector<std::size_t> members;  // positions into the batch's point list
};

/// Chunk-coalesced read schedule for one batch: every requested point appears
/// exactly once; entries are ordered by chunk key.
struct ReadPlan {
    std::vector<ChunkGroup> groups;
};

struct Batch {
    std::vector<SamplePoint> points;  // requested emission order
    ReadPlan plan;
};

/// Shuffles points by seed and cuts batches of at most `batch_size`. With
/// `chunk_aligned`, points are grouped per chunk first and whole groups are
/// packed into batches, so one epoch reads each chunk at most once.
std::vector<Batch> coalesced_batches(const std::vector<SamplePoint>& points, const Index& shape,
                                     const Index& chunk_shape, std::size_t batch_size,
                                     std::uint64_t seed, bool chunk_aligned = false);

/// Reads every batch point through its plan (one chunk fetch per group) and
/// emits values in the requested order.
std::vector<double> execute_read_plan(const DataCube& cube, std::size_t var, const Batch& batch);

enum class FoldRole : std::uint8_t { train, test, excluded_by_buffer };

struct FoldAssignment {
    int k = 0;
    std::vector<int> fold_of_point;            // test fold per point
    std::vector<std::vector<FoldRole>> roles;  // [fold][point]
};

/// Spatial block cross-validation: lat/lon tiled into block_size_deg squares,
/// blocks dealt to folds by seeded shuffle round-robin. Training points
/// within buffer_deg (equirectangular distance) of any test point of a fold
/// are excluded from that fold's training set.
FoldAssignment block_cv_folds(const std::vector<SamplePoint>& points, double block_size_deg, int k,
                              double buffer_deg, std::uint64_t seed);

struct EventRecord {
    int label = 0;
    std::size_t t_start = 0;
    std::size_t t_end = 0;
    Index bbox_min;  // (t, y, x)
    Index bbox_max;
    std::size_t cell_count = 0;
    double mean_intensity = 0.0;
    double max_intensity = 0.0;
    std::vector<Index> cells;  // member cells as (t, y, x)

    std::size_t duration() const { return t_end - t_start + 1; }
};

/// Connected super-threshold regions of the standardised anomaly field in
/// the (time, y, x) lattice. Cells with |z| > z_threshold are foreground
/// (zero-variance cells never are); components smaller than min_size are
/// dropped; labels are ordered by start time, then bounding-box origin.
std::vector<EventRecord> detect_extreme_events(const DataCube& anomaly_cube, double z_threshold,
                                               std::size_t min_size, int connectivity);

struct MiniCubeSpec {
    Index center;            // (t, y, x)
    int spatial_window = 0;  // odd extent in cells
    std::size_t t_start = 0;
    std::size_t t_end = 0;
    int event_label = 0;
    int dominant_class = 0;
    double purity = 1.0;
};

/// Samples up to per_event member cells per event as mini-cube centers.
/// Windows that would cross the spatial domain edge are skipped; specs whose
/// land-cover purity falls below the threshold are discarded. Without a
/// land-cover field every window counts as pure.
std::vector<MiniCubeSpec> sample_minicubes(const DataCube& cube,
                                           const std::vector<EventRecord>& events,
                                           int spatial_window, std::size_t time_pad,
                                           const DataCube* landcover, double purity_threshold,
                                           std::size_t per_event, std::uint64_t seed);

/// Line-delimited JSON (sorted keys, one object per line).
std::string events_to_jsonl(const std::vector<EventRecord>& events);
std::string minicubes_to_jsonl(const std::vector<MiniCubeSpec>& specs);
std::string points_to_jsonl(const std::vector<SamplePoint>& points);
std::vector<SamplePoint> points_from_jsonl(const std::string& text);
std::string folds_to_jsonl(const FoldAssignment& folds, const std::vector<SamplePoint>& points);

}  // namespace esdc
