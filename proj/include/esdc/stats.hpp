#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "esdc/core.hpp"

namespace esdc {

/// O(1)-memory weighted moment accumulator (West/Welford update with a
/// compensated weight sum). Mergeable, so partial streams can be combined in
/// any grouping; the population variance is m2 / W.
struct WeightedMoments {
    double weight_sum = 0.0;
    double mean = 0.0;
    double m2 = 0.0;
    double compensation = 0.0;  // running correction term for weight_sum
    std::uint64_t count = 0;
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();

    void add(double x, double w) {
        if (!(w > 0.0))
            throw Error(ErrorCode::NonPositiveWeight, "observation weight must be positive");
        // compensated weight sum
        const double y = w - compensation;
        const double t = weight_sum + y;
        compensation = (t - weight_sum) - y;
        weight_sum = t;

        const double delta = x - mean;
        mean += (w / weight_sum) * delta;
        m2 += w * delta * (x - mean);
        ++count;
        if (x < min) min = x;
        if (x > max) max = x;
    }

    void merge(const WeightedMoments& other) {
        if (other.count == 0) return;
        if (count == 0) {
            *this = other;
            return;
        }
        const double wa = weight_sum, wb = other.weight_sum;
        const double w = wa + wb;
        const double delta = other.mean - mean;
        mean += (wb / w) * delta;
        m2 += other.m2 + (wa * wb / w) * delta * delta;
        weight_sum = w;
        compensation += other.compensation;
        count += other.count;
        if (other.min < min) min = other.min;
        if (other.max > max) max = other.max;
    }

    bool empty() const { return count == 0; }
    double finalized_mean() const { return empty() ? kNa : mean; }
    /// Population variance; single observations have variance 0.
    double variance() const { return empty() ? kNa : std::max(m2, 0.0) / weight_sum; }
    double stddev() const { return empty() ? kNa : std::sqrt(variance()); }
};

/// Plain weighted sum, used as a second mergeable reducer in the engine.
struct WeightedSum {
    double sum = 0.0;
    std::uint64_t count = 0;
    void add(double x, double w) {
        sum += x * w;
        ++count;
    }
    void merge(const WeightedSum& other) {
        sum += other.sum;
        count += other.count;
    }
};

/// Streaming weighted covariance over p variables. Only the lower triangle
/// is stored, so the finalised matrix is symmetric by construction; the
/// diagonal is a per-variable m2 and stays non-negative.
class WeightedCovAccumulator {
  public:
    explicit WeightedCovAccumulator(std::size_t p)
        : p_(p), mean_(p, 0.0), comoment_(p * (p + 1) / 2, 0.0), delta_(p), delta_new_(p) {}

    std::size_t dimension() const { return p_; }
    double weight_sum() const { return weight_sum_; }
    std::uint64_t count() const { return count_; }

    void add(const std::vector<double>& x, double w) {
        if (!(w > 0.0))
            throw Error(ErrorCode::NonPositiveWeight, "observation weight must be positive");
        weight_sum_ += w;
        for (std::size_t i = 0; i < p_; ++i) {
            delta_[i] = x[i] - mean_[i];
            mean_[i] += (w / weight_sum_) * delta_[i];
            delta_new_[i] = x[i] - mean_[i];
        }
        std::size_t k = 0;
        for (std::size_t i = 0; i < p_; ++i)
            for (std::size_t j = 0; j <= i; ++j, ++k) comoment_[k] += w * delta_[i] * delta_new_[j];
        ++count_;
    }

    void merge(const WeightedCovAccumulator& other) {
        if (other.count_ == 0) return;
        if (count_ == 0) {
            *this = other;
            return;
        }
        const double wa = weight_sum_, wb = other.weight_sum_;
        const double w = wa + wb;
        std::vector<double> dm(p_);
        for (std::size_t i = 0; i < p_; ++i) dm[i] = mean_[i] - other.mean_[i];
        std::size_t k = 0;
        for (std::size_t i = 0; i < p_; ++i)
            for (std::size_t j = 0; j <= i; ++j, ++k)
                comoment_[k] += other.comoment_[k] + (wa * wb / w) * dm[i] * dm[j];
        for (std::size_t i = 0; i < p_; ++i) mean_[i] += (wb / w) * (other.mean_[i] - mean_[i]);
        weight_sum_ = w;
        count_ += other.count_;
    }

    /// Weighted population covariance matrix, row-major p x p.
    std::vector<double> covariance() const {
        std::vector<double> full(p_ * p_, kNa);
        if (count_ == 0) return full;
        std::size_t k = 0;
        for (std::size_t i = 0; i < p_; ++i)
            for (std::size_t j = 0; j <= i; ++j, ++k)
                full[i * p_ + j] = full[j * p_ + i] = comoment_[k] / weight_sum_;
        return full;
    }

    const std::vector<double>& mean() const { return mean_; }

  private:
    std::size_t p_;
    double weight_sum_ = 0.0;
    std::uint64_t count_ = 0;
    std::vector<double> mean_;
    std::vector<double> comoment_;  // lower triangle, row-major
    std::vector<double> delta_, delta_new_;
};

/// Spherical band areas per latitude index, constant in longitude and
/// normalised so the weights of all grid cells sum to one.
struct AreaWeights {
    std::vector<double> band;  // per latitude coordinate
    std::size_t lon_count = 1;

    double cell(std::size_t lat_index) const { return band[lat_index]; }
};

/// weight(lat) proportional to sin(lat + d/2) - sin(lat - d/2) for a regular
/// latitude grid of spacing d. Throws IrregularLatGrid otherwise.
AreaWeights area_weights(const Grid& lat_grid, const Grid& lon_grid);

struct ReduceOptions {
    bool weighted = false;        // apply AreaWeights over the latitude axis
    bool emit_variance = false;   // add "<var>_variance"
    bool emit_count = false;      // add "<var>_count"
    unsigned workers = 1;
};

/// Collapses `dims` with a single streaming pass per stored chunk, weighting
/// cells by spherical band area when requested. Cells that are NA are
/// skipped; an all-NA reduction finalises to NA.
DataCube weighted_reduce_over(const DataCube& cube, const std::vector<std::string>& dims,
                              const ReduceOptions& options = {});

/// Weighted population covariance across variables, complete-case over
/// `over_dims` (cells where any variable is NA are skipped entirely).
std::vector<double> weighted_covariance(const DataCube& cube,
                                        const std::vector<std::string>& over_dims,
                                        bool weighted, unsigned workers = 1);

}  // namespace esdc
