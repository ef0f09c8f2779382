#pragma once

#include <string>

#include "esdc/core.hpp"

namespace esdc {

/// Resamples the time axis onto a regular grid spanning [min, max] of the
/// input at `step_days`. Steps without a source timestamp are NA; duplicate
/// timestamps inside one step are mean-reduced.
DataCube regularise_time(const DataCube& cube, int step_days);

/// Linearly interpolates interior NA runs of length <= max_gap along a
/// regular time axis. Boundary runs and longer runs stay NA; non-NA values
/// are never altered.
DataCube gapfill_linear(const DataCube& cube, int max_gap);

/// Mean seasonal cycle: maps the time axis onto a 366-slot day-of-year axis
/// (Feb 29 = slot 60; non-leap days renumbered onto the 366 grid). Each slot
/// averages all observations within a circular +-(window-1)/2 day window.
DataCube climatology(const DataCube& cube, int smoothing_window);

/// Observed value minus the climatology at the matching day-of-year slot.
/// Marks every output variable with the attribute anomaly="true".
DataCube anomalies(const DataCube& cube, const DataCube& clim);

/// Classical additive decomposition: trend = centered moving average of
/// width `trend_window`, seasonal = climatology of (raw - trend) re-tiled
/// along time, residual = raw - trend - seasonal. Adds a categorical
/// "component" dimension with coordinates raw, trend, seasonal, residual.
DataCube decompose(const DataCube& cube, int trend_window);

/// Day-of-year coordinates 1..366 for climatology outputs.
Grid day_of_year_grid();

extern const std::vector<std::string> kComponentLabels;

}  // namespace esdc
