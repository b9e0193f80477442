#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "hitl/graph.hpp"

namespace hitl {

enum class Cell : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

/// Axis-aligned window of the global grid with cells of side `resolution`
/// anchored at the world origin; cell (ix, iy) covers
/// [ix * res, (ix + 1) * res) x [iy * res, (iy + 1) * res).
struct OccupancyRaster {
  double resolution = 0.05;
  std::int64_t ix0 = 0;  // first column, global index
  std::int64_t iy0 = 0;  // first row, global index
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<Cell> cells;  // row-major

  Vec2 origin() const { return {static_cast<double>(ix0) * resolution, static_cast<double>(iy0) * resolution}; }
  bool empty() const { return width == 0 || height == 0; }
  /// Unknown outside the window.
  Cell at(std::int64_t ix, std::int64_t iy) const;
  std::size_t count(Cell c) const;
};

/// Free space keeps this far from every return of the scan, so that a ray
/// grazing a wall does not clear cells other poses see as occupied.
inline constexpr double kFreeClearance = 0.1;

/// Traces every return of `scan` from `pose`. Cells crossed by a ray before
/// it comes within free_clearance of any return are Free, the cell holding
/// the return is Occupied (Occupied wins), and rays longer than max_range
/// (when > 0) are cut there without an Occupied cell.
OccupancyRaster rasterize_pose(const Scan& scan, const Pose2D& pose, double resolution,
                               double max_range, double free_clearance = kFreeClearance);

/// Area that r_i sees as free and r_j sees as occupied, m^2.
/// Throws ResolutionMismatch.
double pairwise_inconsistency(const OccupancyRaster& r_i, const OccupancyRaster& r_j);

/// Sum of pairwise_inconsistency over pose pairs i < j.
double total_inconsistency(const FactorGraph& graph, double resolution = 0.05);

enum class MeasurementKind { Angle, Distance };

/// A map feature: observations that belong to one straight wall portion.
using FeatureSelector = std::vector<PointRef>;

struct GroundTruthMeasurement {
  std::string name;
  MeasurementKind kind = MeasurementKind::Distance;
  std::string feature_a;
  std::string feature_b;
  double truth = 0.0;  // degrees or meters

  bool operator==(const GroundTruthMeasurement&) const = default;
};

struct GroundTruth {
  std::map<std::string, FeatureSelector> features;
  std::vector<GroundTruthMeasurement> measurements;

  bool operator==(const GroundTruth&) const = default;
};

struct MeasurementResult {
  GroundTruthMeasurement measurement;
  double measured = 0.0;
  double error = 0.0;  // |measured - truth|
};

struct GroundTruthReport {
  std::vector<MeasurementResult> results;
  double mean_angle_error = 0.0;     // degrees
  double mean_distance_error = 0.0;  // meters
  std::size_t angle_count = 0;
  std::size_t distance_count = 0;
};

/// Angle in degrees in [0, 90] between the lines through two segments.
double angle_between(const Segment& a, const Segment& b);

/// Separation of two roughly parallel segments: mean of each midpoint's
/// distance to the other segment's line.
double distance_between(const Segment& a, const Segment& b);

/// Fits each named feature on the current map and compares it with the
/// truth. Throws FeatureNotFound.
GroundTruthReport ground_truth_report(const FactorGraph& graph, const GroundTruth& truth);

/// One record per measurement, then a summary line with the mean angular
/// and translational error.
void write_report(std::ostream& out, const GroundTruthReport& report);

}  // namespace hitl
