#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hitl/geometry.hpp"

namespace hitl {

enum class CorrectionMode { Colocation, Collinearity, Perpendicularity, Parallelism };

std::string_view to_string(CorrectionMode mode);
std::optional<CorrectionMode> parse_mode(std::string_view text);

/// Sensor-frame observations taken from one pose.
struct Scan {
  std::size_t pose_id = 0;
  std::vector<Vec2> points;

  bool operator==(const Scan&) const = default;
};

/// Odometry link between consecutive poses i and j = i + 1.
struct RelativePoseFactor {
  std::size_t i = 0;
  std::size_t j = 1;
  Transform2D z;
  Mat3 info = Mat3::Identity();

  bool operator==(const RelativePoseFactor& o) const {
    return i == o.i && j == o.j && z.rotation == o.z.rotation && z.translation == o.z.translation &&
           info == o.info;
  }
};

/// One observation: point `point_index` of the scan taken at `pose_id`.
struct PointRef {
  std::size_t pose_id = 0;
  std::size_t point_index = 0;

  auto operator<=>(const PointRef&) const = default;
};

/// A human-asserted relation between two observation sets. The pose sets are
/// the distinct poses of each selection, so they always agree with it.
struct HumanCorrectionFactor {
  Segment pa;
  Segment pb;
  std::vector<PointRef> sa;  // sorted, unique
  std::vector<PointRef> sb;  // sorted, unique
  CorrectionMode mode = CorrectionMode::Colocation;

  std::vector<std::size_t> xa() const;
  std::vector<std::size_t> xb() const;

  bool operator==(const HumanCorrectionFactor&) const = default;
};

struct GraphMetadata {
  double max_range = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const GraphMetadata&) const = default;
};

/// The factor graph: pose chain, scans, odometry chain and human factors.
struct FactorGraph {
  GraphMetadata meta;
  std::vector<Pose2D> poses;
  std::vector<Scan> scans;  // sorted by pose_id, at most one per pose
  std::vector<RelativePoseFactor> odometry;
  std::vector<HumanCorrectionFactor> human_factors;

  const Scan* scan_of(std::size_t pose_id) const;

  /// World position of a single observation. Throws UnknownPose.
  Vec2 world_point(const PointRef& ref) const;

  bool operator==(const FactorGraph&) const = default;
};

/// Scan points of `pose_id` in the world frame. Throws UnknownPose.
std::vector<Vec2> world_points(const FactorGraph& graph, std::size_t pose_id);

struct Violation {
  std::string rule;    // e.g. "ChainBreak"
  std::string entity;  // e.g. "odometry[3] (3,5)"

  bool operator==(const Violation&) const = default;
};

/// Checks every structural invariant of the graph. `min_points_per_pose` is
/// the per-pose selection threshold applied to human factors.
std::vector<Violation> validate(const FactorGraph& graph, std::size_t min_points_per_pose = 1);

/// Total number of scan points.
std::size_t point_count(const FactorGraph& graph);

}  // namespace hitl
