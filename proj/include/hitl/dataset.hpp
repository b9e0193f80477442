#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "hitl/graph.hpp"
#include "hitl/interpretation.hpp"
#include "hitl/metrics.hpp"

namespace hitl {

// Text formats. Every file starts with "<magic> v1" and ends with "end";
// numbers are written with round-trip precision. See docs/file-formats.md.
inline constexpr std::string_view kGraphMagic = "hitl-graph";
inline constexpr std::string_view kScriptMagic = "hitl-script";
inline constexpr std::string_view kTruthMagic = "hitl-truth";
inline constexpr int kFormatVersion = 1;

void write_graph(std::ostream& out, const FactorGraph& graph);
FactorGraph read_graph(std::string_view text);
void save_graph(const FactorGraph& graph, const std::string& path);
FactorGraph load_graph(const std::string& path);

void write_script(std::ostream& out, const std::vector<RawCorrection>& script);
std::vector<RawCorrection> read_script(std::string_view text);
void save_script(const std::vector<RawCorrection>& script, const std::string& path);
std::vector<RawCorrection> load_script(const std::string& path);

void write_truth(std::ostream& out, const GroundTruth& truth);
GroundTruth read_truth(std::string_view text);
void save_truth(const GroundTruth& truth, const std::string& path);
GroundTruth load_truth(const std::string& path);

/// Whole file as a string. Throws InvalidArgument when unreadable.
std::string read_file(const std::string& path);

/// Rectangular room driven around once along its walls, far enough from
/// them that the short-range laser sees a wall only on brief approaches.
struct LostPosesConfig {
  double room_width = 6.33;   // south-north, m
  double room_length = 12.0;  // west-east, m
  double laser_range = 1.5;
  double odom_trans_noise = 0.002;  // m per step, each axis
  double odom_rot_noise = 0.003;    // rad per step
  double range_noise = 0.005;       // m
  double step = 0.1;                // m between poses
  double cruise_offset = 1.8;      // distance from the walls while cruising
  double approach_offset = 0.7;    // distance at the closest point of an approach
  int beams = 360;
  int steps = 0;  // 0: one full loop plus the revisit
  std::uint64_t seed = 1;
};

struct BentHallwayConfig {
  double length = 20.0;
  double width = 2.0;
  double laser_range = 3.5;
  double step = 0.25;
  double bias_deg = 30.0;        // heading error injected into one odometry step
  double bias_at = 0.5;          // position of that step, fraction of the run
  double bias_sigma_deg = 30.0;  // rotational std-dev recorded for that step
  // Half the generic default noise: the walls of each half must stay sharp
  // enough that the slip dominates the inconsistency.
  double odom_trans_noise = 0.005;
  double odom_rot_noise = 0.0025;
  double range_noise = 0.005;
  int beams = 360;
  std::uint64_t seed = 1;
};

struct GeneratedDataset {
  FactorGraph graph;       // odometry-only estimate
  std::vector<Pose2D> truth_poses;
  GroundTruth truth;       // named wall features and measurements
};

GeneratedDataset generate_lost_poses(const LostPosesConfig& config);
GeneratedDataset generate_bent_hallway(const BentHallwayConfig& config);

/// Configs from JSON objects; absent keys keep their defaults, unknown keys
/// are rejected. Throws InvalidArgument.
LostPosesConfig lost_poses_config_from_json(std::string_view json);
BentHallwayConfig bent_hallway_config_from_json(std::string_view json);

/// Lattice offset of the generated walls, keeping them off cell boundaries
/// of the default 0.05 m grid.
inline constexpr double kWallOffset = 0.025;

}  // namespace hitl
