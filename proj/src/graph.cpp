#include "hitl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Cholesky>

namespace hitl {

std::string_view to_string(CorrectionMode mode) {
  switch (mode) {
    case CorrectionMode::Colocation: return "colocation";
    case CorrectionMode::Collinearity: return "collinear";
    case CorrectionMode::Perpendicularity: return "perpendicular";
    case CorrectionMode::Parallelism: return "parallel";
  }
  return "unknown";
}

std::optional<CorrectionMode> parse_mode(std::string_view text) {
  for (auto m : {CorrectionMode::Colocation, CorrectionMode::Collinearity,
                 CorrectionMode::Perpendicularity, CorrectionMode::Parallelism}) {
    if (text == to_string(m)) return m;
  }
  return std::nullopt;
}

namespace {

std::vector<std::size_t> distinct_poses(const std::vector<PointRef>& refs) {
  std::vector<std::size_t> out;
  for (const auto& r : refs) {
    if (out.empty() || out.back() != r.pose_id) out.push_back(r.pose_id);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string pair_name(std::string_view what, std::size_t idx, std::size_t i, std::size_t j) {
  return std::string(what) + "[" + std::to_string(idx) + "] (" + std::to_string(i) + "," +
         std::to_string(j) + ")";
}

}  // namespace

std::vector<std::size_t> HumanCorrectionFactor::xa() const { return distinct_poses(sa); }
std::vector<std::size_t> HumanCorrectionFactor::xb() const { return distinct_poses(sb); }

const Scan* FactorGraph::scan_of(std::size_t pose_id) const {
  auto it = std::lower_bound(scans.begin(), scans.end(), pose_id,
                             [](const Scan& s, std::size_t id) { return s.pose_id < id; });
  if (it == scans.end() || it->pose_id != pose_id) return nullptr;
  return &*it;
}

Vec2 FactorGraph::world_point(const PointRef& ref) const {
  if (ref.pose_id >= poses.size()) {
    throw Error(ErrorKind::UnknownPose, "pose " + std::to_string(ref.pose_id));
  }
  const Scan* scan = scan_of(ref.pose_id);
  if (scan == nullptr || ref.point_index >= scan->points.size()) {
    throw Error(ErrorKind::UnknownPose, "no point " + std::to_string(ref.point_index) +
                                            " at pose " + std::to_string(ref.pose_id));
  }
  return poses[ref.pose_id].to_world(scan->points[ref.point_index]);
}

std::vector<Vec2> world_points(const FactorGraph& graph, std::size_t pose_id) {
  if (pose_id >= graph.poses.size()) {
    throw Error(ErrorKind::UnknownPose, "pose " + std::to_string(pose_id));
  }
  std::vector<Vec2> out;
  if (const Scan* scan = graph.scan_of(pose_id)) {
    out.reserve(scan->points.size());
    const Pose2D& pose = graph.poses[pose_id];
    for (const auto& p : scan->points) out.push_back(pose.to_world(p));
  }
  return out;
}

std::size_t point_count(const FactorGraph& graph) {
  std::size_t n = 0;
  for (const auto& s : graph.scans) n += s.points.size();
  return n;
}

std::vector<Violation> validate(const FactorGraph& graph, std::size_t min_points_per_pose) {
  std::vector<Violation> out;
  const std::size_t n = graph.poses.size();
  if (n < 2) out.push_back({"TooFewPoses", "poses (" + std::to_string(n) + ")"});

  for (std::size_t k = 0; k < n; ++k) {
    const auto& p = graph.poses[k];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.theta)) {
      out.push_back({"NonFinite", "pose[" + std::to_string(k) + "]"});
    }
  }

  // Odometry must be exactly the chain 0-1, 1-2, ..., (n-2)-(n-1) in order.
  bool chain_broken = false;
  for (std::size_t k = 0; k < graph.odometry.size(); ++k) {
    const auto& f = graph.odometry[k];
    if (f.j != f.i + 1) {
      out.push_back({"ChainBreak", pair_name("odometry", k, f.i, f.j)});
      chain_broken = true;
    }
    if (f.i >= n || f.j >= n) out.push_back({"UnknownPose", pair_name("odometry", k, f.i, f.j)});
    const bool symmetric = (f.info - f.info.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + f.info.cwiseAbs().maxCoeff());
    Eigen::LLT<Mat3> llt(f.info);
    if (!symmetric || llt.info() != Eigen::Success || !f.info.allFinite()) {
      out.push_back({"InfoNotSPD", pair_name("odometry", k, f.i, f.j)});
    }
  }
  if (n >= 2 && !chain_broken) {
    bool covers = graph.odometry.size() == n - 1;
    for (std::size_t k = 0; covers && k < graph.odometry.size(); ++k) {
      covers = graph.odometry[k].i == k && graph.odometry[k].j == k + 1;
    }
    if (!covers) out.push_back({"ChainCoverage", "odometry"});
  }

  for (std::size_t k = 0; k < graph.scans.size(); ++k) {
    const auto& s = graph.scans[k];
    if (s.pose_id >= n) out.push_back({"UnknownPose", "scan[" + std::to_string(k) + "]"});
    if (k > 0 && graph.scans[k - 1].pose_id >= s.pose_id) {
      out.push_back({"ScanOrder", "scan[" + std::to_string(k) + "]"});
    }
  }

  for (std::size_t h = 0; h < graph.human_factors.size(); ++h) {
    const auto& f = graph.human_factors[h];
    const std::string name = "human[" + std::to_string(h) + "]";
    if (!f.pa.valid() || !f.pb.valid()) out.push_back({"DegenerateSegment", name});
    if (f.sa.empty() || f.sb.empty()) out.push_back({"EmptySelection", name});
    auto check_refs = [&](const std::vector<PointRef>& refs, const char* side) {
      for (std::size_t k = 0; k < refs.size(); ++k) {
        if (k > 0 && !(refs[k - 1] < refs[k])) {
          out.push_back({"SelectionOrder", name + "." + side});
          break;
        }
      }
      for (const auto& r : refs) {
        const Scan* scan = r.pose_id < n ? graph.scan_of(r.pose_id) : nullptr;
        if (scan == nullptr || r.point_index >= scan->points.size()) {
          out.push_back({"UnknownPoint", name + "." + side});
          break;
        }
      }
      std::size_t run = 0;
      for (std::size_t k = 0; k < refs.size(); ++k) {
        ++run;
        if (k + 1 == refs.size() || refs[k + 1].pose_id != refs[k].pose_id) {
          if (run < min_points_per_pose) {
            out.push_back({"InsufficientPoints",
                           name + "." + side + " pose " + std::to_string(refs[k].pose_id)});
          }
          run = 0;
        }
      }
    };
    check_refs(f.sa, "a");
    check_refs(f.sb, "b");
    const auto xa = f.xa();
    const auto xb = f.xb();
    if (!xa.empty() && !xb.empty() && xa.back() >= xb.front()) {
      out.push_back({"OrderingViolation", name});
    }
    std::set<PointRef> a_set(f.sa.begin(), f.sa.end());
    for (const auto& r : f.sb) {
      if (a_set.count(r)) {
        out.push_back({"OverlappingSelection", name});
        break;
      }
    }
  }
  return out;
}

}  // namespace hitl
