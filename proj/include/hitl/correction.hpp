#pragma once

#include <optional>
#include <vector>

#include "hitl/graph.hpp"

namespace hitl {

/// Explicit correction: rotate by a.rotation about `pivot`, then translate by
/// a.translation; applies to poses [first_affected, N).
struct CorrectionPlan {
  Transform2D a;
  Vec2 pivot = Vec2::Zero();
  std::size_t first_affected = 0;

  /// The same motion as a single world-frame transform.
  Transform2D world() const;
};

/// Motion that brings P_b into the relation `mode` with P_a, rotating about
/// the center of P_b. Rank-deficient modes leave their null-space motion at
/// zero. Throws DegenerateSegment.
Transform2D compute_transform(const Segment& pa, const Segment& pb, CorrectionMode mode);

/// Moves every pose from plan.first_affected on as one rigid body.
FactorGraph apply_rigid(const FactorGraph& graph, const CorrectionPlan& plan);

struct Backpropagation {
  FactorGraph graph;
  /// World-frame increments, one per link anchor+1 .. c_index, so that
  /// updates.back() * ... * updates.front() == correction.
  std::vector<Transform2D> updates;
  Transform2D correction;
  bool applied = false;
};

/// Distributes the world-frame correction `c` of pose c_index over the links
/// between `anchor` (held fixed) and c_index, weighting each link by the
/// trace of its translation covariance. Rotation shares are applied first,
/// then the remaining translation, so the corrected end pose equals
/// c * x_c exactly. Poses after c_index are left untouched; with
/// anchor == c_index there is nothing to distribute and the graph is
/// returned as is (applied == false).
Backpropagation backpropagate(const FactorGraph& graph, std::size_t anchor, std::size_t c_index,
                              const Transform2D& c);

/// Link weight used by backpropagate: trace of the translation covariance.
double link_weight(const RelativePoseFactor& factor);

struct CorrectionResult {
  FactorGraph graph;  // includes the new factor
  CorrectionPlan plan;
  Backpropagation backprop;
};

/// Initial estimate for joint optimization after adding `factor`: rigid
/// correction of X_b and successors, then backpropagation across the gap
/// between X_a and X_b. Existing human factors have their segments carried
/// along with their observations.
CorrectionResult apply_correction(const FactorGraph& graph, const HumanCorrectionFactor& factor);

/// Least-squares segment through the current world positions of `refs`,
/// centred on their centroid.
Segment fit_selection(const FactorGraph& graph, const std::vector<PointRef>& refs);

}  // namespace hitl
