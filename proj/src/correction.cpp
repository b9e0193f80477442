#include "hitl/correction.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/LU>

namespace hitl {

Transform2D CorrectionPlan::world() const {
  const Mat2 r = rotation(a.rotation);
  return {normalize_angle(a.rotation), pivot + a.translation - r * pivot};
}

Transform2D compute_transform(const Segment& pa, const Segment& pb, CorrectionMode mode) {
  if (!pa.valid() || !pb.valid()) throw Error(ErrorKind::DegenerateSegment, "zero-length segment");
  const Vec2 da = pa.direction();
  const Vec2 db = pb.direction();
  const double heading_a = std::atan2(da.y(), da.x());
  const double heading_b = std::atan2(db.y(), db.x());

  Transform2D t;
  if (mode == CorrectionMode::Perpendicularity) {
    t.rotation = normalize_half_angle(heading_a + std::numbers::pi / 2.0 - heading_b);
  } else {
    t.rotation = normalize_half_angle(heading_a - heading_b);
  }
  // Rotation is about cm_b, so cm_b itself only sees the translation.
  const Vec2 offset = pb.center() - pa.center();
  switch (mode) {
    case CorrectionMode::Colocation:
      t.translation = -offset;
      break;
    case CorrectionMode::Collinearity: {
      const Vec2 na = pa.normal();
      t.translation = -offset.dot(na) * na;
      break;
    }
    case CorrectionMode::Perpendicularity:
    case CorrectionMode::Parallelism:
      break;
  }
  return t;
}

FactorGraph apply_rigid(const FactorGraph& graph, const CorrectionPlan& plan) {
  FactorGraph out = graph;
  const Transform2D w = plan.world();
  for (std::size_t k = plan.first_affected; k < out.poses.size(); ++k) {
    out.poses[k] = transform_pose(w, out.poses[k]);
  }
  return out;
}

double link_weight(const RelativePoseFactor& factor) {
  const Mat3 cov = factor.info.inverse();
  return cov(0, 0) + cov(1, 1);
}

Backpropagation backpropagate(const FactorGraph& graph, std::size_t anchor, std::size_t c_index,
                              const Transform2D& c) {
  Backpropagation out{graph, {}, c, false};
  if (c_index >= graph.poses.size() || anchor > c_index) {
    throw Error(ErrorKind::InvalidArgument, "backpropagation range out of bounds");
  }
  if (anchor == c_index) return out;

  const std::size_t links = c_index - anchor;
  std::vector<double> share(links);
  double total = 0.0;
  for (std::size_t k = 0; k < links; ++k) {
    const std::size_t child = anchor + 1 + k;
    const auto& f = graph.odometry.at(child - 1);
    if (f.i != child - 1 || f.j != child) {
      throw Error(ErrorKind::InvalidArgument, "odometry is not a chain");
    }
    share[k] = link_weight(f);
    total += share[k];
  }
  for (auto& s : share) s /= total;

  const Pose2D& x_c = graph.poses[c_index];
  const Pose2D target = transform_pose(c, x_c);
  const double phi = normalize_angle(c.rotation);

  // Rotation shares: each link turns its child by its fraction of phi.
  std::vector<Pose2D> rotated(links + 1);
  rotated[0] = graph.poses[anchor];
  for (std::size_t k = 0; k < links; ++k) {
    Transform2D rel = between(graph.poses[anchor + k], graph.poses[anchor + k + 1]);
    rel.rotation += share[k] * phi;
    rotated[k + 1] = compose(rotated[k], rel);
  }
  // Translation shares: cumulative fraction of the remaining end-point error.
  const Vec2 residual = target.position() - rotated[links].position();
  double cumulative = 0.0;
  for (std::size_t k = 0; k < links; ++k) {
    cumulative += share[k];
    if (k + 1 == links) cumulative = 1.0;
    Pose2D p = rotated[k + 1];
    p.x += cumulative * residual.x();
    p.y += cumulative * residual.y();
    out.graph.poses[anchor + k + 1] = p;
  }
  out.graph.poses[c_index].theta = target.theta;

  Transform2D previous = Transform2D::identity();
  for (std::size_t k = 0; k < links; ++k) {
    const std::size_t idx = anchor + k + 1;
    const Transform2D w = out.graph.poses[idx].as_transform() * graph.poses[idx].as_transform().inverse();
    out.updates.push_back(w * previous.inverse());
    previous = w;
  }
  out.applied = true;
  return out;
}

Segment fit_selection(const FactorGraph& graph, const std::vector<PointRef>& refs) {
  std::vector<Vec2> pts;
  pts.reserve(refs.size());
  Vec2 centroid = Vec2::Zero();
  for (const auto& r : refs) {
    pts.push_back(graph.world_point(r));
    centroid += pts.back();
  }
  const std::vector<double> ones(pts.size(), 1.0);
  Segment seg = fit_segment(pts, ones);
  centroid /= static_cast<double>(pts.size());
  const Vec2 d = seg.direction();
  const Vec2 shift = (centroid - seg.center()).dot(d) * d;
  return {seg.p0 + shift, seg.p1 + shift};
}

namespace {

// Carries a segment along with the observations it describes.
Segment follow_observations(const FactorGraph& before, const FactorGraph& after,
                            const Segment& seg, const std::vector<PointRef>& refs) {
  const std::vector<std::size_t> poses = [&] {
    std::vector<std::size_t> p;
    for (const auto& r : refs) {
      if (p.empty() || p.back() != r.pose_id) p.push_back(r.pose_id);
    }
    return p;
  }();
  std::size_t moved = 0;
  bool uniform = true;
  Transform2D common;
  for (const std::size_t id : poses) {
    const Pose2D& a = before.poses[id];
    const Pose2D& b = after.poses[id];
    if (a == b) continue;
    const Transform2D w = b.as_transform() * a.as_transform().inverse();
    if (moved++ == 0) {
      common = w;
    } else if (std::abs(normalize_angle(w.rotation - common.rotation)) > 1e-12 ||
               (w.translation - common.translation).norm() > 1e-9) {
      uniform = false;
    }
  }
  if (moved == 0) return seg;
  if (uniform && moved == poses.size()) return seg.transformed(common);
  Segment fitted = fit_selection(after, refs);
  if (fitted.direction().dot(seg.direction()) < 0.0) std::swap(fitted.p0, fitted.p1);
  return fitted;
}

}  // namespace

CorrectionResult apply_correction(const FactorGraph& graph, const HumanCorrectionFactor& factor) {
  const auto xa = factor.xa();
  const auto xb = factor.xb();
  if (xa.empty() || xb.empty()) throw Error(ErrorKind::InsufficientSelection, "empty pose set");
  if (xa.back() >= xb.front()) throw Error(ErrorKind::OrderingViolation, "X_a must precede X_b");

  CorrectionResult result;
  result.plan.a = compute_transform(factor.pa, factor.pb, factor.mode);
  result.plan.pivot = factor.pb.center();
  result.plan.first_affected = xb.front();

  const FactorGraph rigid = apply_rigid(graph, result.plan);

  // Heal the break between x_c and the first corrected pose.
  const std::size_t b0 = xb.front();
  const std::size_t c_index = b0 - 1;
  const Transform2D original = between(graph.poses[c_index], graph.poses[b0]);
  const Pose2D c_target = Pose2D::from_transform(rigid.poses[b0].as_transform() * original.inverse());
  const Transform2D c = c_target.as_transform() * rigid.poses[c_index].as_transform().inverse();
  result.backprop = backpropagate(rigid, xa.back(), c_index, c);

  FactorGraph& out = result.graph;
  out = std::move(result.backprop.graph);
  result.backprop.graph = out;
  for (auto& h : out.human_factors) {
    h.pa = follow_observations(graph, out, h.pa, h.sa);
    h.pb = follow_observations(graph, out, h.pb, h.sb);
  }
  HumanCorrectionFactor added = factor;
  added.pb = factor.pb.transformed(result.plan.world());
  out.human_factors.push_back(std::move(added));
  return result;
}

}  // namespace hitl
