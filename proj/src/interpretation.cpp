#include "hitl/interpretation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace hitl {

namespace {

constexpr double kHardAssignment = 0.5;

double log_gaussian_norm(double sigma) { return -std::log(std::sqrt(2.0 * std::numbers::pi) * sigma); }

// Uniform outlier density across the candidate window (perpendicular extent).
double outlier_density(const InterpretationParams& p) { return 1.0 / (2.0 * p.neighborhood); }

double endpoint_motion(const Segment& a, const Segment& b) {
  const double same = std::max((a.p0 - b.p0).norm(), (a.p1 - b.p1).norm());
  const double flipped = std::max((a.p0 - b.p1).norm(), (a.p1 - b.p0).norm());
  return std::min(same, flipped);
}

Segment oriented_like(Segment seg, const Segment& reference) {
  if ((seg.p1 - seg.p0).dot(reference.p1 - reference.p0) < 0.0) std::swap(seg.p0, seg.p1);
  return seg;
}

// Restricts the extent of `seg` to the projection of the drawn stroke, so the
// selection cannot creep along a continuous wall beyond what was drawn.
Segment clamp_to_stroke(const Segment& seg, const Segment& stroke) {
  const Vec2 c = seg.center();
  const Vec2 d = seg.direction();
  double lo = (seg.p0 - c).dot(d);
  double hi = (seg.p1 - c).dot(d);
  const double s0 = (stroke.p0 - c).dot(d);
  const double s1 = (stroke.p1 - c).dot(d);
  lo = std::max(lo, std::min(s0, s1));
  hi = std::min(hi, std::max(s0, s1));
  if (!(hi > lo)) throw Error(ErrorKind::DegenerateFit, "fitted feature lies outside the stroke");
  return {c + lo * d, c + hi * d};
}

std::vector<Vec2> positions(const std::vector<Candidate>& cands) {
  std::vector<Vec2> out;
  out.reserve(cands.size());
  for (const auto& c : cands) out.push_back(c.point);
  return out;
}

// Drops every pose that contributes fewer than t_p references.
void enforce_per_pose_minimum(std::vector<PointRef>& refs, std::size_t t_p) {
  std::vector<PointRef> kept;
  for (std::size_t k = 0; k < refs.size();) {
    std::size_t end = k;
    while (end < refs.size() && refs[end].pose_id == refs[k].pose_id) ++end;
    if (end - k >= t_p) kept.insert(kept.end(), refs.begin() + static_cast<std::ptrdiff_t>(k), refs.begin() + static_cast<std::ptrdiff_t>(end));
    k = end;
  }
  refs = std::move(kept);
}

}  // namespace

std::vector<Candidate> candidate_points(const FactorGraph& graph, const Segment& seg,
                                        double neighborhood) {
  std::vector<Candidate> out;
  const double limit = neighborhood * neighborhood;
  // Cheap reject on the segment's padded bounding box first.
  const Vec2 lo = seg.p0.cwiseMin(seg.p1).array() - neighborhood;
  const Vec2 hi = seg.p0.cwiseMax(seg.p1).array() + neighborhood;
  for (const auto& scan : graph.scans) {
    const Pose2D& pose = graph.poses.at(scan.pose_id);
    for (std::size_t k = 0; k < scan.points.size(); ++k) {
      const Vec2 p = pose.to_world(scan.points[k]);
      if ((p.array() < lo.array()).any() || (p.array() > hi.array()).any()) continue;
      if (point_segment_sq_dist(p, seg) <= limit) out.push_back({{scan.pose_id, k}, p});
    }
  }
  return out;
}

double gaussian_weight(double sq_dist, double sigma) {
  return std::exp(-sq_dist / (2.0 * sigma * sigma));
}

double responsibility(double sq_dist, const InterpretationParams& params) {
  const double inlier = (1.0 - params.outlier_weight) * gaussian_weight(sq_dist, params.sigma) *
                        std::exp(log_gaussian_norm(params.sigma));
  const double outlier = params.outlier_weight * outlier_density(params);
  return inlier / (inlier + outlier);
}

Membership e_step(std::span<const Vec2> points, const Segment& seg,
                  const InterpretationParams& params) {
  Membership m;
  m.weights.reserve(points.size());
  for (const auto& p : points) m.weights.push_back(responsibility(point_segment_sq_dist(p, seg), params));
  return m;
}

Segment m_step(std::span<const Vec2> points, const Membership& membership) {
  const LineFit line = fit_line(points, membership.weights);
  return segment_on_line(line, points, membership.weights, kHardAssignment);
}

double expected_log_likelihood(std::span<const Vec2> points, const Membership& membership,
                               const Segment& seg, const InterpretationParams& params) {
  const double log_in = std::log(1.0 - params.outlier_weight) + log_gaussian_norm(params.sigma);
  const double log_out = std::log(params.outlier_weight * outlier_density(params));
  const double inv_two_var = 1.0 / (2.0 * params.sigma * params.sigma);
  double ll = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double w = membership.weights[i];
    ll += w * (log_in - point_segment_sq_dist(points[i], seg) * inv_two_var) + (1.0 - w) * log_out;
  }
  return ll;
}

double observed_log_likelihood(std::span<const Vec2> points, const Segment& seg,
                               const InterpretationParams& params) {
  const double in_scale = (1.0 - params.outlier_weight) * std::exp(log_gaussian_norm(params.sigma));
  const double out = params.outlier_weight * outlier_density(params);
  double ll = 0.0;
  for (const auto& p : points) ll += std::log(in_scale * gaussian_weight(point_segment_sq_dist(p, seg), params.sigma) + out);
  return ll;
}

SideInterpretation interpret_side(const FactorGraph& graph, const Segment& stroke,
                                  const InterpretationParams& params) {
  if (!stroke.valid(1e-3)) throw Error(ErrorKind::DegenerateSegment, "stroke shorter than 1 mm");
  SideInterpretation side;
  Segment theta = stroke;

  for (int it = 0; it < params.max_iters; ++it) {
    const auto cands = candidate_points(graph, theta, params.neighborhood);
    if (cands.size() < 2) {
      throw Error(ErrorKind::InsufficientSelection, "no observations under the stroke");
    }
    const auto pts = positions(cands);
    const Membership w = e_step(pts, theta, params);
    Segment next = oriented_like(clamp_to_stroke(m_step(pts, w), stroke), stroke);

    const double before = expected_log_likelihood(pts, w, theta, params);
    double after = expected_log_likelihood(pts, w, next, params);
    {
      // The hard-assigned extent is shorter than the current one while the
      // ends of an askew stroke are still soft. On a fixed line a longer
      // segment is never further from any point, so the refit line with the
      // current extent competes as well.
      const LineFit line = fit_line(pts, w.weights);
      const double t0 = (theta.p0 - line.centroid).dot(line.direction);
      const double t1 = (theta.p1 - line.centroid).dot(line.direction);
      const Segment kept = oriented_like(
          clamp_to_stroke({line.centroid + t0 * line.direction, line.centroid + t1 * line.direction}, stroke), stroke);
      const double kept_ll = expected_log_likelihood(pts, w, kept, params);
      if (kept_ll > after) {
        next = kept;
        after = kept_ll;
      }
    }
    const double observed = observed_log_likelihood(pts, theta, params);
    // Generalized EM: an M-step that does not improve the bound is rejected.
    if (after < before) {
      side.trace.push_back({before, before, observed, observed, cands.size()});
      side.converged = true;
      break;
    }
    side.trace.push_back({before, after, observed, observed_log_likelihood(pts, next, params), cands.size()});
    const double moved = endpoint_motion(theta, next);
    theta = next;
    if (moved < params.tol) {
      side.converged = true;
      break;
    }
  }

  // Final hard assignment against the converged feature.
  const auto cands = candidate_points(graph, theta, params.neighborhood);
  std::map<std::size_t, std::vector<Candidate>> by_pose;
  for (const auto& c : cands) {
    if (responsibility(point_segment_sq_dist(c.point, theta), params) >= kHardAssignment) {
      by_pose[c.ref.pose_id].push_back(c);
    }
  }
  Vec2 centroid = Vec2::Zero();
  for (const auto& [pose, members] : by_pose) {
    if (members.size() < params.t_p) continue;
    for (const auto& c : members) {
      side.selection.push_back(c.ref);
      centroid += c.point;
    }
  }
  if (side.selection.empty()) {
    throw Error(ErrorKind::InsufficientSelection,
                "no pose contributes " + std::to_string(params.t_p) + " points");
  }
  centroid /= static_cast<double>(side.selection.size());

  // Register the feature's midpoint to the centroid of its observations.
  const Vec2 d = theta.direction();
  const Vec2 shift = (centroid - theta.center()).dot(d) * d;
  side.segment = {theta.p0 + shift, theta.p1 + shift};
  return side;
}

Interpretation interpret_detailed(const FactorGraph& graph, const RawCorrection& raw,
                                  const InterpretationParams& params) {
  if (!raw.valid()) throw Error(ErrorKind::DegenerateSegment, "stroke shorter than 1 mm");
  Interpretation out;
  out.side_a = interpret_side(graph, raw.pa0, params);
  out.side_b = interpret_side(graph, raw.pb0, params);

  // Shared observations go to the side whose feature explains them better.
  {
    std::vector<PointRef> a_keep, b_keep;
    std::set_intersection(out.side_a.selection.begin(), out.side_a.selection.end(),
                          out.side_b.selection.begin(), out.side_b.selection.end(),
                          std::back_inserter(a_keep));
    for (const auto& shared : a_keep) {
      const Vec2 p = graph.world_point(shared);
      const bool to_a = point_segment_sq_dist(p, out.side_a.segment) <=
                        point_segment_sq_dist(p, out.side_b.segment);
      auto& loser = to_a ? out.side_b.selection : out.side_a.selection;
      loser.erase(std::lower_bound(loser.begin(), loser.end(), shared));
    }
    enforce_per_pose_minimum(out.side_a.selection, params.t_p);
    enforce_per_pose_minimum(out.side_b.selection, params.t_p);
    if (out.side_a.selection.empty() || out.side_b.selection.empty()) {
      throw Error(ErrorKind::InsufficientSelection, "strokes select the same observations");
    }
  }

  HumanCorrectionFactor& f = out.factor;
  f.mode = raw.mode;
  f.pa = out.side_a.segment;
  f.pb = out.side_b.segment;
  f.sa = out.side_a.selection;
  f.sb = out.side_b.selection;
  auto xa = f.xa();
  auto xb = f.xb();
  if (xb.back() < xa.front()) {
    std::swap(f.pa, f.pb);
    std::swap(f.sa, f.sb);
    std::swap(out.side_a, out.side_b);
    std::swap(xa, xb);
    out.swapped = true;
  }
  if (xa.back() >= xb.front()) {
    throw Error(ErrorKind::OrderingViolation,
                "selected pose ranges interleave: a ends at " + std::to_string(xa.back()) +
                    ", b starts at " + std::to_string(xb.front()));
  }
  return out;
}

HumanCorrectionFactor interpret(const FactorGraph& graph, const RawCorrection& raw,
                                const InterpretationParams& params) {
  return interpret_detailed(graph, raw, params).factor;
}

}  // namespace hitl
