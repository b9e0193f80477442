#include "hitl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace hitl {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateFit: return "DegenerateFit";
    case ErrorKind::DegenerateSegment: return "DegenerateSegment";
    case ErrorKind::UnknownPose: return "UnknownPose";
    case ErrorKind::InsufficientSelection: return "InsufficientSelection";
    case ErrorKind::OrderingViolation: return "OrderingViolation";
    case ErrorKind::EmptyRange: return "EmptyRange";
    case ErrorKind::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorKind::FeatureNotFound: return "FeatureNotFound";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

double normalize_angle(double radians) {
  constexpr double kPi = std::numbers::pi;
  double a = std::remainder(radians, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

double normalize_half_angle(double radians) {
  constexpr double kPi = std::numbers::pi;
  double a = std::remainder(radians, kPi);  // [-pi/2, pi/2]
  if (a <= -kPi / 2.0) a += kPi;
  return a;
}

Mat2 rotation(double radians) {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

Vec2 Transform2D::apply(const Vec2& p) const { return hitl::rotation(rotation) * p + translation; }

Transform2D Transform2D::inverse() const {
  const Mat2 rt = hitl::rotation(rotation).transpose();
  return {normalize_angle(-rotation), -(rt * translation)};
}

Transform2D Transform2D::operator*(const Transform2D& rhs) const {
  return {normalize_angle(rotation + rhs.rotation), apply(rhs.translation)};
}

Mat3 Transform2D::matrix() const {
  Mat3 m = Mat3::Identity();
  m.topLeftCorner<2, 2>() = hitl::rotation(rotation);
  m.topRightCorner<2, 1>() = translation;
  return m;
}

Pose2D::Pose2D(double x_, double y_, double theta_) : x(x_), y(y_), theta(normalize_angle(theta_)) {}

Pose2D Pose2D::from_transform(const Transform2D& t) {
  return {t.translation.x(), t.translation.y(), t.rotation};
}

Vec2 Pose2D::to_world(const Vec2& local) const { return rotation(theta) * local + position(); }

Vec2 Pose2D::to_local(const Vec2& world) const {
  return rotation(theta).transpose() * (world - position());
}

Pose2D compose(const Pose2D& a, const Transform2D& rel) {
  return Pose2D::from_transform(a.as_transform() * rel);
}

Transform2D between(const Pose2D& a, const Pose2D& b) {
  return a.as_transform().inverse() * b.as_transform();
}

Pose2D transform_pose(const Transform2D& t, const Pose2D& pose) {
  return Pose2D::from_transform(t * pose.as_transform());
}

Vec2 Segment::direction() const { return (p1 - p0).normalized(); }

Vec2 Segment::normal() const {
  const Vec2 d = direction();
  return {-d.y(), d.x()};
}

bool Segment::valid(double min_length) const {
  return p0.allFinite() && p1.allFinite() && length() > min_length;
}

Segment Segment::transformed(const Transform2D& t) const { return {t.apply(p0), t.apply(p1)}; }

double point_segment_sq_dist(const Vec2& p, const Segment& seg) {
  const Vec2 d = seg.p1 - seg.p0;
  const Vec2 q = p - seg.p0;
  const double len2 = d.squaredNorm();
  if (len2 <= 0.0) return q.squaredNorm();
  const double u = q.dot(d) / len2;
  if (u <= 0.0) return q.squaredNorm();
  if (u >= 1.0) return (p - seg.p1).squaredNorm();
  const Vec2 f = q - u * d;
  return f.squaredNorm();
}

LineFit fit_line(std::span<const Vec2> points, std::span<const double> weights) {
  if (points.size() != weights.size()) {
    throw Error(ErrorKind::InvalidArgument, "fit_line: points/weights size mismatch");
  }
  double mass = 0.0;
  double mass_sq = 0.0;
  std::size_t positive = 0;
  Vec2 centroid = Vec2::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double w = weights[i];
    if (!(w >= 0.0)) throw Error(ErrorKind::InvalidArgument, "fit_line: negative weight");
    if (w == 0.0) continue;
    ++positive;
    mass += w;
    mass_sq += w * w;
    centroid += w * points[i];
  }
  if (positive < 2 || mass <= 0.0) {
    throw Error(ErrorKind::DegenerateFit, "fewer than two weighted points");
  }
  centroid /= mass;

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double w = weights[i];
    if (w == 0.0) continue;
    const Vec2 r = points[i] - centroid;
    sxx += w * r.x() * r.x();
    sxy += w * r.x() * r.y();
    syy += w * r.y() * r.y();
  }
  sxx /= mass;
  sxy /= mass;
  syy /= mass;
  const double trace = sxx + syy;
  if (!(trace > 1e-24)) throw Error(ErrorKind::DegenerateFit, "points coincide");

  // Eigenvalue gap of the 2x2 scatter; isotropic scatter falls back to +x.
  const double gap = std::hypot(sxx - syy, 2.0 * sxy);
  Vec2 dir = Vec2::UnitX();
  if (gap > 1e-12 * trace) {
    const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    dir = Vec2(std::cos(angle), std::sin(angle));
    if (dir.x() < 0.0 || (dir.x() == 0.0 && dir.y() < 0.0)) dir = -dir;
  }
  return {centroid, dir, mass * mass / mass_sq};
}

Segment segment_on_line(const LineFit& line, std::span<const Vec2> points,
                        std::span<const double> weights, double min_weight) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const bool take = min_weight > 0.0 ? weights[i] >= min_weight : weights[i] > 0.0;
    if (!take) continue;
    const double t = (points[i] - line.centroid).dot(line.direction);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  if (!(hi > lo)) throw Error(ErrorKind::DegenerateFit, "segment has no extent");
  return {line.centroid + lo * line.direction, line.centroid + hi * line.direction};
}

Segment fit_segment(std::span<const Vec2> points, std::span<const double> weights) {
  return segment_on_line(fit_line(points, weights), points, weights);
}

}  // namespace hitl
