#pragma once

#include <span>

#include <Eigen/Core>

#include "hitl/errors.hpp"

namespace hitl {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double radians);

/// Wraps an undirected line angle into (-pi/2, pi/2].
double normalize_half_angle(double radians);

Mat2 rotation(double radians);

/// Rigid motion in the plane: rotate by `rotation`, then translate.
struct Transform2D {
  double rotation = 0.0;
  Vec2 translation = Vec2::Zero();

  static Transform2D identity() { return {}; }

  Vec2 apply(const Vec2& p) const;
  Transform2D inverse() const;
  /// this * rhs: apply rhs first, then this.
  Transform2D operator*(const Transform2D& rhs) const;
  Mat3 matrix() const;
};

/// Robot pose in the world frame; theta stays in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2D() = default;
  Pose2D(double x_, double y_, double theta_);

  Vec2 position() const { return {x, y}; }
  Transform2D as_transform() const { return {theta, {x, y}}; }
  static Pose2D from_transform(const Transform2D& t);

  /// Sensor-frame point to world frame.
  Vec2 to_world(const Vec2& local) const;
  /// World-frame point to sensor frame.
  Vec2 to_local(const Vec2& world) const;

  bool operator==(const Pose2D&) const = default;
};

/// a (+) rel in SE(2).
Pose2D compose(const Pose2D& a, const Transform2D& rel);

/// Relative transform a^-1 (+) b.
Transform2D between(const Pose2D& a, const Pose2D& b);

/// Applies a world-frame transform to a pose: t * pose.
Pose2D transform_pose(const Transform2D& t, const Pose2D& pose);

/// Line segment feature. The normal is the left normal of p0 -> p1.
struct Segment {
  Vec2 p0 = Vec2::Zero();
  Vec2 p1 = Vec2::UnitX();

  Segment() = default;
  Segment(Vec2 a, Vec2 b) : p0(std::move(a)), p1(std::move(b)) {}

  double length() const { return (p1 - p0).norm(); }
  Vec2 center() const { return 0.5 * (p0 + p1); }
  Vec2 direction() const;
  Vec2 normal() const;
  bool valid(double min_length = 0.0) const;
  Segment transformed(const Transform2D& t) const;

  bool operator==(const Segment& o) const { return p0 == o.p0 && p1 == o.p1; }
};

/// Squared distance from p to the closest point of the closed segment.
double point_segment_sq_dist(const Vec2& p, const Segment& seg);

/// Weighted principal-axis line: centroid and unit direction.
struct LineFit {
  Vec2 centroid;
  Vec2 direction;
  double effective_count;
};

/// Line through the weighted centroid along the major axis of the weighted
/// scatter. Throws DegenerateFit when fewer than two points carry weight or
/// the points coincide.
LineFit fit_line(std::span<const Vec2> points, std::span<const double> weights);

/// Segment on `line` spanning the projections of the points whose weight is
/// at least `min_weight` (strictly positive weight when min_weight is 0).
Segment segment_on_line(const LineFit& line, std::span<const Vec2> points,
                        std::span<const double> weights, double min_weight = 0.0);

/// fit_line followed by segment_on_line over all positively weighted points.
Segment fit_segment(std::span<const Vec2> points, std::span<const double> weights);

}  // namespace hitl
