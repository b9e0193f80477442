#pragma once

// Small builders shared by the unit and acceptance tests.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "hitl/graph.hpp"

namespace hitl::testing {

inline constexpr double kPi = std::numbers::pi;

/// Points on the world-frame segment [a, b], `count` of them, evenly spaced,
/// expressed in the frame of `pose`.
inline std::vector<Vec2> wall_points(const Pose2D& pose, const Vec2& a, const Vec2& b, int count) {
  std::vector<Vec2> out;
  for (int k = 0; k < count; ++k) {
    const double t = count == 1 ? 0.5 : static_cast<double>(k) / (count - 1);
    out.push_back(pose.to_local(a + t * (b - a)));
  }
  return out;
}

/// Straight chain along +x with exact odometry and unit information.
inline FactorGraph straight_chain(std::size_t n, double step = 1.0) {
  FactorGraph g;
  g.meta.max_range = 10.0;
  for (std::size_t k = 0; k < n; ++k) g.poses.emplace_back(step * static_cast<double>(k), 0.0, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    RelativePoseFactor f;
    f.i = k;
    f.j = k + 1;
    f.z = between(g.poses[k], g.poses[k + 1]);
    f.info = Mat3::Identity();
    g.odometry.push_back(f);
  }
  return g;
}

inline Pose2D random_pose(std::mt19937_64& rng, double extent = 10.0) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::uniform_real_distribution<double> a(-kPi, kPi);
  return {u(rng), u(rng), a(rng)};
}

inline Transform2D random_transform(std::mt19937_64& rng, double extent = 10.0) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::uniform_real_distribution<double> a(-kPi, kPi);
  return {a(rng), {u(rng), u(rng)}};
}

inline Segment random_segment(std::mt19937_64& rng, double extent = 5.0, double min_len = 0.5) {
  std::uniform_real_distribution<double> u(-extent, extent);
  for (;;) {
    Segment s{{u(rng), u(rng)}, {u(rng), u(rng)}};
    if (s.length() >= min_len) return s;
  }
}

/// Random SPD information matrix with eigenvalues in [lo, hi].
inline Mat3 random_information(std::mt19937_64& rng, double lo = 10.0, double hi = 1000.0) {
  std::uniform_real_distribution<double> e(lo, hi);
  std::uniform_real_distribution<double> a(-kPi, kPi);
  const double t = a(rng);
  Mat3 q = Mat3::Identity();
  q.topLeftCorner<2, 2>() << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  const Mat3 d = Eigen::Vector3d(e(rng), e(rng), e(rng)).asDiagonal();
  const Mat3 m = q * d * q.transpose();
  // Exactly symmetric, as files store only the upper triangle.
  return 0.5 * (m + m.transpose());
}

/// Random odometry chain of n poses, steps up to 1 m and 0.5 rad, with
/// consistent measurements and random SPD information.
inline FactorGraph random_chain(std::mt19937_64& rng, std::size_t n) {
  FactorGraph g;
  g.meta.max_range = 10.0;
  std::uniform_real_distribution<double> step(-1.0, 1.0);
  std::uniform_real_distribution<double> turn(-0.5, 0.5);
  g.poses.push_back(random_pose(rng, 5.0));
  for (std::size_t k = 1; k < n; ++k) {
    const Transform2D rel{turn(rng), {step(rng), step(rng)}};
    g.poses.push_back(compose(g.poses.back(), rel));
    RelativePoseFactor f;
    f.i = k - 1;
    f.j = k;
    f.z = between(g.poses[k - 1], g.poses[k]);
    f.info = random_information(rng);
    g.odometry.push_back(f);
  }
  return g;
}

}  // namespace hitl::testing
