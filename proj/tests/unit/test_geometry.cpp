#include <doctest.h>

#include <array>

#include "hitl/errors.hpp"
#include "hitl/geometry.hpp"
#include "support.hpp"

using namespace hitl;
using hitl::testing::kPi;

namespace {

Mat3 homogeneous(const Pose2D& p) { return p.as_transform().matrix(); }

// Reference 3x3 matrix built from first principles, independent of
// Transform2D::matrix().
Mat3 reference_matrix(double angle, double tx, double ty) {
  Mat3 m;
  m << std::cos(angle), -std::sin(angle), tx, std::sin(angle), std::cos(angle), ty, 0.0, 0.0, 1.0;
  return m;
}

// Brute-force squared distance by dense sampling of the segment.
double sampled_sq_dist(const Vec2& p, const Segment& s, int samples = 200001) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) / (samples - 1);
    best = std::min(best, (p - (s.p0 + t * (s.p1 - s.p0))).squaredNorm());
  }
  return best;
}

}  // namespace

TEST_CASE("compose: worked examples") {
  const Pose2D a = compose({0, 0, 0}, {0.0, {1.0, 0.0}});
  CHECK(a.x == doctest::Approx(1.0));
  CHECK(a.y == doctest::Approx(0.0));
  CHECK(a.theta == doctest::Approx(0.0));
  const Pose2D b = compose({0, 0, kPi / 2}, {0.0, {1.0, 0.0}});
  CHECK(b.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(b.x) < 1e-15);
  CHECK(b.y == doctest::Approx(1.0));
  CHECK(b.theta == doctest::Approx(kPi / 2));
}

TEST_CASE("compose: chain of 100 random transforms undone in reverse returns to the origin") {
  std::mt19937_64 rng(11);
  std::vector<Transform2D> steps;
  Pose2D p;
  for (int k = 0; k < 100; ++k) {
    steps.push_back(hitl::testing::random_transform(rng, 3.0));
    p = compose(p, steps.back());
  }
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) p = compose(p, it->inverse());
  CHECK(std::abs(p.x) < 1e-9);
  CHECK(std::abs(p.y) < 1e-9);
  CHECK(std::abs(p.theta) < 1e-9);
}

TEST_CASE("compose matches homogeneous matrix multiplication") {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 200; ++k) {
    const Pose2D a = hitl::testing::random_pose(rng);
    const Transform2D r = hitl::testing::random_transform(rng);
    const Mat3 expected = reference_matrix(a.theta, a.x, a.y) * reference_matrix(r.rotation, r.translation.x(), r.translation.y());
    const Pose2D c = compose(a, r);
    CHECK((homogeneous(c) - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("angles stay in (-pi, pi]") {
  CHECK(normalize_angle(kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(-kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(3 * kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(2 * kPi) == doctest::Approx(0.0));
  CHECK(normalize_angle(-0.5) == doctest::Approx(-0.5));
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int k = 0; k < 1000; ++k) {
    const double a = normalize_angle(u(rng));
    CHECK(a > -kPi);
    CHECK(a <= kPi);
    const Pose2D p(0, 0, u(rng));
    CHECK(p.theta > -kPi);
    CHECK(p.theta <= kPi);
  }
  CHECK(normalize_half_angle(kPi / 2) == doctest::Approx(kPi / 2));
  CHECK(normalize_half_angle(-kPi / 2) == doctest::Approx(kPi / 2));
  CHECK(normalize_half_angle(kPi) == doctest::Approx(0.0));
}

TEST_CASE("Transform2D: associativity and inverse") {
  std::mt19937_64 rng(14);
  for (int k = 0; k < 200; ++k) {
    const auto a = hitl::testing::random_transform(rng);
    const auto b = hitl::testing::random_transform(rng);
    const auto c = hitl::testing::random_transform(rng);
    const Mat3 lhs = ((a * b) * c).matrix();
    const Mat3 rhs = (a * (b * c)).matrix();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    const auto id = a.inverse() * a;
    CHECK(std::abs(normalize_angle(id.rotation)) < 1e-12);
    CHECK(id.translation.norm() < 1e-12);
    const Vec2 p(1.5, -2.0);
    CHECK((a.apply(a.inverse().apply(p)) - p).norm() < 1e-12);
  }
}

TEST_CASE("between inverts compose") {
  std::mt19937_64 rng(15);
  for (int k = 0; k < 200; ++k) {
    const Pose2D a = hitl::testing::random_pose(rng);
    const Pose2D b = hitl::testing::random_pose(rng);
    const Pose2D c = compose(a, between(a, b));
    CHECK(std::abs(c.x - b.x) < 1e-9);
    CHECK(std::abs(c.y - b.y) < 1e-9);
    CHECK(std::abs(normalize_angle(c.theta - b.theta)) < 1e-12);
  }
}

TEST_CASE("point_segment_sq_dist: worked examples") {
  const Segment s{{0, 0}, {2, 0}};
  CHECK(point_segment_sq_dist({1.0, 0.0}, s) == 0.0);
  CHECK(point_segment_sq_dist({1.0, 0.3}, s) == doctest::Approx(0.09));
  const Vec2 beyond(2.3, 0.4);
  CHECK(point_segment_sq_dist(beyond, s) == doctest::Approx(0.25));
  CHECK(point_segment_sq_dist(beyond, s) == doctest::Approx(sampled_sq_dist(beyond, s)).epsilon(1e-6));
}

TEST_CASE("point_segment_sq_dist: non-negative and matches dense sampling") {
  std::mt19937_64 rng(16);
  for (int k = 0; k < 50; ++k) {
    const Segment s = hitl::testing::random_segment(rng);
    const Vec2 p = hitl::testing::random_pose(rng, 6.0).position();
    const double d = point_segment_sq_dist(p, s);
    CHECK(d >= 0.0);
    // Sampling overestimates by at most (len / samples)^2 / 4 plus rounding.
    const double sampled = sampled_sq_dist(p, s, 20001);
    CHECK(d <= sampled + 1e-12);
    CHECK(sampled - d <= 1e-6 * (1.0 + d) + 2.0 * std::sqrt(d) * s.length() / 20000.0);
  }
}

TEST_CASE("point_segment_sq_dist is zero exactly on the segment") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> t(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const Segment s = hitl::testing::random_segment(rng);
    const Vec2 on = s.p0 + t(rng) * (s.p1 - s.p0);
    CHECK(point_segment_sq_dist(on, s) < 1e-12);
    const Vec2 off = on + 1e-3 * s.normal();
    CHECK(point_segment_sq_dist(off, s) > 0.0);
  }
}

TEST_CASE("Segment: normal is the unit left normal") {
  const Segment s{{1, 1}, {3, 1}};
  CHECK(s.normal().x() == doctest::Approx(0.0));
  CHECK(s.normal().y() == doctest::Approx(1.0));
  std::mt19937_64 rng(18);
  for (int k = 0; k < 100; ++k) {
    const Segment r = hitl::testing::random_segment(rng);
    CHECK(r.normal().norm() == doctest::Approx(1.0));
    CHECK(std::abs(r.normal().dot(r.p1 - r.p0)) < 1e-12);
    const Vec2 d = r.direction();
    CHECK(d.x() * r.normal().y() - d.y() * r.normal().x() == doctest::Approx(1.0));
  }
}

TEST_CASE("fit_segment: worked examples") {
  const std::array<Vec2, 3> line = {Vec2(0, 0), Vec2(1, 0), Vec2(2, 0)};
  const std::array<double, 3> ones = {1, 1, 1};
  const Segment s = fit_segment(line, ones);
  CHECK((s.p0 - Vec2(0, 0)).norm() < 1e-12);
  CHECK((s.p1 - Vec2(2, 0)).norm() < 1e-12);

  const double eps = 0.01;
  for (double sign : {1.0, -1.0}) {
    const std::array<Vec2, 4> pts = {Vec2(0, sign * eps), Vec2(0, -sign * eps), Vec2(1, -sign * eps),
                                     Vec2(1, sign * eps)};
    const std::array<double, 4> w = {1, 1, 1, 1};
    const Segment f = fit_segment(pts, w);
    // Closed-form PCA: the 2x2 scatter is diagonal with x variance 0.25
    // and y variance eps^2, so the major axis is exactly x.
    const double angle = std::atan2(f.direction().y(), f.direction().x());
    CHECK(std::abs(normalize_half_angle(angle)) < 0.02);
  }
  const std::array<Vec2, 2> two = {Vec2(0, 0.01), Vec2(1, -0.01)};
  const std::array<double, 2> w2 = {1, 1};
  const Segment f2 = fit_segment(two, w2);
  CHECK(std::abs(normalize_half_angle(std::atan2(f2.direction().y(), f2.direction().x()))) < 0.02);

  const std::array<Vec2, 4> square = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)};
  const std::array<double, 4> w4 = {1, 1, 1, 1};
  Segment sq;
  CHECK_NOTHROW(sq = fit_segment(square, w4));
  CHECK(sq.direction().x() == doctest::Approx(1.0));
  CHECK(sq.direction().y() == doctest::Approx(0.0));
}

TEST_CASE("fit_segment: degenerate input") {
  const std::array<Vec2, 1> one = {Vec2(1, 1)};
  const std::array<double, 1> w1 = {1};
  CHECK_THROWS_AS(fit_segment(one, w1), Error);
  const std::array<Vec2, 3> same = {Vec2(1, 1), Vec2(1, 1), Vec2(1, 1)};
  const std::array<double, 3> w3 = {1, 1, 1};
  try {
    fit_segment(same, w3);
    FAIL("expected DegenerateFit");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateFit);
  }
  const std::array<Vec2, 3> pts = {Vec2(0, 0), Vec2(1, 0), Vec2(2, 0)};
  const std::array<double, 3> mostly_zero = {0, 1, 0};
  CHECK_THROWS_AS(fit_segment(pts, mostly_zero), Error);
}

TEST_CASE("fit_segment is equivariant under rigid motion") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::uniform_real_distribution<double> w(0.1, 1.0);
  for (int k = 0; k < 50; ++k) {
    const Segment truth = hitl::testing::random_segment(rng, 3.0, 1.0);
    std::vector<Vec2> pts;
    std::vector<double> weights;
    for (int i = 0; i < 30; ++i) {
      const double t = i / 29.0;
      pts.push_back(truth.p0 + t * (truth.p1 - truth.p0) + noise(rng) * truth.normal());
      weights.push_back(w(rng));
    }
    const Transform2D motion = hitl::testing::random_transform(rng);
    std::vector<Vec2> moved;
    for (const auto& p : pts) moved.push_back(motion.apply(p));
    const Segment a = fit_segment(pts, weights).transformed(motion);
    const Segment b = fit_segment(moved, weights);
    // The fitted direction is a line direction; compare as unordered ends.
    const double same = (a.p0 - b.p0).norm() + (a.p1 - b.p1).norm();
    const double flipped = (a.p0 - b.p1).norm() + (a.p1 - b.p0).norm();
    CHECK(std::min(same, flipped) < 1e-9);
  }
}
