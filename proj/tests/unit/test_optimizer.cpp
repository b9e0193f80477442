#include <doctest.h>

#include "gradient_check.hpp"
#include "hitl/correction.hpp"
#include "hitl/errors.hpp"
#include "hitl/optimizer.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hitl;
using hitl::testing::kPi;

namespace {

constexpr std::array kModes = {CorrectionMode::Colocation, CorrectionMode::Collinearity,
                               CorrectionMode::Perpendicularity, CorrectionMode::Parallelism};

// Wall at y = 2 from x = -1 to 3, seen by every pose of a straight chain;
// one Colocation factor between the views of poses a and b. Everything is
// exactly consistent, so the total cost is zero.
FactorGraph consistent_graph(std::size_t n, std::size_t a, std::size_t b) {
  FactorGraph g = hitl::testing::straight_chain(n);
  const Vec2 w0(-1.0, 2.0);
  const Vec2 w1(3.0, 2.0);
  for (std::size_t k = 0; k < n; ++k) g.scans.push_back({k, hitl::testing::wall_points(g.poses[k], w0, w1, 9)});
  HumanCorrectionFactor h;
  h.mode = CorrectionMode::Colocation;
  h.pa = {w0, w1};
  h.pb = {w0, w1};
  for (std::size_t i = 0; i < 9; ++i) {
    h.sa.push_back({a, i});
    h.sb.push_back({b, i});
  }
  g.human_factors.push_back(h);
  return g;
}

double max_pose_gap(const FactorGraph& a, const FactorGraph& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.poses.size(); ++k) {
    m = std::max({m, std::abs(a.poses[k].x - b.poses[k].x), std::abs(a.poses[k].y - b.poses[k].y),
                  std::abs(normalize_angle(a.poses[k].theta - b.poses[k].theta))});
  }
  return m;
}

FactorGraph moved(const FactorGraph& g, const Transform2D& t) {
  FactorGraph out = g;
  for (auto& p : out.poses) p = transform_pose(t, p);
  for (auto& h : out.human_factors) {
    h.pa = h.pa.transformed(t);
    h.pb = h.pb.transformed(t);
  }
  return out;
}

}  // namespace

TEST_CASE("residual_relative: worked examples") {
  RelativePoseFactor f;
  f.i = 0;
  f.j = 1;
  f.z = {0.3, {1.0, 0.5}};
  f.info = Mat3::Identity();
  const Pose2D xi(2, -1, 0.7);
  CHECK(residual_relative(f, xi, compose(xi, f.z)).r.norm() < 1e-12);

  f.z = {0.0, {1.0, 0.0}};
  const auto r = residual_relative(f, {0, 0, 0}, {1.1, 0, 0});
  CHECK(r.r[0] == doctest::Approx(0.1));
  CHECK(std::abs(r.r[1]) < 1e-15);
  CHECK(std::abs(r.r[2]) < 1e-15);

  // Whitening: U^T U = info.
  f.info = Eigen::Vector3d(4.0, 9.0, 16.0).asDiagonal();
  const auto w = residual_relative(f, {0, 0, 0}, {1.1, 0.2, 0.05});
  CHECK(w.r[0] == doctest::Approx(0.2));
  CHECK(w.r[1] == doctest::Approx(0.6));
  CHECK(w.r[2] == doctest::Approx(0.2));
}

TEST_CASE("residual_relative grows with the perturbation") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const FactorGraph g = hitl::testing::random_chain(rng, 2);
    const auto& f = g.odometry[0];
    const Pose2D dir = hitl::testing::random_pose(rng, 1.0);
    double last = -1.0;
    for (int s = 0; s <= 50; ++s) {
      const double scale = 0.01 * s;
      const Pose2D xj(g.poses[1].x + scale * dir.x, g.poses[1].y + scale * dir.y, g.poses[1].theta + scale * dir.theta);
      const double norm = residual_relative(f, g.poses[0], xj).r.norm();
      CHECK(norm >= last - 1e-12);
      last = norm;
    }
  }
}

TEST_CASE("residual_human: worked examples") {
  const ResidualWeights w;
  const FactorGraph g = consistent_graph(3, 0, 2);
  const auto r = residual_human(g.human_factors[0], g, w);
  CHECK(r.ra < 1e-12);
  CHECK(r.rb < 1e-12);
  CHECK(r.rp < 1e-12);

  const Segment a{{0, 0}, {2, 0}};
  CHECK(residual_relation(a, {{1, -1}, {1, 1}}, CorrectionMode::Perpendicularity, w) < 1e-15);
  CHECK(residual_relation(a, {{0, 0.4}, {2, 0.4}}, CorrectionMode::Collinearity, w) == doctest::Approx(w.k1 * 0.4));
  CHECK(residual_relation(a, {{2, -0.4}, {0, -0.4}}, CorrectionMode::Collinearity, w) == doctest::Approx(w.k1 * 0.4));
  // Collinearity ignores sliding along the line; Colocation does not.
  CHECK(residual_relation(a, {{5, 0}, {7, 0}}, CorrectionMode::Collinearity, w) < 1e-15);
  CHECK(residual_relation(a, {{5, 0}, {7, 0}}, CorrectionMode::Colocation, w) == doctest::Approx(w.k1 * 5.0));
  CHECK(residual_relation(a, {{0, 0}, {2, 2}}, CorrectionMode::Parallelism, w) ==
        doctest::Approx(w.k2 * (1.0 - std::sqrt(0.5))));
}

TEST_CASE("RMS fit residual matches a hand computation") {
  FactorGraph g = hitl::testing::straight_chain(2);
  g.scans.push_back({0, {{0.5, 0.1}, {1.0, -0.2}}});
  g.scans.push_back({1, {{0.0, 0.3}}});
  HumanCorrectionFactor h;
  h.mode = CorrectionMode::Parallelism;
  h.sa = {{0, 0}, {0, 1}};
  h.sb = {{1, 0}};
  h.pa = {{0, 0}, {2, 0}};
  h.pb = {{0, 0}, {0.5, 0}};
  const auto r = residual_human(h, g, {});
  CHECK(r.ra == doctest::Approx(std::sqrt((0.01 + 0.04) / 2.0)));
  // Beyond the end of P_b: distance to the endpoint (0.5, 0).
  CHECK(r.rb == doctest::Approx(std::sqrt(0.25 + 0.09)));
}

TEST_CASE("relation residuals for the orientation modes are symmetric") {
  std::mt19937_64 rng(42);
  const ResidualWeights w;
  for (int k = 0; k < 200; ++k) {
    const Segment a = hitl::testing::random_segment(rng);
    const Segment b = hitl::testing::random_segment(rng);
    for (auto m : {CorrectionMode::Perpendicularity, CorrectionMode::Parallelism}) {
      CHECK(residual_relation(a, b, m, w) == doctest::Approx(residual_relation(b, a, m, w)).epsilon(1e-12));
      const Segment flipped{b.p1, b.p0};
      CHECK(residual_relation(a, flipped, m, w) == doctest::Approx(residual_relation(a, b, m, w)).epsilon(1e-12));
    }
    CHECK(residual_relation(a, b, CorrectionMode::Colocation, w) ==
          doctest::Approx(residual_relation(b, a, CorrectionMode::Colocation, w)).epsilon(1e-12));
  }
}

TEST_CASE("least-squares rows reproduce the human costs") {
  std::mt19937_64 rng(43);
  const ResidualWeights w;
  for (auto mode : kModes) {
    for (int k = 0; k < 20; ++k) {
      const FactorGraph g = hitl::testing::random_human_graph(rng, mode);
      const Problem p(g, w);
      const Eigen::VectorXd x = p.pack();
      const auto r = residual_human(g.human_factors[0], g, w);
      double ra = 0.0;
      double rb = 0.0;
      double align = 0.0;
      double offset = 0.0;
      for (const auto layout : {RowLayout::Compact, RowLayout::PerObservation}) {
        ra = rb = align = offset = 0.0;
        for (const auto& row : p.rows(x, layout)) {
          const double v2 = row.value * row.value;
          if (row.kind == RowKind::Ra) ra += v2;
          if (row.kind == RowKind::Rb) rb += v2;
          if (row.kind == RowKind::RpAlign) align += v2;
          if (row.kind == RowKind::RpOffset) offset += v2;
        }
        const double hw2 = w.human_weight * w.human_weight;
        CHECK(ra == doctest::Approx(hw2 * r.ra * r.ra).epsilon(1e-10));
        CHECK(rb == doctest::Approx(hw2 * r.rb * r.rb).epsilon(1e-10));
      }
      const Vec2 na = g.human_factors[0].pa.normal();
      const Vec2 nb = g.human_factors[0].pb.normal();
      const double c = std::abs(na.dot(nb));
      const double hw2 = w.human_weight * w.human_weight;
      if (mode == CorrectionMode::Perpendicularity) {
        CHECK(align == doctest::Approx(hw2 * w.k2 * w.k2 * c * c).epsilon(1e-10));
      } else {
        CHECK(align == doctest::Approx(hw2 * 2.0 * w.k2 * (1.0 - c)).epsilon(1e-10));
      }
      const Vec2 d = g.human_factors[0].pb.center() - g.human_factors[0].pa.center();
      if (mode == CorrectionMode::Colocation) {
        CHECK(offset == doctest::Approx(hw2 * w.k1 * w.k1 * d.squaredNorm()).epsilon(1e-10));
      } else if (mode == CorrectionMode::Collinearity) {
        CHECK(offset == doctest::Approx(hw2 * w.k1 * w.k1 * std::pow(d.dot(na), 2)).epsilon(1e-10));
      } else {
        CHECK(offset == 0.0);
      }
    }
  }
}

TEST_CASE("row Jacobians match central differences") {
  std::mt19937_64 rng(44);
  const ResidualWeights w;
  for (auto mode : kModes) {
    for (const auto layout : {RowLayout::Compact, RowLayout::PerObservation}) {
      std::map<RowKind, double> worst;
      for (int k = 0; k < 25; ++k) {
        const FactorGraph g = hitl::testing::random_human_graph(rng, mode, k % 5 == 4);
        const Problem p(g, w);
        for (const auto& [kind, e] : hitl::testing::gradient_errors(p, p.pack(), layout)) {
          worst[kind] = std::max(worst[kind], e);
        }
      }
      CAPTURE(to_string(mode));
      CAPTURE(static_cast<int>(layout));
      for (const auto& [kind, e] : worst) {
        CAPTURE(static_cast<int>(kind));
        CHECK(e < 1e-5);
      }
      CHECK(worst.count(RowKind::Odometry) == 1);
      CHECK(worst.count(RowKind::Ra) == 1);
      CHECK(worst.count(RowKind::Rb) == 1);
      CHECK(worst.count(RowKind::RpAlign) == 1);
      CHECK(worst.count(RowKind::Barrier) == 1);
    }
  }
}

TEST_CASE("optimize: zero-cost graph is a fixed point") {
  const FactorGraph g = consistent_graph(5, 1, 3);
  const ResidualWeights w;
  CHECK(total_cost(g, w) < 1e-20);
  const SolverParams params;
  const auto r = optimize(g, w, params);
  CHECK(max_pose_gap(r.graph, g) <= params.param_tol);
  CHECK((r.graph.human_factors[0].pa.p0 - g.human_factors[0].pa.p0).norm() <= params.param_tol);
  CHECK((r.graph.human_factors[0].pb.p1 - g.human_factors[0].pb.p1).norm() <= params.param_tol);
  CHECK(r.report.converged);
}

namespace {

// Chain whose tail drifted; one Collinearity correction between poses 1
// and 6, initialized the way the session does it.
FactorGraph corrected_drift() {
  FactorGraph g = hitl::testing::straight_chain(8);
  for (std::size_t k = 0; k < 8; ++k) {
    const Vec2 a(static_cast<double>(k) - 1.5, 1.5);
    g.scans.push_back({k, hitl::testing::wall_points(g.poses[k], a, a + Vec2(3, 0), 13)});
  }
  for (std::size_t k = 3; k < 8; ++k) {
    g.poses[k] = transform_pose({0.02 * static_cast<double>(k - 2), {0.0, 0.05 * static_cast<double>(k - 2)}}, g.poses[k]);
  }
  HumanCorrectionFactor h;
  h.mode = CorrectionMode::Collinearity;
  for (std::size_t i = 0; i < 13; ++i) {
    h.sa.push_back({1, i});
    h.sb.push_back({6, i});
  }
  h.pa = fit_selection(g, h.sa);
  h.pb = fit_selection(g, h.sb);
  return apply_correction(g, h).graph;
}

}  // namespace

TEST_CASE("optimize: accepted costs never increase") {
  const FactorGraph g = corrected_drift();
  const ResidualWeights w;
  const auto r = optimize(g, w, {});
  CHECK(r.report.final_cost <= r.report.initial_cost);
  CHECK(r.report.initial_cost == doctest::Approx(total_cost(g, w)));
  CHECK(r.report.final_cost == doctest::Approx(total_cost(r.graph, w)));
  for (std::size_t k = 1; k < r.report.accepted_costs.size(); ++k) {
    CHECK(r.report.accepted_costs[k] <= r.report.accepted_costs[k - 1]);
  }
  CHECK(r.graph.poses[0] == g.poses[0]);
}

TEST_CASE("optimize: a rigid motion of the input moves the output with it") {
  const FactorGraph g = corrected_drift();
  const ResidualWeights w;
  const auto base = optimize(g, w, {});
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 3; ++trial) {
    const Transform2D t = hitl::testing::random_transform(rng, 5.0);
    const auto out = optimize(moved(g, t), w, {});
    const FactorGraph expected = moved(base.graph, t);
    CHECK(max_pose_gap(out.graph, expected) < 1e-6);
    const auto& ha = out.graph.human_factors[0];
    const auto& hb = expected.human_factors[0];
    // Segment length has no cost while every observation projects inside
    // the segment, so only the line and the midpoint are determined.
    for (const auto& [s, e] : {std::pair{ha.pa, hb.pa}, std::pair{ha.pb, hb.pb}}) {
      CHECK((s.center() - e.center()).norm() < 1e-6);
      CHECK(std::abs(s.direction().dot(e.normal())) < 1e-6);
    }
  }
}

TEST_CASE("optimize: held poses and segments stay put") {
  const FactorGraph g = corrected_drift();
  SolverParams params;
  params.held_poses = {4};
  params.hold_segments = true;
  const auto r = optimize(g, {}, params);
  CHECK(r.graph.poses[0] == g.poses[0]);
  CHECK(r.graph.poses[4] == g.poses[4]);
  CHECK(r.graph.human_factors == g.human_factors);
  CHECK(max_pose_gap(r.graph, g) > 1e-4);
}

namespace {

// Three poses along +x, pose 0 sees a wall, pose 2 sees the same wall and
// sits off its odometry. Pose 1 and both segments are held, which leaves
// the three parameters of pose 2.

}  // namespace

TEST_CASE("optimize matches a grid search on the toy problem") {
  const FactorGraph g = hitl::testing::toy_problem();
  const ResidualWeights w;
  const auto r = optimize(g, w, hitl::testing::toy_params());
  const auto best = hitl::testing::grid_search(Problem(g, w), 2);
  CHECK(best.interior);
  const Pose2D& got = r.graph.poses[2];
  CHECK(std::abs(got.x - best.pose[0]) <= 2e-3);
  CHECK(std::abs(got.y - best.pose[1]) <= 2e-3);
  CHECK(std::abs(normalize_angle(got.theta - best.pose[2])) <= 2e-3);
}

TEST_CASE("information matrix: block-tridiagonal without human factors") {
  std::mt19937_64 rng(46);
  const FactorGraph g = hitl::testing::random_chain(rng, 12);
  const auto info = information_matrix(g, {});
  CHECK(info.rows() == 36);
  std::set<std::pair<std::size_t, std::size_t>> expected;
  for (std::size_t k = 0; k < 12; ++k) {
    expected.insert({k, k});
    if (k + 1 < 12) expected.insert({k, k + 1});
  }
  CHECK(block_pattern(info) == expected);
  const Eigen::MatrixXd dense(info);
  CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("information matrix: a human factor couples its pose ranges") {
  FactorGraph g = hitl::testing::straight_chain(46, 0.5);
  for (std::size_t k = 0; k < 46; ++k) {
    const Vec2 a(0.5 * static_cast<double>(k) - 1.0, 1.0);
    g.scans.push_back({k, hitl::testing::wall_points(g.poses[k], a, a + Vec2(2.0, 0.1), 5)});
  }
  HumanCorrectionFactor h;
  h.mode = CorrectionMode::Collinearity;
  for (std::size_t p = 3; p <= 5; ++p) {
    for (std::size_t i = 0; i < 5; ++i) h.sa.push_back({p, i});
  }
  for (std::size_t p = 40; p <= 44; ++p) {
    for (std::size_t i = 0; i < 5; ++i) h.sb.push_back({p, i});
  }
  h.pa = fit_selection(g, h.sa);
  h.pb = fit_selection(g, h.sb);
  g.human_factors.push_back(h);

  const auto expected = hitl::testing::structural_pattern(g);
  CHECK(expected.count({3, 44}) == 1);
  const auto pattern = block_pattern(information_matrix(g, {}));
  CHECK(pattern == expected);
  CHECK(pattern.count({3, 44}) == 1);
  CHECK(pattern.count({2, 44}) == 0);
}
