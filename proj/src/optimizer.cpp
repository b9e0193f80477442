#include "hitl/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

namespace hitl {

namespace {

// d/dtheta of R(theta) v is perp(R(theta) v).
Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

Mat3 sqrt_info(const Mat3& info) {
  Eigen::LLT<Mat3> llt(info);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::InvalidArgument, "odometry information not SPD");
  return llt.matrixU();
}

struct SqDist {
  double value;
  Vec2 d_p, d_e0, d_e1;
};

// Same regions as point_segment_sq_dist, with gradients.
SqDist sq_dist_grad(const Vec2& p, const Vec2& e0, const Vec2& e1) {
  const Vec2 d = e1 - e0;
  const Vec2 q = p - e0;
  const double len2 = d.squaredNorm();
  const double u = len2 > 0.0 ? q.dot(d) / len2 : 0.0;
  if (len2 <= 0.0 || u <= 0.0) return {q.squaredNorm(), 2.0 * q, -2.0 * q, Vec2::Zero()};
  if (u >= 1.0) {
    const Vec2 f = p - e1;
    return {f.squaredNorm(), 2.0 * f, Vec2::Zero(), -2.0 * f};
  }
  const Vec2 f = q - u * d;
  return {f.squaredNorm(), 2.0 * f, -2.0 * (1.0 - u) * f, -2.0 * u * f};
}

// Unit left normal of e1 - e0 and its derivative with respect to e1 (the
// derivative with respect to e0 is the negation).
struct NormalGrad {
  Vec2 n;
  Mat2 d_e1;
};

NormalGrad normal_grad(const Vec2& e0, const Vec2& e1) {
  const Vec2 d = e1 - e0;
  const double len = d.norm();
  const Vec2 u = d / len;
  Mat2 j;
  j << 0.0, -1.0, 1.0, 0.0;
  return {j * u, j * (Mat2::Identity() - u * u.transpose()) / len};
}

double sign_of(double v) { return v >= 0.0 ? 1.0 : -1.0; }

struct RowBuilder {
  ResidualRow row;

  void add(int index, double value) {
    if (value != 0.0) row.jacobian.emplace_back(index, value);
  }
  void add2(int index, const Vec2& g) {
    add(index, g.x());
    add(index + 1, g.y());
  }
  ResidualRow finish() {
    auto& j = row.jacobian;
    std::sort(j.begin(), j.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<int, double>> merged;
    for (const auto& e : j) {
      if (!merged.empty() && merged.back().first == e.first) {
        merged.back().second += e.second;
      } else {
        merged.push_back(e);
      }
    }
    j = std::move(merged);
    return std::move(row);
  }
};

Vec2 at2(const Eigen::VectorXd& x, int offset) { return {x[offset], x[offset + 1]}; }

}  // namespace

RelativeResidual residual_relative(const RelativePoseFactor& factor, const Pose2D& xi,
                                   const Pose2D& xj) {
  const Mat2 ri = rotation(xi.theta);
  const Mat2 rz_t = rotation(factor.z.rotation).transpose();
  const Vec2 delta = xj.position() - xi.position();
  const Vec2 local = ri.transpose() * delta;

  Eigen::Vector3d e;
  e.head<2>() = rz_t * (local - factor.z.translation);
  e[2] = normalize_angle(xj.theta - xi.theta - factor.z.rotation);

  Mat3 de_i = Mat3::Zero();
  Mat3 de_j = Mat3::Zero();
  de_i.block<2, 2>(0, 0) = -rz_t * ri.transpose();
  de_j.block<2, 2>(0, 0) = rz_t * ri.transpose();
  // d(R^T)/dtheta = -S R^T with S the 90 degree rotation.
  de_i.block<2, 1>(0, 2) = -rz_t * perp(local);
  de_i(2, 2) = -1.0;
  de_j(2, 2) = 1.0;

  const Mat3 u = sqrt_info(factor.info);
  return {u * e, u * de_i, u * de_j};
}

double residual_relation(const Segment& pa, const Segment& pb, CorrectionMode mode,
                         const ResidualWeights& weights) {
  const Vec2 na = pa.normal();
  const Vec2 nb = pb.normal();
  const double c = std::abs(na.dot(nb));
  const Vec2 offset = pb.center() - pa.center();
  switch (mode) {
    case CorrectionMode::Colocation:
      return weights.k1 * offset.norm() + weights.k2 * (1.0 - c);
    case CorrectionMode::Collinearity:
      return weights.k1 * std::abs(offset.dot(na)) + weights.k2 * (1.0 - c);
    case CorrectionMode::Parallelism:
      return weights.k2 * (1.0 - c);
    case CorrectionMode::Perpendicularity:
      return weights.k2 * c;
  }
  return 0.0;
}

HumanResiduals residual_human(const HumanCorrectionFactor& h, const FactorGraph& graph,
                              const ResidualWeights& weights) {
  auto rms = [&](const std::vector<PointRef>& refs, const Segment& seg) {
    double sum = 0.0;
    for (const auto& r : refs) sum += point_segment_sq_dist(graph.world_point(r), seg);
    return std::sqrt(sum / static_cast<double>(refs.size()));
  };
  return {rms(h.sa, h.pa), rms(h.sb, h.pb), residual_relation(h.pa, h.pb, h.mode, weights)};
}

Problem::Problem(FactorGraph graph, ResidualWeights weights)
    : graph_(std::move(graph)), weights_(weights) {
  auto collect = [&](const std::vector<PointRef>& refs) {
    Selection s;
    for (const auto& r : refs) {
      const Scan* scan = graph_.scan_of(r.pose_id);
      if (scan == nullptr || r.point_index >= scan->points.size()) {
        throw Error(ErrorKind::UnknownPose, "selection refers to a missing observation");
      }
      s.pose.push_back(r.pose_id);
      s.local.push_back(scan->points[r.point_index]);
    }
    return s;
  };
  for (const auto& h : graph_.human_factors) selections_.emplace_back(collect(h.sa), collect(h.sb));
}

Eigen::VectorXd Problem::pack() const {
  Eigen::VectorXd x(size());
  for (std::size_t k = 0; k < graph_.poses.size(); ++k) {
    const auto& p = graph_.poses[k];
    x.segment<3>(pose_offset(k)) << p.x, p.y, p.theta;
  }
  for (std::size_t h = 0; h < graph_.human_factors.size(); ++h) {
    const auto& f = graph_.human_factors[h];
    x.segment<4>(segment_offset(h, false)) << f.pa.p0, f.pa.p1;
    x.segment<4>(segment_offset(h, true)) << f.pb.p0, f.pb.p1;
  }
  return x;
}

FactorGraph Problem::unpack(const Eigen::VectorXd& x) const {
  FactorGraph out = graph_;
  for (std::size_t k = 0; k < out.poses.size(); ++k) {
    const int o = pose_offset(k);
    out.poses[k] = Pose2D(x[o], x[o + 1], x[o + 2]);
  }
  for (std::size_t h = 0; h < out.human_factors.size(); ++h) {
    const int a = segment_offset(h, false);
    const int b = segment_offset(h, true);
    out.human_factors[h].pa = {at2(x, a), at2(x, a + 2)};
    out.human_factors[h].pb = {at2(x, b), at2(x, b + 2)};
  }
  return out;
}

void Problem::add_human_rows(std::size_t h, const Eigen::VectorXd& x, RowLayout layout,
                             std::vector<ResidualRow>& out) const {
  const auto& factor = graph_.human_factors[h];
  const double hw = weights_.human_weight;
  const double k1 = weights_.k1;
  const double k2 = weights_.k2;

  struct Side {
    int seg;
    Vec2 e0, e1;
    Vec2 centroid = Vec2::Zero();
  };

  auto fit_row = [&](const Selection& sel, Side& side, RowKind kind) {
    const double n = static_cast<double>(sel.local.size());
    double sum = 0.0;
    std::vector<SqDist> parts;
    std::vector<Vec2> arms;
    parts.reserve(sel.local.size());
    arms.reserve(sel.local.size());
    for (std::size_t k = 0; k < sel.local.size(); ++k) {
      const int po = pose_offset(sel.pose[k]);
      const Vec2 rs = rotation(x[po + 2]) * sel.local[k];
      const Vec2 p = rs + at2(x, po);
      side.centroid += p;
      parts.push_back(sq_dist_grad(p, side.e0, side.e1));
      arms.push_back(perp(rs));
      sum += parts.back().value;
    }
    side.centroid /= n;
    // Adds scale * (gradient of one squared distance) to b.
    auto add_point = [&](RowBuilder& b, std::size_t k, double scale) {
      const int po = pose_offset(sel.pose[k]);
      const SqDist& d = parts[k];
      b.add2(po, scale * d.d_p);
      b.add(po + 2, scale * d.d_p.dot(arms[k]));
      b.add2(side.seg, scale * d.d_e0);
      b.add2(side.seg + 2, scale * d.d_e1);
    };
    if (layout == RowLayout::Compact) {
      RowBuilder b{{kind, h, 0.0, {}}};
      const double rms = std::sqrt(sum / n);
      b.row.value = hw * rms;
      if (rms > 0.0) {
        for (std::size_t k = 0; k < parts.size(); ++k) add_point(b, k, hw / (2.0 * n * rms));
      }
      out.push_back(b.finish());
      return;
    }
    // Signed by the side of the line, so each row is smooth through zero.
    const Vec2 normal = side.e1 != side.e0 ? normal_grad(side.e0, side.e1).n : Vec2::UnitY();
    const double w = hw / std::sqrt(n);
    for (std::size_t k = 0; k < parts.size(); ++k) {
      RowBuilder b{{kind, h, 0.0, {}}};
      const SqDist& d = parts[k];
      const double dist = std::sqrt(d.value);
      // d_p is 2 f with f from the nearest point to p.
      const double side_sign = sign_of(d.d_p.dot(normal));
      b.row.value = w * side_sign * dist;
      if (dist > 0.0) {
        add_point(b, k, w * side_sign / (2.0 * dist));
      } else {
        const int po = pose_offset(sel.pose[k]);
        const Vec2 q = at2(x, po) + rotation(x[po + 2]) * sel.local[k] - side.e0;
        const Vec2 dd = side.e1 - side.e0;
        const double u = std::clamp(q.dot(dd) / dd.squaredNorm(), 0.0, 1.0);
        b.add2(po, w * normal);
        b.add(po + 2, w * normal.dot(arms[k]));
        b.add2(side.seg, -w * (1.0 - u) * normal);
        b.add2(side.seg + 2, -w * u * normal);
      }
      out.push_back(b.finish());
    }
  };

  auto anchor_row = [&](const Selection& sel, const Side& side) {
    // Keeps the segment from sliding along its own line: its midpoint is
    // pinned to the centroid of its observations along the line direction.
    RowBuilder b{{RowKind::Anchor, h, 0.0, {}}};
    const Vec2 d = side.e1 - side.e0;
    const double len = d.norm();
    const Vec2 u = d / len;
    const Vec2 off = 0.5 * (side.e0 + side.e1) - side.centroid;
    const double s = hw * k1;
    b.row.value = s * off.dot(u);
    const Vec2 g_dir = (Mat2::Identity() - u * u.transpose()) * off / len;
    b.add2(side.seg, s * (0.5 * u - g_dir));
    b.add2(side.seg + 2, s * (0.5 * u + g_dir));
    const double n = static_cast<double>(sel.local.size());
    for (std::size_t k = 0; k < sel.local.size(); ++k) {
      const int po = pose_offset(sel.pose[k]);
      const Vec2 rs = rotation(x[po + 2]) * sel.local[k];
      b.add2(po, -s / n * u);
      b.add(po + 2, -s / n * u.dot(perp(rs)));
    }
    out.push_back(b.finish());
  };

  auto barrier_row = [&](const Side& side) {
    RowBuilder b{{RowKind::Barrier, h, 0.0, {}}};
    const Vec2 d = side.e1 - side.e0;
    const double len = d.norm();
    if (len < weights_.min_segment_length) {
      const Vec2 u = len > 0.0 ? Vec2(d / len) : Vec2::UnitX();
      b.row.value = hw * (weights_.min_segment_length - len);
      b.add2(side.seg, hw * u);
      b.add2(side.seg + 2, -hw * u);
    }
    out.push_back(b.finish());
  };

  const auto& [sel_a, sel_b] = selections_[h];
  Side a{segment_offset(h, false), at2(x, segment_offset(h, false)), at2(x, segment_offset(h, false) + 2)};
  Side b{segment_offset(h, true), at2(x, segment_offset(h, true)), at2(x, segment_offset(h, true) + 2)};
  fit_row(sel_a, a, RowKind::Ra);
  fit_row(sel_b, b, RowKind::Rb);

  // Relation between the segments. Each row is smooth at the solution and
  // its square reproduces the matching term of R_p: offsets enter as
  // K1-scaled components, misalignment as a signed sine-type row.
  const NormalGrad na = normal_grad(a.e0, a.e1);
  const NormalGrad nb = normal_grad(b.e0, b.e1);
  const Vec2 offset = 0.5 * (b.e0 + b.e1) - 0.5 * (a.e0 + a.e1);
  // Adds a row whose gradient is g_off through the offset, g_na / g_nb
  // through the two normals.
  auto relation_row = [&](RowKind kind, double value, const Vec2& g_off, const Vec2& g_na, const Vec2& g_nb) {
    RowBuilder rb{{kind, h, hw * value, {}}};
    const Vec2 ga = na.d_e1.transpose() * g_na;
    const Vec2 gb = nb.d_e1.transpose() * g_nb;
    rb.add2(a.seg, hw * (-0.5 * g_off - ga));
    rb.add2(a.seg + 2, hw * (-0.5 * g_off + ga));
    rb.add2(b.seg, hw * (0.5 * g_off - gb));
    rb.add2(b.seg + 2, hw * (0.5 * g_off + gb));
    out.push_back(rb.finish());
  };
  const Vec2 zero = Vec2::Zero();
  switch (factor.mode) {
    case CorrectionMode::Colocation:
      relation_row(RowKind::RpOffset, k1 * offset.x(), {k1, 0.0}, zero, zero);
      relation_row(RowKind::RpOffset, k1 * offset.y(), {0.0, k1}, zero, zero);
      break;
    case CorrectionMode::Collinearity:
      relation_row(RowKind::RpOffset, k1 * offset.dot(na.n), k1 * na.n, k1 * offset, zero);
      break;
    case CorrectionMode::Parallelism:
    case CorrectionMode::Perpendicularity:
      break;
  }
  const double c = na.n.dot(nb.n);
  if (factor.mode == CorrectionMode::Perpendicularity) {
    relation_row(RowKind::RpAlign, k2 * c, zero, k2 * nb.n, k2 * na.n);
  } else {
    // s * sqrt(2 k2 / (1 + |c|)) with s the sine between the normals, sign
    // corrected like the normals; its square is 2 k2 (1 - |c|).
    const double sc = sign_of(c);
    const double sine = na.n.x() * nb.n.y() - na.n.y() * nb.n.x();
    const double q = 1.0 + std::abs(c);
    const double scale = std::sqrt(2.0 * k2 / q);
    const double d_sine = sc * scale;
    const double d_c = -0.5 * sine * scale / q;
    const Vec2 g_na = d_sine * Vec2(nb.n.y(), -nb.n.x()) + d_c * nb.n;
    const Vec2 g_nb = d_sine * Vec2(-na.n.y(), na.n.x()) + d_c * na.n;
    relation_row(RowKind::RpAlign, sc * sine * scale, zero, g_na, g_nb);
  }

  anchor_row(sel_a, a);
  anchor_row(sel_b, b);
  barrier_row(a);
  barrier_row(b);
}

std::vector<ResidualRow> Problem::rows(const Eigen::VectorXd& x, RowLayout layout) const {
  std::vector<ResidualRow> out;
  out.reserve(3 * graph_.odometry.size() + 7 * graph_.human_factors.size());
  for (std::size_t f = 0; f < graph_.odometry.size(); ++f) {
    const auto& factor = graph_.odometry[f];
    const int oi = pose_offset(factor.i);
    const int oj = pose_offset(factor.j);
    const RelativeResidual r = residual_relative(factor, Pose2D(x[oi], x[oi + 1], x[oi + 2]),
                                                 Pose2D(x[oj], x[oj + 1], x[oj + 2]));
    for (int k = 0; k < 3; ++k) {
      RowBuilder b{{RowKind::Odometry, f, r.r[k], {}}};
      for (int c = 0; c < 3; ++c) {
        b.add(oi + c, r.d_xi(k, c));
        b.add(oj + c, r.d_xj(k, c));
      }
      out.push_back(b.finish());
    }
  }
  for (std::size_t h = 0; h < graph_.human_factors.size(); ++h) add_human_rows(h, x, layout, out);
  return out;
}

double Problem::cost(const Eigen::VectorXd& x) const {
  double sum = 0.0;
  for (const auto& r : rows(x)) sum += r.value * r.value;
  return sum;
}

double total_cost(const FactorGraph& graph, const ResidualWeights& weights) {
  const Problem p(graph, weights);
  return p.cost(p.pack());
}

OptimizeResult optimize(const FactorGraph& graph, const ResidualWeights& weights,
                        const SolverParams& params) {
  const Problem problem(graph, weights);
  Eigen::VectorXd x = problem.pack();
  const int n = problem.size();

  // Map every parameter to its column among the free ones (-1 when held).
  std::vector<int> column(n, -1);
  std::vector<bool> held_pose(graph.poses.size(), false);
  if (!held_pose.empty()) held_pose[0] = true;
  for (const auto k : params.held_poses) {
    if (k < held_pose.size()) held_pose[k] = true;
  }
  int free = 0;
  for (std::size_t k = 0; k < graph.poses.size(); ++k) {
    if (held_pose[k]) continue;
    for (int c = 0; c < 3; ++c) column[problem.pose_offset(k) + c] = free++;
  }
  if (!params.hold_segments) {
    for (int k = static_cast<int>(3 * graph.poses.size()); k < n; ++k) column[k] = free++;
  }

  OptimizeResult result;
  OptimizeReport& rep = result.report;
  auto rows = problem.rows(x, RowLayout::PerObservation);
  auto cost_of = [](const std::vector<ResidualRow>& rs) {
    double s = 0.0;
    for (const auto& r : rs) s += r.value * r.value;
    return s;
  };
  double cost = cost_of(rows);
  rep.initial_cost = cost;

  if (free == 0) {
    rep.converged = true;
    rep.termination = "no free parameters";
  }

  double lambda = -1.0;
  double nu = 2.0;
  bool rebuild = true;
  Eigen::SparseMatrix<double> hessian(free, free);
  Eigen::VectorXd gradient(free);
  Eigen::SparseMatrix<double> identity(free, free);
  identity.setIdentity();

  while (!rep.converged && rep.iterations < params.max_iterations) {
    if (rebuild) {
      std::vector<Eigen::Triplet<double>> trip;
      Eigen::VectorXd r(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        r[static_cast<Eigen::Index>(i)] = rows[i].value;
        for (const auto& [idx, v] : rows[i].jacobian) {
          if (column[idx] >= 0) trip.emplace_back(static_cast<int>(i), column[idx], v);
        }
      }
      Eigen::SparseMatrix<double> jac(static_cast<Eigen::Index>(rows.size()), free);
      jac.setFromTriplets(trip.begin(), trip.end());
      hessian = (jac.transpose() * jac).pruned();
      gradient = jac.transpose() * r;
      rebuild = false;
      if (gradient.lpNorm<Eigen::Infinity>() <= 1e-14 * std::max(1.0, cost)) {
        rep.converged = true;
        rep.termination = "gradient";
        break;
      }
      if (lambda < 0.0) {
        double max_diag = 0.0;
        for (int k = 0; k < free; ++k) max_diag = std::max(max_diag, hessian.coeff(k, k));
        lambda = params.initial_damping * std::max(max_diag, 1.0);
      }
    }

    ++rep.iterations;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(hessian + lambda * identity);
    Eigen::VectorXd step;
    bool solved = solver.info() == Eigen::Success;
    if (solved) {
      step = solver.solve(-gradient);
      solved = solver.info() == Eigen::Success && step.allFinite();
    }
    if (!solved) {
      lambda *= nu;
      nu *= 2.0;
      continue;
    }

    Eigen::VectorXd candidate = x;
    for (int k = 0; k < n; ++k) {
      if (column[k] >= 0) candidate[k] += step[column[k]];
    }
    const double step_norm = step.norm();
    const double small_step = params.param_tol * (x.norm() + params.param_tol);
    auto candidate_rows = problem.rows(candidate, RowLayout::PerObservation);
    const double candidate_cost = cost_of(candidate_rows);
    const double predicted = -(2.0 * gradient.dot(step) + step.dot(hessian * step));

    if (candidate_cost < cost && predicted > 0.0) {
      const double rho = (cost - candidate_cost) / predicted;
      const double decrease = cost - candidate_cost;
      x = std::move(candidate);
      rows = std::move(candidate_rows);
      cost = candidate_cost;
      rep.accepted_costs.push_back(cost);
      lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      rebuild = true;
      if (decrease <= params.function_tol * cost) {
        rep.converged = true;
        rep.termination = "function_tol";
      } else if (step_norm <= small_step) {
        rep.converged = true;
        rep.termination = "param_tol";
      }
    } else {
      if (step_norm <= small_step) {
        rep.converged = true;
        rep.termination = "param_tol";
      } else if (lambda > 1e30) {
        rep.converged = true;
        rep.termination = "damping";
      }
      lambda *= nu;
      nu *= 2.0;
    }
  }
  if (!rep.converged) rep.termination = "max_iterations";
  rep.final_cost = cost;
  result.graph = problem.unpack(x);
  return result;
}

Eigen::SparseMatrix<double> information_matrix(const FactorGraph& graph,
                                               const ResidualWeights& weights) {
  const Problem problem(graph, weights);
  const int n = problem.size();
  const int np = static_cast<int>(3 * graph.poses.size());
  const auto rows = problem.rows(problem.pack(), RowLayout::PerObservation);

  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& [idx, v] : rows[i].jacobian) trip.emplace_back(static_cast<int>(i), idx, v);
  }
  Eigen::SparseMatrix<double> jac(static_cast<Eigen::Index>(rows.size()), n);
  jac.setFromTriplets(trip.begin(), trip.end());
  const Eigen::MatrixXd full = Eigen::MatrixXd(jac.transpose() * jac);

  // Segment parameters only appear in rows of their own factor, so their
  // block of J^T J is block diagonal with one 8x8 block per factor.
  Eigen::MatrixXd info = full.topLeftCorner(np, np);
  for (std::size_t h = 0; h < graph.human_factors.size(); ++h) {
    const int s = problem.segment_offset(h, false);
    const Eigen::MatrixXd hss = full.block(s, s, 8, 8);
    const Eigen::MatrixXd hps = full.block(0, s, np, 8);
    const Eigen::MatrixXd inv = hss.completeOrthogonalDecomposition().pseudoInverse();
    info.noalias() -= hps * inv * hps.transpose();
  }

  std::vector<Eigen::Triplet<double>> out;
  for (int c = 0; c < np; ++c) {
    for (int r = 0; r < np; ++r) {
      if (info(r, c) != 0.0) out.emplace_back(r, c, info(r, c));
    }
  }
  Eigen::SparseMatrix<double> sparse(np, np);
  sparse.setFromTriplets(out.begin(), out.end());
  return sparse;
}

std::set<std::pair<std::size_t, std::size_t>> block_pattern(const Eigen::SparseMatrix<double>& info) {
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (int c = 0; c < info.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(info, c); it; ++it) {
      if (it.value() == 0.0) continue;
      const std::size_t i = static_cast<std::size_t>(it.row()) / 3;
      const std::size_t j = static_cast<std::size_t>(it.col()) / 3;
      out.emplace(std::min(i, j), std::max(i, j));
    }
  }
  return out;
}

void write_information_pgm(const Eigen::SparseMatrix<double>& info, const std::string& path) {
  const auto n = static_cast<std::size_t>(info.rows());
  std::vector<double> mag(n * n, 0.0);
  double max_log = 0.0;
  for (int c = 0; c < info.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(info, c); it; ++it) {
      const double v = std::log1p(std::abs(it.value()));
      mag[static_cast<std::size_t>(it.row()) * n + static_cast<std::size_t>(it.col())] = v;
      max_log = std::max(max_log, v);
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path);
  out << "P5\n" << n << ' ' << n << "\n255\n";
  for (const double v : mag) {
    // Zero is white; the largest entry is black.
    const double shade = max_log > 0.0 ? v / max_log : 0.0;
    const auto pixel = static_cast<unsigned char>(v > 0.0 ? std::lround(200.0 * (1.0 - shade)) : 255);
    out.put(static_cast<char>(pixel));
  }
}

void write_information_triplets(const Eigen::SparseMatrix<double>& info, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) throw Error(ErrorKind::InvalidArgument, "cannot write " + path);
  for (int c = 0; c < info.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(info, c); it; ++it) {
      std::fprintf(f, "%lld %lld %.17g\n", static_cast<long long>(it.row()),
                   static_cast<long long>(it.col()), it.value());
    }
  }
  std::fclose(f);
}

}  // namespace hitl
