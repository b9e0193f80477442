#include "hitl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "hitl/correction.hpp"

namespace hitl {

namespace {

std::int64_t cell_index(double v, double res) { return static_cast<std::int64_t>(std::floor(v / res)); }

// Visits every cell crossed by the segment a -> b, in order (grid traversal
// after Amanatides and Woo).
template <typename F>
void traverse(const Vec2& a, const Vec2& b, double res, F&& visit) {
  std::int64_t ix = cell_index(a.x(), res);
  std::int64_t iy = cell_index(a.y(), res);
  const std::int64_t ex = cell_index(b.x(), res);
  const std::int64_t ey = cell_index(b.y(), res);
  const Vec2 d = b - a;
  const int sx = d.x() > 0 ? 1 : (d.x() < 0 ? -1 : 0);
  const int sy = d.y() > 0 ? 1 : (d.y() < 0 ? -1 : 0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto boundary = [&](double origin, std::int64_t idx, int step, double delta) {
    if (step == 0) return inf;
    const double edge = static_cast<double>(idx + (step > 0 ? 1 : 0)) * res;
    return (edge - origin) / delta;
  };
  double t_max_x = boundary(a.x(), ix, sx, d.x());
  double t_max_y = boundary(a.y(), iy, sy, d.y());
  const double t_dx = sx != 0 ? res / std::abs(d.x()) : inf;
  const double t_dy = sy != 0 ? res / std::abs(d.y()) : inf;
  const std::int64_t max_steps = std::abs(ex - ix) + std::abs(ey - iy);
  visit(ix, iy);
  for (std::int64_t k = 0; k < max_steps; ++k) {
    if (t_max_x < t_max_y) {
      if (t_max_x > 1.0) break;
      ix += sx;
      t_max_x += t_dx;
    } else {
      if (t_max_y > 1.0) break;
      iy += sy;
      t_max_y += t_dy;
    }
    visit(ix, iy);
  }
}

}  // namespace

Cell OccupancyRaster::at(std::int64_t ix, std::int64_t iy) const {
  const std::int64_t cx = ix - ix0;
  const std::int64_t cy = iy - iy0;
  if (cx < 0 || cy < 0 || cx >= width || cy >= height) return Cell::Unknown;
  return cells[static_cast<std::size_t>(cy * width + cx)];
}

std::size_t OccupancyRaster::count(Cell c) const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), c));
}

OccupancyRaster rasterize_pose(const Scan& scan, const Pose2D& pose, double resolution,
                               double max_range, double free_clearance) {
  if (!(resolution > 0.0)) throw Error(ErrorKind::InvalidArgument, "resolution must be positive");
  OccupancyRaster r;
  r.resolution = resolution;
  if (scan.points.empty()) return r;

  struct Ray {
    Vec2 free_end;
    Vec2 hit;
    bool occupied;
  };
  std::vector<Ray> rays;
  rays.reserve(scan.points.size());
  const Vec2 origin = pose.position();
  Vec2 lo = origin;
  Vec2 hi = origin;
  std::vector<Vec2> returns;  // sensor frame
  for (const auto& local : scan.points) {
    if (!(max_range > 0.0) || local.norm() <= max_range) returns.push_back(local);
  }
  const double c2 = free_clearance * free_clearance;
  for (const auto& local : scan.points) {
    const double range = local.norm();
    Ray ray;
    ray.occupied = !(max_range > 0.0 && range > max_range);
    const double length = ray.occupied ? range : max_range;
    ray.hit = range > 0.0 ? pose.to_world(local * (length / range)) : origin;
    // The free part ends where the ray first comes within the clearance of
    // any return of this scan, its own included. Rays grazing a wall stop
    // before they reach it.
    double reach = length;
    if (range > 0.0) {
      const Vec2 u = local / range;
      for (const auto& q : returns) {
        const double along = u.dot(q);
        const double off2 = q.squaredNorm() - along * along;
        if (off2 > c2 || along + free_clearance < 0.0) continue;
        reach = std::min(reach, along - std::sqrt(c2 - off2));
      }
    }
    reach = std::max(0.0, reach);
    ray.free_end = range > 0.0 ? pose.to_world(local * (reach / range)) : origin;
    lo = lo.cwiseMin(ray.hit);
    hi = hi.cwiseMax(ray.hit);
    rays.push_back(ray);
  }
  r.ix0 = cell_index(lo.x(), resolution);
  r.iy0 = cell_index(lo.y(), resolution);
  r.width = cell_index(hi.x(), resolution) - r.ix0 + 1;
  r.height = cell_index(hi.y(), resolution) - r.iy0 + 1;
  r.cells.assign(static_cast<std::size_t>(r.width * r.height), Cell::Unknown);

  auto idx = [&](std::int64_t ix, std::int64_t iy) {
    return static_cast<std::size_t>((iy - r.iy0) * r.width + (ix - r.ix0));
  };
  for (const auto& ray : rays) {
    const std::int64_t hx = cell_index(ray.hit.x(), resolution);
    const std::int64_t hy = cell_index(ray.hit.y(), resolution);
    traverse(origin, ray.free_end, resolution, [&](std::int64_t ix, std::int64_t iy) {
      // The return's own cell is never free, even when the clearance is zero.
      if (ray.occupied && ix == hx && iy == hy) return;
      if (ix < r.ix0 || iy < r.iy0 || ix >= r.ix0 + r.width || iy >= r.iy0 + r.height) return;
      r.cells[idx(ix, iy)] = Cell::Free;
    });
  }
  for (const auto& ray : rays) {
    if (!ray.occupied) continue;
    r.cells[idx(cell_index(ray.hit.x(), resolution), cell_index(ray.hit.y(), resolution))] = Cell::Occupied;
  }
  return r;
}

double pairwise_inconsistency(const OccupancyRaster& r_i, const OccupancyRaster& r_j) {
  if (std::abs(r_i.resolution - r_j.resolution) > 1e-12 * std::max(r_i.resolution, r_j.resolution)) {
    throw Error(ErrorKind::ResolutionMismatch, "rasters have different resolutions");
  }
  if (r_i.empty() || r_j.empty()) return 0.0;
  const std::int64_t x0 = std::max(r_i.ix0, r_j.ix0);
  const std::int64_t y0 = std::max(r_i.iy0, r_j.iy0);
  const std::int64_t x1 = std::min(r_i.ix0 + r_i.width, r_j.ix0 + r_j.width);
  const std::int64_t y1 = std::min(r_i.iy0 + r_i.height, r_j.iy0 + r_j.height);
  std::size_t conflicts = 0;
  for (std::int64_t iy = y0; iy < y1; ++iy) {
    for (std::int64_t ix = x0; ix < x1; ++ix) {
      if (r_i.at(ix, iy) == Cell::Free && r_j.at(ix, iy) == Cell::Occupied) ++conflicts;
    }
  }
  return static_cast<double>(conflicts) * r_i.resolution * r_i.resolution;
}

double total_inconsistency(const FactorGraph& graph, double resolution) {
  std::vector<OccupancyRaster> rasters;
  rasters.reserve(graph.scans.size());
  for (const auto& scan : graph.scans) {
    rasters.push_back(rasterize_pose(scan, graph.poses.at(scan.pose_id), resolution, graph.meta.max_range));
  }
  auto overlap = [](const OccupancyRaster& a, const OccupancyRaster& b) {
    return a.ix0 < b.ix0 + b.width && b.ix0 < a.ix0 + a.width && a.iy0 < b.iy0 + b.height &&
           b.iy0 < a.iy0 + a.height;
  };
  double total = 0.0;
  for (std::size_t i = 0; i < rasters.size(); ++i) {
    for (std::size_t j = i + 1; j < rasters.size(); ++j) {
      if (rasters[i].empty() || rasters[j].empty() || !overlap(rasters[i], rasters[j])) continue;
      total += pairwise_inconsistency(rasters[i], rasters[j]);
    }
  }
  return total;
}

double angle_between(const Segment& a, const Segment& b) {
  const double c = std::min(1.0, std::abs(a.direction().dot(b.direction())));
  return std::acos(c) * 180.0 / std::numbers::pi;
}

double distance_between(const Segment& a, const Segment& b) {
  const Vec2 offset = b.center() - a.center();
  return 0.5 * (std::abs(offset.dot(a.normal())) + std::abs(offset.dot(b.normal())));
}

GroundTruthReport ground_truth_report(const FactorGraph& graph, const GroundTruth& truth) {
  auto feature = [&](const std::string& name) {
    const auto it = truth.features.find(name);
    if (it == truth.features.end()) throw Error(ErrorKind::FeatureNotFound, "unknown feature '" + name + "'");
    const auto& refs = it->second;
    for (const auto& r : refs) {
      const Scan* scan = graph.scan_of(r.pose_id);
      if (scan == nullptr || r.point_index >= scan->points.size()) {
        throw Error(ErrorKind::FeatureNotFound, "feature '" + name + "' refers to a missing observation");
      }
    }
    try {
      return fit_selection(graph, refs);
    } catch (const Error&) {
      throw Error(ErrorKind::FeatureNotFound, "feature '" + name + "' has no fittable observations");
    }
  };

  GroundTruthReport report;
  double angle_sum = 0.0;
  double distance_sum = 0.0;
  for (const auto& m : truth.measurements) {
    const Segment a = feature(m.feature_a);
    const Segment b = feature(m.feature_b);
    MeasurementResult r{m, 0.0, 0.0};
    if (m.kind == MeasurementKind::Angle) {
      r.measured = angle_between(a, b);
      angle_sum += std::abs(r.measured - m.truth);
      ++report.angle_count;
    } else {
      r.measured = distance_between(a, b);
      distance_sum += std::abs(r.measured - m.truth);
      ++report.distance_count;
    }
    r.error = std::abs(r.measured - m.truth);
    report.results.push_back(r);
  }
  if (report.angle_count > 0) report.mean_angle_error = angle_sum / static_cast<double>(report.angle_count);
  if (report.distance_count > 0) {
    report.mean_distance_error = distance_sum / static_cast<double>(report.distance_count);
  }
  return report;
}

void write_report(std::ostream& out, const GroundTruthReport& report) {
  char buf[256];
  for (const auto& r : report.results) {
    const bool angle = r.measurement.kind == MeasurementKind::Angle;
    std::snprintf(buf, sizeof buf, "%s %s %s %s measured %.4f truth %.4f error %.4f\n",
                  angle ? "angle" : "distance", r.measurement.name.c_str(),
                  r.measurement.feature_a.c_str(), r.measurement.feature_b.c_str(), r.measured,
                  r.measurement.truth, r.error);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "summary A %.2f T %.2f (n_A %zu, n_T %zu)\n", report.mean_angle_error,
                report.mean_distance_error, report.angle_count, report.distance_count);
  out << buf;
}

}  // namespace hitl
