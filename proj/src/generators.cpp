#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <numbers>
#include <random>

#include <json.hpp>

#include "hitl/dataset.hpp"

namespace hitl {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Wall {
  std::string name;
  Vec2 p0, p1;
};

struct Hit {
  std::size_t wall;
  Vec2 world;  // true hit position
};

// Nearest wall hit along a ray, if within max_range.
std::optional<Hit> cast(const std::vector<Wall>& walls, const Vec2& origin, const Vec2& dir,
                        double max_range) {
  std::optional<Hit> best;
  double best_t = max_range;
  for (std::size_t w = 0; w < walls.size(); ++w) {
    const Vec2 e = walls[w].p1 - walls[w].p0;
    const double denom = dir.x() * e.y() - dir.y() * e.x();
    if (std::abs(denom) < 1e-15) continue;
    const Vec2 q = walls[w].p0 - origin;
    const double t = (q.x() * e.y() - q.y() * e.x()) / denom;
    const double s = (q.x() * dir.y() - q.y() * dir.x()) / denom;
    if (t <= 0.0 || s < 0.0 || s > 1.0 || t > best_t) continue;
    best_t = t;
    best = Hit{w, origin + t * dir};
  }
  return best;
}

// Poses at fixed arc-length spacing along a polyline; heading follows the
// leg being driven.
std::vector<Pose2D> sample_path(const std::vector<Vec2>& waypoints, double step) {
  std::vector<Pose2D> out;
  double carry = 0.0;  // arc length already covered past the last sample
  for (std::size_t k = 0; k + 1 < waypoints.size(); ++k) {
    const Vec2 a = waypoints[k];
    const Vec2 d = waypoints[k + 1] - a;
    const double len = d.norm();
    if (len <= 0.0) continue;
    const double heading = std::atan2(d.y(), d.x());
    double s = out.empty() ? 0.0 : step - carry;
    for (; s < len - 1e-12; s += step) {
      const Vec2 p = a + (s / len) * d;
      out.emplace_back(p.x(), p.y(), heading);
    }
    carry = len - (s - step);
  }
  return out;
}

struct Simulation {
  FactorGraph graph;
  std::vector<Pose2D> truth;
  // Per pose, per stored point: which wall was hit and where (truth).
  std::vector<std::vector<Hit>> hits;
};

struct NoiseModel {
  double trans;
  double rot;
  double range;
};

Simulation simulate(const std::vector<Pose2D>& truth, const std::vector<Wall>& walls, double laser_range,
                    int beams, const NoiseModel& noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  Simulation sim;
  sim.truth = truth;
  sim.graph.meta.max_range = laser_range;
  sim.graph.meta.seed = seed;

  // Odometry: true relative motion plus independent noise on each axis.
  auto info_for = [](double st, double sr) {
    Mat3 info = Mat3::Zero();
    info(0, 0) = info(1, 1) = 1.0 / (st * st);
    info(2, 2) = 1.0 / (sr * sr);
    return info;
  };
  const double st = noise.trans > 0.0 ? noise.trans : 1e-3;
  const double sr = noise.rot > 0.0 ? noise.rot : 1e-3;
  sim.graph.poses.push_back(truth.front());
  for (std::size_t k = 0; k + 1 < truth.size(); ++k) {
    Transform2D z = between(truth[k], truth[k + 1]);
    z.translation.x() += noise.trans * unit(rng);
    z.translation.y() += noise.trans * unit(rng);
    z.rotation = normalize_angle(z.rotation + noise.rot * unit(rng));
    sim.graph.odometry.push_back({k, k + 1, z, info_for(st, sr)});
    sim.graph.poses.push_back(compose(sim.graph.poses.back(), z));
  }

  for (std::size_t k = 0; k < truth.size(); ++k) {
    Scan scan;
    scan.pose_id = k;
    std::vector<Hit> hits;
    for (int b = 0; b < beams; ++b) {
      const double phi = -std::numbers::pi + 2.0 * std::numbers::pi * b / beams;
      const double world_angle = truth[k].theta + phi;
      const Vec2 dir(std::cos(world_angle), std::sin(world_angle));
      const double jitter = noise.range * unit(rng);
      const auto hit = cast(walls, truth[k].position(), dir, laser_range);
      if (!hit) continue;
      const double range = (hit->world - truth[k].position()).norm() + jitter;
      if (range > laser_range || range <= 0.0) continue;
      scan.points.emplace_back(range * std::cos(phi), range * std::sin(phi));
      hits.push_back(*hit);
    }
    if (!scan.points.empty()) sim.graph.scans.push_back(std::move(scan));
    sim.hits.push_back(std::move(hits));
  }
  return sim;
}

// Observations of `wall` from poses [first, last] whose true hit position
// projects into [lo, hi] along the wall.
FeatureSelector select(const Simulation& sim, const std::vector<Wall>& walls, std::size_t wall,
                       std::size_t first, std::size_t last, double lo, double hi) {
  FeatureSelector refs;
  const Vec2 e = (walls[wall].p1 - walls[wall].p0).normalized();
  for (std::size_t k = first; k <= last && k < sim.hits.size(); ++k) {
    for (std::size_t i = 0; i < sim.hits[k].size(); ++i) {
      const Hit& h = sim.hits[k][i];
      if (h.wall != wall) continue;
      const double along = (h.world - walls[wall].p0).dot(e);
      if (along >= lo && along <= hi) refs.push_back({k, i});
    }
  }
  return refs;
}

void measure(GroundTruth& truth, MeasurementKind kind, const std::string& name, const std::string& a,
             const std::string& b, double value) {
  truth.measurements.push_back({name, kind, a, b, value});
}

}  // namespace

GeneratedDataset generate_lost_poses(const LostPosesConfig& c) {
  if (!(c.laser_range < c.room_width) || !(c.approach_offset < c.laser_range) ||
      !(c.cruise_offset > c.laser_range) || !(c.step > 0.0) || c.beams <= 0 ||
      !(2.0 * c.cruise_offset + 2.0 < c.room_width)) {
    throw Error(ErrorKind::InvalidArgument, "lost-poses config out of range");
  }
  const double lx = c.room_length;
  const double wy = c.room_width;
  const double o = c.cruise_offset;
  const double a = c.approach_offset;
  const Vec2 shift(kWallOffset, kWallOffset);

  std::vector<Wall> walls = {
      {"south", {0, 0}, {lx, 0}}, {"east", {lx, 0}, {lx, wy}},
      {"north", {lx, wy}, {0, wy}}, {"west", {0, wy}, {0, 0}}};
  for (auto& w : walls) {
    w.p0 += shift;
    w.p1 += shift;
  }

  // Approach profiles: leave the cruise line, run along the wall, return.
  const double s1 = lx / 3.0;
  const double s2 = 2.0 * lx / 3.0;
  const double cy = wy / 2.0;
  std::vector<Vec2> wp;
  auto south = [&](double cx) {
    wp.insert(wp.end(), {{cx - 1.2, o}, {cx - 0.5, a}, {cx + 0.5, a}, {cx + 1.2, o}});
  };
  wp.push_back({o, o});
  south(s1);
  south(s2);
  wp.push_back({lx - o, o});
  wp.insert(wp.end(), {{lx - o, cy - 0.9}, {lx - a, cy - 0.35}, {lx - a, cy + 0.35}, {lx - o, cy + 0.9}});
  wp.push_back({lx - o, wy - o});
  for (const double cx : {s2, s1}) {
    wp.insert(wp.end(), {{cx + 1.2, wy - o}, {cx + 0.5, wy - a}, {cx - 0.5, wy - a}, {cx - 1.2, wy - o}});
  }
  wp.push_back({o, wy - o});
  wp.insert(wp.end(), {{o, cy + 0.9}, {a, cy + 0.35}, {a, cy - 0.35}, {o, cy - 0.9}});
  wp.push_back({o, o});
  south(s1);
  for (auto& p : wp) p += shift;

  std::vector<Pose2D> truth = sample_path(wp, c.step);
  if (c.steps > 0 && static_cast<std::size_t>(c.steps) < truth.size()) truth.resize(static_cast<std::size_t>(c.steps));

  Simulation sim = simulate(truth, walls, c.laser_range, c.beams,
                            {c.odom_trans_noise, c.odom_rot_noise, c.range_noise}, c.seed);

  // One feature per approach: the poses within reach of the wall and the
  // stretch of wall facing the close run.
  GeneratedDataset out;
  auto near = [&](std::size_t wall, double along_center, std::size_t from) {
    const Vec2 e = (walls[wall].p1 - walls[wall].p0).normalized();
    const Vec2 n(-e.y(), e.x());
    std::size_t first = truth.size();
    std::size_t last = 0;
    for (std::size_t k = from; k < truth.size(); ++k) {
      const Vec2 rel = truth[k].position() - walls[wall].p0;
      if (rel.dot(n) <= a + 1e-6 && std::abs(rel.dot(e) - along_center) <= 0.5 + 1e-6) {
        first = std::min(first, k);
        last = std::max(last, k);
      } else if (first < truth.size()) {
        break;
      }
    }
    return std::pair{first, last};
  };
  struct Approach {
    std::string name;
    std::size_t wall;
    double along;
  };
  // Along-wall coordinates follow each wall's own direction (counterclockwise).
  const std::vector<Approach> approaches = {
      {"S1", 0, s1}, {"S2", 0, s2}, {"E1", 1, cy}, {"N2", 2, lx - s2},
      {"N1", 2, lx - s1}, {"W1", 3, wy - cy}, {"S1r", 0, s1}};
  std::size_t from = 0;
  for (const auto& ap : approaches) {
    const auto [first, last] = near(ap.wall, ap.along, from);
    if (first >= truth.size()) continue;  // path truncated before this approach
    out.truth.features[ap.name] = select(sim, walls, ap.wall, first, last, ap.along - 0.6, ap.along + 0.6);
    from = last + 1;
  }

  auto has = [&](const std::string& f) { return out.truth.features.count(f) > 0; };
  auto add = [&](MeasurementKind kind, const std::string& name, const std::string& fa, const std::string& fb,
                 double value) {
    if (has(fa) && has(fb)) measure(out.truth, kind, name, fa, fb, value);
  };
  using MK = MeasurementKind;
  add(MK::Distance, "width_1", "S1", "N1", wy);
  add(MK::Distance, "width_2", "S2", "N2", wy);
  add(MK::Distance, "length", "W1", "E1", lx);
  add(MK::Distance, "offset_south", "S1", "S2", 0.0);
  add(MK::Angle, "parallel_1", "S1", "N1", 0.0);
  add(MK::Angle, "parallel_2", "S2", "N2", 0.0);
  add(MK::Angle, "parallel_ends", "W1", "E1", 0.0);
  add(MK::Angle, "corner_se", "S2", "E1", 90.0);
  add(MK::Angle, "corner_ne", "N2", "E1", 90.0);
  add(MK::Angle, "corner_nw", "N1", "W1", 90.0);
  add(MK::Angle, "corner_sw", "S1", "W1", 90.0);
  add(MK::Angle, "straight_south", "S1", "S2", 0.0);
  add(MK::Angle, "straight_north", "N1", "N2", 0.0);
  add(MK::Angle, "revisit", "S1", "S1r", 0.0);

  out.graph = std::move(sim.graph);
  out.truth_poses = std::move(truth);
  return out;
}

GeneratedDataset generate_bent_hallway(const BentHallwayConfig& c) {
  if (!(c.length > 0.0) || !(c.width > 0.0) || !(c.step > 0.0) || !(c.laser_range > 0.0) ||
      c.beams <= 0 || !(c.bias_at > 0.0 && c.bias_at < 1.0) || !(c.bias_sigma_deg > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "bent-hallway config out of range");
  }
  const Vec2 shift(kWallOffset, kWallOffset);
  // Walls extend past both ends so every pose sees two long walls.
  const double margin = c.laser_range + 1.0;
  std::vector<Wall> walls = {{"south", {-margin, 0.0}, {c.length + margin, 0.0}},
                             {"north", {c.length + margin, c.width}, {-margin, c.width}}};
  for (auto& w : walls) {
    w.p0 += shift;
    w.p1 += shift;
  }

  const auto n = static_cast<std::size_t>(std::floor(c.length / c.step + 1e-9)) + 1;
  std::vector<Pose2D> truth;
  for (std::size_t k = 0; k < n; ++k) {
    truth.emplace_back(static_cast<double>(k) * c.step + shift.x(), 0.5 * c.width + shift.y(), 0.0);
  }

  Simulation sim = simulate(truth, walls, c.laser_range, c.beams,
                            {c.odom_trans_noise, c.odom_rot_noise, c.range_noise}, c.seed);

  // The heading slip: one odometry step misreports its rotation, and the
  // odometry knows that step is unreliable in rotation.
  const auto link = std::min(n - 2, static_cast<std::size_t>(std::llround(c.bias_at * static_cast<double>(n - 1))));
  auto& f = sim.graph.odometry[link];
  f.z.rotation = normalize_angle(f.z.rotation + c.bias_deg * kDeg);
  const double sb = c.bias_sigma_deg * kDeg;
  f.info(2, 2) = 1.0 / (sb * sb);
  for (std::size_t k = link + 1; k < n; ++k) {
    sim.graph.poses[k] = compose(sim.graph.poses[k - 1], sim.graph.odometry[k - 1].z);
  }

  GeneratedDataset out;
  const double mid = c.length * c.bias_at;
  const double span = std::max(0.5, std::min(mid, c.length - mid) - 1.5);
  auto poses_in = [&](double lo, double hi) {
    std::size_t first = n;
    std::size_t last = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double x = truth[k].x - shift.x();
      if (x >= lo && x <= hi) {
        first = std::min(first, k);
        last = std::max(last, k);
      }
    }
    return std::pair{first, last};
  };
  // Features on each wall: most of its length before and after the slip.
  struct Stretch {
    std::string suffix;
    double lo, hi;
  };
  const std::vector<Stretch> stretches = {{"_west", mid - 1.0 - span, mid - 1.0},
                                          {"_east", mid + 1.0, mid + 1.0 + span}};
  for (const auto& s : stretches) {
    const auto [first, last] = poses_in(s.lo, s.hi);
    if (first >= n) continue;
    // South wall coordinates run west to east; north runs east to west.
    out.truth.features["S" + s.suffix] = select(sim, walls, 0, first, last, s.lo + margin, s.hi + margin);
    out.truth.features["N" + s.suffix] =
        select(sim, walls, 1, first, last, c.length + margin - s.hi, c.length + margin - s.lo);
  }
  using MK = MeasurementKind;
  measure(out.truth, MK::Angle, "straight_south", "S_west", "S_east", 0.0);
  measure(out.truth, MK::Angle, "straight_north", "N_west", "N_east", 0.0);
  measure(out.truth, MK::Angle, "cross_1", "S_west", "N_east", 0.0);
  measure(out.truth, MK::Angle, "cross_2", "N_west", "S_east", 0.0);
  measure(out.truth, MK::Distance, "width_west", "S_west", "N_west", c.width);
  measure(out.truth, MK::Distance, "width_east", "S_east", "N_east", c.width);
  measure(out.truth, MK::Distance, "offset_south", "S_west", "S_east", 0.0);
  measure(out.truth, MK::Distance, "offset_north", "N_west", "N_east", 0.0);

  out.graph = std::move(sim.graph);
  out.truth_poses = std::move(truth);
  return out;
}

namespace {

template <typename Config>
Config config_from_json(std::string_view text, const std::map<std::string, double Config::*>& reals,
                        const std::map<std::string, int Config::*>& ints) {
  Config c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (const auto it = reals.find(key); it != reals.end() && value.is_number()) {
      c.*(it->second) = value.template get<double>();
    } else if (const auto it2 = ints.find(key); it2 != ints.end() && value.is_number_integer()) {
      c.*(it2->second) = value.template get<int>();
    } else if (key == "seed" && value.is_number_unsigned()) {
      c.seed = value.template get<std::uint64_t>();
    } else {
      throw Error(ErrorKind::InvalidArgument, "unknown or mistyped config key '" + key + "'");
    }
  }
  return c;
}

}  // namespace

LostPosesConfig lost_poses_config_from_json(std::string_view json) {
  using C = LostPosesConfig;
  LostPosesConfig c = config_from_json<C>(
      json,
      {{"room_width", &C::room_width},
       {"room_length", &C::room_length},
       {"laser_range", &C::laser_range},
       {"odom_trans_noise", &C::odom_trans_noise},
       {"odom_rot_noise", &C::odom_rot_noise},
       {"range_noise", &C::range_noise},
       {"step", &C::step},
       {"cruise_offset", &C::cruise_offset},
       {"approach_offset", &C::approach_offset}},
      {{"beams", &C::beams}, {"steps", &C::steps}});
  if (c.steps < 0) throw Error(ErrorKind::InvalidArgument, "steps must be non-negative");
  return c;
}

BentHallwayConfig bent_hallway_config_from_json(std::string_view json) {
  using C = BentHallwayConfig;
  return config_from_json<C>(json,
                             {{"length", &C::length},
                              {"width", &C::width},
                              {"laser_range", &C::laser_range},
                              {"step", &C::step},
                              {"bias_deg", &C::bias_deg},
                              {"bias_at", &C::bias_at},
                              {"bias_sigma_deg", &C::bias_sigma_deg},
                              {"odom_trans_noise", &C::odom_trans_noise},
                              {"odom_rot_noise", &C::odom_rot_noise},
                              {"range_noise", &C::range_noise}},
                             {{"beams", &C::beams}});
}

}  // namespace hitl
