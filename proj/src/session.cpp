#include "hitl/session.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hitl/dataset.hpp"

namespace hitl {

namespace {

IterationMetrics measure(const FactorGraph& g, const SessionConfig& config, std::size_t iteration) {
  IterationMetrics m;
  m.iteration = iteration;
  m.total_cost = total_cost(g, config.weights);
  m.inconsistency = total_inconsistency(g, config.resolution);
  return m;
}

std::string describe_violations(const std::vector<Violation>& v) {
  std::string out;
  for (const auto& x : v) out += (out.empty() ? "" : "; ") + x.rule + " " + x.entity;
  return out;
}

nlohmann::json segment_json(const Segment& s) {
  return nlohmann::json::array({{s.p0.x(), s.p0.y()}, {s.p1.x(), s.p1.y()}});
}

Segment segment_from_json(const nlohmann::json& j, const char* field) {
  auto bad = [&] { throw Error(ErrorKind::InvalidArgument, std::string("'") + field + "' must be [[x,y],[x,y]]"); };
  if (!j.is_array() || j.size() != 2) bad();
  Vec2 p[2];
  for (int k = 0; k < 2; ++k) {
    const auto& v = j[static_cast<std::size_t>(k)];
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) bad();
    p[k] = {v[0].get<double>(), v[1].get<double>()};
  }
  return {p[0], p[1]};
}

}  // namespace

std::vector<Vec2> decimated_points(const FactorGraph& graph, std::size_t limit) {
  const std::size_t total = point_count(graph);
  const std::size_t stride = (limit == 0 || total <= limit) ? 1 : (total + limit - 1) / limit;
  std::vector<Vec2> out;
  out.reserve(total / stride + graph.scans.size());
  for (const auto& scan : graph.scans) {
    const Pose2D& pose = graph.poses.at(scan.pose_id);
    for (std::size_t k = 0; k < scan.points.size(); k += stride) out.push_back(pose.to_world(scan.points[k]));
  }
  // Per-scan rounding can overshoot by at most one point per scan.
  if (limit > 0 && out.size() > limit) out.resize(limit);
  return out;
}

Session::Session(FactorGraph graph, SessionConfig config) : config_(std::move(config)) {
  const auto violations = validate(graph, config_.interpretation.t_p);
  if (!violations.empty()) {
    throw Error(ErrorKind::InvalidArgument, "graph fails validation: " + describe_violations(violations));
  }
  State s;
  s.metrics = measure(graph, config_, 0);
  s.update = describe(graph, s.metrics);
  s.graph = std::move(graph);
  states_.push_back(std::move(s));
}

MapUpdate Session::describe(const FactorGraph& graph, const IterationMetrics& m) const {
  MapUpdate u;
  u.iteration = m.iteration;
  u.poses = graph.poses;
  u.points = decimated_points(graph, config_.max_display_points);
  u.factors = graph.human_factors;
  u.total_cost = m.total_cost;
  u.inconsistency = m.inconsistency;
  u.converged = m.converged;
  return u;
}

MapUpdate Session::submit_correction(const RawCorrection& raw) {
  const auto start = std::chrono::steady_clock::now();
  const FactorGraph& current = graph();
  State next;
  try {
    if (!raw.valid()) throw Error(ErrorKind::DegenerateSegment, "stroke shorter than 1 mm");
    const HumanCorrectionFactor factor = interpret(current, raw, config_.interpretation);
    const CorrectionResult corrected = apply_correction(current, factor);
    OptimizeResult solved = optimize(corrected.graph, config_.weights, config_.solver);
    const auto violations = validate(solved.graph, config_.interpretation.t_p);
    if (!violations.empty()) {
      throw Error(ErrorKind::InvalidArgument, "corrected graph fails validation: " + describe_violations(violations));
    }
    next.metrics = measure(solved.graph, config_, iteration() + 1);
    next.metrics.mode = std::string(to_string(factor.mode));
    next.metrics.solver_iterations = solved.report.iterations;
    next.metrics.converged = solved.report.converged;
    next.graph = std::move(solved.graph);
  } catch (const Error& e) {
    MapUpdate rejected = snapshot();
    rejected.error = e.what();
    rejected.error_kind = e.kind();
    rejected.timing_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rejected;
  }
  next.update = describe(next.graph, next.metrics);
  next.update.timing_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  states_.push_back(std::move(next));
  return states_.back().update;
}

bool Session::undo_last() {
  if (states_.size() <= 1) return false;
  states_.pop_back();
  return true;
}

std::vector<IterationMetrics> Session::metrics_log() const {
  std::vector<IterationMetrics> out;
  for (const auto& s : states_) out.push_back(s.metrics);
  return out;
}

nlohmann::json to_json(const MapUpdate& u) {
  nlohmann::json j;
  j["iteration"] = u.iteration;
  auto& poses = j["poses"] = nlohmann::json::array();
  for (const auto& p : u.poses) poses.push_back({p.x, p.y, p.theta});
  auto& points = j["points"] = nlohmann::json::array();
  for (const auto& p : u.points) points.push_back({p.x(), p.y()});
  auto& factors = j["factors"] = nlohmann::json::array();
  for (const auto& h : u.factors) {
    const auto xa = h.xa();
    const auto xb = h.xb();
    factors.push_back({{"mode", to_string(h.mode)},
                       {"pa", segment_json(h.pa)},
                       {"pb", segment_json(h.pb)},
                       {"xa", xa},
                       {"xb", xb},
                       {"selected_a", h.sa.size()},
                       {"selected_b", h.sb.size()}});
  }
  j["total_cost"] = u.total_cost;
  j["inconsistency"] = u.inconsistency;
  j["timing_ms"] = u.timing_ms;
  j["converged"] = u.converged;
  if (u.error) j["error"] = *u.error;
  if (u.error_kind) j["error_kind"] = to_string(*u.error_kind);
  return j;
}

nlohmann::json to_json(const RawCorrection& raw) {
  return {{"mode", to_string(raw.mode)}, {"pa", segment_json(raw.pa0)}, {"pb", segment_json(raw.pb0)}};
}

RawCorrection raw_correction_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "correction must be an object");
  if (!j.contains("mode") || !j["mode"].is_string()) throw Error(ErrorKind::InvalidArgument, "missing 'mode'");
  const auto mode = parse_mode(j["mode"].get<std::string>());
  if (!mode) throw Error(ErrorKind::InvalidArgument, "unknown mode '" + j["mode"].get<std::string>() + "'");
  if (!j.contains("pa") || !j.contains("pb")) throw Error(ErrorKind::InvalidArgument, "missing 'pa' or 'pb'");
  RawCorrection raw;
  raw.mode = *mode;
  raw.pa0 = segment_from_json(j["pa"], "pa");
  raw.pb0 = segment_from_json(j["pb"], "pb");
  return raw;
}

ReplaySummary replay(const FactorGraph& graph, const std::vector<RawCorrection>& script,
                     const SessionConfig& config, FactorGraph* final_graph, const GroundTruth* truth) {
  Session session(graph, config);
  ReplaySummary summary;
  if (truth != nullptr) summary.initial_report = ground_truth_report(session.graph(), *truth);
  for (std::size_t k = 0; k < script.size(); ++k) {
    const MapUpdate u = session.submit_correction(script[k]);
    if (u.error) {
      throw Error(u.error_kind.value_or(ErrorKind::InvalidArgument), "record " + std::to_string(k) + ": " + *u.error);
    }
  }
  summary.iterations = session.metrics_log();
  if (truth != nullptr) summary.final_report = ground_truth_report(session.graph(), *truth);
  if (final_graph != nullptr) *final_graph = session.graph();
  return summary;
}

void write_metrics(std::ostream& out, const ReplaySummary& summary) {
  char buf[256];
  for (const auto& m : summary.iterations) {
    std::snprintf(buf, sizeof buf, "iteration %zu mode %s cost %.17g inconsistency %.17g solver_iterations %d converged %d\n",
                  m.iteration, m.mode.empty() ? "-" : m.mode.c_str(), m.total_cost, m.inconsistency,
                  m.solver_iterations, m.converged ? 1 : 0);
    out << buf;
  }
  if (!summary.iterations.empty()) {
    const double before = summary.iterations.front().inconsistency;
    const double after = summary.iterations.back().inconsistency;
    std::snprintf(buf, sizeof buf, "inconsistency initial %.6f final %.6f reduction %.4f\n", before, after,
                  before > 0.0 ? 1.0 - after / before : 0.0);
    out << buf;
  }
  if (summary.initial_report) {
    out << "# ground truth, initial map\n";
    write_report(out, *summary.initial_report);
  }
  if (summary.final_report) {
    out << "# ground truth, corrected map\n";
    write_report(out, *summary.final_report);
  }
}

ReplaySummary replay_files(const std::string& graph_path, const std::string& script_path,
                           const std::string& out_path, const std::string& metrics_path,
                           const SessionConfig& config, const std::string& truth_path) {
  const FactorGraph graph = load_graph(graph_path);
  const auto script = load_script(script_path);
  std::optional<GroundTruth> truth;
  if (!truth_path.empty()) truth = load_truth(truth_path);
  FactorGraph final_graph;
  ReplaySummary summary = replay(graph, script, config, &final_graph, truth ? &*truth : nullptr);
  save_graph(final_graph, out_path);
  if (!metrics_path.empty()) {
    std::ostringstream ss;
    write_metrics(ss, summary);
    std::ofstream out(metrics_path, std::ios::binary);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + metrics_path);
    out << ss.str();
  }
  return summary;
}

}  // namespace hitl
