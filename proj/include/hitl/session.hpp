#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hitl/correction.hpp"
#include "hitl/interpretation.hpp"
#include "hitl/metrics.hpp"
#include "hitl/optimizer.hpp"

namespace hitl {

struct SessionConfig {
  InterpretationParams interpretation;
  ResidualWeights weights;
  SolverParams solver;
  double resolution = 0.05;  // inconsistency raster, m
  std::size_t max_display_points = 50000;
};

struct IterationMetrics {
  std::size_t iteration = 0;
  std::string mode;  // empty for the initial map
  double total_cost = 0.0;
  double inconsistency = 0.0;
  int solver_iterations = 0;
  bool converged = true;
};

/// What a client needs to redraw the map after an iteration.
struct MapUpdate {
  std::size_t iteration = 0;
  std::vector<Pose2D> poses;
  std::vector<Vec2> points;  // world frame, decimated
  std::vector<HumanCorrectionFactor> factors;
  double total_cost = 0.0;
  double inconsistency = 0.0;
  double timing_ms = 0.0;
  bool converged = true;
  std::optional<std::string> error;  // set when the correction was rejected
  std::optional<ErrorKind> error_kind;
};

/// One HitL session: the current graph plus the accepted corrections. Every
/// accepted correction is re-optimized together with all earlier ones.
class Session {
 public:
  /// Throws InvalidArgument when the graph fails validate().
  Session(FactorGraph graph, SessionConfig config = {});

  /// interpret, correct, optimize, measure. Interpretation or correction
  /// errors leave the session untouched and come back in update.error.
  MapUpdate submit_correction(const RawCorrection& raw);

  /// The update describing the current state.
  const MapUpdate& snapshot() const { return states_.back().update; }

  /// Restores the graph from before the last accepted correction. Returns
  /// false when there is nothing to undo.
  bool undo_last();

  const FactorGraph& graph() const { return states_.back().graph; }
  std::vector<HumanCorrectionFactor> history() const { return graph().human_factors; }
  std::vector<IterationMetrics> metrics_log() const;
  std::size_t iteration() const { return states_.size() - 1; }
  const SessionConfig& config() const { return config_; }

 private:
  struct State {
    FactorGraph graph;
    MapUpdate update;
    IterationMetrics metrics;
  };

  MapUpdate describe(const FactorGraph& graph, const IterationMetrics& m) const;

  SessionConfig config_;
  std::vector<State> states_;  // states_[0] is the input map
};

/// World points of every scan, uniformly thinned per scan so that at most
/// `limit` remain.
std::vector<Vec2> decimated_points(const FactorGraph& graph, std::size_t limit);

nlohmann::json to_json(const MapUpdate& update);
nlohmann::json to_json(const RawCorrection& raw);
/// Throws InvalidArgument on a malformed object.
RawCorrection raw_correction_from_json(const nlohmann::json& j);

struct ReplaySummary {
  std::vector<IterationMetrics> iterations;  // initial map first
  std::optional<GroundTruthReport> initial_report;
  std::optional<GroundTruthReport> final_report;
};

/// Applies every script record in order. Throws the first pipeline error,
/// prefixed with its record index.
ReplaySummary replay(const FactorGraph& graph, const std::vector<RawCorrection>& script,
                     const SessionConfig& config, FactorGraph* final_graph = nullptr,
                     const GroundTruth* truth = nullptr);

/// File-based replay: writes the final graph to out_path and, when
/// metrics_path is not empty, the per-iteration metrics (no timings, so the
/// output is a pure function of the inputs).
ReplaySummary replay_files(const std::string& graph_path, const std::string& script_path,
                           const std::string& out_path, const std::string& metrics_path,
                           const SessionConfig& config, const std::string& truth_path = "");

void write_metrics(std::ostream& out, const ReplaySummary& summary);

}  // namespace hitl
