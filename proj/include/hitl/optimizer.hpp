#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "hitl/graph.hpp"

namespace hitl {

/// Relative costs inside a human factor (k1 per metre, k2 unitless) and the
/// scale of all human-factor rows against the whitened odometry rows.
struct ResidualWeights {
  double k1 = 2.0;
  double k2 = 1.0;
  double human_weight = 100.0;
  double min_segment_length = 0.1;  // soft barrier below this length, m
};

struct SolverParams {
  int max_iterations = 200;
  double function_tol = 1e-12;   // relative cost decrease
  double param_tol = 1e-10;      // relative step size
  double initial_damping = 1e-4;
  /// Poses kept at their input values in addition to pose 0.
  std::vector<std::size_t> held_poses;
  /// Keep all human-factor segments at their input values.
  bool hold_segments = false;
};

/// Whitened odometry residual U * e, e = log(z^-1 (+) (x_i^-1 (+) x_j)) as
/// (dx, dy, dtheta), with U^T U = info.
struct RelativeResidual {
  Eigen::Vector3d r;
  Eigen::Matrix3d d_xi;
  Eigen::Matrix3d d_xj;
};

RelativeResidual residual_relative(const RelativePoseFactor& factor, const Pose2D& xi,
                                   const Pose2D& xj);

/// c_m terms of a human factor: RMS fit of each selection to its segment and
/// the mode-dependent relation between the segments (k1, k2 applied,
/// human_weight not applied).
struct HumanResiduals {
  double ra = 0.0;
  double rb = 0.0;
  double rp = 0.0;
};

HumanResiduals residual_human(const HumanCorrectionFactor& h, const FactorGraph& graph,
                              const ResidualWeights& weights);

/// R_p from the two segments alone.
double residual_relation(const Segment& pa, const Segment& pb, CorrectionMode mode,
                         const ResidualWeights& weights);

/// Rows of the stack. A human factor contributes R_a, R_b, its relation
/// (RpOffset rows for the cm terms, one RpAlign row for the normals), two
/// anchors and two length barriers.
enum class RowKind { Odometry, Ra, Rb, RpOffset, RpAlign, Anchor, Barrier };

/// How R_a and R_b are laid out. Compact: one RMS row each. PerObservation:
/// one row per selected observation, hw * signed distance / sqrt(|S|), whose
/// squares sum to the same cost. The solver linearizes the latter; a single
/// RMS row gives Gauss-Newton only a rank-one model of the fit.
enum class RowLayout { Compact, PerObservation };

/// One scalar row of the stacked least-squares problem with its gradient
/// over the packed parameter vector.
struct ResidualRow {
  RowKind kind;
  std::size_t factor;  // index into odometry or human_factors
  double value;
  std::vector<std::pair<int, double>> jacobian;
};

/// Parameter packing: [x, y, theta] per pose, then per human factor the
/// endpoints of P_a and P_b (8 scalars).
class Problem {
 public:
  Problem(FactorGraph graph, ResidualWeights weights);

  const FactorGraph& graph() const { return graph_; }
  const ResidualWeights& weights() const { return weights_; }
  int size() const { return static_cast<int>(3 * graph_.poses.size() + 8 * graph_.human_factors.size()); }
  int pose_offset(std::size_t pose) const { return static_cast<int>(3 * pose); }
  int segment_offset(std::size_t factor, bool side_b) const {
    return static_cast<int>(3 * graph_.poses.size() + 8 * factor + (side_b ? 4 : 0));
  }

  Eigen::VectorXd pack() const;
  FactorGraph unpack(const Eigen::VectorXd& x) const;

  /// All residual rows at x, with Jacobians.
  std::vector<ResidualRow> rows(const Eigen::VectorXd& x, RowLayout layout = RowLayout::Compact) const;

  /// Sum of squared residuals.
  double cost(const Eigen::VectorXd& x) const;

 private:
  struct Selection {
    std::vector<std::size_t> pose;
    std::vector<Vec2> local;
  };

  void add_human_rows(std::size_t h, const Eigen::VectorXd& x, RowLayout layout,
                      std::vector<ResidualRow>& out) const;

  FactorGraph graph_;
  ResidualWeights weights_;
  std::vector<std::pair<Selection, Selection>> selections_;
};

struct OptimizeReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string termination;
  std::vector<double> accepted_costs;  // cost after every accepted step
};

struct OptimizeResult {
  FactorGraph graph;
  OptimizeReport report;
};

/// Damped Gauss-Newton (Levenberg-Marquardt) over all poses except pose 0
/// and all human-factor segment endpoints. Never returns a worse iterate than
/// the input; report.converged is false when the iteration budget ran out.
OptimizeResult optimize(const FactorGraph& graph, const ResidualWeights& weights,
                        const SolverParams& params);

/// Sum of squared residuals of the full stack at the graph's current values.
double total_cost(const FactorGraph& graph, const ResidualWeights& weights);

/// Information over pose parameters, J^T J with the human-factor segment
/// parameters marginalized out (Schur complement). 3N x 3N.
Eigen::SparseMatrix<double> information_matrix(const FactorGraph& graph,
                                               const ResidualWeights& weights);

/// Pose pairs (i <= j) whose 3x3 block in `info` holds a nonzero entry.
std::set<std::pair<std::size_t, std::size_t>> block_pattern(const Eigen::SparseMatrix<double>& info);

/// Writes |info| as an 8-bit portable graymap, one pixel per entry.
void write_information_pgm(const Eigen::SparseMatrix<double>& info, const std::string& path);

/// Writes "row col value" triplets, one per line.
void write_information_triplets(const Eigen::SparseMatrix<double>& info, const std::string& path);

}  // namespace hitl
