#pragma once

#include <span>
#include <vector>

#include "hitl/graph.hpp"

namespace hitl {

/// Stroke pair as drawn by the user, world frame.
struct RawCorrection {
  Segment pa0;
  Segment pb0;
  CorrectionMode mode = CorrectionMode::Colocation;

  bool valid() const { return pa0.valid(1e-3) && pb0.valid(1e-3); }
  bool operator==(const RawCorrection&) const = default;
};

struct InterpretationParams {
  double sigma = 0.05;          // human pointing accuracy, m
  double neighborhood = 0.20;   // candidate window half-width, m
  std::size_t t_p = 5;          // min selected points per pose
  int max_iters = 20;
  double tol = 1e-4;            // endpoint convergence, m
  double outlier_weight = 0.1;  // mixing weight of the uniform outlier component
};

struct Candidate {
  PointRef ref;
  Vec2 point;  // world frame
};

/// Every world-frame scan point within `neighborhood` of the segment, in
/// (pose, point) order.
std::vector<Candidate> candidate_points(const FactorGraph& graph, const Segment& seg,
                                        double neighborhood);

/// Unnormalized Gaussian factor exp(-d2 / (2 sigma^2)).
double gaussian_weight(double sq_dist, double sigma);

/// Inlier responsibility under the Gaussian + uniform-outlier mixture.
double responsibility(double sq_dist, const InterpretationParams& params);

/// Per-point responsibilities w_i in (0, 1].
struct Membership {
  std::vector<double> weights;
};

Membership e_step(std::span<const Vec2> points, const Segment& seg,
                  const InterpretationParams& params);

/// Weighted refit: principal line from all weights, extent from the points
/// that are hard-assigned (w >= 0.5).
Segment m_step(std::span<const Vec2> points, const Membership& membership);

/// Expected complete-data log-likelihood of `seg` under fixed responsibilities.
double expected_log_likelihood(std::span<const Vec2> points, const Membership& membership,
                               const Segment& seg, const InterpretationParams& params);

/// Observed-data log-likelihood of `seg` under the inlier/outlier mixture.
double observed_log_likelihood(std::span<const Vec2> points, const Segment& seg,
                               const InterpretationParams& params);

/// One EM iteration over its candidate set: the expected complete-data
/// likelihood of the previous and the refit parameters under the same
/// responsibilities, and the observed-data likelihood of both.
struct EmStep {
  double ll_before;
  double ll_after;
  double observed_before;
  double observed_after;
  std::size_t candidates;
};

struct SideInterpretation {
  Segment segment;
  std::vector<PointRef> selection;  // after the per-pose threshold
  std::vector<EmStep> trace;
  bool converged = false;
};

/// Runs EM for a single stroke. Throws InsufficientSelection / DegenerateFit.
SideInterpretation interpret_side(const FactorGraph& graph, const Segment& stroke,
                                  const InterpretationParams& params);

struct Interpretation {
  HumanCorrectionFactor factor;
  SideInterpretation side_a;
  SideInterpretation side_b;
  bool swapped = false;  // strokes were given in reverse temporal order
};

Interpretation interpret_detailed(const FactorGraph& graph, const RawCorrection& raw,
                                  const InterpretationParams& params);

/// Fully populated human correction factor with max(X_a) < min(X_b).
HumanCorrectionFactor interpret(const FactorGraph& graph, const RawCorrection& raw,
                                const InterpretationParams& params);

}  // namespace hitl
