#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "relloc/core_types.hpp"
#include "relloc/measurement_models.hpp"
#include "relloc/particle_filter.hpp"

namespace relloc {

struct ReferencePoint {
  AgentId agent;
  Vec2 position = Vec2::Zero();
};

struct RangeToReference {
  AgentId agent;
  double distance = 0.0;
};

struct MultilaterationProblem {
  std::vector<ReferencePoint> references;
  std::vector<RangeToReference> ranges;
  std::optional<Vec2> prior;
};

struct MultilaterationSolution {
  Vec2 position = Vec2::Zero();
  double residual_rms = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Gauss-Newton on sum_k (|x - a_k| - r_k)^2, warm-started at the prior or the
/// reference centroid. Throws InsufficientReferences (< 3 ranged references) or
/// DegenerateGeometry (collinear references). A non-converged solve returns the best
/// iterate with converged = false.
MultilaterationSolution solve_multilateration(const MultilaterationProblem& problem, double tol = 1e-10,
                                              std::size_t max_iter = 100);

/// Smallest / largest singular value of the centered reference matrix.
double reference_conditioning(std::span<const Vec2> references);

struct TrackerConfig {
  std::size_t static_agent = 0;
  Vec2 static_position = Vec2::Zero();
  // Surveyed start positions of every agent; used until the first solve.
  std::vector<Vec2> initial_positions;
  std::size_t max_sweeps = 25;
  double sweep_tol = 1e-9;
};

/// Per-range-epoch multilateration of every moving agent against the current
/// estimates of its ranging neighbors. Sweeps repeat until estimates settle. Agents
/// with fewer than three usable references keep their previous position and are
/// flagged invalid for that epoch.
std::vector<StateEstimate> run_multilateration_tracker(const RangingGraph& graph, std::span<const UwbRange> ranges,
                                                       const TrackerConfig& cfg);

}  // namespace relloc
