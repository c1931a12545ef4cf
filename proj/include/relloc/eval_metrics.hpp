#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relloc/core_types.hpp"
#include "relloc/particle_filter.hpp"
#include "relloc/scenario_sim.hpp"

namespace relloc {

/// Median, mean, population standard deviation, RMSE and max of a series.
struct ErrorSummary {
  double median = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double rmse = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

ErrorSummary summarize(std::span<const double> values);

struct ApeSeries {
  std::uint64_t seed = 0;
  std::optional<std::size_t> anchor;
  std::vector<double> t;                     // matched estimate timestamps
  std::vector<std::vector<double>> errors;   // [agent][step]; NaN where the estimate is invalid
  std::vector<ErrorSummary> per_agent;
  ErrorSummary pooled;                       // all agents except the anchor

  std::vector<double> pooled_values() const;
};

/// Per-step, per-agent positional error. With an anchor, estimates are first
/// translated so the anchor's estimate coincides with its ground truth at that step.
/// Estimates are matched to the nearest truth sample within half a truth period.
ApeSeries compute_ape(std::span<const StateEstimate> estimates, const GroundTruthLog& truth,
                      std::optional<std::size_t> anchor, std::uint64_t seed = 0);

struct AteSeries {
  std::vector<double> errors;
  ErrorSummary summary;
};

/// Distance from p to the piecewise-linear path through `path`.
double point_to_path_distance(const Vec2& p, std::span<const Vec2> path);

/// Throws DegenerateReference for fewer than two waypoints.
AteSeries compute_ate(std::span<const Vec2> executed, std::span<const Vec2> reference);

struct ComparisonReport {
  std::vector<double> median_difference;  // median(a) - median(b) per agent
  std::vector<double> win_fraction;       // share of steps where a < b
  double pooled_median_difference = 0.0;
  std::string verdict;                    // "a_better", "b_better" or "tie"
};

/// Throws SeedMismatch when the runs come from different seeds or timestamps.
ComparisonReport paired_compare(const ApeSeries& a, const ApeSeries& b);

}  // namespace relloc
