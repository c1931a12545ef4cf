#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "relloc/multilateration.hpp"
#include "relloc/particle_filter.hpp"
#include "relloc/range_corrector.hpp"
#include "relloc/scenario_sim.hpp"

namespace relloc {

/// PF_U: raw ranges. PF_UL: corrected ranges. PF_ULV: corrected ranges plus
/// cooperative detections.
enum class FilterMode { PfU, PfUL, PfULV };

std::string_view to_string(FilterMode mode);
/// Throws InvalidArgument listing the valid names.
FilterMode filter_mode_from_string(std::string_view name);

/// Filter settings plus the observation sigmas used to build each batch.
struct PipelineConfig {
  FilterConfig filter;
  double sigma_uwb = 0.1;
  double sigma_det = 0.07;
  double d_det_th = 0.15;
};

struct FilterRun {
  std::vector<StateEstimate> estimates;  // raw filter frame
  std::vector<StepResult> diagnostics;
  std::size_t detections_used = 0;
  std::size_t detections_rejected = 0;
};

/// Heading history per agent, integrated from the initial headings and odometry.
std::vector<HeadingTrack> integrate_headings(const ScenarioStreams& streams, std::size_t n_agents);

/// Ground-truth distance for every range record (nearest truth snapshot).
std::vector<double> true_ranges(const ScenarioStreams& streams, std::span<const UwbRange> ranges);

/// Runs the particle filter over recorded streams, one step per odometry epoch.
FilterRun run_filter(const ScenarioStreams& streams, const RangingGraph& graph, const ArenaBounds& bounds,
                     const PipelineConfig& cfg, FilterMode mode, const std::map<Edge, CorrectorModel>* models,
                     std::span<const Vec2> prior = {});

struct CorrectorTraining {
  CorrectorModel model;
  double holdout_mse = 0.0;
  double holdout_zero_mse = 0.0;
  std::size_t train_samples = 0;
  std::size_t holdout_samples = 0;
};

/// Fits one edge's corrector on the leading (1 - holdout_fraction) of its samples
/// and scores it on the trailing part.
CorrectorTraining train_edge_corrector(const ScenarioStreams& streams, std::size_t n_agents, const Edge& edge,
                                       std::size_t n_steps, double ridge_lambda, double holdout_fraction = 0.2);

/// Tracker run on a scenario's streams, with the static agent pinned at its
/// configured position and the surveyed start positions as the first guess.
std::vector<StateEstimate> run_multilateration_on(const ScenarioConfig& cfg, const ScenarioStreams& streams);

}  // namespace relloc
