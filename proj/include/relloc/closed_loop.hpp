#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "relloc/eval_metrics.hpp"
#include "relloc/pipeline.hpp"
#include "relloc/scenario_sim.hpp"

namespace relloc {

enum class Feedback { Filter, Oracle };

struct ClosedLoopOptions {
  std::size_t controlled_agent = 0;
  // Empty: the controlled agent's own pattern vertices, starting at the next vertex
  // ahead of it when navigation begins. The path is closed back to its first waypoint.
  std::vector<Vec2> waypoints;
  double gain = 1.0;            // 1/s
  double max_speed = 0.25;      // m/s
  double capture_radius = 0.02;  // m
  // Every agent follows its pattern for this long so the filter can settle.
  double settle_time = 30.0;
  // Navigation stops after this long even if waypoints remain.
  double max_nav_time = 200.0;
  Feedback feedback = Feedback::Filter;
  FilterMode mode = FilterMode::PfU;

  void validate() const;
};

struct ClosedLoopResult {
  GroundTruthLog truth;
  std::vector<StateEstimate> estimates;  // translated so the static agent sits at its configured position
  std::vector<Vec2> reference;           // closed waypoint path
  std::vector<Vec2> executed;            // controlled agent's true positions during navigation
  std::size_t nav_start_step = 0;        // index into truth where navigation begins
  std::size_t waypoints_reached = 0;
  bool completed = false;
  AteSeries ate;
  ApeSeries ape;
};

/// Scenario in which one agent is steered by a proportional law evaluated at the
/// filter's (or, in oracle mode, the true) position. Requires a static agent.
ClosedLoopResult run_closed_loop(const ScenarioConfig& cfg, const PipelineConfig& pipeline,
                                 const ClosedLoopOptions& options,
                                 const std::map<Edge, CorrectorModel>* models = nullptr);

}  // namespace relloc
