#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relloc/core_types.hpp"
#include "relloc/measurement_models.hpp"

namespace relloc {

enum class PatternKind { Static, Triangle, XShape, Circle, Rectangle, WaypointList };

std::string_view to_string(PatternKind kind);
PatternKind pattern_kind_from_string(std::string_view name);

/// Closed path traversed at constant speed. `scale` is the circumradius of the
/// triangle, the radius of the circle, the half-width of the rectangle and the
/// half-diagonal extent of the X. `start_phase` is a fraction of the period.
struct TrajectoryPattern {
  PatternKind kind = PatternKind::Static;
  Vec2 center = Vec2::Zero();
  double scale = 1.0;
  double speed = 0.0;
  double start_phase = 0.0;
  double aspect = 0.6;  // rectangle height / width
  std::vector<Vec2> waypoints;

  /// Polygon vertices in traversal order (closed implicitly). Empty for circle/static.
  std::vector<Vec2> vertices() const;
  double path_length() const;
  /// Time for one lap; 0 for a static or motionless pattern.
  double period() const;
  void validate() const;
};

/// Constant-speed arc-length traversal; heading follows the path tangent.
Pose2 pose_at(const TrajectoryPattern& pattern, double t);

struct MeasurementRates {
  double range_hz = 10.0;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::size_t n_agents = 0;
  std::vector<TrajectoryPattern> patterns;
  RangingGraph graph;
  ArenaBounds bounds;
  NoiseModel noise;
  std::optional<RangingBiasModel> bias;
  DetectionConfig detection;
  std::vector<WorldObject> objects;
  double dt = 0.1;
  double duration = 60.0;
  MeasurementRates rates;
  std::uint64_t seed = 0;
  std::optional<std::size_t> static_agent;

  /// Throws InvalidConfig naming the offending field.
  void validate() const;
  std::size_t steps() const;
  std::size_t range_stride() const;
  Vec2 static_position() const;
  std::vector<Vec2> initial_positions() const;
};

struct GroundTruthLog {
  std::vector<double> t;
  std::vector<std::vector<Pose2>> poses;  // [step][agent]

  std::size_t size() const { return t.size(); }
};

/// Output of one scenario run. Odometry holds n_agents deltas per step k >= 1,
/// ordered by step then agent.
struct ScenarioStreams {
  GroundTruthLog truth;
  std::vector<OdometryDelta> odometry;
  std::vector<UwbRange> ranges;
  std::vector<CooperativeDetection> detections;
  std::vector<double> initial_headings;
};

ScenarioStreams run_scenario(const ScenarioConfig& cfg);

}  // namespace relloc
