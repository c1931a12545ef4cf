#include "relloc/scenario_sim.hpp"

#include <cmath>
#include <string>

namespace relloc {

std::string_view to_string(PatternKind kind) {
  switch (kind) {
    case PatternKind::Static: return "static";
    case PatternKind::Triangle: return "triangle";
    case PatternKind::XShape: return "x_shape";
    case PatternKind::Circle: return "circle";
    case PatternKind::Rectangle: return "rectangle";
    case PatternKind::WaypointList: return "waypoint_list";
  }
  return "static";
}

PatternKind pattern_kind_from_string(std::string_view name) {
  if (name == "static") return PatternKind::Static;
  if (name == "triangle") return PatternKind::Triangle;
  if (name == "x_shape") return PatternKind::XShape;
  if (name == "circle") return PatternKind::Circle;
  if (name == "rectangle") return PatternKind::Rectangle;
  if (name == "waypoint_list") return PatternKind::WaypointList;
  throw Error(ErrorCode::InvalidConfig, "unknown pattern kind '" + std::string(name) + "'");
}

std::vector<Vec2> TrajectoryPattern::vertices() const {
  switch (kind) {
    case PatternKind::Triangle: {
      std::vector<Vec2> v;
      for (int k = 0; k < 3; ++k) {
        const double a = kPi / 2.0 + 2.0 * kPi * k / 3.0;
        v.push_back(center + scale * Vec2(std::cos(a), std::sin(a)));
      }
      return v;
    }
    case PatternKind::Rectangle: {
      const double w = scale;
      const double h = aspect * scale;
      return {center + Vec2(-w, -h), center + Vec2(w, -h), center + Vec2(w, h), center + Vec2(-w, h)};
    }
    case PatternKind::XShape: {
      const double d = scale / std::sqrt(2.0);
      return {center, center + Vec2(d, d), center - Vec2(d, d), center, center + Vec2(d, -d), center - Vec2(d, -d)};
    }
    case PatternKind::WaypointList:
      return waypoints;
    case PatternKind::Static:
    case PatternKind::Circle:
      break;
  }
  return {};
}

double TrajectoryPattern::path_length() const {
  if (kind == PatternKind::Static) return 0.0;
  if (kind == PatternKind::Circle) return 2.0 * kPi * scale;
  const auto v = vertices();
  double len = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) len += (v[(k + 1) % v.size()] - v[k]).norm();
  return len;
}

double TrajectoryPattern::period() const {
  if (kind == PatternKind::Static || speed <= 0.0) return 0.0;
  return path_length() / speed;
}

void TrajectoryPattern::validate() const {
  if (!(speed >= 0.0)) throw Error(ErrorCode::InvalidConfig, "speed must be >= 0");
  if (kind != PatternKind::Static && kind != PatternKind::WaypointList && !(scale > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "scale must be > 0");
  }
  if (kind == PatternKind::Rectangle && !(aspect > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "aspect must be > 0");
  }
  if (kind == PatternKind::WaypointList && waypoints.size() < 2) {
    throw Error(ErrorCode::InvalidConfig, "waypoints needs at least 2 points");
  }
}

Pose2 pose_at(const TrajectoryPattern& pattern, double t) {
  if (t < 0.0) throw Error(ErrorCode::InvalidArgument, "pose_at requires t >= 0");
  if (pattern.kind == PatternKind::Static) return Pose2(pattern.center, 0.0);

  const double length = pattern.path_length();
  double s = std::fmod(pattern.start_phase * length + pattern.speed * t, length);
  if (s < 0.0) s += length;

  if (pattern.kind == PatternKind::Circle) {
    const double a = 2.0 * kPi * s / length;
    return Pose2(pattern.center + pattern.scale * Vec2(std::cos(a), std::sin(a)), a + kPi / 2.0);
  }

  const auto v = pattern.vertices();
  for (std::size_t k = 0; k < v.size(); ++k) {
    const Vec2& a = v[k];
    const Vec2& b = v[(k + 1) % v.size()];
    const double seg = (b - a).norm();
    if (seg <= 0.0) continue;
    if (s <= seg || k + 1 == v.size()) {
      const Vec2 dir = (b - a) / seg;
      const double along = std::min(s, seg);
      return Pose2(a + along * dir, std::atan2(dir.y(), dir.x()));
    }
    s -= seg;
  }
  return Pose2(v.front(), 0.0);
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw Error(ErrorCode::InvalidConfig, field + ": " + msg);
  };
  if (n_agents == 0) fail("n_agents", "must be >= 1");
  if (patterns.size() != n_agents) fail("patterns", "expected one pattern per agent");
  if (graph.n_agents() != n_agents) fail("graph", "agent count differs from n_agents");
  if (!(dt > 0.0)) fail("dt", "must be > 0");
  if (!(duration > 0.0)) fail("duration", "must be > 0");
  if (!(rates.range_hz > 0.0) || rates.range_hz > 1.0 / dt + 1e-9) fail("rates.range_hz", "must lie in (0, 1/dt]");
  noise.validate();
  detection.validate();
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    try {
      patterns[i].validate();
    } catch (const Error& e) {
      fail("patterns[" + std::to_string(i) + "]", e.what());
    }
  }
  if (static_agent) {
    if (*static_agent >= n_agents) fail("static_agent", "out of range");
    if (patterns[*static_agent].kind != PatternKind::Static) fail("static_agent", "pattern must be static");
  }
  for (const auto& o : objects) {
    if (!o.position.allFinite()) fail("objects", "positions must be finite");
  }
}

std::size_t ScenarioConfig::steps() const { return static_cast<std::size_t>(std::llround(duration / dt)); }

std::size_t ScenarioConfig::range_stride() const {
  const auto stride = static_cast<std::size_t>(std::llround(1.0 / (rates.range_hz * dt)));
  return stride == 0 ? 1 : stride;
}

Vec2 ScenarioConfig::static_position() const {
  if (!static_agent) throw Error(ErrorCode::InvalidConfig, "static_agent: scenario has no static agent");
  return patterns[*static_agent].center;
}

std::vector<Vec2> ScenarioConfig::initial_positions() const {
  std::vector<Vec2> out;
  for (const auto& p : patterns) out.push_back(pose_at(p, 0.0).position());
  return out;
}

ScenarioStreams run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  NoiseModel noise = cfg.noise;
  noise.rng_seed = cfg.seed;
  MeasurementSynthesizer synth(noise);
  const RangingBiasModel* bias = cfg.bias ? &*cfg.bias : nullptr;

  const std::size_t n = cfg.n_agents;
  const std::size_t steps = cfg.steps();
  const std::size_t stride = cfg.range_stride();

  ScenarioStreams out;
  auto snapshot = [&](double t) {
    std::vector<Pose2> poses;
    poses.reserve(n);
    for (const auto& p : cfg.patterns) poses.push_back(pose_at(p, t));
    return poses;
  };

  out.truth.t.push_back(0.0);
  out.truth.poses.push_back(snapshot(0.0));
  for (const auto& p : out.truth.poses.front()) out.initial_headings.push_back(p.theta());

  for (std::size_t k = 1; k <= steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    auto poses = snapshot(t);
    const auto& prev = out.truth.poses.back();
    for (std::size_t i = 0; i < n; ++i) {
      out.odometry.push_back(synth.synth_odometry(AgentId(i), prev[i], poses[i], cfg.dt, t));
    }
    if (k % stride == 0) {
      for (const auto& e : cfg.graph.edges()) out.ranges.push_back(synth.synth_uwb(poses, cfg.graph, e, bias, t));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (auto det = synth.synth_detection(poses, AgentId(i), AgentId(j), cfg.objects, cfg.detection, t)) {
          out.detections.push_back(*det);
        }
      }
    }
    out.truth.t.push_back(t);
    out.truth.poses.push_back(std::move(poses));
  }
  return out;
}

}  // namespace relloc
