#include "relloc/closed_loop.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "relloc/error.hpp"

namespace relloc {

void ClosedLoopOptions::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw Error(ErrorCode::InvalidConfig, field + ": " + msg);
  };
  if (!(gain >= 0.0)) fail("gain", "must be >= 0");
  if (!(max_speed > 0.0)) fail("max_speed", "must be > 0");
  if (!(capture_radius > 0.0)) fail("capture_radius", "must be > 0");
  if (!(settle_time >= 0.0)) fail("settle_time", "must be >= 0");
  if (!(max_nav_time > 0.0)) fail("max_nav_time", "must be > 0");
  for (const auto& w : waypoints) {
    if (!w.allFinite()) fail("waypoints", "must be finite");
  }
}

namespace {

// Vertices of the agent's own path, rotated so the first one is the next vertex
// ahead of `pos` along the direction of travel.
std::vector<Vec2> vertices_ahead(const TrajectoryPattern& p, const Vec2& pos) {
  auto v = p.vertices();
  if (v.size() < 2) throw Error(ErrorCode::InvalidConfig, "waypoints: controlled agent's pattern has no vertices");
  std::size_t seg = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < v.size(); ++k) {
    const std::vector<Vec2> edge{v[k], v[(k + 1) % v.size()]};
    const double d = point_to_path_distance(pos, edge);
    if (d < best) {
      best = d;
      seg = k;
    }
  }
  std::vector<Vec2> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(v[(seg + 1 + k) % v.size()]);
  return out;
}

}  // namespace

ClosedLoopResult run_closed_loop(const ScenarioConfig& cfg, const PipelineConfig& pipeline,
                                 const ClosedLoopOptions& options, const std::map<Edge, CorrectorModel>* models) {
  cfg.validate();
  options.validate();
  const std::size_t n = cfg.n_agents;
  const std::size_t c = options.controlled_agent;
  if (c >= n) throw Error(ErrorCode::InvalidConfig, "controlled_agent: out of range");
  if (!cfg.static_agent) throw Error(ErrorCode::InvalidConfig, "static_agent: closed loop needs a static agent");
  if (c == *cfg.static_agent) throw Error(ErrorCode::InvalidConfig, "controlled_agent: must be a moving agent");
  if (options.mode != FilterMode::PfU && models == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "corrector models required for mode " + std::string(to_string(options.mode)));
  }

  NoiseModel noise = cfg.noise;
  noise.rng_seed = cfg.seed;
  MeasurementSynthesizer synth(noise);
  const RangingBiasModel* bias = cfg.bias ? &*cfg.bias : nullptr;
  const std::size_t stride = cfg.range_stride();
  const auto settle_steps = static_cast<std::size_t>(std::llround(options.settle_time / cfg.dt));
  const auto max_steps = settle_steps + static_cast<std::size_t>(std::llround(options.max_nav_time / cfg.dt));
  const std::size_t anchor = *cfg.static_agent;
  const Vec2 anchor_pos = cfg.static_position();

  std::optional<CorrectorStream> corrector;
  if (options.mode != FilterMode::PfU) corrector.emplace(*models);
  std::vector<double> heading(n);

  ParticleFilter pf(pipeline.filter, cfg.graph, cfg.bounds);
  ClosedLoopResult out;
  std::vector<Pose2> poses;
  for (const auto& p : cfg.patterns) poses.push_back(pose_at(p, 0.0));
  for (std::size_t i = 0; i < n; ++i) heading[i] = poses[i].theta();
  out.truth.t.push_back(0.0);
  out.truth.poses.push_back(poses);

  std::size_t next_wp = 0;
  Vec2 feedback = poses[c].position();
  for (std::size_t k = 1; k <= max_steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    const auto& prev = out.truth.poses.back();
    std::vector<Pose2> cur(n);
    for (std::size_t i = 0; i < n; ++i) cur[i] = pose_at(cfg.patterns[i], t);

    if (k > settle_steps) {
      if (out.reference.empty()) {
        out.nav_start_step = k - 1;
        const auto wps = options.waypoints.empty() ? vertices_ahead(cfg.patterns[c], prev[c].position())
                                                   : options.waypoints;
        out.reference = wps;
        out.reference.push_back(wps.front());
        out.executed.push_back(prev[c].position());
      }
      Vec2 v = options.gain * (out.reference[next_wp] - feedback);
      const double speed = v.norm();
      if (speed > options.max_speed) v *= options.max_speed / speed;
      const double th = v.norm() > 1e-12 ? std::atan2(v.y(), v.x()) : prev[c].theta();
      cur[c] = Pose2(prev[c].position() + v * cfg.dt, th);
    }

    std::vector<OdometryDelta> odom;
    for (std::size_t i = 0; i < n; ++i) {
      odom.push_back(synth.synth_odometry(AgentId(i), prev[i], cur[i], cfg.dt, t));
      heading[i] = wrap_angle(heading[i] + odom.back().dtheta);
    }
    ObservationBatch batch;
    if (k % stride == 0) {
      for (const auto& e : cfg.graph.edges()) {
        auto r = synth.synth_uwb(cur, cfg.graph, e, bias, t);
        if (corrector) r = corrector->apply(r, heading[e.i], heading[e.j]);
        batch.ranges.push_back({r.edge, r.distance, pipeline.sigma_uwb});
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        auto det = synth.synth_detection(cur, AgentId(i), AgentId(j), cfg.objects, cfg.detection, t);
        if (det && options.mode == FilterMode::PfULV) batch.ingest(*det, pipeline.d_det_th, pipeline.sigma_det);
      }
    }

    auto est = pf.step(odom, batch, t).estimate;
    const Vec2 shift = anchor_pos - est.positions[anchor];
    for (auto& p : est.positions) p += shift;
    out.estimates.push_back(est);
    out.truth.t.push_back(t);
    out.truth.poses.push_back(cur);

    feedback = options.feedback == Feedback::Filter ? est.positions[c] : cur[c].position();
    if (!out.reference.empty()) {
      out.executed.push_back(cur[c].position());
      if ((out.reference[next_wp] - feedback).norm() < options.capture_radius) {
        ++next_wp;
        ++out.waypoints_reached;
        if (next_wp == out.reference.size()) {
          out.completed = true;
          break;
        }
      }
    }
  }

  if (!out.executed.empty()) out.ate = compute_ate(out.executed, out.reference);
  out.ape = compute_ape(out.estimates, out.truth, anchor, cfg.seed);
  return out;
}

}  // namespace relloc
