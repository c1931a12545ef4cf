#include "relloc/measurement_models.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace relloc {

void NoiseModel::validate() const {
  const std::pair<const char*, double> sigmas[] = {
      {"sigma_uwb", sigma_uwb}, {"sigma_odom", sigma_odom}, {"sigma_odom_heading", sigma_odom_heading},
      {"sigma_det", sigma_det}};
  for (const auto& [name, v] : sigmas) {
    if (!(v >= 0.0)) throw Error(ErrorCode::InvalidConfig, std::string("noise.") + name + ": must be >= 0");
  }
  if (paper_faithful && !(sigma_odom < sigma_uwb / 10.0)) {
    throw Error(ErrorCode::InvalidConfig, "noise: paper_faithful requires sigma_odom < sigma_uwb / 10");
  }
}

double EdgeBias::evaluate(double distance, double heading_i, double heading_j) const {
  return constant + distance_gain * distance + cos_i * std::cos(heading_i) + sin_i * std::sin(heading_i) +
         cos_j * std::cos(heading_j) + sin_j * std::sin(heading_j);
}

double RangingBiasModel::bias(const Edge& edge, double distance, double heading_i, double heading_j) const {
  const auto it = per_edge_.find(edge);
  if (it == per_edge_.end()) return 0.0;
  return std::clamp(it->second.evaluate(distance, heading_i, heading_j), -b_max_, b_max_);
}

void DetectionConfig::validate() const {
  if (!(d_det_th > 0.0) || !(max_camera_range > 0.0) || !(fov_half_angle > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "detection: d_det_th, max_camera_range and fov_half_angle must be > 0");
  }
}

bool is_visible(const Pose2& observer, const Vec2& target, const DetectionConfig& cfg) {
  const Vec2 offset = target - observer.position();
  const double dist = offset.norm();
  if (dist > cfg.max_camera_range) return false;
  if (dist == 0.0) return true;
  const double bearing = std::atan2(offset.y(), offset.x());
  return std::abs(wrap_angle(bearing - observer.theta())) <= cfg.fov_half_angle;
}

MeasurementSynthesizer::MeasurementSynthesizer(const NoiseModel& noise) : noise_(noise), rng_(noise.rng_seed) {
  noise_.validate();
}

UwbRange MeasurementSynthesizer::synth_uwb(std::span<const Pose2> truth, const RangingGraph& graph, const Edge& edge,
                                           const RangingBiasModel* bias, double t) {
  if (!graph.contains(edge) || edge.j >= truth.size()) {
    throw Error(ErrorCode::EdgeNotInGraph,
                "edge (" + std::to_string(edge.i) + "," + std::to_string(edge.j) + ") is not in the ranging graph");
  }
  const Pose2& a = truth[edge.i];
  const Pose2& b = truth[edge.j];
  const double d = true_range(a, b);
  double measured = d;
  if (bias != nullptr) measured += bias->bias(edge, d, a.theta(), b.theta());
  measured += noise_.sigma_uwb * normal_(rng_);
  return UwbRange{edge, std::max(0.0, measured), t};
}

OdometryDelta MeasurementSynthesizer::synth_odometry(AgentId agent, const Pose2& prev, const Pose2& cur, double dt,
                                                     double t) {
  if (!(dt > 0.0)) throw Error(ErrorCode::NonPositiveDt, "odometry dt must be > 0");
  OdometryDelta od;
  od.agent = agent;
  od.dx = cur.x() - prev.x() + noise_.sigma_odom * normal_(rng_);
  od.dy = cur.y() - prev.y() + noise_.sigma_odom * normal_(rng_);
  od.dtheta = wrap_angle(cur.theta() - prev.theta()) + noise_.sigma_odom_heading * normal_(rng_);
  const double var = noise_.sigma_odom * noise_.sigma_odom;
  od.covariance = Eigen::Matrix2d::Identity() * var;
  od.t = t;
  od.dt = dt;
  return od;
}

std::optional<CooperativeDetection> MeasurementSynthesizer::synth_detection(std::span<const Pose2> truth, AgentId i,
                                                                            AgentId j,
                                                                            std::span<const WorldObject> objects,
                                                                            const DetectionConfig& cfg, double t) {
  if (i.value >= truth.size() || j.value >= truth.size() || i == j) {
    throw Error(ErrorCode::IndexOutOfRange, "detection pair out of range");
  }
  const Pose2& pi = truth[i.value];
  const Pose2& pj = truth[j.value];

  // Pick the association (object seen by i, object seen by j) whose noiseless
  // discrepancy is smallest and below the gate.
  const WorldObject* best_i = nullptr;
  const WorldObject* best_j = nullptr;
  double best_norm = cfg.d_det_th;
  for (const auto& oi : objects) {
    if (!is_visible(pi, oi.position, cfg)) continue;
    for (const auto& oj : objects) {
      if (!is_visible(pj, oj.position, cfg)) continue;
      const double n = (oi.position - oj.position).norm();
      if (n < best_norm) {
        best_norm = n;
        best_i = &oi;
        best_j = &oj;
      }
    }
  }
  if (best_i == nullptr) return std::nullopt;

  CooperativeDetection det;
  det.i = i;
  det.j = j;
  det.rel_i = best_i->position - pi.position();
  det.rel_j = best_j->position - pj.position();
  det.rel_i.x() += noise_.sigma_det * normal_(rng_);
  det.rel_i.y() += noise_.sigma_det * normal_(rng_);
  det.rel_j.x() += noise_.sigma_det * normal_(rng_);
  det.rel_j.y() += noise_.sigma_det * normal_(rng_);
  det.rp = (det.rel_i + pi.position()) - (det.rel_j + pj.position());
  det.sigma = noise_.sigma_det;
  det.object_id = best_i->id;
  det.object_id_j = best_j->id;
  det.t = t;
  return det;
}

double range_loglik(double predicted, double observed, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::NonPositiveSigma, "likelihood sigma must be > 0");
  const double z = (observed - predicted) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * kPi);
}

}  // namespace relloc
