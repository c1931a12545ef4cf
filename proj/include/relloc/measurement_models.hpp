#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>

#include <Eigen/Core>

#include "relloc/core_types.hpp"

namespace relloc {

using Rng = std::mt19937_64;

/// Standard deviations of the synthetic sensors. Translation and heading odometry
/// noise are per step.
struct NoiseModel {
  double sigma_uwb = 0.1;
  double sigma_odom = 0.005;
  double sigma_odom_heading = 0.002;
  double sigma_det = 0.05;
  std::uint64_t rng_seed = 0;
  // When set, validate() also enforces sigma_odom < sigma_uwb / 10.
  bool paper_faithful = false;

  void validate() const;
};

/// Deterministic per-edge ranging bias: affine in distance plus a first harmonic in
/// each end's heading.
struct EdgeBias {
  double constant = 0.0;
  double distance_gain = 0.0;
  double cos_i = 0.0;
  double sin_i = 0.0;
  double cos_j = 0.0;
  double sin_j = 0.0;

  double evaluate(double distance, double heading_i, double heading_j) const;
};

class RangingBiasModel {
 public:
  explicit RangingBiasModel(double b_max = 1.0) : b_max_(b_max) {}

  void set(const Edge& edge, const EdgeBias& bias) { per_edge_[edge] = bias; }
  const std::map<Edge, EdgeBias>& edges() const { return per_edge_; }
  double b_max() const { return b_max_; }

  /// Bias for `edge`, with heading_i belonging to edge.i. Zero for unlisted edges.
  /// Clamped to [-b_max, b_max].
  double bias(const Edge& edge, double distance, double heading_i, double heading_j) const;

 private:
  double b_max_;
  std::map<Edge, EdgeBias> per_edge_;
};

struct UwbRange {
  Edge edge;
  double distance = 0.0;
  double t = 0.0;
};

/// Displacement over dt expressed in the common frame.
struct OdometryDelta {
  AgentId agent;
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double t = 0.0;
  double dt = 0.0;
};

/// Two agents reporting the same object. rel_i and rel_j are each agent's estimate
/// of the object offset from itself in the common frame; rp is the discrepancy of the
/// two resulting global object estimates.
struct CooperativeDetection {
  AgentId i;
  AgentId j;
  Vec2 rel_i = Vec2::Zero();
  Vec2 rel_j = Vec2::Zero();
  Vec2 rp = Vec2::Zero();
  double sigma = 0.0;
  int object_id = 0;    // object seen by i
  int object_id_j = 0;  // object seen by j; differs from object_id on a mis-association
  double t = 0.0;

  /// Measured p_i - p_j implied by the two object offsets.
  Vec2 relative_position() const { return rel_j - rel_i; }
};

struct DetectionConfig {
  double d_det_th = 0.15;
  double max_camera_range = 4.0;
  double fov_half_angle = 0.6;

  void validate() const;
};

/// True when `target` lies within range and field of view of `observer`.
bool is_visible(const Pose2& observer, const Vec2& target, const DetectionConfig& cfg);

/// Owns one RNG stream; the synthesized streams are a pure function of the seed and
/// the call sequence.
class MeasurementSynthesizer {
 public:
  explicit MeasurementSynthesizer(const NoiseModel& noise);

  const NoiseModel& noise() const { return noise_; }

  UwbRange synth_uwb(std::span<const Pose2> truth, const RangingGraph& graph, const Edge& edge,
                     const RangingBiasModel* bias, double t);

  OdometryDelta synth_odometry(AgentId agent, const Pose2& prev, const Pose2& cur, double dt, double t);

  std::optional<CooperativeDetection> synth_detection(std::span<const Pose2> truth, AgentId i, AgentId j,
                                                      std::span<const WorldObject> objects,
                                                      const DetectionConfig& cfg, double t);

 private:
  NoiseModel noise_;
  Rng rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// log N(observed; predicted, sigma^2).
double range_loglik(double predicted, double observed, double sigma);

}  // namespace relloc
