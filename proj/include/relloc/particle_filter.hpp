#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "relloc/core_types.hpp"
#include "relloc/measurement_models.hpp"

namespace relloc {

using StateMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// M particles over the stacked planar state of N agents. Row k holds
/// (x_0, y_0, ..., x_{N-1}, y_{N-1}).
struct ParticleSet {
  StateMatrix states;
  Eigen::VectorXd weights;

  std::size_t size() const { return static_cast<std::size_t>(states.rows()); }
  std::size_t agents() const { return static_cast<std::size_t>(states.cols() / 2); }
  Vec2 position(std::size_t particle, std::size_t agent) const {
    return {states(particle, 2 * agent), states(particle, 2 * agent + 1)};
  }
};

/// Block-diagonal process covariance, one 2x2 block per agent.
struct PredictNoise {
  std::vector<Eigen::Matrix2d> blocks;

  static PredictNoise zeros(std::size_t n_agents);
  static PredictNoise from_odometry(std::span<const OdometryDelta> odom, std::size_t n_agents);
};

struct RangeObservation {
  Edge edge;
  double distance = 0.0;
  double sigma = 0.1;
};

/// Observed p_i - p_j with isotropic per-axis sigma.
struct DetectionObservation {
  AgentId i;
  AgentId j;
  Vec2 relative = Vec2::Zero();
  double sigma = 0.05;
};

/// Stacked observations for one timestep: ranges first, then detection axes.
struct ObservationBatch {
  std::vector<RangeObservation> ranges;
  std::vector<DetectionObservation> detections;

  bool empty() const { return ranges.empty() && detections.empty(); }
  std::size_t rows() const { return ranges.size() + 2 * detections.size(); }

  /// Adds a cooperative detection if its measured discrepancy passes the gate.
  /// Returns false (and leaves the batch unchanged) otherwise.
  bool ingest(const CooperativeDetection& det, double d_det_th, double sigma);
};

struct StateEstimate {
  std::vector<Vec2> positions;
  double t = 0.0;
  // Empty means every agent is valid; otherwise one flag per agent.
  std::vector<bool> valid;

  bool is_valid(std::size_t agent) const { return valid.empty() || valid[agent]; }
};

/// Uniform draw of every coordinate over the arena, weights 1/M.
ParticleSet init_particles(std::size_t m, std::size_t n, const ArenaBounds& bounds, Rng& rng);

/// Gaussian draw around per-agent prior positions, weights 1/M.
ParticleSet init_particles_gaussian(std::size_t m, std::span<const Vec2> prior, double sigma, Rng& rng);

/// Shifts agent blocks by their odometry displacement and adds N(0, Q_i) noise.
/// Throws MissingAgentOdometry unless every agent has exactly one delta.
ParticleSet predict(const ParticleSet& ps, std::span<const OdometryDelta> odom, const PredictNoise& q, Rng& rng);

/// Adds N(0, Q_i) noise to every agent block; no displacement.
ParticleSet diffuse(const ParticleSet& ps, const PredictNoise& q, Rng& rng);

/// Predicted observation rows for every particle (M x batch.rows()), in batch order.
Eigen::MatrixXd meas_from_states(const ParticleSet& ps, const RangingGraph& graph, const ObservationBatch& batch);

struct WeightUpdate {
  ParticleSet particles;
  bool no_evidence = false;
  bool degenerate = false;
};

/// Per-particle Gaussian log-likelihood of the batch (no prior weight term).
std::vector<double> log_likelihoods(const ParticleSet& ps, const RangingGraph& graph, const ObservationBatch& batch);

/// Multiplies each weight by the Gaussian likelihood of the batch, computed in log space.
WeightUpdate update_weights(const ParticleSet& ps, const RangingGraph& graph, const ObservationBatch& batch);

/// Like update_weights, with the likelihood raised to `beta` in (0, 1].
WeightUpdate update_weights_tempered(const ParticleSet& ps, std::span<const double> loglik, double beta);

/// Largest beta in (0, 1] whose tempered weights keep ESS >= target * M (bisection).
double tempering_exponent(const Eigen::VectorXd& weights, std::span<const double> loglik, double target);

/// Systematic resampling followed by uniform re-draw of ceil(fraction * M) slots
/// picked with probability proportional to inverse pre-resample weight.
ParticleSet resample(const ParticleSet& ps, double reinit_fraction, const ArenaBounds& bounds, Rng& rng);

/// Indices selected by systematic resampling of `weights`.
std::vector<std::size_t> systematic_indices(const Eigen::VectorXd& weights, double offset);

StateEstimate estimate(const ParticleSet& ps, double t = 0.0);

double effective_sample_size(const Eigen::VectorXd& weights);
double weight_entropy(const Eigen::VectorXd& weights);

/// Translates every estimate so that `anchor` sits at `anchor_position`.
StateEstimate align_to_anchor(const StateEstimate& est, std::size_t anchor, const Vec2& anchor_position);

enum class InitMode { Uniform, GaussianPrior };

struct FilterConfig {
  std::size_t particles = 2000;
  double reinit_fraction = 0.01;
  // Extra isotropic process noise per step (std, meters) on top of odometry covariance.
  double q_floor = 0.0;
  // Roughening gain: jitter std = gain * spread * M^(-1/(2N)), spread measured on
  // coordinates relative to each particle's centroid.
  double roughening = 0.1;
  // 0 resamples every iteration; otherwise resample when ESS < threshold * M.
  double ess_threshold = 0.0;
  // Progressive correction: when > 0, the likelihood is tempered so the post-update
  // ESS stays at or above this fraction of M. 0 applies the full likelihood.
  double ess_target = 0.1;
  // Upper bound on tempered correction stages per step. Between stages the set is
  // resampled and roughened; the likelihood exponents of all stages sum to at most 1.
  std::size_t correction_stages = 5;
  // Rigid rotation jitter of each particle about its own centroid, the direction
  // ranges cannot observe. std = rotation_gain * (weighted rotational spread) + rotation_floor.
  double rotation_gain = 0.1;
  double rotation_floor = 0.01;
  // Extra shape jitter per unit of the last batch's misfit (weighted RMS residual in
  // excess of the observation sigma); lets a cloud that collapsed on a wrong shape move.
  double misfit_gain = 0.6;
  // Share of slots per step whose configuration is replaced by a random rigid
  // rotation (and, half the time, a mirror image) about its centroid.
  double rigid_reinit_fraction = 0.002;
  InitMode init = InitMode::Uniform;
  double init_sigma = 0.2;
  std::uint64_t seed = 1;

  void validate() const;
};

struct StepResult {
  StateEstimate estimate;
  double ess = 0.0;
  double entropy = 0.0;
  bool no_evidence = false;
  bool degenerate = false;
  bool resampled = false;
  double beta = 1.0;
};

class ParticleFilter {
 public:
  ParticleFilter(const FilterConfig& cfg, const RangingGraph& graph, const ArenaBounds& bounds,
                 std::span<const Vec2> prior = {});

  /// predict -> update -> estimate -> resample.
  StepResult step(std::span<const OdometryDelta> odom, const ObservationBatch& batch, double t);

  const ParticleSet& particles() const { return particles_; }
  const FilterConfig& config() const { return cfg_; }

 private:
  PredictNoise process_noise(std::span<const OdometryDelta> odom) const;
  void roughen();
  void rigid_reinit();
  double correct(const ObservationBatch& batch, StepResult& result);

  FilterConfig cfg_;
  RangingGraph graph_;
  ArenaBounds bounds_;
  Rng rng_;
  ParticleSet particles_;
  double misfit_ = 0.0;
};

}  // namespace relloc
