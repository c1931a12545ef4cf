#include "relloc/particle_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "relloc/parallel.hpp"

namespace relloc {

namespace {

constexpr double kInverseWeightFloor = 1e-12;
constexpr std::size_t kParallelChunk = 4096;

// Square root of a symmetric PSD 2x2 matrix; tolerates singular input.
Eigen::Matrix2d psd_sqrt(const Eigen::Matrix2d& cov) {
  const Eigen::Matrix2d sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym);
  const Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void check_batch_shape(const ObservationBatch& batch, const RangingGraph& graph, std::size_t n_agents) {
  for (const auto& r : batch.ranges) {
    if (r.edge.j >= n_agents || !graph.contains(r.edge)) {
      throw Error(ErrorCode::ShapeMismatch,
                  "range edge (" + std::to_string(r.edge.i) + "," + std::to_string(r.edge.j) + ") not in graph");
    }
  }
  for (const auto& d : batch.detections) {
    if (d.i.value >= n_agents || d.j.value >= n_agents || d.i == d.j) {
      throw Error(ErrorCode::ShapeMismatch, "detection pair out of range");
    }
  }
}

void check_sigmas(const ObservationBatch& batch) {
  for (const auto& r : batch.ranges) {
    if (!(r.sigma > 0.0)) throw Error(ErrorCode::NonPositiveSigma, "range sigma must be > 0");
  }
  for (const auto& d : batch.detections) {
    if (!(d.sigma > 0.0)) throw Error(ErrorCode::NonPositiveSigma, "detection sigma must be > 0");
  }
}

}  // namespace

PredictNoise PredictNoise::zeros(std::size_t n_agents) {
  return PredictNoise{std::vector<Eigen::Matrix2d>(n_agents, Eigen::Matrix2d::Zero())};
}

PredictNoise PredictNoise::from_odometry(std::span<const OdometryDelta> odom, std::size_t n_agents) {
  PredictNoise q = zeros(n_agents);
  for (const auto& o : odom) {
    if (o.agent.value < n_agents) q.blocks[o.agent.value] = o.covariance;
  }
  return q;
}

bool ObservationBatch::ingest(const CooperativeDetection& det, double d_det_th, double sigma) {
  if (!det.rp.allFinite() || !det.relative_position().allFinite()) return false;
  if (!(det.rp.norm() < d_det_th)) return false;
  detections.push_back(DetectionObservation{det.i, det.j, det.relative_position(), sigma});
  return true;
}

ParticleSet init_particles(std::size_t m, std::size_t n, const ArenaBounds& bounds, Rng& rng) {
  if (m == 0 || n == 0) throw Error(ErrorCode::InvalidArgument, "init_particles requires M >= 1 and N >= 1");
  ParticleSet ps;
  ps.states.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(2 * n));
  std::uniform_real_distribution<double> ux(bounds.x_min(), bounds.x_max());
  std::uniform_real_distribution<double> uy(bounds.y_min(), bounds.y_max());
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      ps.states(k, 2 * i) = ux(rng);
      ps.states(k, 2 * i + 1) = uy(rng);
    }
  }
  ps.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m));
  return ps;
}

ParticleSet init_particles_gaussian(std::size_t m, std::span<const Vec2> prior, double sigma, Rng& rng) {
  if (m == 0 || prior.empty()) throw Error(ErrorCode::InvalidArgument, "init_particles_gaussian requires M, N >= 1");
  if (sigma < 0.0) throw Error(ErrorCode::NonPositiveSigma, "init sigma must be >= 0");
  std::normal_distribution<double> normal(0.0, 1.0);
  ParticleSet ps;
  ps.states.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(2 * prior.size()));
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < prior.size(); ++i) {
      ps.states(k, 2 * i) = prior[i].x() + sigma * normal(rng);
      ps.states(k, 2 * i + 1) = prior[i].y() + sigma * normal(rng);
    }
  }
  ps.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m));
  return ps;
}

ParticleSet diffuse(const ParticleSet& ps, const PredictNoise& q, Rng& rng) {
  const std::size_t n = ps.agents();
  if (q.blocks.size() != n) throw Error(ErrorCode::ShapeMismatch, "process noise blocks do not match agent count");
  std::vector<Eigen::Matrix2d> roots;
  roots.reserve(n);
  for (const auto& block : q.blocks) roots.push_back(psd_sqrt(block));

  std::normal_distribution<double> normal(0.0, 1.0);
  ParticleSet out = ps;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d z(normal(rng), normal(rng));
      const Eigen::Vector2d noise = roots[i] * z;
      out.states(k, 2 * i) += noise.x();
      out.states(k, 2 * i + 1) += noise.y();
    }
  }
  return out;
}

ParticleSet predict(const ParticleSet& ps, std::span<const OdometryDelta> odom, const PredictNoise& q, Rng& rng) {
  const std::size_t n = ps.agents();
  std::vector<const OdometryDelta*> by_agent(n, nullptr);
  for (const auto& o : odom) {
    if (o.agent.value < n) by_agent[o.agent.value] = &o;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (by_agent[i] == nullptr) {
      throw Error(ErrorCode::MissingAgentOdometry, "no odometry for agent " + std::to_string(i));
    }
  }
  ParticleSet out = diffuse(ps, q, rng);
  for (std::size_t i = 0; i < n; ++i) {
    out.states.col(static_cast<Eigen::Index>(2 * i)).array() += by_agent[i]->dx;
    out.states.col(static_cast<Eigen::Index>(2 * i + 1)).array() += by_agent[i]->dy;
  }
  return out;
}

Eigen::MatrixXd meas_from_states(const ParticleSet& ps, const RangingGraph& graph, const ObservationBatch& batch) {
  check_batch_shape(batch, graph, ps.agents());
  const auto m = static_cast<Eigen::Index>(ps.size());
  Eigen::MatrixXd pred(m, static_cast<Eigen::Index>(batch.rows()));
  parallel_for(
      ps.size(),
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
          const auto row = static_cast<Eigen::Index>(k);
          Eigen::Index c = 0;
          for (const auto& r : batch.ranges) {
            pred(row, c++) = (ps.position(k, r.edge.i) - ps.position(k, r.edge.j)).norm();
          }
          for (const auto& d : batch.detections) {
            const Vec2 diff = ps.position(k, d.i.value) - ps.position(k, d.j.value);
            pred(row, c++) = diff.x();
            pred(row, c++) = diff.y();
          }
        }
      },
      kParallelChunk);
  return pred;
}

std::vector<double> log_likelihoods(const ParticleSet& ps, const RangingGraph& graph, const ObservationBatch& batch) {
  check_sigmas(batch);
  const Eigen::MatrixXd pred = meas_from_states(ps, graph, batch);

  std::vector<double> observed;
  std::vector<double> sigmas;
  observed.reserve(batch.rows());
  sigmas.reserve(batch.rows());
  for (const auto& r : batch.ranges) {
    observed.push_back(r.distance);
    sigmas.push_back(r.sigma);
  }
  for (const auto& d : batch.detections) {
    observed.push_back(d.relative.x());
    observed.push_back(d.relative.y());
    sigmas.push_back(d.sigma);
    sigmas.push_back(d.sigma);
  }

  std::vector<double> ll(ps.size());
  parallel_for(
      ps.size(),
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
          double acc = 0.0;
          for (std::size_t r = 0; r < observed.size(); ++r) {
            acc += range_loglik(pred(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(r)), observed[r],
                                sigmas[r]);
          }
          ll[k] = acc;
        }
      },
      kParallelChunk);
  return ll;
}

namespace {

// log w_k + beta * ll_k, max-shifted and normalized. Returns false if nothing is finite.
bool tempered_weights(const Eigen::VectorXd& prior, std::span<const double> ll, double beta, Eigen::VectorXd& out) {
  const auto m = static_cast<std::size_t>(prior.size());
  std::vector<double> logw(m);
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < m; ++k) {
    logw[k] = std::log(prior(static_cast<Eigen::Index>(k))) + beta * ll[k];
    if (std::isfinite(logw[k])) max_log = std::max(max_log, logw[k]);
  }
  if (!std::isfinite(max_log)) return false;
  out.resize(prior.size());
  double total = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double w = std::isnan(logw[k]) ? 0.0 : std::exp(logw[k] - max_log);
    out(static_cast<Eigen::Index>(k)) = w;
    total += w;
  }
  out /= total;
  return true;
}

}  // namespace

WeightUpdate update_weights_tempered(const ParticleSet& ps, std::span<const double> loglik, double beta) {
  if (loglik.size() != ps.size()) throw Error(ErrorCode::ShapeMismatch, "log-likelihood count differs from M");
  if (!(beta > 0.0 && beta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "tempering exponent must lie in (0, 1]");
  WeightUpdate result{ps, false, false};
  Eigen::VectorXd w;
  if (!tempered_weights(ps.weights, loglik, beta, w)) {
    result.particles.weights.setConstant(1.0 / static_cast<double>(ps.size()));
    result.degenerate = true;
    return result;
  }
  result.particles.weights = std::move(w);
  return result;
}

WeightUpdate update_weights(const ParticleSet& ps, const RangingGraph& graph, const ObservationBatch& batch) {
  if (batch.empty()) return WeightUpdate{ps, true, false};
  return update_weights_tempered(ps, log_likelihoods(ps, graph, batch), 1.0);
}

double tempering_exponent(const Eigen::VectorXd& weights, std::span<const double> loglik, double target) {
  const double m = static_cast<double>(weights.size());
  Eigen::VectorXd w;
  auto ess_at = [&](double beta) { return tempered_weights(weights, loglik, beta, w) ? effective_sample_size(w) : 0.0; };
  if (ess_at(1.0) >= target * m) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ess_at(mid) >= target * m) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::max(lo, 1e-12);
}

std::vector<std::size_t> systematic_indices(const Eigen::VectorXd& weights, double offset) {
  const auto m = static_cast<std::size_t>(weights.size());
  std::vector<std::size_t> idx(m);
  const double step = 1.0 / static_cast<double>(m);
  double cumulative = weights(0);
  std::size_t src = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const double u = (offset + static_cast<double>(j)) * step;
    while (u > cumulative && src + 1 < m) {
      ++src;
      cumulative += weights(static_cast<Eigen::Index>(src));
    }
    idx[j] = src;
  }
  return idx;
}

ParticleSet resample(const ParticleSet& ps, double reinit_fraction, const ArenaBounds& bounds, Rng& rng) {
  if (reinit_fraction < 0.0 || reinit_fraction > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "reinit_fraction must lie in [0, 1]");
  }
  const std::size_t m = ps.size();
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Slots to re-draw, chosen without replacement with probability proportional to
  // inverse pre-resample weight (Efraimidis-Spirakis keys).
  const auto n_reinit = std::min<std::size_t>(
      m, static_cast<std::size_t>(std::ceil(reinit_fraction * static_cast<double>(m) - 1e-9)));
  std::vector<std::size_t> reinit_slots;
  if (n_reinit > 0) {
    std::vector<std::pair<double, std::size_t>> keys(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double inv = 1.0 / std::max(ps.weights(static_cast<Eigen::Index>(k)), kInverseWeightFloor);
      const double u = 1.0 - unit(rng);  // (0, 1]
      keys[k] = {std::log(u) / inv, k};
    }
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n_reinit), keys.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    for (std::size_t r = 0; r < n_reinit; ++r) reinit_slots.push_back(keys[r].second);
  }

  const auto idx = systematic_indices(ps.weights, unit(rng));
  ParticleSet out;
  out.states.resize(ps.states.rows(), ps.states.cols());
  for (std::size_t j = 0; j < m; ++j) {
    out.states.row(static_cast<Eigen::Index>(j)) = ps.states.row(static_cast<Eigen::Index>(idx[j]));
  }

  std::uniform_real_distribution<double> ux(bounds.x_min(), bounds.x_max());
  std::uniform_real_distribution<double> uy(bounds.y_min(), bounds.y_max());
  for (std::size_t slot : reinit_slots) {
    for (std::size_t i = 0; i < ps.agents(); ++i) {
      out.states(static_cast<Eigen::Index>(slot), static_cast<Eigen::Index>(2 * i)) = ux(rng);
      out.states(static_cast<Eigen::Index>(slot), static_cast<Eigen::Index>(2 * i + 1)) = uy(rng);
    }
  }
  out.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m));
  return out;
}

StateEstimate estimate(const ParticleSet& ps, double t) {
  const Eigen::RowVectorXd mean = ps.weights.transpose() * ps.states;
  StateEstimate est;
  est.t = t;
  est.positions.reserve(ps.agents());
  for (std::size_t i = 0; i < ps.agents(); ++i) {
    est.positions.emplace_back(mean(static_cast<Eigen::Index>(2 * i)), mean(static_cast<Eigen::Index>(2 * i + 1)));
  }
  return est;
}

double effective_sample_size(const Eigen::VectorXd& weights) {
  const double total = weights.sum();
  if (total <= 0.0) return 0.0;
  return 1.0 / (weights / total).squaredNorm();
}

double weight_entropy(const Eigen::VectorXd& weights) {
  double h = 0.0;
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    const double w = weights(k);
    if (w > 0.0) h -= w * std::log(w);
  }
  return h;
}

StateEstimate align_to_anchor(const StateEstimate& est, std::size_t anchor, const Vec2& anchor_position) {
  if (anchor >= est.positions.size()) throw Error(ErrorCode::IndexOutOfRange, "anchor agent out of range");
  StateEstimate out = est;
  const Vec2 shift = anchor_position - est.positions[anchor];
  for (auto& p : out.positions) p += shift;
  return out;
}

void FilterConfig::validate() const {
  if (particles == 0) throw Error(ErrorCode::InvalidConfig, "filter: particles must be >= 1");
  if (reinit_fraction < 0.0 || reinit_fraction > 1.0) {
    throw Error(ErrorCode::InvalidConfig, "filter: reinit_fraction must lie in [0, 1]");
  }
  if (q_floor < 0.0 || roughening < 0.0 || init_sigma < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "filter: q_floor, roughening and init_sigma must be >= 0");
  }
  if (ess_threshold < 0.0 || ess_threshold > 1.0) {
    throw Error(ErrorCode::InvalidConfig, "filter: ess_threshold must lie in [0, 1]");
  }
  if (ess_target < 0.0 || ess_target > 1.0) {
    throw Error(ErrorCode::InvalidConfig, "filter: ess_target must lie in [0, 1]");
  }
  if (rigid_reinit_fraction < 0.0 || rigid_reinit_fraction > 1.0) {
    throw Error(ErrorCode::InvalidConfig, "filter: rigid_reinit_fraction must lie in [0, 1]");
  }
  if (correction_stages == 0) throw Error(ErrorCode::InvalidConfig, "filter: correction_stages must be >= 1");
}

ParticleFilter::ParticleFilter(const FilterConfig& cfg, const RangingGraph& graph, const ArenaBounds& bounds,
                               std::span<const Vec2> prior)
    : cfg_(cfg), graph_(graph), bounds_(bounds), rng_(cfg.seed) {
  cfg_.validate();
  if (cfg_.init == InitMode::GaussianPrior) {
    if (prior.size() != graph_.n_agents()) {
      throw Error(ErrorCode::InvalidConfig, "filter: gaussian_prior init needs one prior position per agent");
    }
    particles_ = init_particles_gaussian(cfg_.particles, prior, cfg_.init_sigma, rng_);
  } else {
    particles_ = init_particles(cfg_.particles, graph_.n_agents(), bounds_, rng_);
  }
}

PredictNoise ParticleFilter::process_noise(std::span<const OdometryDelta> odom) const {
  PredictNoise q = PredictNoise::from_odometry(odom, graph_.n_agents());
  const double floor_var = cfg_.q_floor * cfg_.q_floor;
  for (auto& block : q.blocks) block += Eigen::Matrix2d::Identity() * floor_var;
  return q;
}

namespace {

// Orthogonal map (rotation, or rotation after a mirror) taking `ref` closest to `cfg`;
// both are centered n x 2 configurations stored as rows of (x0, y0, x1, y1, ...).
Eigen::Matrix2d best_orthogonal(const Eigen::RowVectorXd& ref, const Eigen::RowVectorXd& cfg, double& angle) {
  double dot = 0.0;
  double cross = 0.0;
  double dot_m = 0.0;
  double cross_m = 0.0;
  for (Eigen::Index i = 0; i + 1 < ref.size(); i += 2) {
    const double ax = ref(i);
    const double ay = ref(i + 1);
    const double bx = cfg(i);
    const double by = cfg(i + 1);
    dot += ax * bx + ay * by;
    cross += ax * by - ay * bx;
    dot_m += ax * bx - ay * by;
    cross_m += ax * by + ay * bx;
  }
  Eigen::Matrix2d r;
  if (std::hypot(dot, cross) >= std::hypot(dot_m, cross_m)) {
    angle = std::atan2(cross, dot);
    r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  } else {
    angle = std::atan2(cross_m, dot_m);
    r << std::cos(angle), std::sin(angle), std::sin(angle), -std::cos(angle);
  }
  return r;
}

double weighted_median(std::vector<std::pair<double, double>>& vw) {
  std::sort(vw.begin(), vw.end());
  double total = 0.0;
  for (const auto& [v, w] : vw) total += w;
  double acc = 0.0;
  for (const auto& [v, w] : vw) {
    acc += w;
    if (acc >= 0.5 * total) return v;
  }
  return vw.back().first;
}

// Weighted MAD scaled to a Gaussian standard deviation. Insensitive to the few
// reinjected particles that sit far from the bulk of the cloud.
double robust_spread(const Eigen::Ref<const Eigen::VectorXd>& values, const Eigen::VectorXd& weights) {
  std::vector<std::pair<double, double>> vw(static_cast<std::size_t>(values.size()));
  for (Eigen::Index k = 0; k < values.size(); ++k) vw[static_cast<std::size_t>(k)] = {values(k), weights(k)};
  const double med = weighted_median(vw);
  for (auto& [v, w] : vw) v = std::abs(v - med);
  return 1.4826 * weighted_median(vw);
}

}  // namespace

void ParticleFilter::roughen() {
  const std::size_t n = graph_.n_agents();
  const bool shape = cfg_.roughening > 0.0 || (cfg_.misfit_gain > 0.0 && misfit_ > 0.0);
  const bool turn = cfg_.rotation_gain > 0.0 || cfg_.rotation_floor > 0.0;
  if (n < 2 || (!shape && !turn)) return;
  const std::size_t m = particles_.size();
  const auto cols = static_cast<Eigen::Index>(2 * n);
  const auto& w = particles_.weights;

  // Centered configurations.
  StateMatrix rel = particles_.states;
  std::vector<Vec2> centroid(m, Vec2::Zero());
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < n; ++i) centroid[k] += particles_.position(k, i);
    centroid[k] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      rel(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(2 * i)) -= centroid[k].x();
      rel(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(2 * i + 1)) -= centroid[k].y();
    }
  }

  // Generalized Procrustes: frame of each particle relative to the weighted mean shape.
  Eigen::Index best = 0;
  w.maxCoeff(&best);
  Eigen::RowVectorXd ref = rel.row(best);
  std::vector<Eigen::Matrix2d> frame(m);
  std::vector<double> angle(m, 0.0);
  StateMatrix aligned(rel.rows(), cols);
  for (int pass = 0; pass < 3; ++pass) {
    for (std::size_t k = 0; k < m; ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      frame[k] = best_orthogonal(ref, rel.row(row), angle[k]);
      for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<Eigen::Index>(2 * i);
        const Vec2 v = frame[k].transpose() * Vec2(rel(row, c), rel(row, c + 1));
        aligned(row, c) = v.x();
        aligned(row, c + 1) = v.y();
      }
    }
    ref = w.transpose() * aligned;
  }

  Eigen::RowVectorXd sd = Eigen::RowVectorXd::Zero(cols);
  if (shape) {
    const double shrink = std::pow(static_cast<double>(m), -1.0 / static_cast<double>(2 * n));
    for (Eigen::Index c = 0; c < cols; ++c) {
      sd(c) = cfg_.roughening * shrink * robust_spread(aligned.col(c), w) + cfg_.misfit_gain * misfit_;
    }
  }
  double rot_sd = 0.0;
  if (turn) {
    const Eigen::Map<const Eigen::VectorXd> angles(angle.data(), static_cast<Eigen::Index>(m));
    rot_sd = cfg_.rotation_gain * robust_spread(angles, w) + cfg_.rotation_floor;
  }

  // Infinitesimal rotation of the mean shape; shape jitter is kept orthogonal to it
  // so that only the explicit rotation move changes a particle's orientation.
  Eigen::RowVectorXd spin_dir(cols);
  for (std::size_t i = 0; i < n; ++i) {
    spin_dir(static_cast<Eigen::Index>(2 * i)) = -ref(static_cast<Eigen::Index>(2 * i + 1));
    spin_dir(static_cast<Eigen::Index>(2 * i + 1)) = ref(static_cast<Eigen::Index>(2 * i));
  }
  const double spin_norm2 = spin_dir.squaredNorm();

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::RowVectorXd eps(cols);
  for (std::size_t k = 0; k < m; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    Eigen::Matrix2d r = frame[k];
    if (turn) {
      const double a = rot_sd * normal(rng_);
      Eigen::Matrix2d spin;
      spin << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
      r = spin * r;
    }
    eps.setZero();
    if (shape) {
      for (Eigen::Index c = 0; c < cols; ++c) eps(c) = sd(c) * normal(rng_);
      if (spin_norm2 > 0.0) eps -= (eps.dot(spin_dir) / spin_norm2) * spin_dir;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<Eigen::Index>(2 * i);
      const Vec2 v(aligned(row, c) + eps(c), aligned(row, c + 1) + eps(c + 1));
      const Vec2 p = centroid[k] + r * v;
      particles_.states(row, c) = p.x();
      particles_.states(row, c + 1) = p.y();
    }
  }
}

void ParticleFilter::rigid_reinit() {
  const std::size_t n = graph_.n_agents();
  const std::size_t m = particles_.size();
  const auto count = static_cast<std::size_t>(std::ceil(cfg_.rigid_reinit_fraction * static_cast<double>(m) - 1e-9));
  if (count == 0 || n < 2) return;
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  std::uniform_real_distribution<double> turn(-kPi, kPi);
  std::bernoulli_distribution mirror(0.5);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t k = pick(rng_);
    const double a = turn(rng_);
    const bool flip = mirror(rng_);
    const double ca = std::cos(a);
    const double sa = std::sin(a);
    Vec2 c = Vec2::Zero();
    for (std::size_t i = 0; i < n; ++i) c += particles_.position(k, i);
    c /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      Vec2 d = particles_.position(k, i) - c;
      if (flip) d.y() = -d.y();
      particles_.states(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(2 * i)) = c.x() + ca * d.x() - sa * d.y();
      particles_.states(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(2 * i + 1)) = c.y() + sa * d.x() + ca * d.y();
    }
  }
}

namespace {

// Posterior-weighted RMS residual in excess of the modelled noise, in meters.
double batch_misfit(const ObservationBatch& batch, std::span<const double> ll, const Eigen::VectorXd& weights) {
  double norm_const = 0.0;
  double sigma_sum = 0.0;
  for (const auto& r : batch.ranges) {
    norm_const += std::log(r.sigma * std::sqrt(2.0 * kPi));
    sigma_sum += r.sigma;
  }
  for (const auto& d : batch.detections) {
    norm_const += 2.0 * std::log(d.sigma * std::sqrt(2.0 * kPi));
    sigma_sum += 2.0 * d.sigma;
  }
  const double rows = static_cast<double>(batch.rows());
  double z2 = 0.0;
  for (std::size_t k = 0; k < ll.size(); ++k) {
    if (std::isfinite(ll[k])) z2 += weights(static_cast<Eigen::Index>(k)) * (-2.0 * (ll[k] + norm_const) / rows);
  }
  return (sigma_sum / rows) * std::sqrt(std::max(z2 - 1.0, 0.0));
}

}  // namespace

double ParticleFilter::correct(const ObservationBatch& batch, StepResult& result) {
  double used = 0.0;
  for (std::size_t stage = 0; stage < cfg_.correction_stages; ++stage) {
    const auto ll = log_likelihoods(particles_, graph_, batch);
    double beta = 1.0 - used;
    if (cfg_.ess_target > 0.0) beta = std::min(beta, tempering_exponent(particles_.weights, ll, cfg_.ess_target));
    WeightUpdate upd = update_weights_tempered(particles_, ll, beta);
    particles_ = std::move(upd.particles);
    result.degenerate = result.degenerate || upd.degenerate;
    used += beta;
    if (used >= 1.0 - 1e-12 || stage + 1 == cfg_.correction_stages) {
      misfit_ = batch_misfit(batch, ll, particles_.weights);
      break;
    }
    // Intermediate move: plain resampling plus roughening, no reinjection.
    particles_ = resample(particles_, 0.0, bounds_, rng_);
    roughen();
  }
  return std::min(used, 1.0);
}

StepResult ParticleFilter::step(std::span<const OdometryDelta> odom, const ObservationBatch& batch, double t) {
  const PredictNoise q = process_noise(odom);
  particles_ = predict(particles_, odom, q, rng_);
  roughen();

  StepResult result;
  result.no_evidence = batch.empty();
  if (!batch.empty()) result.beta = correct(batch, result);
  result.ess = effective_sample_size(particles_.weights);
  result.entropy = weight_entropy(particles_.weights);
  result.estimate = estimate(particles_, t);

  const double m = static_cast<double>(particles_.size());
  if (cfg_.ess_threshold <= 0.0 || result.ess < cfg_.ess_threshold * m) {
    particles_ = resample(particles_, cfg_.reinit_fraction, bounds_, rng_);
    rigid_reinit();
    result.resampled = true;
  }
  return result;
}

}  // namespace relloc
