#include "relloc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace relloc {

std::string_view to_string(FilterMode mode) {
  switch (mode) {
    case FilterMode::PfU: return "pf_u";
    case FilterMode::PfUL: return "pf_ul";
    case FilterMode::PfULV: return "pf_ulv";
  }
  return "pf_u";
}

FilterMode filter_mode_from_string(std::string_view name) {
  if (name == "pf_u") return FilterMode::PfU;
  if (name == "pf_ul") return FilterMode::PfUL;
  if (name == "pf_ulv") return FilterMode::PfULV;
  throw Error(ErrorCode::InvalidArgument, "unknown mode '" + std::string(name) + "'; valid modes: pf_u, pf_ul, pf_ulv");
}

std::vector<HeadingTrack> integrate_headings(const ScenarioStreams& streams, std::size_t n_agents) {
  std::vector<HeadingTrack> tracks(n_agents);
  std::vector<double> heading(n_agents, 0.0);
  for (std::size_t i = 0; i < n_agents && i < streams.initial_headings.size(); ++i) heading[i] = streams.initial_headings[i];
  const double t0 = streams.truth.t.empty() ? 0.0 : streams.truth.t.front();
  for (std::size_t i = 0; i < n_agents; ++i) tracks[i].push(t0, heading[i]);
  for (const auto& o : streams.odometry) {
    if (o.agent.value >= n_agents) continue;
    heading[o.agent.value] = wrap_angle(heading[o.agent.value] + o.dtheta);
    tracks[o.agent.value].push(o.t, heading[o.agent.value]);
  }
  return tracks;
}

namespace {

std::size_t nearest_truth(const GroundTruthLog& truth, double t) {
  const auto it = std::lower_bound(truth.t.begin(), truth.t.end(), t);
  if (it == truth.t.end()) return truth.size() - 1;
  const auto k = static_cast<std::size_t>(it - truth.t.begin());
  if (k > 0 && std::abs(truth.t[k - 1] - t) < std::abs(truth.t[k] - t)) return k - 1;
  return k;
}

}  // namespace

std::vector<double> true_ranges(const ScenarioStreams& streams, std::span<const UwbRange> ranges) {
  if (streams.truth.size() == 0) throw Error(ErrorCode::InvalidArgument, "streams carry no ground truth");
  std::vector<double> out;
  out.reserve(ranges.size());
  for (const auto& r : ranges) {
    const auto& poses = streams.truth.poses[nearest_truth(streams.truth, r.t)];
    out.push_back(true_range(poses.at(r.edge.i), poses.at(r.edge.j)));
  }
  return out;
}

FilterRun run_filter(const ScenarioStreams& streams, const RangingGraph& graph, const ArenaBounds& bounds,
                     const PipelineConfig& cfg, FilterMode mode, const std::map<Edge, CorrectorModel>* models,
                     std::span<const Vec2> prior) {
  const std::size_t n = graph.n_agents();
  if (n == 0 || streams.odometry.size() % n != 0) {
    throw Error(ErrorCode::ShapeMismatch, "odometry stream does not hold one delta per agent per step");
  }

  std::vector<UwbRange> ranges = streams.ranges;
  if (mode != FilterMode::PfU) {
    if (models == nullptr) throw Error(ErrorCode::InvalidArgument, "corrector models required for mode " + std::string(to_string(mode)));
    const auto headings = integrate_headings(streams, n);
    ranges = apply_corrector_stream(*models, streams.ranges, headings);
  }

  ParticleFilter pf(cfg.filter, graph, bounds, prior);
  FilterRun run;
  const std::size_t steps = streams.odometry.size() / n;
  std::size_t ri = 0;
  std::size_t di = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    const std::span<const OdometryDelta> odom(streams.odometry.data() + k * n, n);
    const double t = odom.front().t;
    const double half = 0.5 * odom.front().dt;

    ObservationBatch batch;
    while (ri < ranges.size() && ranges[ri].t < t - half) ++ri;
    while (ri < ranges.size() && ranges[ri].t <= t + half) {
      batch.ranges.push_back({ranges[ri].edge, ranges[ri].distance, cfg.sigma_uwb});
      ++ri;
    }
    if (mode == FilterMode::PfULV) {
      while (di < streams.detections.size() && streams.detections[di].t < t - half) ++di;
      while (di < streams.detections.size() && streams.detections[di].t <= t + half) {
        if (batch.ingest(streams.detections[di], cfg.d_det_th, cfg.sigma_det)) {
          ++run.detections_used;
        } else {
          ++run.detections_rejected;
        }
        ++di;
      }
    }
    auto result = pf.step(odom, batch, t);
    run.estimates.push_back(result.estimate);
    run.diagnostics.push_back(std::move(result));
  }
  return run;
}

CorrectorTraining train_edge_corrector(const ScenarioStreams& streams, std::size_t n_agents, const Edge& edge,
                                       std::size_t n_steps, double ridge_lambda, double holdout_fraction) {
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
    throw Error(ErrorCode::InvalidArgument, "holdout_fraction must lie in [0, 1)");
  }
  const auto headings = integrate_headings(streams, n_agents);
  const auto truth = true_ranges(streams, streams.ranges);
  const auto samples = build_training_set(edge, streams.ranges, truth, headings, n_steps);
  if (samples.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no ranges recorded on the requested edge");

  const auto n_hold = static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(samples.size())));
  const std::span<const TrainingSample> all(samples);
  const auto train = all.first(samples.size() - n_hold);
  const auto hold = all.last(n_hold);

  CorrectorTraining out;
  out.model = fit_corrector(edge, train, n_steps, ridge_lambda);
  out.train_samples = train.size();
  out.holdout_samples = hold.size();
  out.holdout_mse = mean_squared_error(out.model, hold);
  out.holdout_zero_mse = zero_corrector_mse(hold);
  return out;
}

std::vector<StateEstimate> run_multilateration_on(const ScenarioConfig& cfg, const ScenarioStreams& streams) {
  TrackerConfig tc;
  tc.static_agent = cfg.static_agent.value_or(0);
  tc.static_position = cfg.initial_positions()[tc.static_agent];
  tc.initial_positions = cfg.initial_positions();
  return run_multilateration_tracker(cfg.graph, streams.ranges, tc);
}

}  // namespace relloc
