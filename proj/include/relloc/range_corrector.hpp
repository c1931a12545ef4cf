#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "relloc/core_types.hpp"
#include "relloc/measurement_models.hpp"

namespace relloc {

inline constexpr std::size_t kDefaultCorrectorSteps = 10;
inline constexpr std::size_t kFeaturesPerFrame = 6;
inline constexpr const char* kHarmonicFeatureMap = "affine_range_first_harmonic_headings";

/// One input frame: measured range and the headings at both ends of the edge.
struct CorrectorFrame {
  double range = 0.0;
  double heading_i = 0.0;
  double heading_j = 0.0;
};

/// n_steps frames, oldest first.
class CorrectorWindow {
 public:
  CorrectorWindow(std::size_t n_steps, std::vector<CorrectorFrame> rows);

  /// Builds a full window from the trailing frames, repeating the first frame when
  /// fewer than n_steps are available.
  static CorrectorWindow padded(std::size_t n_steps, std::span<const CorrectorFrame> recent);

  std::size_t n_steps() const { return rows_.size(); }
  const std::vector<CorrectorFrame>& rows() const { return rows_; }

 private:
  std::vector<CorrectorFrame> rows_;
};

/// Per frame: 1, range, sin th_i, cos th_i, sin th_j, cos th_j; flattened oldest first.
Eigen::VectorXd window_features(const CorrectorWindow& w);

struct TrainingSample {
  CorrectorWindow window;
  double true_error = 0.0;  // measured - true range at the last frame
};

struct CorrectorModel {
  Edge edge;
  std::size_t n_steps = kDefaultCorrectorSteps;
  std::string feature_map = kHarmonicFeatureMap;
  Eigen::VectorXd coefficients;
  double ridge_lambda = 0.0;
  double training_mse = 0.0;
};

/// Ridge least squares of true_error on window features. Throws EmptyTrainingSet.
CorrectorModel fit_corrector(const Edge& edge, std::span<const TrainingSample> train, std::size_t n_steps,
                             double ridge_lambda);

/// Predicted ranging error for the window's last frame. Throws WindowSizeMismatch.
double predict_error(const CorrectorModel& model, const CorrectorWindow& w);

/// measured - predicted error, clamped at zero.
double corrected_range(const CorrectorModel& model, const CorrectorWindow& w);

double mean_squared_error(const CorrectorModel& model, std::span<const TrainingSample> samples);
/// MSE of always predicting zero error.
double zero_corrector_mse(std::span<const TrainingSample> samples);

/// Piecewise-constant heading history of one agent.
class HeadingTrack {
 public:
  void push(double t, double heading) { samples_.emplace_back(t, heading); }
  /// Latest heading at or before t (first sample if t precedes all).
  double at(double t) const;
  bool empty() const { return samples_.empty(); }

 private:
  std::vector<std::pair<double, double>> samples_;
};

/// Windowed training pairs for one edge. `true_ranges` is aligned with `measured`.
std::vector<TrainingSample> build_training_set(const Edge& edge, std::span<const UwbRange> measured,
                                               std::span<const double> true_ranges,
                                               std::span<const HeadingTrack> headings, std::size_t n_steps);

/// Streaming applier: one rolling window per modeled edge.
class CorrectorStream {
 public:
  explicit CorrectorStream(std::map<Edge, CorrectorModel> models) : models_(std::move(models)) {}

  UwbRange apply(const UwbRange& r, double heading_i, double heading_j);

 private:
  std::map<Edge, CorrectorModel> models_;
  std::map<Edge, std::deque<CorrectorFrame>> windows_;
};

/// Corrects ranges in input order; edges without a model pass through unchanged.
std::vector<UwbRange> apply_corrector_stream(const std::map<Edge, CorrectorModel>& models,
                                             std::span<const UwbRange> ranges,
                                             std::span<const HeadingTrack> headings);

}  // namespace relloc
