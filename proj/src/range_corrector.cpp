#include "relloc/range_corrector.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include <Eigen/Dense>

namespace relloc {

CorrectorWindow::CorrectorWindow(std::size_t n_steps, std::vector<CorrectorFrame> rows) : rows_(std::move(rows)) {
  if (n_steps == 0) throw Error(ErrorCode::InvalidArgument, "corrector window needs n_steps >= 1");
  if (rows_.size() != n_steps) {
    throw Error(ErrorCode::WindowSizeMismatch, "window has " + std::to_string(rows_.size()) + " rows, expected " +
                                                   std::to_string(n_steps));
  }
  for (const auto& r : rows_) {
    if (r.range < 0.0) throw Error(ErrorCode::InvalidArgument, "window ranges must be >= 0");
  }
}

CorrectorWindow CorrectorWindow::padded(std::size_t n_steps, std::span<const CorrectorFrame> recent) {
  if (recent.empty()) throw Error(ErrorCode::InvalidArgument, "cannot pad an empty window");
  std::vector<CorrectorFrame> rows;
  rows.reserve(n_steps);
  const std::size_t have = std::min(n_steps, recent.size());
  const auto tail = recent.subspan(recent.size() - have);
  for (std::size_t k = have; k < n_steps; ++k) rows.push_back(tail.front());
  rows.insert(rows.end(), tail.begin(), tail.end());
  return CorrectorWindow(n_steps, std::move(rows));
}

Eigen::VectorXd window_features(const CorrectorWindow& w) {
  Eigen::VectorXd f(static_cast<Eigen::Index>(kFeaturesPerFrame * w.n_steps()));
  Eigen::Index c = 0;
  for (const auto& r : w.rows()) {
    f(c++) = 1.0;
    f(c++) = r.range;
    f(c++) = std::sin(r.heading_i);
    f(c++) = std::cos(r.heading_i);
    f(c++) = std::sin(r.heading_j);
    f(c++) = std::cos(r.heading_j);
  }
  return f;
}

CorrectorModel fit_corrector(const Edge& edge, std::span<const TrainingSample> train, std::size_t n_steps,
                             double ridge_lambda) {
  if (train.empty()) throw Error(ErrorCode::EmptyTrainingSet, "corrector training set is empty");
  if (n_steps == 0) throw Error(ErrorCode::InvalidArgument, "n_steps must be >= 1");
  if (ridge_lambda < 0.0) throw Error(ErrorCode::InvalidArgument, "ridge_lambda must be >= 0");
  const std::size_t p = kFeaturesPerFrame * n_steps;
  if (train.size() < 10 * p) {
    std::cerr << "warning: corrector for edge (" << edge.i << "," << edge.j << ") trained on " << train.size()
              << " samples, fewer than " << 10 * p << "\n";
  }

  Eigen::MatrixXd x(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(p));
  Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
  for (std::size_t s = 0; s < train.size(); ++s) {
    if (train[s].window.n_steps() != n_steps) {
      throw Error(ErrorCode::WindowSizeMismatch, "training window size differs from n_steps");
    }
    x.row(static_cast<Eigen::Index>(s)) = window_features(train[s].window).transpose();
    y(static_cast<Eigen::Index>(s)) = train[s].true_error;
  }

  // Ridge normal equations; the pseudo-inverse route keeps lambda = 0 well-defined
  // when per-frame features repeat across the window.
  const Eigen::MatrixXd gram =
      x.transpose() * x + ridge_lambda * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  const Eigen::VectorXd rhs = x.transpose() * y;
  CorrectorModel model;
  model.edge = edge;
  model.n_steps = n_steps;
  model.ridge_lambda = ridge_lambda;
  model.coefficients = gram.completeOrthogonalDecomposition().solve(rhs);
  model.training_mse = mean_squared_error(model, train);
  return model;
}

double predict_error(const CorrectorModel& model, const CorrectorWindow& w) {
  if (w.n_steps() != model.n_steps) {
    throw Error(ErrorCode::WindowSizeMismatch, "window has " + std::to_string(w.n_steps()) + " steps, model expects " +
                                                   std::to_string(model.n_steps));
  }
  if (model.coefficients.size() == 0) return 0.0;
  return model.coefficients.dot(window_features(w));
}

double corrected_range(const CorrectorModel& model, const CorrectorWindow& w) {
  return std::max(0.0, w.rows().back().range - predict_error(model, w));
}

double mean_squared_error(const CorrectorModel& model, std::span<const TrainingSample> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : samples) {
    const double e = predict_error(model, s.window) - s.true_error;
    acc += e * e;
  }
  return acc / static_cast<double>(samples.size());
}

double zero_corrector_mse(std::span<const TrainingSample> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : samples) acc += s.true_error * s.true_error;
  return acc / static_cast<double>(samples.size());
}

double HeadingTrack::at(double t) const {
  if (samples_.empty()) throw Error(ErrorCode::InvalidArgument, "empty heading track");
  const auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                                   [](double v, const auto& s) { return v < s.first; });
  if (it == samples_.begin()) return samples_.front().second;
  return std::prev(it)->second;
}

std::vector<TrainingSample> build_training_set(const Edge& edge, std::span<const UwbRange> measured,
                                               std::span<const double> true_ranges,
                                               std::span<const HeadingTrack> headings, std::size_t n_steps) {
  if (measured.size() != true_ranges.size()) {
    throw Error(ErrorCode::ShapeMismatch, "measured and true range streams differ in length");
  }
  if (edge.j >= headings.size()) throw Error(ErrorCode::IndexOutOfRange, "edge outside heading tracks");
  std::vector<TrainingSample> out;
  std::vector<CorrectorFrame> history;
  for (std::size_t k = 0; k < measured.size(); ++k) {
    if (measured[k].edge != edge) continue;
    const double t = measured[k].t;
    history.push_back({measured[k].distance, headings[edge.i].at(t), headings[edge.j].at(t)});
    out.push_back({CorrectorWindow::padded(n_steps, history), measured[k].distance - true_ranges[k]});
  }
  return out;
}

UwbRange CorrectorStream::apply(const UwbRange& r, double heading_i, double heading_j) {
  const auto it = models_.find(r.edge);
  if (it == models_.end()) return r;
  auto& window = windows_[r.edge];
  window.push_back({r.distance, heading_i, heading_j});
  while (window.size() > it->second.n_steps) window.pop_front();
  const std::vector<CorrectorFrame> frames(window.begin(), window.end());
  UwbRange out = r;
  out.distance = corrected_range(it->second, CorrectorWindow::padded(it->second.n_steps, frames));
  return out;
}

std::vector<UwbRange> apply_corrector_stream(const std::map<Edge, CorrectorModel>& models,
                                             std::span<const UwbRange> ranges,
                                             std::span<const HeadingTrack> headings) {
  CorrectorStream stream(models);
  std::vector<UwbRange> out;
  out.reserve(ranges.size());
  for (const auto& r : ranges) {
    if (!models.contains(r.edge)) {
      out.push_back(r);
      continue;
    }
    if (r.edge.j >= headings.size()) throw Error(ErrorCode::IndexOutOfRange, "edge outside heading tracks");
    out.push_back(stream.apply(r, headings[r.edge.i].at(r.t), headings[r.edge.j].at(r.t)));
  }
  return out;
}

}  // namespace relloc
