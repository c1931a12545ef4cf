#include "relloc/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace relloc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyBounds: return "EmptyBounds";
    case ErrorCode::EdgeNotInGraph: return "EdgeNotInGraph";
    case ErrorCode::NonPositiveDt: return "NonPositiveDt";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::MissingAgentOdometry: return "MissingAgentOdometry";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InsufficientReferences: return "InsufficientReferences";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::WindowSizeMismatch: return "WindowSizeMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NoOverlappingTimestamps: return "NoOverlappingTimestamps";
    case ErrorCode::DegenerateReference: return "DegenerateReference";
    case ErrorCode::SeedMismatch: return "SeedMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

double wrap_angle(double angle) {
  double a = std::fmod(angle + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

Pose2::Pose2(double x, double y, double theta) : x_(x), y_(y), theta_(wrap_angle(theta)) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(theta)) {
    throw Error(ErrorCode::NonFinite, "Pose2 requires finite components");
  }
}

bool RangingGraph::contains(std::size_t a, std::size_t b) const {
  if (a == b) return false;
  return std::binary_search(edges_.begin(), edges_.end(), Edge(a, b));
}

std::vector<std::size_t> RangingGraph::neighbors(std::size_t agent) const {
  std::vector<std::size_t> out;
  for (const auto& e : edges_) {
    if (e.i == agent) out.push_back(e.j);
    if (e.j == agent) out.push_back(e.i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

RangingGraph make_graph(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edge_list) {
  RangingGraph g;
  g.n_agents_ = n;
  for (const auto& [a, b] : edge_list) {
    if (a >= n || b >= n) {
      throw Error(ErrorCode::IndexOutOfRange,
                  "edge (" + std::to_string(a) + "," + std::to_string(b) + ") out of range for n=" + std::to_string(n));
    }
    if (a == b) throw Error(ErrorCode::SelfLoop, "self loop on agent " + std::to_string(a));
    g.edges_.emplace_back(a, b);
  }
  std::sort(g.edges_.begin(), g.edges_.end());
  g.edges_.erase(std::unique(g.edges_.begin(), g.edges_.end()), g.edges_.end());
  return g;
}

RangingGraph complete_graph(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
  }
  return make_graph(n, pairs);
}

ArenaBounds::ArenaBounds(double x_min, double x_max, double y_min, double y_max)
    : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max) {
  if (!(x_min < x_max) || !(y_min < y_max)) {
    throw Error(ErrorCode::EmptyBounds, "arena bounds require x_min < x_max and y_min < y_max");
  }
}

bool ArenaBounds::contains(const Vec2& p) const {
  return p.x() >= x_min_ && p.x() <= x_max_ && p.y() >= y_min_ && p.y() <= y_max_;
}

double true_range(const Pose2& a, const Pose2& b) { return std::hypot(a.x() - b.x(), a.y() - b.y()); }

}  // namespace relloc
