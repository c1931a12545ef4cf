#pragma once

#include <compare>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "relloc/error.hpp"

namespace relloc {

using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double angle);

/// Planar pose in the common frame. Heading is normalized at construction.
class Pose2 {
 public:
  Pose2() = default;
  Pose2(double x, double y, double theta);
  Pose2(const Vec2& position, double theta) : Pose2(position.x(), position.y(), theta) {}

  double x() const { return x_; }
  double y() const { return y_; }
  double theta() const { return theta_; }
  Vec2 position() const { return {x_, y_}; }

 private:
  double x_ = 0.0;
  double y_ = 0.0;
  double theta_ = 0.0;
};

/// Dense agent index in [0, N).
struct AgentId {
  std::size_t value = 0;

  constexpr AgentId() = default;
  constexpr explicit AgentId(std::size_t v) : value(v) {}
  auto operator<=>(const AgentId&) const = default;
};

/// Unordered agent pair, stored with i < j.
struct Edge {
  std::size_t i = 0;
  std::size_t j = 0;

  Edge() = default;
  Edge(std::size_t a, std::size_t b) : i(a < b ? a : b), j(a < b ? b : a) {}
  auto operator<=>(const Edge&) const = default;
};

/// Undirected ranging graph without self loops.
class RangingGraph {
 public:
  RangingGraph() = default;

  std::size_t n_agents() const { return n_agents_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }
  bool contains(std::size_t a, std::size_t b) const;
  bool contains(const Edge& e) const { return contains(e.i, e.j); }
  /// Agents sharing an edge with `agent`, ascending.
  std::vector<std::size_t> neighbors(std::size_t agent) const;

  friend RangingGraph make_graph(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edge_list);

 private:
  std::size_t n_agents_ = 0;
  std::vector<Edge> edges_;  // sorted, unique
};

/// Throws IndexOutOfRange or SelfLoop. Duplicate and reversed pairs collapse.
RangingGraph make_graph(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edge_list);

/// All N(N-1)/2 pairs.
RangingGraph complete_graph(std::size_t n);

class ArenaBounds {
 public:
  ArenaBounds() = default;
  ArenaBounds(double x_min, double x_max, double y_min, double y_max);

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double y_min() const { return y_min_; }
  double y_max() const { return y_max_; }
  bool contains(const Vec2& p) const;

 private:
  double x_min_ = 0.0;
  double x_max_ = 1.0;
  double y_min_ = 0.0;
  double y_max_ = 1.0;
};

struct WorldObject {
  int id = 0;
  Vec2 position = Vec2::Zero();
};

/// Euclidean distance between the positions of two poses.
double true_range(const Pose2& a, const Pose2& b);

}  // namespace relloc
