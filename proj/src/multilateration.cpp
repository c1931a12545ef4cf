#include "relloc/multilateration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace relloc {

namespace {

constexpr double kCollinearityRatio = 1e-6;

double cost_at(const Vec2& x, const std::vector<Vec2>& anchors, const std::vector<double>& dists) {
  double c = 0.0;
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const double r = (x - anchors[k]).norm() - dists[k];
    c += r * r;
  }
  return c;
}

MultilaterationSolution gauss_newton(Vec2 x, const std::vector<Vec2>& anchors, const std::vector<double>& dists,
                                     double tol, std::size_t max_iter) {
  MultilaterationSolution sol;
  double cost = cost_at(x, anchors, dists);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    sol.iterations = iter + 1;
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
    for (std::size_t k = 0; k < anchors.size(); ++k) {
      const Vec2 diff = x - anchors[k];
      const double n = diff.norm();
      if (n < 1e-12) continue;
      const Eigen::Vector2d j = diff / n;
      const double r = n - dists[k];
      jtj += j * j.transpose();
      jtr += j * r;
    }
    const Eigen::Vector2d delta = -jtj.ldlt().solve(jtr);
    if (!delta.allFinite()) break;

    // Halve the Gauss-Newton step until the cost does not increase.
    double alpha = 1.0;
    Vec2 candidate = x + delta;
    double candidate_cost = cost_at(candidate, anchors, dists);
    for (int h = 0; h < 30 && candidate_cost > cost; ++h) {
      alpha *= 0.5;
      candidate = x + alpha * delta;
      candidate_cost = cost_at(candidate, anchors, dists);
    }
    const double step_norm = alpha * delta.norm();
    if (candidate_cost <= cost) {
      x = candidate;
      cost = candidate_cost;
    }
    if (step_norm < tol) {
      sol.converged = true;
      break;
    }
  }
  sol.position = x;
  sol.residual_rms = std::sqrt(cost / static_cast<double>(anchors.size()));
  return sol;
}

}  // namespace

double reference_conditioning(std::span<const Vec2> references) {
  if (references.empty()) return 0.0;
  Vec2 centroid = Vec2::Zero();
  for (const auto& r : references) centroid += r;
  centroid /= static_cast<double>(references.size());
  Eigen::MatrixXd a(static_cast<Eigen::Index>(references.size()), 2);
  for (std::size_t k = 0; k < references.size(); ++k) {
    a.row(static_cast<Eigen::Index>(k)) = (references[k] - centroid).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() < 2 || s(0) <= 0.0) return 0.0;
  return s(1) / s(0);
}

MultilaterationSolution solve_multilateration(const MultilaterationProblem& problem, double tol,
                                              std::size_t max_iter) {
  std::map<AgentId, Vec2> ref_by_agent;
  for (const auto& r : problem.references) ref_by_agent[r.agent] = r.position;

  std::vector<Vec2> anchors;
  std::vector<double> dists;
  for (const auto& rg : problem.ranges) {
    const auto it = ref_by_agent.find(rg.agent);
    if (it == ref_by_agent.end()) continue;
    anchors.push_back(it->second);
    dists.push_back(rg.distance);
  }
  if (anchors.size() < 3) {
    throw Error(ErrorCode::InsufficientReferences, "multilateration needs at least 3 ranged references");
  }
  if (reference_conditioning(anchors) < kCollinearityRatio) {
    throw Error(ErrorCode::DegenerateGeometry, "multilateration references are collinear");
  }

  Vec2 centroid = Vec2::Zero();
  for (const auto& a : anchors) centroid += a;
  centroid /= static_cast<double>(anchors.size());

  // The range cost is non-convex. Besides the warm start, try four points around the
  // centroid at the mean measured range and keep the lowest-cost solution.
  std::vector<Vec2> starts;
  if (problem.prior) starts.push_back(*problem.prior);
  starts.push_back(centroid);
  double mean_range = 0.0;
  for (double d : dists) mean_range += d;
  mean_range /= static_cast<double>(dists.size());
  for (const Vec2& dir : {Vec2(1, 0), Vec2(0, 1), Vec2(-1, 0), Vec2(0, -1)}) starts.push_back(centroid + mean_range * dir);

  MultilaterationSolution best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto& x0 : starts) {
    const auto sol = gauss_newton(x0, anchors, dists, tol, max_iter);
    const double c = cost_at(sol.position, anchors, dists);
    if (c < best_cost - 1e-12) {
      best_cost = c;
      best = sol;
    }
  }
  return best;
}

std::vector<StateEstimate> run_multilateration_tracker(const RangingGraph& graph, std::span<const UwbRange> ranges,
                                                       const TrackerConfig& cfg) {
  const std::size_t n = graph.n_agents();
  if (cfg.initial_positions.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "tracker needs one initial position per agent");
  }
  if (cfg.static_agent >= n) throw Error(ErrorCode::IndexOutOfRange, "static agent out of range");

  std::vector<Vec2> current = cfg.initial_positions;
  current[cfg.static_agent] = cfg.static_position;

  std::vector<StateEstimate> out;
  std::size_t begin = 0;
  while (begin < ranges.size()) {
    std::size_t end = begin;
    while (end < ranges.size() && ranges[end].t == ranges[begin].t) ++end;
    const double t = ranges[begin].t;

    // distance[a][b] for this epoch.
    std::map<Edge, double> epoch;
    for (std::size_t r = begin; r < end; ++r) epoch[ranges[r].edge] = ranges[r].distance;

    std::vector<bool> valid(n, false);
    valid[cfg.static_agent] = true;
    for (std::size_t sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
      double max_change = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        if (a == cfg.static_agent) continue;
        MultilaterationProblem p;
        for (std::size_t b : graph.neighbors(a)) {
          const auto it = epoch.find(Edge(a, b));
          if (it == epoch.end()) continue;
          p.references.push_back({AgentId(b), current[b]});
          p.ranges.push_back({AgentId(b), it->second});
        }
        if (p.ranges.size() < 3) continue;
        p.prior = current[a];
        try {
          const auto sol = solve_multilateration(p);
          max_change = std::max(max_change, (sol.position - current[a]).norm());
          current[a] = sol.position;
          valid[a] = true;
        } catch (const Error&) {
          // degenerate geometry this epoch: keep previous estimate, flagged
        }
      }
      if (max_change < cfg.sweep_tol) break;
    }

    StateEstimate est;
    est.t = t;
    est.positions = current;
    est.valid = valid;
    out.push_back(std::move(est));
    begin = end;
  }
  return out;
}

}  // namespace relloc
