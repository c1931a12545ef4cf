#include "relloc/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace relloc {

ErrorSummary summarize(std::span<const double> values) {
  ErrorSummary s;
  std::vector<double> v;
  v.reserve(values.size());
  for (double x : values) {
    if (!std::isnan(x)) v.push_back(x);
  }
  s.count = v.size();
  if (v.empty()) return s;

  double sum = 0.0;
  double sq = 0.0;
  for (double x : v) {
    sum += x;
    sq += x * x;
    s.max = std::max(s.max, x);
  }
  const double n = static_cast<double>(v.size());
  s.mean = sum / n;
  s.rmse = std::sqrt(sq / n);
  double var = 0.0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / n);

  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) {
    s.median = upper;
  } else {
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    s.median = 0.5 * (lower + upper);
  }
  return s;
}

std::vector<double> ApeSeries::pooled_values() const {
  std::vector<double> out;
  for (std::size_t a = 0; a < errors.size(); ++a) {
    if (anchor && *anchor == a) continue;
    out.insert(out.end(), errors[a].begin(), errors[a].end());
  }
  return out;
}

ApeSeries compute_ape(std::span<const StateEstimate> estimates, const GroundTruthLog& truth,
                      std::optional<std::size_t> anchor, std::uint64_t seed) {
  if (truth.size() == 0 || estimates.empty()) {
    throw Error(ErrorCode::NoOverlappingTimestamps, "APE needs non-empty estimates and truth");
  }
  const std::size_t n = truth.poses.front().size();
  const double period = truth.size() > 1 ? truth.t[1] - truth.t[0] : 0.0;
  const double tol = period > 0.0 ? 0.5 * period + 1e-9 : 1e-9;

  ApeSeries out;
  out.seed = seed;
  out.anchor = anchor;
  out.errors.assign(n, {});
  for (const auto& est : estimates) {
    if (est.positions.size() != n) throw Error(ErrorCode::ShapeMismatch, "estimate agent count differs from truth");
    const auto it = std::lower_bound(truth.t.begin(), truth.t.end(), est.t - tol);
    if (it == truth.t.end() || std::abs(*it - est.t) > tol) continue;
    const auto& poses = truth.poses[static_cast<std::size_t>(it - truth.t.begin())];

    Vec2 shift = Vec2::Zero();
    if (anchor) {
      if (*anchor >= n) throw Error(ErrorCode::IndexOutOfRange, "anchor agent out of range");
      if (!est.is_valid(*anchor)) continue;
      shift = poses[*anchor].position() - est.positions[*anchor];
    }
    out.t.push_back(est.t);
    for (std::size_t a = 0; a < n; ++a) {
      const double e = est.is_valid(a) ? (est.positions[a] + shift - poses[a].position()).norm()
                                       : std::numeric_limits<double>::quiet_NaN();
      out.errors[a].push_back(e);
    }
  }
  if (out.t.empty()) throw Error(ErrorCode::NoOverlappingTimestamps, "no estimate timestamp matches the truth log");
  for (const auto& series : out.errors) out.per_agent.push_back(summarize(series));
  out.pooled = summarize(out.pooled_values());
  return out;
}

double point_to_path_distance(const Vec2& p, std::span<const Vec2> path) {
  if (path.size() < 2) throw Error(ErrorCode::DegenerateReference, "reference path needs at least 2 waypoints");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const Vec2 a = path[k];
    const Vec2 ab = path[k + 1] - a;
    const double len2 = ab.squaredNorm();
    const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (a + s * ab - p).norm());
  }
  return best;
}

AteSeries compute_ate(std::span<const Vec2> executed, std::span<const Vec2> reference) {
  if (reference.size() < 2) throw Error(ErrorCode::DegenerateReference, "reference path needs at least 2 waypoints");
  AteSeries out;
  out.errors.reserve(executed.size());
  for (const auto& p : executed) out.errors.push_back(point_to_path_distance(p, reference));
  out.summary = summarize(out.errors);
  return out;
}

ComparisonReport paired_compare(const ApeSeries& a, const ApeSeries& b) {
  if (a.seed != b.seed) throw Error(ErrorCode::SeedMismatch, "paired runs come from different seeds");
  if (a.t != b.t || a.errors.size() != b.errors.size()) {
    throw Error(ErrorCode::SeedMismatch, "paired runs do not share timestamps");
  }
  ComparisonReport r;
  for (std::size_t ag = 0; ag < a.errors.size(); ++ag) {
    r.median_difference.push_back(summarize(a.errors[ag]).median - summarize(b.errors[ag]).median);
    std::size_t wins = 0;
    std::size_t counted = 0;
    for (std::size_t k = 0; k < a.errors[ag].size(); ++k) {
      const double ea = a.errors[ag][k];
      const double eb = b.errors[ag][k];
      if (std::isnan(ea) || std::isnan(eb)) continue;
      ++counted;
      if (ea < eb) ++wins;
    }
    r.win_fraction.push_back(counted ? static_cast<double>(wins) / static_cast<double>(counted) : 0.0);
  }
  r.pooled_median_difference = summarize(a.pooled_values()).median - summarize(b.pooled_values()).median;
  if (r.pooled_median_difference < 0.0) {
    r.verdict = "a_better";
  } else if (r.pooled_median_difference > 0.0) {
    r.verdict = "b_better";
  } else {
    r.verdict = "tie";
  }
  return r;
}

}  // namespace relloc
