#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "relloc/error.hpp"
#include "relloc/eval_metrics.hpp"
#include "relloc/scenario_sim.hpp"

using namespace relloc;

namespace {

GroundTruthLog line_truth(std::size_t steps, std::size_t agents) {
  GroundTruthLog t;
  for (std::size_t k = 0; k < steps; ++k) {
    t.t.push_back(0.1 * static_cast<double>(k));
    std::vector<Pose2> poses;
    for (std::size_t a = 0; a < agents; ++a) poses.emplace_back(0.1 * static_cast<double>(k), static_cast<double>(a), 0.0);
    t.poses.push_back(poses);
  }
  return t;
}

std::vector<StateEstimate> as_estimates(const GroundTruthLog& t, Vec2 offset) {
  std::vector<StateEstimate> out;
  for (std::size_t k = 0; k < t.size(); ++k) {
    StateEstimate e;
    e.t = t.t[k];
    for (const auto& p : t.poses[k]) e.positions.push_back(p.position() + offset);
    out.push_back(e);
  }
  return out;
}

}  // namespace

TEST_CASE("summary statistics match a sort-based oracle") {
  oracle::Gen g(51);
  for (int inst = 0; inst < 200; ++inst) {
    std::vector<double> v(g.index(1, 99));
    for (auto& x : v) x = g.uniform(0, 5);
    const auto s = summarize(v);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0, sq = 0.0;
    for (double x : v) {
      var += (x - mean) * (x - mean);
      sq += x * x;
    }
    CHECK(std::abs(s.median - oracle::median(v)) < 1e-12);
    CHECK(std::abs(s.mean - mean) < 1e-12);
    CHECK(std::abs(s.std - std::sqrt(var / static_cast<double>(v.size()))) < 1e-12);
    CHECK(std::abs(s.rmse - std::sqrt(sq / static_cast<double>(v.size()))) < 1e-12);
    CHECK(s.max == *std::max_element(v.begin(), v.end()));
    CHECK(s.count == v.size());
    auto shuffled = v;
    std::shuffle(shuffled.begin(), shuffled.end(), g.rng);
    const auto s2 = summarize(shuffled);
    CHECK(s2.median == s.median);
    CHECK(s2.max == s.max);
  }
  const std::vector<double> with_nan{1.0, std::nan(""), 3.0};
  CHECK(summarize(with_nan).count == 2);
  CHECK(summarize(with_nan).median == 2.0);
}

TEST_CASE("APE") {
  const auto truth = line_truth(20, 3);
  SUBCASE("identity") {
    const auto ape = compute_ape(as_estimates(truth, Vec2::Zero()), truth, std::nullopt);
    CHECK(ape.pooled.max == 0.0);
    CHECK(ape.pooled.count == 60);
  }
  SUBCASE("common offset is absorbed by the anchor") {
    const auto ape = compute_ape(as_estimates(truth, Vec2(3, -2)), truth, 1);
    CHECK(ape.pooled.max < 1e-12);
    CHECK(ape.pooled.count == 40);  // anchor excluded
    const auto raw = compute_ape(as_estimates(truth, Vec2(3, -2)), truth, std::nullopt);
    CHECK(raw.pooled.median == doctest::Approx(std::sqrt(13.0)));
  }
  SUBCASE("translation invariance") {
    oracle::Gen g(52);
    auto est = as_estimates(truth, Vec2::Zero());
    for (auto& e : est) {
      for (auto& p : e.positions) p += Vec2(g.normal(), g.normal()) * 0.1;
    }
    const auto a = compute_ape(est, truth, 0);
    for (auto& e : est) {
      for (auto& p : e.positions) p += Vec2(5, 7);
    }
    const auto b = compute_ape(est, truth, 0);
    CHECK(std::abs(a.pooled.median - b.pooled.median) < 1e-12);
  }
  SUBCASE("invalid estimates are NaN and skipped") {
    auto est = as_estimates(truth, Vec2(1, 0));
    est[3].valid = {true, false, true};
    const auto ape = compute_ape(est, truth, std::nullopt);
    CHECK(std::isnan(ape.errors[1][3]));
    CHECK(ape.pooled.count == 59);
  }
  SUBCASE("no overlap") {
    auto est = as_estimates(truth, Vec2::Zero());
    for (auto& e : est) e.t += 100.0;
    CHECK_THROWS_AS(compute_ape(est, truth, std::nullopt), Error);
  }
}

TEST_CASE("ATE and path distance") {
  const std::vector<Vec2> path{Vec2(0, 0), Vec2(4, 0), Vec2(4, 3)};
  CHECK(point_to_path_distance(Vec2(2, 0), path) == 0.0);
  CHECK(point_to_path_distance(Vec2(2, 1), path) == doctest::Approx(1.0));
  CHECK(point_to_path_distance(Vec2(-3, -4), path) == doctest::Approx(5.0));
  CHECK(point_to_path_distance(Vec2(4, 5), path) == doctest::Approx(2.0));
  oracle::Gen g(53);
  for (int k = 0; k < 300; ++k) {
    const Vec2 p(g.uniform(-2, 6), g.uniform(-2, 5));
    CHECK(point_to_path_distance(p, path) == doctest::Approx(oracle::sampled_path_distance(p, path, 20000)).epsilon(1e-3));
  }
  std::vector<Vec2> on_path;
  for (int k = 0; k <= 70; ++k) on_path.push_back(k <= 40 ? Vec2(0.1 * k, 0) : Vec2(4, 0.1 * (k - 40)));
  CHECK(compute_ate(on_path, path).summary.max < 1e-12);
  CHECK_THROWS_AS(compute_ate(on_path, std::vector<Vec2>{Vec2(0, 0)}), Error);
}

TEST_CASE("paired comparison") {
  const auto truth = line_truth(30, 2);
  auto est = as_estimates(truth, Vec2::Zero());
  oracle::Gen g(54);
  for (auto& e : est) {
    for (auto& p : e.positions) p += Vec2(g.normal(), g.normal()) * 0.2;
  }
  const auto a = compute_ape(est, truth, std::nullopt, 7);
  SUBCASE("self") {
    const auto r = paired_compare(a, a);
    CHECK(r.pooled_median_difference == 0.0);
    CHECK(r.verdict == "tie");
  }
  SUBCASE("constant shift") {
    auto b = a;
    for (auto& s : b.errors) {
      for (auto& x : s) x += 0.1;
    }
    const auto r = paired_compare(a, b);
    CHECK(r.pooled_median_difference == doctest::Approx(-0.1));
    for (double d : r.median_difference) CHECK(d == doctest::Approx(-0.1));
    for (double w : r.win_fraction) CHECK(w == 1.0);
    CHECK(r.verdict == "a_better");
  }
  SUBCASE("seed mismatch") {
    auto b = a;
    b.seed = 8;
    try {
      paired_compare(a, b);
      FAIL("expected SeedMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SeedMismatch);
    }
  }
}
