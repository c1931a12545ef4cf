#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "relloc/error.hpp"
#include "relloc/measurement_models.hpp"

using namespace relloc;

namespace {

NoiseModel quiet() {
  NoiseModel n;
  n.sigma_uwb = 0.0;
  n.sigma_odom = 0.0;
  n.sigma_odom_heading = 0.0;
  n.sigma_det = 0.0;
  return n;
}

const std::vector<Pose2> kPair{Pose2(0, 0, 0), Pose2(3, 4, 0)};

}  // namespace

TEST_CASE("noiseless range equals geometry") {
  MeasurementSynthesizer s(quiet());
  const auto g = complete_graph(2);
  CHECK(s.synth_uwb(kPair, g, Edge(0, 1), nullptr, 0.0).distance == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("constant bias is added") {
  MeasurementSynthesizer s(quiet());
  RangingBiasModel bias(1.0);
  EdgeBias b;
  b.constant = 0.2;
  bias.set(Edge(0, 1), b);
  CHECK(s.synth_uwb(kPair, complete_graph(2), Edge(0, 1), &bias, 0.0).distance == doctest::Approx(5.2));
}

TEST_CASE("bias is clamped to b_max") {
  RangingBiasModel bias(0.3);
  EdgeBias b;
  b.constant = 2.0;
  bias.set(Edge(0, 1), b);
  CHECK(bias.bias(Edge(0, 1), 1.0, 0.0, 0.0) == doctest::Approx(0.3));
  CHECK(bias.bias(Edge(1, 2), 1.0, 0.0, 0.0) == 0.0);
}

TEST_CASE("edge outside the graph is refused") {
  MeasurementSynthesizer s(quiet());
  const auto g = make_graph(3, {{0, 1}});
  const std::vector<Pose2> three{Pose2(0, 0, 0), Pose2(1, 0, 0), Pose2(2, 0, 0)};
  CHECK_THROWS_AS(s.synth_uwb(three, g, Edge(0, 2), nullptr, 0.0), Error);
}

TEST_CASE("range noise has the configured moments") {
  NoiseModel n = quiet();
  n.sigma_uwb = 0.1;
  n.rng_seed = 5;
  MeasurementSynthesizer s(n);
  const auto g = complete_graph(2);
  const int draws = 10000;
  double sum = 0.0, sq = 0.0;
  for (int k = 0; k < draws; ++k) {
    const double d = s.synth_uwb(kPair, g, Edge(0, 1), nullptr, 0.0).distance;
    sum += d;
    sq += d * d;
  }
  const double mean = sum / draws;
  const double sd = std::sqrt(sq / draws - mean * mean);
  CHECK(std::abs(mean - 5.0) < 3 * 0.1 / std::sqrt(draws));
  CHECK(sd == doctest::Approx(0.1).epsilon(0.1));
}

TEST_CASE("negative ranges are clamped to zero") {
  NoiseModel n = quiet();
  n.sigma_uwb = 1.0;
  MeasurementSynthesizer s(n);
  const std::vector<Pose2> same{Pose2(0, 0, 0), Pose2(0, 0, 0)};
  for (int k = 0; k < 200; ++k) CHECK(s.synth_uwb(same, complete_graph(2), Edge(0, 1), nullptr, 0.0).distance >= 0.0);
}

TEST_CASE("odometry in the common frame") {
  MeasurementSynthesizer s(quiet());
  const auto od = s.synth_odometry(AgentId(0), Pose2(0, 0, 0), Pose2(1, 0, 0), 0.1, 0.1);
  CHECK(od.dx == 1.0);
  CHECK(od.dy == 0.0);
  CHECK(od.dtheta == 0.0);
  const auto wrap = s.synth_odometry(AgentId(0), Pose2(0, 0, kPi - 0.1), Pose2(0, 0, -kPi + 0.1), 0.1, 0.1);
  CHECK(wrap.dtheta == doctest::Approx(0.2));
  CHECK_THROWS_AS(s.synth_odometry(AgentId(0), Pose2(), Pose2(), 0.0, 0.0), Error);
}

TEST_CASE("odometry noise covariance") {
  NoiseModel n = quiet();
  n.sigma_odom = 0.01;
  n.rng_seed = 9;
  MeasurementSynthesizer s(n);
  const int draws = 10000;
  double sxx = 0, syy = 0, sxy = 0, mx = 0, my = 0;
  std::vector<std::pair<double, double>> v;
  for (int k = 0; k < draws; ++k) {
    const auto od = s.synth_odometry(AgentId(0), Pose2(1, 1, 0), Pose2(1, 1, 0), 0.1, 0.0);
    v.emplace_back(od.dx, od.dy);
    mx += od.dx;
    my += od.dy;
  }
  mx /= draws;
  my /= draws;
  for (auto [x, y] : v) {
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
    sxy += (x - mx) * (y - my);
  }
  CHECK(sxx / draws == doctest::Approx(1e-4).epsilon(0.15));
  CHECK(syy / draws == doctest::Approx(1e-4).epsilon(0.15));
  CHECK(std::abs(sxy / draws) < 0.15e-4);
}

TEST_CASE("detections") {
  DetectionConfig cfg;
  const std::vector<Pose2> poses{Pose2(0, 0, 0), Pose2(2, 0, kPi)};

  SUBCASE("shared object gives zero discrepancy") {
    MeasurementSynthesizer s(quiet());
    const std::vector<WorldObject> objs{{7, Vec2(1, 0.2)}};
    const auto det = s.synth_detection(poses, AgentId(0), AgentId(1), objs, cfg, 0.0);
    REQUIRE(det);
    CHECK(det->rp.norm() == 0.0);
    CHECK(det->object_id == 7);
    CHECK((det->relative_position() - Vec2(-2, 0)).norm() < 1e-15);
  }
  SUBCASE("noiseless discrepancy above the gate is not emitted") {
    MeasurementSynthesizer s(quiet());
    // Short camera range: agent 0 sees only the first object, agent 1 only the second.
    cfg.max_camera_range = 1.05;
    const std::vector<Pose2> apart{Pose2(0, 0, 0), Pose2(2.2, 0, kPi)};
    const std::vector<WorldObject> far{{1, Vec2(1.0, 0)}, {2, Vec2(1.2, 0)}};
    CHECK_FALSE(s.synth_detection(apart, AgentId(0), AgentId(1), far, cfg, 0.0));
    const std::vector<WorldObject> near{{1, Vec2(1.0, 0)}, {2, Vec2(1.1, 0)}};
    const std::vector<Pose2> closer{Pose2(0, 0, 0), Pose2(2.1, 0, kPi)};
    const auto det = s.synth_detection(closer, AgentId(0), AgentId(1), near, cfg, 0.0);
    REQUIRE(det);
    CHECK(det->object_id == 1);
    CHECK(det->object_id_j == 2);
    CHECK(det->rp.norm() == doctest::Approx(0.1));
  }
  SUBCASE("object outside the field of view") {
    MeasurementSynthesizer s(quiet());
    const std::vector<WorldObject> objs{{1, Vec2(-1, 0)}};
    CHECK_FALSE(s.synth_detection(poses, AgentId(0), AgentId(1), objs, cfg, 0.0));
    CHECK_FALSE(is_visible(Pose2(0, 0, 0), Vec2(-1, 0), cfg));
    CHECK(is_visible(Pose2(0, 0, 0), Vec2(1, 0.1), cfg));
  }
}

TEST_CASE("noiseless gate holds on every emitted detection") {
  oracle::Gen g(21);
  NoiseModel n = quiet();
  n.sigma_det = 0.05;
  MeasurementSynthesizer s(n);
  DetectionConfig cfg;
  std::size_t emitted = 0;
  std::size_t mixed = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<WorldObject> objs;
    for (int o = 0; o < 8; ++o) objs.push_back({o, Vec2(g.uniform(0, 3), g.uniform(0, 3))});
    const std::vector<Pose2> poses{Pose2(g.uniform(0, 3), g.uniform(0, 3), g.uniform(-kPi, kPi)),
                                   Pose2(g.uniform(0, 3), g.uniform(0, 3), g.uniform(-kPi, kPi))};
    const auto det = s.synth_detection(poses, AgentId(0), AgentId(1), objs, cfg, 0.0);
    if (!det) continue;
    ++emitted;
    mixed += det->object_id != det->object_id_j;
    const Vec2 noiseless = objs[static_cast<std::size_t>(det->object_id)].position -
                           objs[static_cast<std::size_t>(det->object_id_j)].position;
    CHECK(noiseless.norm() < cfg.d_det_th);
    CHECK(is_visible(poses[0], objs[static_cast<std::size_t>(det->object_id)].position, cfg));
    CHECK(is_visible(poses[1], objs[static_cast<std::size_t>(det->object_id_j)].position, cfg));
  }
  CHECK(emitted > 100);
  MESSAGE("emitted ", emitted, ", mis-associated ", mixed);
}

TEST_CASE("range log-likelihood") {
  const double peak = std::log(1.0 / (0.1 * std::sqrt(2 * kPi)));
  CHECK(range_loglik(5, 5, 0.1) == doctest::Approx(peak).epsilon(1e-14));
  CHECK(range_loglik(5, 5.1, 0.1) == doctest::Approx(peak - 0.5).epsilon(1e-12));
  oracle::Gen g(4);
  for (int k = 0; k < 1000; ++k) {
    const double p = g.uniform(0, 10), s = g.uniform(0.05, 3), o = p + s * g.uniform(-5, 5);
    const double direct = std::log(std::exp(-0.5 * (o - p) * (o - p) / (s * s)) / (s * std::sqrt(2 * M_PI)));
    CHECK(std::abs(range_loglik(p, o, s) - direct) < 1e-12);
  }
  CHECK_THROWS_AS(range_loglik(1, 1, 0), Error);
}

TEST_CASE("same seed and call order give identical streams") {
  NoiseModel n;
  n.rng_seed = 77;
  MeasurementSynthesizer a(n), b(n);
  const auto g = complete_graph(2);
  for (int k = 0; k < 100; ++k) {
    CHECK(a.synth_uwb(kPair, g, Edge(0, 1), nullptr, 0).distance == b.synth_uwb(kPair, g, Edge(0, 1), nullptr, 0).distance);
    const auto oa = a.synth_odometry(AgentId(1), kPair[0], kPair[1], 0.1, 0);
    const auto ob = b.synth_odometry(AgentId(1), kPair[0], kPair[1], 0.1, 0);
    CHECK(oa.dx == ob.dx);
    CHECK(oa.dtheta == ob.dtheta);
  }
}

TEST_CASE("range synthesis is symmetric in edge orientation under a symmetric bias") {
  RangingBiasModel bias(1.0);
  EdgeBias b;
  b.constant = 0.1;
  b.distance_gain = 0.02;
  b.cos_i = b.cos_j = 0.05;
  b.sin_i = b.sin_j = -0.03;
  bias.set(Edge(0, 1), b);
  oracle::Gen g(8);
  for (int k = 0; k < 200; ++k) {
    const std::vector<Pose2> p{Pose2(g.uniform(0, 5), g.uniform(0, 5), g.uniform(-3, 3)),
                               Pose2(g.uniform(0, 5), g.uniform(0, 5), g.uniform(-3, 3))};
    const std::vector<Pose2> swapped{p[1], p[0]};
    MeasurementSynthesizer s1(quiet()), s2(quiet());
    CHECK(s1.synth_uwb(p, complete_graph(2), Edge(0, 1), &bias, 0).distance ==
          doctest::Approx(s2.synth_uwb(swapped, complete_graph(2), Edge(0, 1), &bias, 0).distance).epsilon(1e-14));
  }
}

TEST_CASE("noise validation") {
  NoiseModel n;
  n.sigma_uwb = -1;
  CHECK_THROWS_AS(n.validate(), Error);
  NoiseModel f;
  f.paper_faithful = true;
  f.sigma_uwb = 0.1;
  f.sigma_odom = 0.02;
  try {
    f.validate();
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
    CHECK(std::string(e.what()).find("sigma_odom") != std::string::npos);
  }
}
