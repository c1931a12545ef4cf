#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "relloc/error.hpp"
#include "relloc/io.hpp"
#include "relloc/pipeline.hpp"
#include "relloc/range_corrector.hpp"

using namespace relloc;

namespace {

CorrectorWindow random_window(oracle::Gen& g, std::size_t n) {
  std::vector<CorrectorFrame> rows;
  for (std::size_t k = 0; k < n; ++k) rows.push_back({g.uniform(0, 8), g.uniform(-kPi, kPi), g.uniform(-kPi, kPi)});
  return CorrectorWindow(n, rows);
}

std::vector<TrainingSample> samples_from(oracle::Gen& g, std::size_t count, std::size_t n,
                                         const std::function<double(const CorrectorWindow&)>& truth_error) {
  std::vector<TrainingSample> out;
  for (std::size_t s = 0; s < count; ++s) {
    auto w = random_window(g, n);
    const double e = truth_error(w);
    out.push_back({std::move(w), e});
  }
  return out;
}

ScenarioConfig biased_zero_noise() {
  auto cfg = io::scenario_from_json(io::read_json_file(RELLOC_PRESET_DIR "/biased_ranges.json"));
  cfg.noise.sigma_uwb = 0;
  cfg.noise.sigma_odom = 0;
  cfg.noise.sigma_odom_heading = 0;
  cfg.noise.sigma_det = 0;
  cfg.noise.paper_faithful = false;
  cfg.duration = 90;
  return cfg;
}

}  // namespace

TEST_CASE("window features") {
  const CorrectorWindow w(2, {{1.0, 0.0, kPi / 2}, {2.0, kPi, 0.0}});
  const auto f = window_features(w);
  REQUIRE(f.size() == 12);
  CHECK(f(0) == 1.0);
  CHECK(f(1) == 1.0);
  CHECK(f(2) == doctest::Approx(0.0));
  CHECK(f(3) == doctest::Approx(1.0));
  CHECK(f(4) == doctest::Approx(1.0));
  CHECK(f(5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f(6) == 1.0);
  CHECK(f(7) == 2.0);
  CHECK(f(9) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(CorrectorWindow(3, {{1, 0, 0}}), Error);
  CHECK_THROWS_AS(CorrectorWindow(1, {{-1, 0, 0}}), Error);
}

TEST_CASE("padding repeats the first frame") {
  const std::vector<CorrectorFrame> recent{{3.0, 0.1, 0.2}};
  const auto w = CorrectorWindow::padded(4, recent);
  REQUIRE(w.n_steps() == 4);
  for (const auto& r : w.rows()) CHECK(r.range == 3.0);
  CorrectorModel m;
  m.n_steps = 4;
  m.coefficients = Eigen::VectorXd::Ones(24);
  CHECK(std::isfinite(predict_error(m, w)));
}

TEST_CASE("fit matches the ridge oracle") {
  oracle::Gen g(31);
  const std::size_t n = 2;
  auto train = samples_from(g, 200, n, [&](const CorrectorWindow& w) { return 0.01 * w.rows().back().range + 0.05 * g.normal(); });
  for (double lambda : {1e-3, 0.1, 10.0}) {
    const auto m = fit_corrector(Edge(0, 1), train, n, lambda);
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (const auto& s : train) {
      const auto f = window_features(s.window);
      x.emplace_back(f.data(), f.data() + f.size());
      y.push_back(s.true_error);
    }
    const auto beta = oracle::ridge(x, y, lambda);
    for (std::size_t k = 0; k < beta.size(); ++k) {
      CHECK(m.coefficients(static_cast<Eigen::Index>(k)) == doctest::Approx(beta[k]).epsilon(1e-6));
    }
  }
}

TEST_CASE("zero bias learns nothing") {
  oracle::Gen g(32);
  const auto train = samples_from(g, 300, 3, [](const CorrectorWindow&) { return 0.0; });
  const auto m = fit_corrector(Edge(0, 1), train, 3, 0.0);
  CHECK(m.training_mse < 1e-12);
  CHECK(m.coefficients.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("constant bias is recovered") {
  oracle::Gen g(33);
  const auto train = samples_from(g, 300, 3, [](const CorrectorWindow&) { return 0.2; });
  const auto m = fit_corrector(Edge(0, 1), train, 3, 0.0);
  for (int k = 0; k < 20; ++k) CHECK(predict_error(m, random_window(g, 3)) == doctest::Approx(0.2).epsilon(1e-6));
}

TEST_CASE("in-span harmonic bias is recovered exactly") {
  oracle::Gen g(34);
  auto bias = [](const CorrectorWindow& w) {
    const auto& r = w.rows().back();
    return 0.1 + 0.02 * r.range + 0.05 * std::cos(r.heading_i) - 0.03 * std::sin(r.heading_j);
  };
  const auto train = samples_from(g, 400, 4, bias);
  const auto hold = samples_from(g, 100, 4, bias);
  const auto m = fit_corrector(Edge(0, 1), train, 4, 0.0);
  CHECK(mean_squared_error(m, hold) < 1e-8);
  CHECK(zero_corrector_mse(hold) > 1e-3);
}

TEST_CASE("prediction is linear in the features") {
  oracle::Gen g(35);
  CorrectorModel m;
  m.n_steps = 2;
  m.coefficients = Eigen::VectorXd::Random(12);
  for (int k = 0; k < 100; ++k) {
    const auto w = random_window(g, 2);
    CHECK(predict_error(m, w) == doctest::Approx(m.coefficients.dot(window_features(w))).epsilon(1e-12));
    auto scaled = m;
    scaled.coefficients *= 3.0;
    CHECK(predict_error(scaled, w) == doctest::Approx(3.0 * predict_error(m, w)).epsilon(1e-12));
    auto other = m;
    other.coefficients = Eigen::VectorXd::Random(12);
    auto sum = m;
    sum.coefficients += other.coefficients;
    CHECK(predict_error(sum, w) == doctest::Approx(predict_error(m, w) + predict_error(other, w)).epsilon(1e-9));
  }
  CorrectorModel zero;
  zero.n_steps = 2;
  zero.coefficients = Eigen::VectorXd::Zero(12);
  CHECK(predict_error(zero, random_window(g, 2)) == 0.0);
  CHECK_THROWS_AS(predict_error(zero, random_window(g, 3)), Error);
}

TEST_CASE("corrected range is clamped at zero") {
  CorrectorModel m;
  m.n_steps = 1;
  m.coefficients = Eigen::VectorXd::Zero(6);
  m.coefficients(0) = 5.0;
  CHECK(corrected_range(m, CorrectorWindow(1, {{1.0, 0, 0}})) == 0.0);
}

TEST_CASE("fit errors") {
  CHECK_THROWS_AS(fit_corrector(Edge(0, 1), {}, 2, 0.0), Error);
  oracle::Gen g(36);
  const auto train = samples_from(g, 10, 2, [](const CorrectorWindow&) { return 0.0; });
  CHECK_THROWS_AS(fit_corrector(Edge(0, 1), train, 3, 0.0), Error);
}

TEST_CASE("stream application") {
  const std::vector<UwbRange> ranges{{Edge(0, 1), 2.0, 0.1}, {Edge(1, 2), 3.0, 0.1}, {Edge(0, 1), 2.5, 0.2},
                                     {Edge(0, 2), 1.0, 0.2}};
  std::vector<HeadingTrack> headings(3);
  for (auto& h : headings) h.push(0.0, 0.0);

  SUBCASE("no models is the identity") {
    const auto out = apply_corrector_stream({}, ranges, headings);
    REQUIRE(out.size() == ranges.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
      CHECK(out[k].distance == ranges[k].distance);
      CHECK(out[k].edge == ranges[k].edge);
      CHECK(out[k].t == ranges[k].t);
    }
  }
  SUBCASE("a model only touches its own edge") {
    CorrectorModel m;
    m.edge = Edge(0, 1);
    m.n_steps = 3;
    m.coefficients = Eigen::VectorXd::Zero(18);
    m.coefficients(12) = 0.2;  // constant term of the newest frame
    const auto out = apply_corrector_stream({{m.edge, m}}, ranges, headings);
    REQUIRE(out.size() == ranges.size());
    CHECK(out[0].distance == doctest::Approx(1.8));
    CHECK(out[1].distance == 3.0);
    CHECK(out[2].distance == doctest::Approx(2.3));
    CHECK(out[3].distance == 1.0);
  }
}

TEST_CASE("heading track lookup") {
  HeadingTrack h;
  h.push(0.0, 0.1);
  h.push(1.0, 0.2);
  CHECK(h.at(-1.0) == 0.1);
  CHECK(h.at(0.5) == 0.1);
  CHECK(h.at(1.0) == 0.2);
  CHECK(h.at(9.0) == 0.2);
}

TEST_CASE("simulated in-span bias is recovered from the streams") {
  const auto cfg = biased_zero_noise();
  const auto streams = run_scenario(cfg);
  for (const auto& e : cfg.graph.edges()) {
    const auto tr = train_edge_corrector(streams, cfg.n_agents, e, kDefaultCorrectorSteps, 0.0);
    CHECK(tr.holdout_mse < 1e-8);
    CHECK(tr.holdout_zero_mse > 1e-4);
  }
}

TEST_CASE("model files round-trip") {
  oracle::Gen g(37);
  const auto train = samples_from(g, 100, 2, [](const CorrectorWindow& w) { return 0.01 * w.rows().back().range; });
  const auto m = fit_corrector(Edge(1, 3), train, 2, 0.5);
  const auto back = io::model_from_json(io::json::parse(io::model_to_json(m).dump()));
  CHECK(back.edge == m.edge);
  CHECK(back.n_steps == m.n_steps);
  CHECK(back.coefficients == m.coefficients);
  CHECK(back.ridge_lambda == m.ridge_lambda);
  auto j = io::model_to_json(m);
  j["coefficients"].erase(0);
  CHECK_THROWS_AS(io::model_from_json(j), Error);
}
