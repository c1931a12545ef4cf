#include <doctest.h>

#include <cmath>

#include "relloc/error.hpp"
#include "relloc/io.hpp"
#include "relloc/pipeline.hpp"

using namespace relloc;

namespace {

ScenarioConfig preset(const char* name) {
  return io::scenario_from_json(io::read_json_file(std::string(RELLOC_PRESET_DIR) + "/" + name));
}

}  // namespace

TEST_CASE("mode names") {
  CHECK(filter_mode_from_string("pf_ulv") == FilterMode::PfULV);
  CHECK(to_string(FilterMode::PfUL) == "pf_ul");
  try {
    filter_mode_from_string("pf_x");
    FAIL("expected InvalidArgument");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("pf_u, pf_ul, pf_ulv") != std::string::npos);
  }
}

TEST_CASE("heading integration follows odometry") {
  auto cfg = preset("paper_layout.json");
  cfg.noise.sigma_odom_heading = 0;
  cfg.duration = 3;
  const auto s = run_scenario(cfg);
  const auto tracks = integrate_headings(s, cfg.n_agents);
  for (std::size_t a = 0; a < cfg.n_agents; ++a) {
    for (std::size_t k = 0; k < s.truth.size(); ++k) {
      CHECK(std::abs(wrap_angle(tracks[a].at(s.truth.t[k]) - s.truth.poses[k][a].theta())) < 1e-9);
    }
  }
}

TEST_CASE("run_filter needs models for corrected modes") {
  auto cfg = preset("paper_layout.json");
  cfg.duration = 1;
  const auto s = run_scenario(cfg);
  PipelineConfig pc;
  pc.filter.particles = 50;
  CHECK_THROWS_AS(run_filter(s, cfg.graph, cfg.bounds, pc, FilterMode::PfUL, nullptr), Error);
  const auto run = run_filter(s, cfg.graph, cfg.bounds, pc, FilterMode::PfU, nullptr);
  CHECK(run.estimates.size() == 10);
  CHECK(run.diagnostics.size() == 10);
}

TEST_CASE("pf_ulv consumes detections through the gate") {
  auto cfg = preset("paper_layout.json");
  cfg.duration = 20;
  const auto s = run_scenario(cfg);
  REQUIRE(!s.detections.empty());
  PipelineConfig pc;
  pc.filter.particles = 100;
  const std::map<Edge, CorrectorModel> none;
  const auto run = run_filter(s, cfg.graph, cfg.bounds, pc, FilterMode::PfULV, &none);
  CHECK(run.detections_used + run.detections_rejected == s.detections.size());
  CHECK(run.detections_used > 0);
}

TEST_CASE("corrector training split") {
  auto cfg = preset("biased_ranges.json");
  cfg.duration = 30;
  const auto s = run_scenario(cfg);
  const auto tr = train_edge_corrector(s, cfg.n_agents, Edge(0, 1), 2, 1e-6, 0.25);
  CHECK(tr.train_samples + tr.holdout_samples == 300);
  CHECK(tr.holdout_samples == 75);
  CHECK_THROWS_AS(train_edge_corrector(s, cfg.n_agents, Edge(0, 1), 2, 1e-6, 1.0), Error);
}

TEST_CASE("a single range with odometry localizes the moving agent") {
  auto cfg = preset("two_robot_single_range.json");
  cfg.noise.sigma_uwb = 1e-4;
  cfg.noise.sigma_odom = 1e-4;
  cfg.noise.sigma_odom_heading = 1e-4;
  cfg.noise.sigma_det = 1e-4;
  cfg.noise.paper_faithful = false;
  cfg.duration = 20;  // 200 steps
  const auto s = run_scenario(cfg);
  PipelineConfig pc;
  pc.sigma_uwb = 0.01;
  const auto run = run_filter(s, cfg.graph, cfg.bounds, pc, FilterMode::PfU, nullptr);
  const auto ape = compute_ape(run.estimates, s.truth, cfg.static_agent);
  CHECK(ape.errors[0].back() < 0.05);
}
