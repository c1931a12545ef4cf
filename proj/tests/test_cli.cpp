#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "relloc/io.hpp"

using namespace relloc;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "relloc");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("relloc_test_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Writes a shortened copy of a preset and returns its path.
fs::path short_scenario(const fs::path& dir, const char* preset, double duration) {
  auto j = io::read_json_file(std::string(RELLOC_PRESET_DIR) + "/" + preset);
  j["duration"] = duration;
  const auto p = dir / "scenario_in.json";
  io::write_text_file(p, j.dump(2));
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Filter settings small enough for a unit test.
fs::path small_filter(const fs::path& dir) {
  auto j = io::read_json_file(std::string(RELLOC_PRESET_DIR) + "/filter_default.json");
  j["particles"] = 200;
  const auto p = dir / "filter.json";
  io::write_text_file(p, j.dump(2));
  return p;
}

}  // namespace

TEST_CASE("simulate writes the stream set deterministically") {
  const auto d = scratch("simulate");
  const auto cfg = short_scenario(d, "paper_layout.json", 5);
  REQUIRE(run_cli({"simulate", "--config", cfg.string(), "--out", (d / "a").string()}).code == 0);
  REQUIRE(run_cli({"simulate", "--config", cfg.string(), "--out", (d / "b").string()}).code == 0);
  for (const char* f : {"scenario.json", "truth.jsonl", "ranges.jsonl", "odom.jsonl", "detections.jsonl", "truth.csv",
                        "ranges.csv", "odom.csv", "detections.csv"}) {
    CHECK_MESSAGE(fs::exists(d / "a" / f), f);
    CHECK(slurp(d / "a" / f) == slurp(d / "b" / f));
  }
  const auto ma = io::read_json_file(d / "a" / "manifest.json");
  const auto mb = io::read_json_file(d / "b" / "manifest.json");
  CHECK(ma["outputs"] == mb["outputs"]);
  CHECK(ma["command"] == "simulate");

  REQUIRE(run_cli({"simulate", "--config", cfg.string(), "--seed", "99", "--out", (d / "c").string()}).code == 0);
  CHECK(slurp(d / "a" / "ranges.jsonl") != slurp(d / "c" / "ranges.jsonl"));
}

TEST_CASE("simulate rejects a config without noise") {
  const auto d = scratch("nonoise");
  auto j = io::read_json_file(std::string(RELLOC_PRESET_DIR) + "/paper_layout.json");
  j.erase("noise");
  io::write_text_file(d / "s.json", j.dump());
  const auto r = run_cli({"simulate", "--config", (d / "s.json").string(), "--out", (d / "o").string()});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("noise") != std::string::npos);
}

TEST_CASE("usage errors") {
  CHECK(run_cli({}).code == cli::kExitUsage);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run_cli({"simulate", "--out", "x"}).code == cli::kExitUsage);
}

TEST_CASE("run-filter, evaluate and their failure modes") {
  const auto d = scratch("filter");
  const auto cfg = short_scenario(d, "paper_layout.json", 4);
  REQUIRE(run_cli({"simulate", "--config", cfg.string(), "--out", (d / "s").string()}).code == 0);
  const auto fcfg = small_filter(d);

  auto r = run_cli({"run-filter", "--streams", (d / "s").string(), "--config", fcfg.string(), "--mode", "pf_x",
                    "--out", (d / "f").string()});
  CHECK(r.code == cli::kExitUsage);

  r = run_cli({"run-filter", "--streams", (d / "s").string(), "--config", fcfg.string(), "--mode", "pf_ul", "--out",
               (d / "f").string()});
  CHECK(r.code == cli::kExitUsage);

  r = run_cli({"run-filter", "--streams", (d / "nowhere").string(), "--config", fcfg.string(), "--out",
               (d / "f").string()});
  CHECK(r.code == cli::kExitRuntime);

  r = run_cli({"run-filter", "--streams", (d / "s").string(), "--config", fcfg.string(), "--out", (d / "f").string()});
  REQUIRE(r.code == 0);
  for (const char* f : {"estimates.jsonl", "estimates.csv", "diagnostics.csv", "manifest.json"}) {
    CHECK(fs::exists(d / "f" / f));
  }
  const auto first = slurp(d / "f" / "estimates.jsonl");
  REQUIRE(run_cli({"run-filter", "--streams", (d / "s").string(), "--config", fcfg.string(), "--out",
                   (d / "f2").string()})
              .code == 0);
  CHECK(slurp(d / "f2" / "estimates.jsonl") == first);

  // Detections are required for pf_ulv.
  fs::copy(d / "s", d / "s_nodet", fs::copy_options::recursive);
  fs::remove(d / "s_nodet" / "detections.jsonl");
  r = run_cli({"run-filter", "--streams", (d / "s_nodet").string(), "--config", fcfg.string(), "--mode", "pf_ulv",
               "--out", (d / "g").string()});
  CHECK(r.code == cli::kExitUsage);

  io::write_text_file(d / "ref.json", R"({"agent": 3, "waypoints": [[9, 3], [11, 3], [11, 5], [9, 5], [9, 3]]})");
  r = run_cli({"evaluate", "--estimates", (d / "f" / "estimates.jsonl").string(), "--truth",
               (d / "s" / "truth.jsonl").string(), "--reference", (d / "ref.json").string(), "--out",
               (d / "e").string()});
  REQUIRE(r.code == 0);
  const auto report = io::read_json_file(d / "e" / "report.json");
  CHECK(report["ape"]["pooled"].contains("median"));
  CHECK(report["ape"]["per_agent"].size() == 5);
  CHECK(report["ape"]["anchor"] == 4);
  CHECK(report["ate"]["agent"] == 3);
  CHECK(fs::exists(d / "e" / "ape.csv"));
  CHECK(fs::exists(d / "e" / "trajectories.csv"));

  // Estimates from other streams.
  const auto other = short_scenario(d, "paper_layout.json", 4);
  REQUIRE(run_cli({"simulate", "--config", other.string(), "--seed", "5", "--out", (d / "s5").string()}).code == 0);
  r = run_cli({"evaluate", "--estimates", (d / "f" / "estimates.jsonl").string(), "--truth",
               (d / "s5" / "truth.jsonl").string(), "--out", (d / "e5").string()});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("mismatch") != std::string::npos);
}

TEST_CASE("evaluating the truth against itself gives zero error") {
  const auto d = scratch("identity");
  const auto cfg = short_scenario(d, "paper_layout.json", 3);
  REQUIRE(run_cli({"simulate", "--config", cfg.string(), "--out", (d / "s").string()}).code == 0);
  const auto truth = io::parse_truth(d / "s" / "truth.jsonl");
  std::vector<StateEstimate> est;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    StateEstimate e;
    e.t = truth.t[k];
    for (const auto& p : truth.poses[k]) e.positions.push_back(p.position() + Vec2(5.0, -2.0));
    est.push_back(e);
  }
  fs::create_directories(d / "est");
  io::write_text_file(d / "est" / "estimates.jsonl", io::estimates_jsonl(est));
  REQUIRE(run_cli({"evaluate", "--estimates", (d / "est" / "estimates.jsonl").string(), "--truth",
                   (d / "s" / "truth.jsonl").string(), "--out", (d / "e").string()})
              .code == 0);
  const auto report = io::read_json_file(d / "e" / "report.json");
  CHECK(report["ape"]["pooled"]["max"].get<double>() < 1e-9);
}

TEST_CASE("baseline warns when every epoch is a gap") {
  const auto d = scratch("baseline");
  const auto cfg = short_scenario(d, "two_robot_single_range.json", 3);
  REQUIRE(run_cli({"simulate", "--config", cfg.string(), "--out", (d / "s").string()}).code == 0);
  auto r = run_cli({"baseline", "--streams", (d / "s").string(), "--out", (d / "b").string()});
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  const auto est = io::parse_estimates(d / "b" / "estimates.jsonl");
  REQUIRE(!est.empty());
  for (const auto& e : est) CHECK_FALSE(e.is_valid(0));  // agent 1 is the static one

  r = run_cli({"baseline", "--streams", (d / "missing").string(), "--out", (d / "b2").string()});
  CHECK(r.code == cli::kExitRuntime);
}

TEST_CASE("train-corrector") {
  const auto d = scratch("train");
  const auto cfg = short_scenario(d, "biased_ranges.json", 20);
  REQUIRE(run_cli({"simulate", "--config", cfg.string(), "--out", (d / "s").string()}).code == 0);
  const auto s = (d / "s").string();
  CHECK(run_cli({"train-corrector", "--streams", s, "--edge", "0,9", "--out", (d / "m.json").string()}).code ==
        cli::kExitUsage);
  CHECK(run_cli({"train-corrector", "--streams", s, "--edge", "zero", "--out", (d / "m.json").string()}).code ==
        cli::kExitUsage);
  CHECK(run_cli({"train-corrector", "--streams", s, "--edge", "0,1", "--n-steps", "0", "--out",
                 (d / "m.json").string()})
            .code == cli::kExitUsage);
  const auto r = run_cli({"train-corrector", "--streams", s, "--edge", "0,1", "--out", (d / "m.json").string()});
  REQUIRE(r.code == 0);
  const auto model = io::model_from_json(io::read_json_file(d / "m.json"));
  CHECK(model.edge == Edge(0, 1));

  const auto fcfg = small_filter(d);
  CHECK(run_cli({"run-filter", "--streams", s, "--config", fcfg.string(), "--mode", "pf_ul", "--model",
                 (d / "m.json").string(), "--out", (d / "f").string()})
            .code == 0);
}
