#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "relloc/error.hpp"
#include "relloc/io.hpp"

namespace relloc::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

constexpr int kFormatVersion = 1;

// Parse errors in a config file are usage errors; a missing file stays an I/O error.
json load_config(const fs::path& path) {
  try {
    return io::read_json_file(path);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse) throw Error(ErrorCode::InvalidConfig, e.what());
    throw;
  }
}

std::string config_hash(const json& j) { return io::hex64(io::fnv1a64(j.dump())); }

class OutDir {
 public:
  explicit OutDir(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& text) {
    io::write_text_file(dir_ / name, text);
    inventory_[name] = io::hex64(io::fnv1a64(text));
  }

  void write_manifest(const std::string& command, json fields, std::chrono::steady_clock::time_point start) {
    fields["command"] = command;
    fields["format_version"] = kFormatVersion;
    fields["parameters"] = {{"corrector_feature_map", kHarmonicFeatureMap},
                            {"corrector_default_steps", kDefaultCorrectorSteps}};
    json files = json::object();
    for (const auto& [name, hash] : inventory_) files[name] = hash;
    fields["outputs"] = files;
    fields["runtime_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    io::write_text_file(dir_ / "manifest.json", fields.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  std::map<std::string, std::string> inventory_;
};

std::optional<json> read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) return std::nullopt;
  return io::read_json_file(p);
}

struct LoadedStreams {
  ScenarioConfig scenario;
  ScenarioStreams streams;
  std::string config_hash;
  bool has_truth = false;
  bool has_detections = false;
};

LoadedStreams load_streams(const fs::path& dir, bool need_truth) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "streams directory not found: " + dir.string());
  LoadedStreams s;
  const json cfg = io::read_json_file(dir / "scenario.json");
  s.scenario = io::scenario_from_json(cfg);
  s.config_hash = config_hash(cfg);
  if (fs::exists(dir / "truth.jsonl")) {
    s.streams.truth = io::parse_truth(dir / "truth.jsonl");
    s.has_truth = true;
  } else if (need_truth) {
    throw Error(ErrorCode::Io, "missing " + (dir / "truth.jsonl").string());
  }
  s.streams.ranges = io::parse_ranges(dir / "ranges.jsonl");
  io::parse_odometry(dir / "odom.jsonl", s.streams);
  if (fs::exists(dir / "detections.jsonl")) {
    s.streams.detections = io::parse_detections(dir / "detections.jsonl");
    s.has_detections = true;
  }
  return s;
}

int cmd_simulate(const fs::path& config, std::optional<std::uint64_t> seed, const fs::path& out_dir,
                 std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  auto cfg = io::scenario_from_json(load_config(config));
  if (seed) cfg.seed = *seed;
  const auto streams = run_scenario(cfg);
  const json resolved = io::scenario_to_json(cfg);

  OutDir dir(out_dir);
  dir.write("scenario.json", resolved.dump(2) + "\n");
  dir.write("truth.jsonl", io::truth_jsonl(streams.truth));
  dir.write("ranges.jsonl", io::ranges_jsonl(streams.ranges));
  dir.write("odom.jsonl", io::odometry_jsonl(streams.odometry, streams.initial_headings));
  dir.write("detections.jsonl", io::detections_jsonl(streams.detections));
  dir.write("truth.csv", io::truth_csv(streams.truth));
  dir.write("ranges.csv", io::ranges_csv(streams.ranges));
  dir.write("odom.csv", io::odometry_csv(streams.odometry));
  dir.write("detections.csv", io::detections_csv(streams.detections));
  dir.write_manifest("simulate", {{"config_hash", config_hash(resolved)}, {"seed", cfg.seed}}, start);
  out << "simulated " << cfg.steps() << " steps, " << streams.ranges.size() << " ranges, "
      << streams.detections.size() << " detections -> " << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_run_filter(const fs::path& streams_dir, const std::optional<fs::path>& config, const std::string& mode_name,
                   const std::vector<fs::path>& model_paths, std::optional<std::uint64_t> seed,
                   const fs::path& out_dir, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const FilterMode mode = filter_mode_from_string(mode_name);
  PipelineConfig pc;
  if (config) pc = io::pipeline_config_from_json(load_config(*config));
  if (seed) pc.filter.seed = *seed;

  std::map<Edge, CorrectorModel> models;
  if (mode != FilterMode::PfU) {
    if (model_paths.empty()) {
      throw Error(ErrorCode::InvalidArgument, "mode " + mode_name + " requires corrector models (--model)");
    }
    for (const auto& p : model_paths) {
      auto m = io::model_from_json(load_config(p));
      models[m.edge] = std::move(m);
    }
  }

  const auto s = load_streams(streams_dir, false);
  if (mode == FilterMode::PfULV && !s.has_detections) {
    throw Error(ErrorCode::InvalidArgument, "mode pf_ulv requires " + (streams_dir / "detections.jsonl").string());
  }
  for (const auto& [edge, m] : models) {
    if (!s.scenario.graph.contains(edge)) {
      throw Error(ErrorCode::EdgeNotInGraph,
                  "model edge " + std::to_string(edge.i) + "-" + std::to_string(edge.j) + " is not in the graph");
    }
  }

  const auto run = run_filter(s.streams, s.scenario.graph, s.scenario.bounds, pc, mode, &models);
  std::ostringstream diag;
  diag << std::setprecision(17) << "t,ess,entropy,beta\n";
  for (const auto& d : run.diagnostics) diag << d.estimate.t << "," << d.ess << "," << d.entropy << "," << d.beta << "\n";

  OutDir dir(out_dir);
  dir.write("estimates.jsonl", io::estimates_jsonl(run.estimates));
  dir.write("estimates.csv", io::estimates_csv(run.estimates));
  dir.write("diagnostics.csv", diag.str());
  const json pcj = io::pipeline_config_to_json(pc);
  dir.write_manifest("run-filter",
                     {{"config_hash", config_hash(pcj)},
                      {"filter_config", pcj},
                      {"mode", mode_name},
                      {"seed", pc.filter.seed},
                      {"streams_config_hash", s.config_hash},
                      {"detections_used", run.detections_used},
                      {"detections_rejected", run.detections_rejected}},
                     start);
  out << "filtered " << run.estimates.size() << " steps (" << mode_name << ") -> " << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_baseline(const fs::path& streams_dir, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  const auto s = load_streams(streams_dir, false);
  const auto estimates = run_multilateration_on(s.scenario, s.streams);
  std::size_t valid = 0;
  for (const auto& e : estimates) {
    for (std::size_t a = 0; a < e.positions.size(); ++a) {
      if (s.scenario.static_agent && a == *s.scenario.static_agent) continue;
      if (e.is_valid(a)) ++valid;
    }
  }
  if (valid == 0) err << "warning: multilateration produced no estimates; every epoch is gap-flagged\n";

  OutDir dir(out_dir);
  dir.write("estimates.jsonl", io::estimates_jsonl(estimates));
  dir.write("estimates.csv", io::estimates_csv(estimates));
  dir.write_manifest("baseline", {{"config_hash", s.config_hash}, {"streams_config_hash", s.config_hash},
                                  {"seed", s.scenario.seed}, {"valid_estimates", valid}},
                     start);
  out << "multilateration: " << estimates.size() << " epochs, " << valid << " valid agent estimates -> "
      << out_dir.string() << "\n";
  return kExitOk;
}

Edge parse_edge(const std::string& text) {
  const auto comma = text.find_first_of(",-");
  try {
    if (comma == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    const auto i = std::stoul(text.substr(0, comma), &used);
    const auto j = std::stoul(text.substr(comma + 1));
    return Edge(i, j);
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidArgument, "edge must look like 'i,j', got '" + text + "'");
  }
}

int cmd_train_corrector(const fs::path& streams_dir, const std::string& edge_text, std::size_t n_steps,
                        double lambda, double holdout, const fs::path& out_path, std::ostream& out) {
  if (n_steps == 0) throw Error(ErrorCode::InvalidArgument, "--n-steps must be >= 1");
  const Edge edge = parse_edge(edge_text);
  const auto s = load_streams(streams_dir, true);
  if (!s.scenario.graph.contains(edge)) {
    throw Error(ErrorCode::EdgeNotInGraph,
                "edge " + std::to_string(edge.i) + "-" + std::to_string(edge.j) + " is not in the ranging graph");
  }
  const auto tr = train_edge_corrector(s.streams, s.scenario.n_agents, edge, n_steps, lambda, holdout);
  if (out_path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(out_path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + out_path.parent_path().string());
  }
  io::write_text_file(out_path, io::model_to_json(tr.model).dump(2) + "\n");
  out << std::setprecision(6) << "edge " << edge.i << "-" << edge.j << ": " << tr.train_samples << " train, "
      << tr.holdout_samples << " held out; held-out MSE " << tr.holdout_mse << " (zero corrector "
      << tr.holdout_zero_mse << ")\n";
  return kExitOk;
}

std::vector<Vec2> load_reference(const fs::path& path, std::size_t& agent) {
  const json j = load_config(path);
  if (!j.is_object() || !j.contains("waypoints") || !j["waypoints"].is_array()) {
    throw Error(ErrorCode::InvalidConfig, "waypoints: expected an array of [x, y]");
  }
  if (j.contains("agent")) agent = j["agent"].get<std::size_t>();
  std::vector<Vec2> out;
  for (const auto& w : j["waypoints"]) {
    if (!w.is_array() || w.size() != 2) throw Error(ErrorCode::InvalidConfig, "waypoints: expected [x, y]");
    out.emplace_back(w[0].get<double>(), w[1].get<double>());
  }
  return out;
}

int cmd_evaluate(const fs::path& estimates_path, const fs::path& truth_path, const std::optional<fs::path>& reference,
                 std::optional<std::size_t> anchor, const fs::path& out_dir, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const auto est_manifest = read_manifest(estimates_path.parent_path());
  const auto truth_manifest = read_manifest(truth_path.parent_path());
  std::uint64_t seed = 0;
  if (est_manifest && truth_manifest && est_manifest->contains("streams_config_hash") &&
      truth_manifest->contains("config_hash")) {
    if ((*est_manifest)["streams_config_hash"] != (*truth_manifest)["config_hash"]) {
      throw Error(ErrorCode::SeedMismatch, "estimates were produced from different streams than " +
                                               truth_path.string() + " (manifest hash mismatch)");
    }
  }
  if (truth_manifest && truth_manifest->contains("seed")) seed = (*truth_manifest)["seed"].get<std::uint64_t>();
  if (!anchor && fs::exists(truth_path.parent_path() / "scenario.json")) {
    anchor = io::scenario_from_json(io::read_json_file(truth_path.parent_path() / "scenario.json")).static_agent;
  }

  const auto estimates = io::parse_estimates(estimates_path);
  const auto truth = io::parse_truth(truth_path);
  const auto ape = compute_ape(estimates, truth, anchor, seed);

  json report;
  json per_agent = json::array();
  for (const auto& s : ape.per_agent) per_agent.push_back(io::summary_to_json(s));
  report["ape"] = {{"pooled", io::summary_to_json(ape.pooled)},
                   {"per_agent", per_agent},
                   {"anchor", anchor ? json(*anchor) : json(nullptr)}};

  std::ostringstream ape_csv;
  ape_csv << std::setprecision(17) << "t";
  for (std::size_t a = 0; a < ape.errors.size(); ++a) ape_csv << ",agent" << a;
  ape_csv << "\n";
  for (std::size_t k = 0; k < ape.t.size(); ++k) {
    ape_csv << ape.t[k];
    for (const auto& series : ape.errors) ape_csv << "," << series[k];
    ape_csv << "\n";
  }

  // Estimates translated by the same anchor rule the APE uses, beside the nearest truth.
  std::ostringstream traj;
  traj << std::setprecision(17) << "t,agent,est_x,est_y,true_x,true_y\n";
  std::map<std::size_t, std::vector<Vec2>> aligned;
  for (const auto& e : estimates) {
    const auto it = std::lower_bound(truth.t.begin(), truth.t.end(), e.t - 1e-9);
    if (it == truth.t.end()) continue;
    const auto& poses = truth.poses[static_cast<std::size_t>(it - truth.t.begin())];
    Vec2 shift = Vec2::Zero();
    if (anchor) shift = poses[*anchor].position() - e.positions[*anchor];
    for (std::size_t a = 0; a < e.positions.size() && a < poses.size(); ++a) {
      if (!e.is_valid(a)) continue;
      const Vec2 p = e.positions[a] + shift;
      aligned[a].push_back(p);
      traj << e.t << "," << a << "," << p.x() << "," << p.y() << "," << poses[a].x() << "," << poses[a].y() << "\n";
    }
  }

  if (reference) {
    std::size_t agent = 0;
    const auto path = load_reference(*reference, agent);
    const auto ate = compute_ate(aligned[agent], path);
    report["ate"] = {{"agent", agent}, {"summary", io::summary_to_json(ate.summary)}};
  }

  OutDir dir(out_dir);
  dir.write("report.json", report.dump(2) + "\n");
  dir.write("ape.csv", ape_csv.str());
  dir.write("trajectories.csv", traj.str());
  dir.write_manifest("evaluate", {{"seed", seed}}, start);
  out << std::setprecision(6) << "APE median " << ape.pooled.median << " m, mean " << ape.pooled.mean << " m over "
      << ape.pooled.count << " samples";
  if (report.contains("ate")) out << "; ATE median " << report["ate"]["summary"]["median"].get<double>() << " m";
  out << "\n";
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
    case ErrorCode::Parse:
    case ErrorCode::InsufficientReferences:
    case ErrorCode::DegenerateGeometry:
    case ErrorCode::NonFinite:
      return kExitRuntime;
    default:
      return kExitUsage;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Range-only multi-robot relative localization toolkit", "relloc"};
  app.require_subcommand(1);

  std::string config, streams, out_dir, mode = "pf_u", edge, estimates, truth, reference;
  std::vector<std::string> models;
  std::uint64_t seed = 0;
  std::size_t n_steps = kDefaultCorrectorSteps, anchor = 0;
  double lambda = 1e-6, holdout = 0.2;

  auto* sim = app.add_subcommand("simulate", "Run a scenario and write ground truth and measurement streams");
  sim->add_option("--config", config, "Scenario JSON")->required();
  auto* sim_seed = sim->add_option("--seed", seed, "Override the scenario seed");
  sim->add_option("--out", out_dir, "Output directory")->required();

  auto* rf = app.add_subcommand("run-filter", "Run the particle filter over recorded streams");
  rf->add_option("--streams", streams, "Directory written by simulate")->required();
  auto* rf_config = rf->add_option("--config", config, "Filter JSON");
  rf->add_option("--mode", mode, "pf_u, pf_ul or pf_ulv");
  rf->add_option("--model", models, "Corrector model file (repeatable)");
  auto* rf_seed = rf->add_option("--seed", seed, "Override the filter seed");
  rf->add_option("--out", out_dir, "Output directory")->required();

  auto* bl = app.add_subcommand("baseline", "Run the multilateration tracker over recorded streams");
  bl->add_option("--streams", streams, "Directory written by simulate")->required();
  bl->add_option("--out", out_dir, "Output directory")->required();

  auto* tc = app.add_subcommand("train-corrector", "Fit one edge's ranging-error corrector");
  tc->add_option("--streams", streams, "Directory written by simulate (needs truth)")->required();
  tc->add_option("--edge", edge, "Edge as i,j")->required();
  tc->add_option("--n-steps", n_steps, "Window length");
  tc->add_option("--lambda", lambda, "Ridge penalty");
  tc->add_option("--holdout", holdout, "Trailing fraction held out for scoring");
  tc->add_option("--out", out_dir, "Model file to write")->required();

  auto* ev = app.add_subcommand("evaluate", "APE/ATE report and plot-ready CSV");
  ev->add_option("--estimates", estimates, "estimates.jsonl")->required();
  ev->add_option("--truth", truth, "truth.jsonl")->required();
  auto* ev_ref = ev->add_option("--reference", reference, "Reference path JSON {\"agent\": k, \"waypoints\": [[x, y], ...]}");
  auto* ev_anchor = ev->add_option("--anchor", anchor, "Anchor agent (default: the scenario's static agent)");
  ev->add_option("--out", out_dir, "Output directory")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto opt_seed = [&](CLI::Option* o) { return o->count() ? std::optional<std::uint64_t>(seed) : std::nullopt; };
  try {
    if (*sim) return cmd_simulate(config, opt_seed(sim_seed), out_dir, out);
    if (*rf) {
      std::vector<fs::path> paths(models.begin(), models.end());
      return cmd_run_filter(streams, rf_config->count() ? std::optional<fs::path>(config) : std::nullopt, mode, paths,
                            opt_seed(rf_seed), out_dir, out);
    }
    if (*bl) return cmd_baseline(streams, out_dir, out, err);
    if (*tc) return cmd_train_corrector(streams, edge, n_steps, lambda, holdout, out_dir, out);
    if (*ev) {
      return cmd_evaluate(estimates, truth, ev_ref->count() ? std::optional<fs::path>(reference) : std::nullopt,
                          ev_anchor->count() ? std::optional<std::size_t>(anchor) : std::nullopt, out_dir, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace relloc::cli
