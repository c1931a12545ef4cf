#include "relloc/io.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace relloc::io {

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& msg) {
  throw Error(ErrorCode::InvalidConfig, field + ": " + msg);
}

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) config_error(path + key, "missing required field '" + path + key + "'");
  return j.at(key);
}

template <class T>
T get_as(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    config_error(field, std::string("wrong type (") + e.what() + ")");
  }
}

template <class T>
T optional_field(const json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return get_as<T>(j.at(key), path + key);
}

Vec2 vec2_from(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2) config_error(field, "expected [x, y]");
  return {get_as<double>(j[0], field), get_as<double>(j[1], field)};
}

json vec2_to(const Vec2& v) { return json::array({v.x(), v.y()}); }

std::string event(double t, const char* kind, json payload) {
  json e;
  e["t"] = t;
  e["kind"] = kind;
  e["payload"] = std::move(payload);
  return e.dump() + "\n";
}

template <class Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json rec = json::parse(line);
      fn(rec.at("t").get<double>(), rec.at("kind").get<std::string>(), rec.at("payload"));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) config_error(where + k, "unknown field");
  }
}

}  // namespace

ScenarioConfig scenario_from_json(const json& j) {
  if (!j.is_object()) config_error("<root>", "expected a JSON object");
  ScenarioConfig cfg;
  cfg.name = optional_field<std::string>(j, "name", "", "scenario");
  cfg.n_agents = get_as<std::size_t>(require(j, "n_agents", ""), "n_agents");

  const json& b = require(j, "bounds", "");
  try {
    cfg.bounds = ArenaBounds(get_as<double>(require(b, "x_min", "bounds."), "bounds.x_min"),
                             get_as<double>(require(b, "x_max", "bounds."), "bounds.x_max"),
                             get_as<double>(require(b, "y_min", "bounds."), "bounds.y_min"),
                             get_as<double>(require(b, "y_max", "bounds."), "bounds.y_max"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    config_error("bounds", e.what());
  }

  const json& pats = require(j, "patterns", "");
  if (!pats.is_array()) config_error("patterns", "expected an array");
  for (std::size_t i = 0; i < pats.size(); ++i) {
    const std::string p = "patterns[" + std::to_string(i) + "].";
    const json& pj = pats[i];
    TrajectoryPattern tp;
    try {
      tp.kind = pattern_kind_from_string(get_as<std::string>(require(pj, "kind", p), p + "kind"));
    } catch (const Error& e) {
      config_error(p + "kind", e.what());
    }
    if (pj.contains("center")) tp.center = vec2_from(pj.at("center"), p + "center");
    tp.scale = optional_field<double>(pj, "scale", p, tp.scale);
    tp.speed = optional_field<double>(pj, "speed", p, tp.speed);
    tp.start_phase = optional_field<double>(pj, "start_phase", p, tp.start_phase);
    tp.aspect = optional_field<double>(pj, "aspect", p, tp.aspect);
    if (pj.contains("waypoints")) {
      for (const auto& w : pj.at("waypoints")) tp.waypoints.push_back(vec2_from(w, p + "waypoints"));
    }
    cfg.patterns.push_back(std::move(tp));
  }

  const json& g = require(j, "graph", "");
  try {
    if (optional_field<bool>(g, "complete", "graph.", false)) {
      cfg.graph = complete_graph(cfg.n_agents);
    } else {
      std::vector<std::pair<std::size_t, std::size_t>> edges;
      for (const auto& e : require(g, "edges", "graph.")) {
        if (!e.is_array() || e.size() != 2) config_error("graph.edges", "expected [i, j] pairs");
        edges.emplace_back(get_as<std::size_t>(e[0], "graph.edges"), get_as<std::size_t>(e[1], "graph.edges"));
      }
      cfg.graph = make_graph(cfg.n_agents, edges);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    config_error("graph", e.what());
  }

  const json& nz = require(j, "noise", "");
  cfg.noise.sigma_uwb = get_as<double>(require(nz, "sigma_uwb", "noise."), "noise.sigma_uwb");
  cfg.noise.sigma_odom = get_as<double>(require(nz, "sigma_odom", "noise."), "noise.sigma_odom");
  cfg.noise.sigma_odom_heading = optional_field<double>(nz, "sigma_odom_heading", "noise.", cfg.noise.sigma_odom_heading);
  cfg.noise.sigma_det = get_as<double>(require(nz, "sigma_det", "noise."), "noise.sigma_det");
  cfg.noise.paper_faithful = optional_field<bool>(nz, "paper_faithful", "noise.", false);

  if (j.contains("bias") && !j.at("bias").is_null()) {
    const json& bj = j.at("bias");
    RangingBiasModel bias(optional_field<double>(bj, "b_max", "bias.", 1.0));
    for (const auto& ej : require(bj, "edges", "bias.")) {
      const json& pair = require(ej, "edge", "bias.edges[].");
      if (!pair.is_array() || pair.size() != 2) config_error("bias.edges[].edge", "expected [i, j]");
      const auto a = get_as<std::size_t>(pair[0], "bias.edges[].edge");
      const auto c = get_as<std::size_t>(pair[1], "bias.edges[].edge");
      if (a >= cfg.n_agents || c >= cfg.n_agents || a == c) config_error("bias.edges[].edge", "invalid agent pair");
      EdgeBias eb;
      eb.constant = optional_field<double>(ej, "constant", "bias.edges[].", 0.0);
      eb.distance_gain = optional_field<double>(ej, "distance_gain", "bias.edges[].", 0.0);
      eb.cos_i = optional_field<double>(ej, "cos_i", "bias.edges[].", 0.0);
      eb.sin_i = optional_field<double>(ej, "sin_i", "bias.edges[].", 0.0);
      eb.cos_j = optional_field<double>(ej, "cos_j", "bias.edges[].", 0.0);
      eb.sin_j = optional_field<double>(ej, "sin_j", "bias.edges[].", 0.0);
      bias.set(Edge(a, c), eb);
    }
    cfg.bias = bias;
  }

  if (j.contains("detection")) {
    const json& d = j.at("detection");
    cfg.detection.d_det_th = optional_field<double>(d, "d_det_th", "detection.", cfg.detection.d_det_th);
    cfg.detection.max_camera_range =
        optional_field<double>(d, "max_camera_range", "detection.", cfg.detection.max_camera_range);
    cfg.detection.fov_half_angle = optional_field<double>(d, "fov_half_angle", "detection.", cfg.detection.fov_half_angle);
  }
  if (j.contains("objects")) {
    for (const auto& o : j.at("objects")) {
      WorldObject w;
      w.id = get_as<int>(require(o, "id", "objects[]."), "objects[].id");
      w.position = vec2_from(require(o, "position", "objects[]."), "objects[].position");
      cfg.objects.push_back(w);
    }
  }

  cfg.dt = get_as<double>(require(j, "dt", ""), "dt");
  cfg.duration = get_as<double>(require(j, "duration", ""), "duration");
  if (j.contains("rates")) cfg.rates.range_hz = optional_field<double>(j.at("rates"), "range_hz", "rates.", cfg.rates.range_hz);
  cfg.seed = get_as<std::uint64_t>(require(j, "seed", ""), "seed");
  if (j.contains("static_agent") && !j.at("static_agent").is_null()) {
    cfg.static_agent = get_as<std::size_t>(j.at("static_agent"), "static_agent");
  }
  cfg.validate();
  return cfg;
}

json scenario_to_json(const ScenarioConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["n_agents"] = cfg.n_agents;
  j["bounds"] = {{"x_min", cfg.bounds.x_min()}, {"x_max", cfg.bounds.x_max()},
                 {"y_min", cfg.bounds.y_min()}, {"y_max", cfg.bounds.y_max()}};
  json pats = json::array();
  for (const auto& p : cfg.patterns) {
    json pj = {{"kind", std::string(to_string(p.kind))}, {"center", vec2_to(p.center)}, {"scale", p.scale},
               {"speed", p.speed}, {"start_phase", p.start_phase}, {"aspect", p.aspect}};
    if (!p.waypoints.empty()) {
      json w = json::array();
      for (const auto& v : p.waypoints) w.push_back(vec2_to(v));
      pj["waypoints"] = w;
    }
    pats.push_back(pj);
  }
  j["patterns"] = pats;
  json edges = json::array();
  for (const auto& e : cfg.graph.edges()) edges.push_back(json::array({e.i, e.j}));
  j["graph"] = {{"edges", edges}};
  j["noise"] = {{"sigma_uwb", cfg.noise.sigma_uwb},
                {"sigma_odom", cfg.noise.sigma_odom},
                {"sigma_odom_heading", cfg.noise.sigma_odom_heading},
                {"sigma_det", cfg.noise.sigma_det},
                {"paper_faithful", cfg.noise.paper_faithful}};
  if (cfg.bias) {
    json be = json::array();
    for (const auto& [e, b] : cfg.bias->edges()) {
      be.push_back({{"edge", json::array({e.i, e.j})}, {"constant", b.constant}, {"distance_gain", b.distance_gain},
                    {"cos_i", b.cos_i}, {"sin_i", b.sin_i}, {"cos_j", b.cos_j}, {"sin_j", b.sin_j}});
    }
    j["bias"] = {{"b_max", cfg.bias->b_max()}, {"edges", be}};
  } else {
    j["bias"] = nullptr;
  }
  j["detection"] = {{"d_det_th", cfg.detection.d_det_th},
                    {"max_camera_range", cfg.detection.max_camera_range},
                    {"fov_half_angle", cfg.detection.fov_half_angle}};
  json objs = json::array();
  for (const auto& o : cfg.objects) objs.push_back({{"id", o.id}, {"position", vec2_to(o.position)}});
  j["objects"] = objs;
  j["dt"] = cfg.dt;
  j["duration"] = cfg.duration;
  j["rates"] = {{"range_hz", cfg.rates.range_hz}};
  j["seed"] = cfg.seed;
  j["static_agent"] = cfg.static_agent ? json(*cfg.static_agent) : json(nullptr);
  return j;
}

PipelineConfig pipeline_config_from_json(const json& j) {
  if (!j.is_object()) config_error("<root>", "expected a JSON object");
  check_keys(j,
             {"particles", "reinit_fraction", "q_floor", "roughening", "ess_threshold", "init", "init_sigma", "seed",
              "sigma_uwb", "sigma_det", "d_det_th", "ess_target", "correction_stages", "rotation_gain", "rotation_floor",
              "rigid_reinit_fraction", "misfit_gain"},
             "");
  PipelineConfig c;
  auto& f = c.filter;
  f.particles = optional_field<std::size_t>(j, "particles", "", f.particles);
  f.reinit_fraction = optional_field<double>(j, "reinit_fraction", "", f.reinit_fraction);
  f.q_floor = optional_field<double>(j, "q_floor", "", f.q_floor);
  f.roughening = optional_field<double>(j, "roughening", "", f.roughening);
  f.ess_threshold = optional_field<double>(j, "ess_threshold", "", f.ess_threshold);
  f.ess_target = optional_field<double>(j, "ess_target", "", f.ess_target);
  f.correction_stages = optional_field<std::size_t>(j, "correction_stages", "", f.correction_stages);
  f.rotation_gain = optional_field<double>(j, "rotation_gain", "", f.rotation_gain);
  f.rotation_floor = optional_field<double>(j, "rotation_floor", "", f.rotation_floor);
  f.rigid_reinit_fraction = optional_field<double>(j, "rigid_reinit_fraction", "", f.rigid_reinit_fraction);
  f.misfit_gain = optional_field<double>(j, "misfit_gain", "", f.misfit_gain);
  const auto init = optional_field<std::string>(j, "init", "", "uniform");
  if (init == "uniform") {
    f.init = InitMode::Uniform;
  } else if (init == "gaussian_prior") {
    f.init = InitMode::GaussianPrior;
  } else {
    config_error("init", "expected 'uniform' or 'gaussian_prior'");
  }
  f.init_sigma = optional_field<double>(j, "init_sigma", "", f.init_sigma);
  f.seed = optional_field<std::uint64_t>(j, "seed", "", f.seed);
  c.sigma_uwb = optional_field<double>(j, "sigma_uwb", "", c.sigma_uwb);
  c.sigma_det = optional_field<double>(j, "sigma_det", "", c.sigma_det);
  c.d_det_th = optional_field<double>(j, "d_det_th", "", c.d_det_th);
  if (!(c.sigma_uwb > 0.0)) config_error("sigma_uwb", "must be > 0");
  if (!(c.sigma_det > 0.0)) config_error("sigma_det", "must be > 0");
  if (!(c.d_det_th > 0.0)) config_error("d_det_th", "must be > 0");
  f.validate();
  return c;
}

json pipeline_config_to_json(const PipelineConfig& c) {
  const auto& f = c.filter;
  return {{"particles", f.particles},
          {"reinit_fraction", f.reinit_fraction},
          {"q_floor", f.q_floor},
          {"roughening", f.roughening},
          {"ess_threshold", f.ess_threshold},
          {"ess_target", f.ess_target},
          {"correction_stages", f.correction_stages},
          {"rotation_gain", f.rotation_gain},
          {"rotation_floor", f.rotation_floor},
          {"rigid_reinit_fraction", f.rigid_reinit_fraction},
          {"misfit_gain", f.misfit_gain},
          {"init", f.init == InitMode::Uniform ? "uniform" : "gaussian_prior"},
          {"init_sigma", f.init_sigma},
          {"seed", f.seed},
          {"sigma_uwb", c.sigma_uwb},
          {"sigma_det", c.sigma_det},
          {"d_det_th", c.d_det_th}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    // e.byte is an offset; report line and column.
    std::ifstream again(path);
    std::string text((std::istreambuf_iterator<char>(again)), std::istreambuf_iterator<char>());
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(ErrorCode::InvalidConfig,
                path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::string truth_jsonl(const GroundTruthLog& truth) {
  std::string out;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    json poses = json::array();
    for (const auto& p : truth.poses[k]) poses.push_back(json::array({p.x(), p.y(), p.theta()}));
    out += event(truth.t[k], "truth", {{"poses", poses}});
  }
  return out;
}

std::string ranges_jsonl(std::span<const UwbRange> ranges) {
  std::string out;
  for (const auto& r : ranges) out += event(r.t, "range", {{"i", r.edge.i}, {"j", r.edge.j}, {"d", r.distance}});
  return out;
}

std::string odometry_jsonl(std::span<const OdometryDelta> odom, std::span<const double> initial_headings) {
  std::string out;
  for (std::size_t i = 0; i < initial_headings.size(); ++i) {
    out += event(0.0, "heading0", {{"agent", i}, {"theta", initial_headings[i]}});
  }
  for (const auto& o : odom) {
    out += event(o.t, "odom",
                 {{"agent", o.agent.value},
                  {"dx", o.dx},
                  {"dy", o.dy},
                  {"dtheta", o.dtheta},
                  {"cov", json::array({o.covariance(0, 0), o.covariance(0, 1), o.covariance(1, 0), o.covariance(1, 1)})},
                  {"dt", o.dt}});
  }
  return out;
}

std::string detections_jsonl(std::span<const CooperativeDetection> dets) {
  std::string out;
  for (const auto& d : dets) {
    out += event(d.t, "detection",
                 {{"i", d.i.value},
                  {"j", d.j.value},
                  {"rel_i", vec2_to(d.rel_i)},
                  {"rel_j", vec2_to(d.rel_j)},
                  {"rp", vec2_to(d.rp)},
                  {"sigma", d.sigma},
                  {"object", d.object_id},
                  {"object_j", d.object_id_j}});
  }
  return out;
}

std::string estimates_jsonl(std::span<const StateEstimate> estimates) {
  std::string out;
  for (const auto& e : estimates) {
    json pos = json::array();
    for (const auto& p : e.positions) pos.push_back(vec2_to(p));
    json payload = {{"positions", pos}};
    if (!e.valid.empty()) {
      json v = json::array();
      for (bool b : e.valid) v.push_back(b);
      payload["valid"] = v;
    }
    out += event(e.t, "estimate", payload);
  }
  return out;
}

GroundTruthLog parse_truth(const std::filesystem::path& path) {
  GroundTruthLog log;
  for_each_record(path, [&](double t, const std::string& kind, const json& p) {
    if (kind != "truth") return;
    std::vector<Pose2> poses;
    for (const auto& q : p.at("poses")) poses.emplace_back(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>());
    log.t.push_back(t);
    log.poses.push_back(std::move(poses));
  });
  return log;
}

std::vector<UwbRange> parse_ranges(const std::filesystem::path& path) {
  std::vector<UwbRange> out;
  for_each_record(path, [&](double t, const std::string& kind, const json& p) {
    if (kind != "range") return;
    out.push_back({Edge(p.at("i").get<std::size_t>(), p.at("j").get<std::size_t>()), p.at("d").get<double>(), t});
  });
  return out;
}

void parse_odometry(const std::filesystem::path& path, ScenarioStreams& streams) {
  for_each_record(path, [&](double t, const std::string& kind, const json& p) {
    if (kind == "heading0") {
      const auto agent = p.at("agent").get<std::size_t>();
      if (streams.initial_headings.size() <= agent) streams.initial_headings.resize(agent + 1, 0.0);
      streams.initial_headings[agent] = p.at("theta").get<double>();
    } else if (kind == "odom") {
      OdometryDelta o;
      o.agent = AgentId(p.at("agent").get<std::size_t>());
      o.dx = p.at("dx").get<double>();
      o.dy = p.at("dy").get<double>();
      o.dtheta = p.at("dtheta").get<double>();
      const auto& c = p.at("cov");
      o.covariance << c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>(), c.at(3).get<double>();
      o.dt = p.at("dt").get<double>();
      o.t = t;
      streams.odometry.push_back(o);
    }
  });
}

std::vector<CooperativeDetection> parse_detections(const std::filesystem::path& path) {
  std::vector<CooperativeDetection> out;
  for_each_record(path, [&](double t, const std::string& kind, const json& p) {
    if (kind != "detection") return;
    CooperativeDetection d;
    d.i = AgentId(p.at("i").get<std::size_t>());
    d.j = AgentId(p.at("j").get<std::size_t>());
    d.rel_i = Vec2(p.at("rel_i").at(0).get<double>(), p.at("rel_i").at(1).get<double>());
    d.rel_j = Vec2(p.at("rel_j").at(0).get<double>(), p.at("rel_j").at(1).get<double>());
    d.rp = Vec2(p.at("rp").at(0).get<double>(), p.at("rp").at(1).get<double>());
    d.sigma = p.at("sigma").get<double>();
    d.object_id = p.at("object").get<int>();
    d.object_id_j = p.value("object_j", d.object_id);
    d.t = t;
    out.push_back(d);
  });
  return out;
}

std::vector<StateEstimate> parse_estimates(const std::filesystem::path& path) {
  std::vector<StateEstimate> out;
  for_each_record(path, [&](double t, const std::string& kind, const json& p) {
    if (kind != "estimate") return;
    StateEstimate e;
    e.t = t;
    for (const auto& q : p.at("positions")) e.positions.emplace_back(q.at(0).get<double>(), q.at(1).get<double>());
    if (p.contains("valid")) {
      for (const auto& v : p.at("valid")) e.valid.push_back(v.get<bool>());
    }
    out.push_back(std::move(e));
  });
  return out;
}

namespace {

std::ostringstream csv_stream() {
  std::ostringstream os;
  os << std::setprecision(17);
  return os;
}

}  // namespace

std::string truth_csv(const GroundTruthLog& truth) {
  auto os = csv_stream();
  os << "t,agent,x,y,theta\n";
  for (std::size_t k = 0; k < truth.size(); ++k) {
    for (std::size_t a = 0; a < truth.poses[k].size(); ++a) {
      const auto& p = truth.poses[k][a];
      os << truth.t[k] << ',' << a << ',' << p.x() << ',' << p.y() << ',' << p.theta() << '\n';
    }
  }
  return os.str();
}

std::string ranges_csv(std::span<const UwbRange> ranges) {
  auto os = csv_stream();
  os << "t,i,j,d\n";
  for (const auto& r : ranges) os << r.t << ',' << r.edge.i << ',' << r.edge.j << ',' << r.distance << '\n';
  return os.str();
}

std::string odometry_csv(std::span<const OdometryDelta> odom) {
  auto os = csv_stream();
  os << "t,agent,dx,dy,dtheta,dt\n";
  for (const auto& o : odom) {
    os << o.t << ',' << o.agent.value << ',' << o.dx << ',' << o.dy << ',' << o.dtheta << ',' << o.dt << '\n';
  }
  return os.str();
}

std::string detections_csv(std::span<const CooperativeDetection> dets) {
  auto os = csv_stream();
  os << "t,i,j,object,object_j,rel_x,rel_y,rp_x,rp_y\n";
  for (const auto& d : dets) {
    const Vec2 rel = d.relative_position();
    os << d.t << ',' << d.i.value << ',' << d.j.value << ',' << d.object_id << ',' << d.object_id_j << ',' << rel.x() << ',' << rel.y() << ','
       << d.rp.x() << ',' << d.rp.y() << '\n';
  }
  return os.str();
}

std::string estimates_csv(std::span<const StateEstimate> estimates) {
  auto os = csv_stream();
  os << "t,agent,x,y,valid\n";
  for (const auto& e : estimates) {
    for (std::size_t a = 0; a < e.positions.size(); ++a) {
      os << e.t << ',' << a << ',' << e.positions[a].x() << ',' << e.positions[a].y() << ',' << (e.is_valid(a) ? 1 : 0)
         << '\n';
    }
  }
  return os.str();
}

json model_to_json(const CorrectorModel& model) {
  json coeffs = json::array();
  for (Eigen::Index k = 0; k < model.coefficients.size(); ++k) coeffs.push_back(model.coefficients(k));
  return {{"edge", json::array({model.edge.i, model.edge.j})},
          {"n_steps", model.n_steps},
          {"feature_map", model.feature_map},
          {"coefficients", coeffs},
          {"ridge_lambda", model.ridge_lambda},
          {"training_mse", model.training_mse}};
}

CorrectorModel model_from_json(const json& j) {
  CorrectorModel m;
  const json& e = require(j, "edge", "");
  if (!e.is_array() || e.size() != 2) config_error("edge", "expected [i, j]");
  m.edge = Edge(get_as<std::size_t>(e[0], "edge"), get_as<std::size_t>(e[1], "edge"));
  m.n_steps = get_as<std::size_t>(require(j, "n_steps", ""), "n_steps");
  m.feature_map = get_as<std::string>(require(j, "feature_map", ""), "feature_map");
  if (m.feature_map != kHarmonicFeatureMap) config_error("feature_map", "unsupported feature map '" + m.feature_map + "'");
  const auto coeffs = get_as<std::vector<double>>(require(j, "coefficients", ""), "coefficients");
  if (coeffs.size() != kFeaturesPerFrame * m.n_steps) config_error("coefficients", "length must be 6 * n_steps");
  m.coefficients = Eigen::Map<const Eigen::VectorXd>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
  m.ridge_lambda = optional_field<double>(j, "ridge_lambda", "", 0.0);
  m.training_mse = optional_field<double>(j, "training_mse", "", 0.0);
  return m;
}

json summary_to_json(const ErrorSummary& s) {
  return {{"median", s.median}, {"mean", s.mean}, {"std", s.std}, {"rmse", s.rmse}, {"max", s.max}, {"count", s.count}};
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace relloc::io
