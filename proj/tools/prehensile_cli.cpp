#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "prehensile/dataset.hpp"
#include "prehensile/scenarios.hpp"
#include "prehensile/stepper.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace prehensile;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kSolver = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by all subcommands. Unset optionals fall back to the config
// file, then to library defaults.
struct Globals {
  std::string out = "out";
  std::optional<double> dt;
  std::optional<std::string> mode;
  std::optional<double> mu_finger;
  std::optional<double> mu_pusher;
  std::optional<int> facets;
  bool seed_free = false;
  std::string config;
  std::string lcp_dump;
};

struct ScenarioFlags {
  std::optional<std::string> primitive;
  std::optional<std::string> object;
  std::optional<double> grip;
  std::optional<double> vel;
  std::optional<double> param;
  std::optional<double> duration;
  std::optional<int> run;
};

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream f(path);
  if (!f) throw UsageError("cannot read config " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config " + path + ": top level must be an object");
  // A run manifest replays its resolved config.
  if (j.contains("config") && j.contains("command")) return j["config"];
  return j;
}

template <class T>
T pick(const std::optional<T>& flag, const json& cfg, const char* key, T fallback) {
  if (flag) return *flag;
  if (cfg.contains(key)) {
    try {
      return cfg.at(key).get<T>();
    } catch (const json::exception& e) {
      throw UsageError(std::string("config key '") + key + "': " + e.what());
    }
  }
  return fallback;
}

std::optional<double> pick_opt(const std::optional<double>& flag, const json& cfg,
                               const char* key) {
  if (flag || !cfg.contains(key)) return flag;
  return pick<double>(std::nullopt, cfg, key, 0.0);
}

template <class T>
T require(const std::optional<T>& flag, const json& cfg, const char* key, const char* flag_name) {
  if (!flag && !cfg.contains(key)) {
    throw UsageError(std::string("missing required option ") + flag_name);
  }
  return pick<T>(flag, cfg, key, T{});
}

void in_range(double v, double lo, double hi, const char* what) {
  if (!(v >= lo && v <= hi)) {
    throw UsageError(std::string(what) + " must be in [" + data::format_number(lo) + ", " +
                     data::format_number(hi) + "], got " + data::format_number(v));
  }
}

SimConfig resolve_sim(const Globals& g, const json& cfg, json& resolved) {
  if (g.seed_free || pick<bool>(std::nullopt, cfg, "seed_free", false)) {
    throw UsageError("--seed-free is reserved: the simulator has no random state");
  }
  SimConfig c;
  c.dt = pick(g.dt, cfg, "dt", c.dt);
  in_range(c.dt, 1e-5, 0.05, "--dt");
  const std::string mode = pick(g.mode, cfg, "mode", std::string("quasi-dynamic"));
  try {
    c.mode = step_mode_from_string(mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  c.facets = pick(g.facets, cfg, "facets", c.facets);
  if (c.facets < 4 || c.facets > 256 || c.facets % 2 != 0) {
    throw UsageError("--facets must be even and in [4, 256]");
  }
  c.lcp_tol = pick<double>(std::nullopt, cfg, "lcp_tol", c.lcp_tol);
  in_range(c.lcp_tol, 1e-15, 1e-3, "lcp_tol");
  c.max_pivots = pick<int>(std::nullopt, cfg, "max_pivots", c.max_pivots);
  if (c.max_pivots < 0) throw UsageError("max_pivots must be >= 0");
  c.warm_bases = pick<int>(std::nullopt, cfg, "warm_bases", c.warm_bases);
  if (c.warm_bases < 0) throw UsageError("warm_bases must be >= 0");
  c.regularize_on_degenerate =
      pick<bool>(std::nullopt, cfg, "regularize_on_degenerate", c.regularize_on_degenerate);
  if (!g.lcp_dump.empty()) {
    std::error_code ec;
    fs::create_directories(g.lcp_dump, ec);
    if (ec) throw UsageError("cannot create " + g.lcp_dump + ": " + ec.message());
    c.lcp_dump_dir = g.lcp_dump;
  }
  resolved["dt"] = c.dt;
  resolved["mode"] = c.mode == StepMode::kDynamic ? "dynamic" : "quasi-dynamic";
  resolved["facets"] = c.facets;
  resolved["lcp_tol"] = c.lcp_tol;
  resolved["max_pivots"] = c.max_pivots;
  resolved["warm_bases"] = c.warm_bases;
  resolved["regularize_on_degenerate"] = c.regularize_on_degenerate;
  return c;
}

ScenarioSpec resolve_scenario(const ScenarioFlags& f, const Globals& g, const json& cfg,
                              json& resolved) {
  const std::string prim_s = require(f.primitive, cfg, "primitive", "--primitive");
  const std::string object = require(f.object, cfg, "object", "--object");
  const double grip = require(f.grip, cfg, "grip_N", "--grip");
  in_range(grip, 0.1, 100.0, "--grip");
  const double vel = require(f.vel, cfg, "speed", "--vel");
  in_range(vel, 0.1, 100.0, "--vel");
  const double param = pick(f.param, cfg, "geometry_param", 0.0);
  in_range(param, -89.0, 89.0, "geometry parameter");
  ScenarioOverrides o;
  const std::optional<double> mu_f = pick_opt(g.mu_finger, cfg, "mu_finger");
  const std::optional<double> mu_p = pick_opt(g.mu_pusher, cfg, "mu_pusher");
  if (mu_f) in_range(*mu_f, 0.0, 5.0, "--mu-finger");
  if (mu_p) in_range(*mu_p, 0.0, 5.0, "--mu-pusher");
  o.mu_finger = mu_f;
  o.mu_external = mu_p;
  if (f.duration || cfg.contains("duration")) {
    o.duration = pick(f.duration, cfg, "duration", 0.0);
    in_range(*o.duration, 1e-3, 60.0, "--duration");
  }
  ScenarioSpec spec;
  try {
    spec = build_scenario(primitive_from_string(prim_s), find_object(object), grip, vel, param, o);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  resolved["primitive"] = to_string(spec.primitive);
  resolved["object"] = spec.object.id;
  resolved["grip_N"] = spec.grip_N;
  resolved["speed"] = spec.speed;
  resolved["geometry_param"] = spec.geometry_param;
  resolved["mu_finger"] = spec.mu_finger();
  resolved["mu_pusher"] = spec.mu_external();
  resolved["duration"] = spec.duration;
  resolved["run"] = pick(f.run, cfg, "run", 0);
  return spec;
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << s;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const json& inputs, const json& outputs) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["config_hash"] = "fnv1a64:" + hex(fnv1a(config.dump()));
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  m["tool_version"] = PREHENSILE_VERSION;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

json metrics_json(const RolloutMetrics& m) {
  return {{"peak_pusher_fx_N", m.peak_pusher_fx_N},
          {"peak_pusher_force_N", m.peak_pusher_force_N},
          {"slide_down_mm", m.slide_down_mm},
          {"com_translation_mm", m.com_translation_mm},
          {"final_rotation_rad", m.final_rotation_rad},
          {"finger_asymmetry_N", m.finger_asymmetry_N},
          {"pusher_axis_torque_Nm", m.pusher_axis_torque_Nm},
          {"external_slip_fraction", m.external_slip_fraction},
          {"finger_slip_fraction", m.finger_slip_fraction},
          {"steps", m.steps}};
}

int cmd_simulate(const Globals& g, const ScenarioFlags& f) {
  const json cfg = load_config(g.config);
  json resolved;
  const SimConfig sim = resolve_sim(g, cfg, resolved);
  const ScenarioSpec spec = resolve_scenario(f, g, cfg, resolved);
  const fs::path out = prepare_out(g.out);

  const SceneSetup setup = build_scene(spec);
  const Trajectory t = rollout(setup.scene, setup.initial, spec.duration, sim);
  const data::TrialLog log =
      to_trial_log(t, setup.scene, trial_metadata(spec, resolved["run"].get<int>()));
  data::write_log(out / "trajectory.csv", log);
  json summary = metrics_json(summarize(t, setup.scene));
  summary["aborted"] = t.aborted;
  if (t.aborted) summary["error"] = t.error;
  write_text(out / "summary.json", summary.dump(2) + "\n");
  write_manifest(out, "simulate", resolved, json::object(),
                 {"trajectory.csv", data::sidecar_path("trajectory.csv").string(), "summary.json"});

  if (t.aborted) throw SolverError(t.error + " (partial output kept, " +
                                   std::to_string(t.steps.size()) + " steps)");
  std::cout << "simulate: " << t.steps.size() << " steps, peak pusher fx "
            << summary["peak_pusher_fx_N"].get<double>() << " N, slide-down "
            << summary["slide_down_mm"].get<double>() << " mm -> " << out.string() << "\n";
  return kOk;
}

std::vector<double> number_list(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  try {
    return j.at(key).get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("grid key '") + key + "': " + e.what());
  }
}

GridSpec grid_from_json(const json& j) {
  GridSpec g;
  try {
    g.primitive = primitive_from_string(j.value("primitive", std::string()));
    g.objects = j.value("objects", std::vector<std::string>{});
    g.runs = j.value("runs", 3);
  } catch (const std::exception& e) {
    throw UsageError(std::string("grid config: ") + e.what());
  }
  g.grips = number_list(j, "grips");
  g.speeds = number_list(j, "speeds");
  g.params = number_list(j, "params");
  if (g.params.empty() && g.primitive == Primitive::kRoll) g.params = {0.0};
  return g;
}

json grid_to_json(const GridSpec& g) {
  return {{"primitive", to_string(g.primitive)}, {"objects", g.objects}, {"grips", g.grips},
          {"speeds", g.speeds},                  {"params", g.params},   {"runs", g.runs}};
}

int cmd_sweep(const Globals& g, const std::string& grid_name, const std::optional<std::string>& object,
              int threads) {
  const json cfg = load_config(g.config);
  json resolved;
  const SimConfig sim = resolve_sim(g, cfg, resolved);
  GridSpec grid;
  const std::string obj = object.value_or("obj4");
  if (!grid_name.empty()) {
    if (grid_name == "standard-linear-push") grid = standard_linear_push_grid(obj);
    else if (grid_name == "standard-pivot") grid = standard_pivot_grid(obj);
    else if (grid_name == "standard-roll") grid = standard_roll_grid();
    else throw UsageError("unknown grid '" + grid_name + "'");
  } else if (cfg.contains("grid")) {
    grid = grid_from_json(cfg["grid"]);
  } else {
    throw UsageError("sweep needs --grid NAME or a config with a 'grid' object");
  }
  for (const std::string& o : grid.objects) {
    try {
      find_object(o);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (grid.cell_count() == 0) throw UsageError("grid has no cells");
  grid.overrides.mu_finger = pick_opt(g.mu_finger, cfg, "mu_finger");
  grid.overrides.mu_external = pick_opt(g.mu_pusher, cfg, "mu_pusher");
  if (grid.overrides.mu_finger) in_range(*grid.overrides.mu_finger, 0.0, 5.0, "--mu-finger");
  if (grid.overrides.mu_external) in_range(*grid.overrides.mu_external, 0.0, 5.0, "--mu-pusher");
  resolved["grid"] = grid_to_json(grid);
  if (grid.overrides.mu_finger) resolved["mu_finger"] = *grid.overrides.mu_finger;
  if (grid.overrides.mu_external) resolved["mu_pusher"] = *grid.overrides.mu_external;

  const fs::path out = prepare_out(g.out);
  const SweepReport rep = run_sweep(grid, sim, threads);
  write_text(out / "sweep.csv", sweep_report_csv(rep));
  write_manifest(out, "sweep", resolved, json::object(), {"sweep.csv"});
  std::cout << "sweep: " << rep.succeeded() << "/" << rep.rows.size() << " cells succeeded -> "
            << (out / "sweep.csv").string() << "\n";
  if (rep.succeeded() == 0) throw SolverError("every sweep cell failed");
  return kOk;
}

// A cube resting on one point contact on a table.
SceneSetup toy_point_scene(double mu) {
  constexpr double side = 0.025;
  SceneSetup s;
  s.scene.mass = MassProps::box(0.1, Vec3::Constant(side));
  ContactSite site;
  site.name = "table";
  site.owner = Owner::kWorld;
  site.patch.kind = PatchKind::kPoint;
  site.patch.center = Vec3::Zero();
  site.patch.normal = Vec3::UnitZ();
  site.patch.axis = Vec3::UnitX();
  site.patch.mu = mu;
  site.points = 1;
  site.surface = ObjectSurface::plane(Vec3(0, 0, -side / 2), -Vec3::UnitZ());
  s.scene.sites.push_back(site);
  s.initial.object = Pose::from_translation(Vec3(0, 0, side / 2));
  return s;
}

std::string interval_cells(const Interval& i) {
  return data::format_number(i.lo) + "," + data::format_number(i.hi);
}

int cmd_bounds(const Globals& g, const ScenarioFlags& f, double time, const std::string& toy) {
  const json cfg = load_config(g.config);
  json resolved;
  SimConfig sim = resolve_sim(g, cfg, resolved);
  SceneSetup setup;
  double duration = 0.0;
  if (!toy.empty()) {
    if (toy != "point") throw UsageError("unknown toy scenario '" + toy + "'");
    const double mu = g.mu_pusher.value_or(0.5);
    in_range(mu, 0.0, 5.0, "--mu-pusher");
    setup = toy_point_scene(mu);
    duration = time + sim.dt;
    resolved["toy"] = toy;
    resolved["mu_pusher"] = mu;
  } else {
    const ScenarioSpec spec = resolve_scenario(f, g, cfg, resolved);
    setup = build_scene(spec);
    duration = spec.duration;
  }
  resolved["time"] = time;
  const fs::path out = prepare_out(g.out);

  const long index = std::lround(std::floor(time / sim.dt + 1e-9));
  if (!(time >= 0.0) || time >= duration) {
    throw SolverError("t = " + data::format_number(time) +
                      " s is outside the engaged part of the motion [0, " +
                      data::format_number(duration) + ") s");
  }
  const Trajectory t = rollout(setup.scene, setup.initial, (index + 1) * sim.dt, sim);
  if (t.aborted || static_cast<long>(t.steps.size()) <= index) {
    throw SolverError("nominal solve failed before t = " + data::format_number(time) + ": " +
                      t.error);
  }
  const StepResult& r = t.steps[index];
  double load = 0.0;
  for (const Vec3& p : r.point_forces) load += p.norm();
  if (load == 0.0) {
    throw SolverError("no contact carries load at t = " + data::format_number(time) + " s");
  }
  ForceBounds b;
  try {
    b = force_resolution_bounds(t.states[index], setup.scene, FixedMotion{r.object_twist, r.closing_rate},
                                sim);
  } catch (const InfeasibleMotion& e) {
    throw SolverError(e.what());
  }

  std::ostringstream csv;
  csv << "point,site,owner,x,y,z,slip,normal_lo,normal_hi,tangent1_lo,tangent1_hi,tangent2_lo,"
         "tangent2_hi\n";
  for (size_t i = 0; i < b.points.size(); ++i) {
    const PointForceBounds& p = b.points[i];
    csv << i << ',' << setup.scene.sites[p.site].name << ',' << to_string(p.owner) << ','
        << data::format_number(p.position.x()) << ',' << data::format_number(p.position.y()) << ','
        << data::format_number(p.position.z()) << ','
        << to_string(p.slip) << ',' << interval_cells(p.normal) << ',' << interval_cells(p.tangent1) << ','
        << interval_cells(p.tangent2) << '\n';
  }
  write_text(out / "bounds.csv", csv.str());
  json sites = json::array();
  for (const SiteWrenchBounds& s : b.sites) {
    json lo = json::array(), hi = json::array();
    for (const Interval& c : s.component) {
      lo.push_back(c.lo);
      hi.push_back(c.hi);
    }
    sites.push_back({{"site", s.name}, {"wrench_lo", lo}, {"wrench_hi", hi},
                     {"force_spread_N", s.force_spread()}, {"torque_spread_Nm", s.torque_spread()}});
  }
  double widest = 0.0;
  for (const PointForceBounds& p : b.points) {
    widest = std::max({widest, p.normal.width(), p.tangent1.width(), p.tangent2.width()});
  }
  const json summary = {{"time_s", t.states[index].time},
                        {"points", b.points.size()},
                        {"max_point_interval_N", widest},
                        {"max_site_force_spread_N", b.max_site_force_spread},
                        {"max_site_torque_spread_Nm", b.max_site_torque_spread},
                        {"sites", sites}};
  write_text(out / "bounds_summary.json", summary.dump(2) + "\n");
  write_manifest(out, "bounds", resolved, json::object(), {"bounds.csv", "bounds_summary.json"});
  std::cout << "bounds: " << b.points.size() << " points, widest interval " << widest
            << " N, site spread " << b.max_site_force_spread << " N / " << b.max_site_torque_spread
            << " N*m -> " << out.string() << "\n";
  return kOk;
}

int cmd_compare(const Globals& g, const std::string& sim_path, const std::string& log_path,
                double max_shift) {
  if (g.seed_free) throw UsageError("--seed-free is reserved: the simulator has no random state");
  in_range(max_shift, 0.0, 5.0, "--max-shift");
  data::TrialLog sim, exp;
  data::ComparisonReport rep;
  try {
    sim = data::read_log(sim_path);
    exp = data::read_log(log_path);
    rep = data::compare(sim, exp, max_shift);
  } catch (const data::SchemaError& e) {
    throw UsageError(std::string("schema error: ") + e.what());
  } catch (const data::MetadataMismatch& e) {
    throw UsageError(e.what());
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const fs::path out = prepare_out(g.out);
  const std::string report = rep.to_json().dump(2) + "\n";
  write_text(out / "comparison.json", report);
  write_manifest(out, "compare", {{"max_shift_s", max_shift}},
                 {{"sim", sim_path}, {"log", log_path}}, {"comparison.json"});
  std::cout << report;
  return kOk;
}

void add_scenario_flags(CLI::App* c, ScenarioFlags& f) {
  c->add_option("--primitive", f.primitive, "linear-push | pivot | roll");
  c->add_option("--object", f.object, "obj1 .. obj5");
  c->add_option("--grip", f.grip, "grip force (N)");
  c->add_option("--vel", f.vel, "gripper speed (mm/s, deg/s for pivot)");
  c->add_option("--slope,--offset,--param", f.param,
                "slope (deg) for linear push, pusher offset (mm) for pivot");
  c->add_option("--duration", f.duration, "rollout length (s)");
  c->add_option("--run", f.run, "run index recorded in the metadata");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rigid-contact simulator for prehensile pushing"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--dt", g.dt, "time step (s)");
  app.add_option("--mode", g.mode, "quasi-dynamic | dynamic");
  app.add_option("--mu-finger", g.mu_finger, "finger friction coefficient");
  app.add_option("--mu-pusher", g.mu_pusher, "pusher / platform friction coefficient");
  app.add_option("--facets", g.facets, "friction pyramid facets (even, >= 4)");
  app.add_flag("--seed-free", g.seed_free, "reserved; rejected");
  app.add_option("--config", g.config, "JSON config file or run manifest");
  app.add_option("--lcp-dump", g.lcp_dump, "directory for CSV dumps of failed LCP solves");

  ScenarioFlags sf;
  CLI::App* simulate = app.add_subcommand("simulate", "run one scenario");
  add_scenario_flags(simulate, sf);

  std::string grid_name;
  std::optional<std::string> grid_object;
  int threads = 0;
  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter grid");
  sweep->add_option("--grid", grid_name, "standard-linear-push | standard-pivot | standard-roll");
  sweep->add_option("--object", grid_object, "object for the built-in push/pivot grids");
  sweep->add_option("--threads", threads, "worker threads (0: hardware)")->check(CLI::NonNegativeNumber);

  ScenarioFlags bf;
  double time = 0.0;
  std::string toy;
  CLI::App* bounds = app.add_subcommand("bounds", "force intervals at one instant");
  add_scenario_flags(bounds, bf);
  bounds->add_option("--time", time, "instant (s)")->required();
  bounds->add_option("--toy", toy, "built-in toy scene instead of a scenario: point");

  std::string sim_path, log_path;
  double max_shift = 0.5;
  CLI::App* cmp = app.add_subcommand("compare", "compare a simulated log with a recorded one");
  cmp->add_option("sim", sim_path, "simulated trajectory CSV")->required();
  cmp->add_option("log", log_path, "recorded trajectory CSV")->required();
  cmp->add_option("--max-shift", max_shift, "alignment search range (s)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(g, sf);
    if (sweep->parsed()) return cmd_sweep(g, grid_name, grid_object, threads);
    if (bounds->parsed()) return cmd_bounds(g, bf, time, toy);
    if (cmp->parsed()) return cmd_compare(g, sim_path, log_path, max_shift);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
