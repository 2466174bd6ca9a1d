#pragma once

// Test objects, the three pushing primitives, and parameter sweeps.
//
// World frame: x is the push direction, z points up. Lengths are metres
// inside the library; builders take the experiment units (N, mm/s, deg/s,
// deg, mm).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "prehensile/contact.hpp"
#include "prehensile/dataset.hpp"
#include "prehensile/rigid.hpp"
#include "prehensile/stepper.hpp"

namespace prehensile {

enum class Shape { kCylinder, kCylinderFlatFaces, kSquarePrism };

inline const char* to_string(Shape s) {
  switch (s) {
    case Shape::kCylinder: return "cylinder";
    case Shape::kCylinderFlatFaces: return "cylinder_flat_faces";
    case Shape::kSquarePrism: return "square_prism";
  }
  return "?";
}

struct ObjectSpec {
  std::string id;
  Shape shape = Shape::kSquarePrism;
  double length = 0.1;  // m
  double side = 0.025;  // m, side or diameter
  double mass = 0.0;    // kg
  std::string material;

  bool has_flat_faces() const { return shape != Shape::kCylinder; }
  bool is_round() const { return shape != Shape::kSquarePrism; }

  // Body frame at the centroid with the long axis along `axis`.
  MassProps mass_props(int axis) const {
    if (shape == Shape::kSquarePrism) {
      Vec3 ext = Vec3::Constant(side);
      ext[axis] = length;
      return MassProps::box(mass, ext);
    }
    return MassProps::cylinder(mass, 0.5 * side, length, axis);
  }
};

inline const std::vector<ObjectSpec>& object_catalog() {
  static const std::vector<ObjectSpec> catalog = {
      {"obj1", Shape::kCylinder, 0.100, 0.025, 0.1580, "aluminum 6061"},
      {"obj2", Shape::kCylinder, 0.100, 0.025, 0.0725, "ABS"},
      {"obj3", Shape::kCylinderFlatFaces, 0.100, 0.025, 0.1450, "aluminum 6061"},
      {"obj4", Shape::kSquarePrism, 0.100, 0.025, 0.2005, "aluminum 6061"},
      {"obj5", Shape::kSquarePrism, 0.100, 0.025, 0.0938, "ABS"},
  };
  return catalog;
}

inline const ObjectSpec& find_object(const std::string& id) {
  for (const ObjectSpec& o : object_catalog()) {
    if (o.id == id) return o;
  }
  throw std::invalid_argument("unknown object '" + id + "'");
}

enum class Primitive { kLinearPush, kPivot, kRoll };

inline const char* to_string(Primitive p) {
  switch (p) {
    case Primitive::kLinearPush: return "linear_push";
    case Primitive::kPivot: return "pivot";
    case Primitive::kRoll: return "roll";
  }
  return "?";
}

inline Primitive primitive_from_string(std::string s) {
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "linear_push") return Primitive::kLinearPush;
  if (s == "pivot") return Primitive::kPivot;
  if (s == "roll") return Primitive::kRoll;
  throw std::invalid_argument("unknown primitive '" + s + "'");
}

// Friction coefficients used when a scenario does not override them. The
// linear-push values are fitted to the nominal pushing force and slide-down.
struct FrictionDefaults {
  double finger;
  double external;
};

inline FrictionDefaults default_friction(Primitive p) {
  switch (p) {
    case Primitive::kLinearPush: return {0.165, 0.25};
    case Primitive::kPivot: return {0.45, 0.50};
    case Primitive::kRoll: return {0.15, 2.5};
  }
  return {0.4, 0.4};
}

// Distance the gripper travels in linear pushing and rolling (m).
inline constexpr double kPushTravel = 0.015;
// Rotation commanded in pivoting (rad).
inline constexpr double kPivotAngle = 1.0;

struct ScenarioSpec {
  Primitive primitive = Primitive::kLinearPush;
  ObjectSpec object;
  double grip_N = 0.0;
  double speed = 0.0;           // mm/s (linear push, roll) or deg/s (pivot)
  double geometry_param = 0.0;  // slope deg, pusher offset mm, unused for roll
  ContactPatch finger_patch;    // kind, dimension, mu (placement is derived)
  ContactPatch external_patch;
  int finger_points = 4;
  int external_points = 4;
  double duration = 0.0;  // s
  int runs = 3;

  double mu_finger() const { return finger_patch.mu; }
  double mu_external() const { return external_patch.mu; }
};

struct ScenarioOverrides {
  std::optional<double> mu_finger;
  std::optional<double> mu_external;
  std::optional<double> duration;
  std::optional<int> finger_points;
  std::optional<int> external_points;
  std::optional<double> finger_diameter;  // m
  std::optional<double> external_length;  // m
};

namespace detail {

inline void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be > 0");
  }
}

inline void apply(ScenarioSpec& s, const ScenarioOverrides& o) {
  if (o.mu_finger) s.finger_patch.mu = *o.mu_finger;
  if (o.mu_external) s.external_patch.mu = *o.mu_external;
  if (o.duration) s.duration = *o.duration;
  if (o.finger_points) s.finger_points = *o.finger_points;
  if (o.external_points) s.external_points = *o.external_points;
  if (o.finger_diameter) s.finger_patch.dimension = *o.finger_diameter;
  if (o.external_length) s.external_patch.dimension = *o.external_length;
  if (!(s.finger_patch.mu >= 0.0) || !(s.external_patch.mu >= 0.0)) {
    throw std::invalid_argument("friction coefficients must be >= 0");
  }
  check_positive(s.duration, "duration");
}

inline ContactPatch patch(PatchKind kind, double dimension, double mu) {
  ContactPatch p;
  p.kind = kind;
  p.dimension = dimension;
  p.mu = mu;
  return p;
}

}  // namespace detail

inline ScenarioSpec build_linear_push(const ObjectSpec& object, double grip_N, double velocity_mm_s,
                                      double slope_deg, const ScenarioOverrides& overrides = {}) {
  if (!object.has_flat_faces()) {
    throw std::invalid_argument("linear push needs flat grasp faces; " + object.id +
                                " is a plain cylinder");
  }
  detail::check_positive(grip_N, "grip force");
  detail::check_positive(velocity_mm_s, "pushing velocity");
  if (!(std::abs(slope_deg) <= 20.0)) {
    throw std::invalid_argument("slope must lie within [-20, 20] deg");
  }
  const FrictionDefaults mu = default_friction(Primitive::kLinearPush);
  ScenarioSpec s;
  s.primitive = Primitive::kLinearPush;
  s.object = object;
  s.grip_N = grip_N;
  s.speed = velocity_mm_s;
  s.geometry_param = slope_deg;
  s.finger_patch = detail::patch(PatchKind::kDisc, 0.020, mu.finger);
  s.external_patch = detail::patch(PatchKind::kLine, object.side, mu.external);
  s.finger_points = 4;
  s.external_points = 2;
  s.duration = kPushTravel / (velocity_mm_s * 1e-3);
  detail::apply(s, overrides);
  return s;
}

inline ScenarioSpec build_pivot(const ObjectSpec& object, double grip_N, double angular_deg_s,
                                double pusher_offset_mm, const ScenarioOverrides& overrides = {}) {
  if (object.shape != Shape::kSquarePrism) {
    throw std::invalid_argument("pivoting needs a prismatic object; got " + object.id);
  }
  detail::check_positive(grip_N, "grip force");
  detail::check_positive(angular_deg_s, "angular velocity");
  if (!(pusher_offset_mm >= 0.0) || pusher_offset_mm * 1e-3 >= 0.5 * object.length) {
    throw std::invalid_argument("pusher offset must lie in [0, half the object length)");
  }
  const FrictionDefaults mu = default_friction(Primitive::kPivot);
  ScenarioSpec s;
  s.primitive = Primitive::kPivot;
  s.object = object;
  s.grip_N = grip_N;
  s.speed = angular_deg_s;
  s.geometry_param = pusher_offset_mm;
  s.finger_patch = detail::patch(PatchKind::kDisc, 0.020, mu.finger);
  s.external_patch = detail::patch(PatchKind::kLine, 0.028, mu.external);
  s.finger_points = 4;
  s.external_points = 2;
  s.duration = kPivotAngle / (angular_deg_s * std::numbers::pi / 180.0);
  detail::apply(s, overrides);
  return s;
}

inline ScenarioSpec build_roll(const ObjectSpec& object, double grip_N, double velocity_mm_s,
                               const ScenarioOverrides& overrides = {}) {
  if (object.shape != Shape::kCylinder) {
    throw std::invalid_argument("rolling needs a cylindrical object; got " + object.id);
  }
  detail::check_positive(grip_N, "grip force");
  detail::check_positive(velocity_mm_s, "pushing velocity");
  const FrictionDefaults mu = default_friction(Primitive::kRoll);
  ScenarioSpec s;
  s.primitive = Primitive::kRoll;
  s.object = object;
  s.grip_N = grip_N;
  s.speed = velocity_mm_s;
  s.finger_patch = detail::patch(PatchKind::kLine, 0.020, mu.finger);
  s.external_patch = detail::patch(PatchKind::kLine, object.length, mu.external);
  s.finger_points = 2;
  s.external_points = 2;
  s.duration = kPushTravel / (velocity_mm_s * 1e-3);
  detail::apply(s, overrides);
  return s;
}

inline ScenarioSpec build_scenario(Primitive p, const ObjectSpec& object, double grip_N,
                                   double speed, double geometry_param,
                                   const ScenarioOverrides& overrides = {}) {
  switch (p) {
    case Primitive::kLinearPush:
      return build_linear_push(object, grip_N, speed, geometry_param, overrides);
    case Primitive::kPivot: return build_pivot(object, grip_N, speed, geometry_param, overrides);
    case Primitive::kRoll: return build_roll(object, grip_N, speed, overrides);
  }
  throw std::invalid_argument("unknown primitive");
}

struct SceneSetup {
  Scene scene;
  SimState initial;
};

// Places the patches. Fingers hold two opposite faces through the centre of
// mass; the gripper frame starts at the object's centre.
inline SceneSetup build_scene(const ScenarioSpec& s) {
  const double half = 0.5 * s.object.side;
  const double half_len = 0.5 * s.object.length;
  SceneSetup out;
  Scene& scene = out.scene;
  scene.grip_force = s.grip_N;

  auto site = [](std::string name, Owner owner, ContactPatch patch, Vec3 center, Vec3 normal,
                 Vec3 axis, int points, ObjectSurface surface, bool track) {
    patch.center = center;
    patch.normal = normal;
    patch.axis = axis;
    return ContactSite{std::move(name), owner, patch, points, surface, track,
                       is_finger(owner) && patch.kind == PatchKind::kDisc};
  };

  switch (s.primitive) {
    case Primitive::kLinearPush:
    case Primitive::kPivot: {
      // Long axis along x, fingers on the +-y faces.
      scene.mass = s.object.mass_props(0);
      scene.sites.push_back(site("finger1", Owner::kFinger1, s.finger_patch, Vec3(0, half, 0),
                                 -Vec3::UnitY(), Vec3::UnitX(), s.finger_points,
                                 ObjectSurface::plane(Vec3(0, half, 0), Vec3::UnitY()), false));
      scene.sites.push_back(site("finger2", Owner::kFinger2, s.finger_patch, Vec3(0, -half, 0),
                                 Vec3::UnitY(), Vec3::UnitX(), s.finger_points,
                                 ObjectSurface::plane(Vec3(0, -half, 0), -Vec3::UnitY()), false));
      if (s.primitive == Primitive::kLinearPush) {
        // The fixed sensor face meets the trailing end face of the object
        // along its full height.
        scene.sites.push_back(site("pusher", Owner::kPusher, s.external_patch,
                                   Vec3(-half_len, 0, 0), Vec3::UnitX(), Vec3::UnitZ(),
                                   s.external_points,
                                   ObjectSurface::plane(Vec3(-half_len, 0, 0), -Vec3::UnitX()),
                                   true));
        const double slope = s.geometry_param * std::numbers::pi / 180.0;
        const double v = s.speed * 1e-3;
        scene.motion.gripper.linear = v * Vec3(-std::cos(slope), 0.0, std::sin(slope));
      } else {
        // A line under the bottom face, `offset` in from the object's end,
        // swept about the finger axis.
        const double lever = half_len - s.geometry_param * 1e-3;
        scene.sites.push_back(site("pusher", Owner::kPusher, s.external_patch,
                                   Vec3(lever, 0, -half), Vec3::UnitZ(), Vec3::UnitY(),
                                   s.external_points,
                                   ObjectSurface::plane(Vec3(0, 0, -half), -Vec3::UnitZ()), false));
        const double w = s.speed * std::numbers::pi / 180.0;
        scene.motion.pusher.angular = Vec3(0.0, -w, 0.0);
      }
      break;
    }
    case Primitive::kRoll: {
      // Cylinder axis along y resting on the platform z = 0; fingers at +-x.
      const double r = half;
      scene.mass = s.object.mass_props(1);
      const ObjectSurface skin = ObjectSurface::cylinder(Vec3::Zero(), Vec3::UnitY(), r);
      scene.sites.push_back(site("finger1", Owner::kFinger1, s.finger_patch, Vec3(-r, 0, 0),
                                 Vec3::UnitX(), Vec3::UnitY(), s.finger_points, skin, false));
      scene.sites.push_back(site("finger2", Owner::kFinger2, s.finger_patch, Vec3(r, 0, 0),
                                 -Vec3::UnitX(), Vec3::UnitY(), s.finger_points, skin, false));
      scene.sites.push_back(site("platform", Owner::kWorld, s.external_patch, Vec3(0, 0, 0),
                                 Vec3::UnitZ(), Vec3::UnitY(), s.external_points, skin, true));
      scene.motion.gripper.linear = Vec3(s.speed * 1e-3, 0.0, 0.0);
      out.initial.object = Pose::from_translation(Vec3(0, 0, r));
      out.initial.gripper = Pose::from_translation(Vec3(0, 0, r));
      break;
    }
  }
  return out;
}

inline Trajectory simulate(const ScenarioSpec& spec, const SimConfig& cfg) {
  const SceneSetup setup = build_scene(spec);
  return rollout(setup.scene, setup.initial, spec.duration, cfg);
}

inline data::TrialMetadata trial_metadata(const ScenarioSpec& s, int run = 0) {
  data::TrialMetadata m;
  m.primitive = to_string(s.primitive);
  m.object = s.object.id;
  m.grip_N = s.grip_N;
  m.speed = s.speed;
  m.geometry_param = s.geometry_param;
  m.run = run;
  return m;
}

// Channel of a site: each finger has its own, every other contact is lumped
// into the external ("pusher") channel.
inline int site_channel(Owner o) {
  switch (o) {
    case Owner::kFinger1: return data::kFinger1;
    case Owner::kFinger2: return data::kFinger2;
    default: return data::kPusher;
  }
}

// One frame per step, stamped at the end of the step. Wrenches are the
// forces applied to the object, in world axes, with torques about its COM.
inline data::TrialLog to_trial_log(const Trajectory& traj, const Scene& scene,
                                   const data::TrialMetadata& meta) {
  data::TrialLog log;
  log.meta = meta;
  for (const StepResult& r : traj.steps) {
    data::FrameRecord f;
    f.t = r.state.time;
    f.set_pose(r.state.object);
    for (int ch = 0; ch < data::kChannels; ++ch) f.wrench[ch].setZero();
    for (size_t s = 0; s < scene.sites.size(); ++s) {
      f.wrench[site_channel(scene.sites[s].owner)] += r.site_wrenches[s].vector();
    }
    log.frames.push_back(f);
  }
  return log;
}

// Sensor model matching to_trial_log output.
inline data::NetWrenchModel simulator_sensor_model(const ObjectSpec& object,
                                                   const Vec3& gravity = Vec3(0, 0, -9.81)) {
  data::NetWrenchModel m;
  m.mass = object.mass;
  m.gravity = gravity;
  return m;
}

// ---------------------------------------------------------------------------
// Per-rollout summary

struct RolloutMetrics {
  double peak_pusher_fx_N = 0.0;      // max |x force| of the external channel
  double peak_pusher_force_N = 0.0;   // max norm of the external force
  double slide_down_mm = 0.0;         // COM descent
  double com_translation_mm = 0.0;    // max COM excursion
  double final_rotation_rad = 0.0;
  double finger_asymmetry_N = 0.0;    // mean | |f1| - |f2| |
  double pusher_axis_torque_Nm = 0.0; // mean external torque about y
  double external_slip_fraction = 0.0;
  double finger_slip_fraction = 0.0;
  int steps = 0;
};

inline RolloutMetrics summarize(const Trajectory& traj, const Scene& scene) {
  RolloutMetrics m;
  if (traj.states.empty()) return m;
  const Pose& p0 = traj.states.front().object;
  for (const SimState& s : traj.states) {
    m.com_translation_mm =
        std::max(m.com_translation_mm, 1000.0 * (s.object.translation() - p0.translation()).norm());
  }
  const Pose& p1 = traj.states.back().object;
  m.slide_down_mm = 1000.0 * (p0.translation().z() - p1.translation().z());
  m.final_rotation_rad = rotation_distance(p0.rotation(), p1.rotation());
  int ext_points = 0, ext_slide = 0, fin_points = 0, fin_slide = 0;
  for (const StepResult& r : traj.steps) {
    Wrench ch[data::kChannels];
    for (size_t s = 0; s < scene.sites.size(); ++s) {
      ch[site_channel(scene.sites[s].owner)] =
          ch[site_channel(scene.sites[s].owner)] + r.site_wrenches[s];
    }
    const Wrench& ext = ch[data::kPusher];
    m.peak_pusher_fx_N = std::max(m.peak_pusher_fx_N, std::abs(ext.force.x()));
    m.peak_pusher_force_N = std::max(m.peak_pusher_force_N, ext.force.norm());
    m.pusher_axis_torque_Nm += ext.torque.y();
    m.finger_asymmetry_N += std::abs(ch[data::kFinger1].force.norm() - ch[data::kFinger2].force.norm());
    for (size_t i = 0; i < r.contacts.size(); ++i) {
      const bool sliding = r.slip[i] == Slip::kSliding;
      if (is_finger(r.contacts[i].owner)) {
        ++fin_points;
        fin_slide += sliding;
      } else {
        ++ext_points;
        ext_slide += sliding;
      }
    }
  }
  m.steps = static_cast<int>(traj.steps.size());
  if (m.steps > 0) {
    m.pusher_axis_torque_Nm /= m.steps;
    m.finger_asymmetry_N /= m.steps;
  }
  if (ext_points > 0) m.external_slip_fraction = static_cast<double>(ext_slide) / ext_points;
  if (fin_points > 0) m.finger_slip_fraction = static_cast<double>(fin_slide) / fin_points;
  return m;
}

// ---------------------------------------------------------------------------
// Sweeps

struct GridSpec {
  Primitive primitive = Primitive::kLinearPush;
  std::vector<std::string> objects;
  std::vector<double> grips;
  std::vector<double> speeds;
  std::vector<double> params;  // slopes or offsets; {0} for rolling
  int runs = 3;
  ScenarioOverrides overrides;

  size_t cell_count() const {
    return objects.size() * grips.size() * speeds.size() * params.size();
  }
};

inline GridSpec standard_linear_push_grid(const std::string& object = "obj4") {
  return {Primitive::kLinearPush, {object}, {20, 22, 25, 27, 30, 32, 35}, {10, 15, 20, 25},
          {-20, -10, 0, 10, 20}, 3, {}};
}

inline GridSpec standard_pivot_grid(const std::string& object = "obj4") {
  return {Primitive::kPivot, {object}, {20, 22, 25, 27, 30, 32, 35}, {2.5, 5, 10, 15, 20},
          {0, 5, 10, 15, 20, 25}, 3, {}};
}

inline GridSpec standard_roll_grid() {
  return {Primitive::kRoll, {"obj1", "obj2"}, {3, 4, 5, 6, 7, 8, 9, 10}, {5, 10, 15, 20, 25},
          {0}, 3, {}};
}

struct SweepCell {
  int index = 0;
  std::string object;
  double grip_N = 0.0;
  double speed = 0.0;
  double param = 0.0;
};

// Cells in grid order: object, grip, speed, parameter (last varies fastest).
inline std::vector<SweepCell> grid_cells(const GridSpec& g) {
  std::vector<SweepCell> cells;
  int idx = 0;
  for (const auto& o : g.objects)
    for (double grip : g.grips)
      for (double speed : g.speeds)
        for (double param : g.params) cells.push_back({idx++, o, grip, speed, param});
  return cells;
}

struct SweepRow {
  SweepCell cell;
  bool ok = false;
  std::string error;
  RolloutMetrics metrics;
};

struct SweepReport {
  Primitive primitive = Primitive::kLinearPush;
  int runs = 3;
  std::vector<SweepRow> rows;

  int succeeded() const {
    return static_cast<int>(std::count_if(rows.begin(), rows.end(),
                                          [](const SweepRow& r) { return r.ok; }));
  }
};

inline SweepRow run_cell(const GridSpec& g, const SweepCell& c, const SimConfig& cfg) {
  SweepRow row;
  row.cell = c;
  try {
    const ScenarioSpec spec =
        build_scenario(g.primitive, find_object(c.object), c.grip_N, c.speed, c.param, g.overrides);
    const SceneSetup setup = build_scene(spec);
    const Trajectory t = rollout(setup.scene, setup.initial, spec.duration, cfg);
    row.metrics = summarize(t, setup.scene);
    row.ok = !t.aborted;
    row.error = t.error;
  } catch (const std::exception& e) {
    row.ok = false;
    row.error = e.what();
  }
  return row;
}

// Runs every cell on up to `threads` workers; rows come back in grid order.
inline SweepReport run_sweep(const GridSpec& g, const SimConfig& cfg, int threads = 0) {
  if (g.cell_count() == 0) throw std::invalid_argument("run_sweep: empty grid");
  cfg.validate();
  const std::vector<SweepCell> cells = grid_cells(g);
  SweepReport rep;
  rep.primitive = g.primitive;
  rep.runs = g.runs;
  rep.rows.resize(cells.size());
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, static_cast<int>(cells.size()));
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < cells.size(); i = next++) rep.rows[i] = run_cell(g, cells[i], cfg);
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return rep;
}

inline std::string sweep_report_csv(const SweepReport& rep) {
  std::ostringstream out;
  out << "index,primitive,object,grip_N,speed,param,runs,ok,peak_pusher_fx_N,peak_pusher_force_N,"
         "slide_down_mm,com_translation_mm,final_rotation_rad,finger_asymmetry_N,"
         "pusher_axis_torque_Nm,external_slip_fraction,finger_slip_fraction,error\n";
  using data::format_number;
  for (const SweepRow& r : rep.rows) {
    const RolloutMetrics& m = r.metrics;
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << r.cell.index << ',' << to_string(rep.primitive) << ',' << r.cell.object << ','
        << format_number(r.cell.grip_N) << ',' << format_number(r.cell.speed) << ','
        << format_number(r.cell.param) << ',' << rep.runs << ',' << (r.ok ? 1 : 0) << ','
        << format_number(m.peak_pusher_fx_N) << ',' << format_number(m.peak_pusher_force_N) << ','
        << format_number(m.slide_down_mm) << ',' << format_number(m.com_translation_mm) << ','
        << format_number(m.final_rotation_rad) << ',' << format_number(m.finger_asymmetry_N) << ','
        << format_number(m.pusher_axis_torque_Nm) << ','
        << format_number(m.external_slip_fraction) << ','
        << format_number(m.finger_slip_fraction) << ',' << err << '\n';
  }
  return out.str();
}

}  // namespace prehensile
