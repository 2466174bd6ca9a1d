#pragma once

// Time-stepping frictional contact dynamics of one grasped object.
//
// Each step solves one mixed LCP in the Stewart-Trinkle form. Variables are
// ordered
//
//   [ object twist (6) | finger closing rate (1, if fingered) |
//     normal impulses p_n | facet impulses p_f (k per point) | slip slacks ]
//
// with the pairs
//
//   p_n    _|_  normal separation rate
//   p_f,j  _|_  slack + facet-direction slip rate
//   slack  _|_  mu p_n - sum_j p_f,j
//
// Fingers are force-controlled: both move along their contact normals with a
// shared closing rate, and the actuator pushes each with the grip force.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prehensile/contact.hpp"
#include "prehensile/lcp.hpp"
#include "prehensile/lp.hpp"
#include "prehensile/rigid.hpp"

namespace prehensile {

enum class Owner { kFinger1, kFinger2, kPusher, kWorld };

inline bool is_finger(Owner o) { return o == Owner::kFinger1 || o == Owner::kFinger2; }

inline const char* to_string(Owner o) {
  switch (o) {
    case Owner::kFinger1: return "finger1";
    case Owner::kFinger2: return "finger2";
    case Owner::kPusher: return "pusher";
    case Owner::kWorld: return "world";
  }
  return "?";
}

enum class StepMode { kQuasiDynamic, kDynamic };

inline const char* to_string(StepMode m) {
  return m == StepMode::kQuasiDynamic ? "quasi_dynamic" : "dynamic";
}

inline StepMode step_mode_from_string(const std::string& s) {
  if (s == "quasi_dynamic" || s == "quasi-dynamic") return StepMode::kQuasiDynamic;
  if (s == "dynamic") return StepMode::kDynamic;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

struct SimConfig {
  double dt = 0.004;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  StepMode mode = StepMode::kQuasiDynamic;
  double lcp_tol = 1e-9;
  int max_pivots = 0;
  int facets = 24;
  // Quasi-dynamic mode replaces the mass matrix by this fraction of it.
  double quasi_mass_scale = 1e-5;
  bool regularize_on_degenerate = true;
  // Recent distinct solver bases kept as warm starts.
  int warm_bases = 8;
  // Quasi-dynamic rollouts start from the twist of a trial first step, so the
  // first frame carries no start-up impulse from the object being at rest.
  bool consistent_start = true;
  // Tangential speed (m/s) above which a contact point counts as sliding.
  double slip_speed_threshold = 1e-6;
  // Directory for CSV dumps of failed LCP solves; empty disables.
  std::string lcp_dump_dir;

  void validate() const {
    if (!(dt > 0.0 && dt <= 0.05)) {
      throw std::invalid_argument("SimConfig: dt must be in (0, 0.05] s");
    }
    if (facets < 4 || facets % 2 != 0) {
      throw std::invalid_argument("SimConfig: facet count must be even and >= 4");
    }
    if (!gravity.allFinite()) throw std::invalid_argument("SimConfig: gravity not finite");
    if (!(lcp_tol > 0.0)) throw std::invalid_argument("SimConfig: lcp_tol must be > 0");
    if (!(quasi_mass_scale > 0.0)) {
      throw std::invalid_argument("SimConfig: quasi_mass_scale must be > 0");
    }
    if (warm_bases < 0) throw std::invalid_argument("SimConfig: warm_bases must be >= 0");
  }
};

// Object surface a contact site is projected onto, in the object frame.
struct ObjectSurface {
  enum class Kind { kPlane, kCylinder };
  Kind kind = Kind::kPlane;
  Vec3 point = Vec3::Zero();       // plane point, or a point on the cylinder axis
  Vec3 direction = Vec3::UnitZ();  // outward plane normal, or cylinder axis
  double radius = 0.0;

  static ObjectSurface plane(const Vec3& point, const Vec3& outward_normal) {
    return ObjectSurface{Kind::kPlane, point, outward_normal.normalized(), 0.0};
  }
  static ObjectSurface cylinder(const Vec3& axis_point, const Vec3& axis, double radius) {
    return ObjectSurface{Kind::kCylinder, axis_point, axis.normalized(), radius};
  }
};

// A contact patch carried by one body and held on one object surface.
struct ContactSite {
  std::string name;
  Owner owner = Owner::kWorld;
  ContactPatch patch;  // in the owner frame; normal points toward the object
  int points = 1;
  ObjectSurface surface;
  // The patch slides with the object's centre of mass in its own plane
  // (used when the object face, not the tool, bounds the contact region).
  bool track_object = false;
  // All points share one normal impulse in equal parts (a pad pressed
  // uniformly by the gripper) instead of carrying independent normals.
  bool uniform_pressure = false;
};

struct DrivenMotion {
  Twist gripper;  // world frame, about the gripper origin
  Twist pusher;   // world frame, about the pusher origin
};

struct Scene {
  MassProps mass;
  std::vector<ContactSite> sites;
  DrivenMotion motion;
  double grip_force = 0.0;  // preload at each finger patch (N)

  bool fingered() const {
    return std::any_of(sites.begin(), sites.end(),
                       [](const ContactSite& s) { return is_finger(s.owner); });
  }
};

struct SimState {
  Pose object;
  Twist object_twist;
  Pose gripper;
  Pose pusher;
  double time = 0.0;
  // Complementary bases of recent solves, newest first; tried as warm starts.
  std::vector<std::vector<int>> solver_bases;
};

struct SceneContact {
  ContactPoint point;
  Owner owner = Owner::kWorld;
  int site = 0;
  int index = 0;                       // point index within the site
  Vec3 owner_velocity = Vec3::Zero();  // owner material velocity at the point
  double gap = 0.0;                    // signed distance closed by projection
};

enum class Slip { kSticking, kSliding, kSeparating };

inline const char* to_string(Slip s) {
  switch (s) {
    case Slip::kSticking: return "stick";
    case Slip::kSliding: return "slide";
    case Slip::kSeparating: return "separate";
  }
  return "?";
}

struct StepResult {
  SimState state;                    // state after the step
  std::vector<SceneContact> contacts;
  std::vector<Vec3> point_impulses;  // N*s, world frame, on the object
  std::vector<Vec3> point_forces;    // impulse / dt
  std::vector<Vec3> slip_velocities;  // object minus owner, tangential part
  std::vector<Slip> slip;
  std::vector<Wrench> site_wrenches;  // N, N*m about the object COM
  Twist object_twist;                 // solved object motion
  double closing_rate = 0.0;          // solved finger closing rate
  lcp::Status status = lcp::Status::kSolved;
  double residual = 0.0;
  int pivots = 0;
  bool warm_started = false;
};

class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, SimState snapshot, lcp::Status status)
      : std::runtime_error(what), snapshot_(std::move(snapshot)), status_(status) {}
  const SimState& snapshot() const { return snapshot_; }
  lcp::Status status() const { return status_; }

 private:
  SimState snapshot_;
  lcp::Status status_;
};

inline Pose owner_pose(const SimState& s, Owner o) {
  switch (o) {
    case Owner::kFinger1:
    case Owner::kFinger2: return s.gripper;
    case Owner::kPusher: return s.pusher;
    case Owner::kWorld: return Pose::identity();
  }
  return Pose::identity();
}

inline Twist owner_twist(const DrivenMotion& m, Owner o) {
  switch (o) {
    case Owner::kFinger1:
    case Owner::kFinger2: return m.gripper;
    case Owner::kPusher: return m.pusher;
    case Owner::kWorld: return Twist{};
  }
  return Twist{};
}

// World-frame contact points of every site, projected onto the object.
inline std::vector<SceneContact> generate_contacts(const Scene& scene, const SimState& state) {
  std::vector<SceneContact> out;
  for (int si = 0; si < static_cast<int>(scene.sites.size()); ++si) {
    const ContactSite& site = scene.sites[si];
    const Pose owner = owner_pose(state, site.owner);
    const Twist twist = owner_twist(scene.motion, site.owner);
    const Vec3 patch_normal = owner.rotate(site.patch.normal);
    const Vec3 hint = owner.rotate(site.patch.axis);
    Vec3 shift = Vec3::Zero();
    if (site.track_object) {
      const Vec3 d = state.object.translation() - owner.apply(site.patch.center);
      shift = d - d.dot(patch_normal) * patch_normal;
    }
    int index = 0;
    for (const ContactPoint& local : discretize_patch(site.patch, site.points, si)) {
      const Vec3 p = owner.apply(local.position) + shift;
      Vec3 on_surface, normal;
      if (site.surface.kind == ObjectSurface::Kind::kPlane) {
        const Vec3 c = state.object.apply(site.surface.point);
        const Vec3 m = state.object.rotate(site.surface.direction);
        const double dist = (p - c).dot(m);
        on_surface = p - dist * m;
        normal = -m;
      } else {
        const Vec3 c = state.object.apply(site.surface.point);
        const Vec3 a = state.object.rotate(site.surface.direction);
        const Vec3 rel = p - c;
        const Vec3 radial = rel - rel.dot(a) * a;
        if (radial.norm() < 1e-12) {
          throw std::invalid_argument("contact site '" + site.name + "' lies on the cylinder axis");
        }
        on_surface = c + rel.dot(a) * a + site.surface.radius * radial.normalized();
        normal = -radial.normalized();
      }
      SceneContact sc;
      sc.point.position = on_surface;
      sc.point.normal = normal;
      tangent_basis(normal, hint, sc.point.tangent1, sc.point.tangent2);
      sc.point.mu = site.patch.mu;
      sc.point.patch = si;
      sc.owner = site.owner;
      sc.site = si;
      sc.index = index++;
      sc.owner_velocity = twist.point_velocity(on_surface - owner.translation());
      sc.gap = (on_surface - p).dot(normal);
      out.push_back(sc);
    }
  }
  return out;
}

// Layout bookkeeping for one assembled step.
struct StepLayout {
  int free = 6;  // object twist (+ closing rate)
  int contacts = 0;
  int normals = 0;  // normal impulse variables; uniform-pressure sites share one
  int facets = 8;
  std::vector<int> group;     // contact -> normal variable
  std::vector<double> share;  // contact's fraction of its normal variable

  bool has_closing() const { return free == 7; }
  int normal(int i) const { return free + group[i]; }
  int facet(int i, int j) const { return free + normals + i * facets + j; }
  int slack(int i) const { return free + normals + contacts * facets + i; }
  int size() const { return free + normals + contacts * (1 + facets); }
};

inline StepLayout make_layout(const Scene& scene, const std::vector<SceneContact>& contacts,
                              int facets) {
  StepLayout L;
  L.free = scene.fingered() ? 7 : 6;
  L.contacts = static_cast<int>(contacts.size());
  L.facets = facets;
  std::vector<int> site_group(scene.sites.size(), -1);
  std::vector<int> members;
  for (const SceneContact& c : contacts) {
    int g = L.normals;
    if (scene.sites[c.site].uniform_pressure) {
      if (site_group[c.site] < 0) site_group[c.site] = L.normals++, members.push_back(0);
      g = site_group[c.site];
    } else {
      ++L.normals;
      members.push_back(0);
    }
    ++members[g];
    L.group.push_back(g);
  }
  for (int g : L.group) L.share.push_back(1.0 / members[g]);
  return L;
}

struct AssembledStep {
  lcp::Problem problem;
  StepLayout layout;
  std::vector<SceneContact> contacts;
  FrictionPyramid pyramid;  // unit mu
  Eigen::MatrixXd H;         // regularized mass over the free block
  Eigen::VectorXd momentum;  // H x - A' z = momentum at the solution
  Eigen::MatrixXd A;         // normal-variable rows then facet rows, over the free block
  Eigen::VectorXd c;         // owner-velocity offsets of those rows
};

inline Vec3 facet_direction(const FrictionPyramid& p, const ContactPoint& c, int j) {
  return p.direction(j, c.tangent1, c.tangent2);
}

inline Eigen::MatrixXd world_mass_matrix(const MassProps& mp, const Pose& pose) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(6, 6);
  m.topLeftCorner<3, 3>() = mp.mass * Mat3::Identity();
  const Mat3 r = pose.rotation_matrix();
  m.bottomRightCorner<3, 3>() = r * mp.inertia * r.transpose();
  return m;
}

inline AssembledStep assemble_step(const SimState& state, const std::vector<SceneContact>& contacts,
                                   const Scene& scene, const SimConfig& cfg) {
  cfg.validate();
  scene.mass.validate();
  if (!scene.motion.gripper.linear.allFinite() || !scene.motion.gripper.angular.allFinite() ||
      !scene.motion.pusher.linear.allFinite() || !scene.motion.pusher.angular.allFinite()) {
    throw std::invalid_argument("assemble_step: driven twists must be finite");
  }
  if (contacts.empty() && cfg.mode == StepMode::kQuasiDynamic && !cfg.gravity.isZero(0.0)) {
    throw std::invalid_argument(
        "assemble_step: no contacts under gravity in quasi-dynamic mode (free fall is "
        "statically indeterminate)");
  }
  AssembledStep out;
  out.contacts = contacts;
  out.pyramid = linearize_cone(1.0, cfg.facets);
  out.layout = make_layout(scene, contacts, cfg.facets);
  const StepLayout& L = out.layout;
  const int nf = L.free;
  const int n = L.size();
  const int k = L.facets;
  const int nc = L.contacts;
  const int ng = L.normals;

  // Regularized mass and momentum.
  const Eigen::MatrixXd mass6 = world_mass_matrix(scene.mass, state.object);
  const double scale = cfg.mode == StepMode::kQuasiDynamic ? cfg.quasi_mass_scale : 1.0;
  out.H = Eigen::MatrixXd::Zero(nf, nf);
  out.H.topLeftCorner(6, 6) = scale * mass6;
  out.momentum = Eigen::VectorXd::Zero(nf);
  out.momentum.head(6) = out.H.topLeftCorner(6, 6) * state.object_twist.vector();
  out.momentum.head<3>() += scene.mass.mass * cfg.gravity * cfg.dt;
  if (L.has_closing()) {
    out.H(6, 6) = cfg.quasi_mass_scale * scene.mass.mass;
    out.momentum[6] = scene.grip_force * cfg.dt;
  }

  // Kinematic rows: normal rows (share-weighted over each group) then facet rows.
  const int rows = ng + nc * k;
  out.A = Eigen::MatrixXd::Zero(rows, nf);
  out.c = Eigen::VectorXd::Zero(rows);
  for (int i = 0; i < nc; ++i) {
    const SceneContact& sc = contacts[i];
    const Vec3 r = sc.point.position - state.object.translation();
    const Vec3& nrm = sc.point.normal;
    const int g = L.group[i];
    const double w = L.share[i];
    out.A.block<1, 3>(g, 0) += w * nrm.transpose();
    out.A.block<1, 3>(g, 3) += w * r.cross(nrm).transpose();
    if (is_finger(sc.owner)) out.A(g, 6) -= 0.5 * w;
    out.c[g] -= w * nrm.dot(sc.owner_velocity);
    for (int j = 0; j < k; ++j) {
      const Vec3 d = facet_direction(out.pyramid, sc.point, j);
      const int row = ng + i * k + j;
      out.A.block<1, 3>(row, 0) = d.transpose();
      out.A.block<1, 3>(row, 3) = r.cross(d).transpose();
      out.c[row] = -d.dot(sc.owner_velocity);
    }
  }

  lcp::Problem& p = out.problem;
  p.M = Eigen::MatrixXd::Zero(n, n);
  p.q = Eigen::VectorXd::Zero(n);
  p.equality_count = nf;
  p.M.topLeftCorner(nf, nf) = out.H;
  p.q.head(nf) = -out.momentum;
  // Impulse columns of the equality block and kinematic rows of w.
  p.M.block(0, nf, nf, rows) = -out.A.transpose();
  p.M.block(nf, 0, rows, nf) = out.A;
  p.q.segment(nf, rows) = out.c;
  for (int i = 0; i < nc; ++i) {
    for (int j = 0; j < k; ++j) {
      p.M(L.facet(i, j), L.slack(i)) = 1.0;
      p.M(L.slack(i), L.facet(i, j)) = -1.0;
    }
    p.M(L.slack(i), L.normal(i)) = contacts[i].point.mu * L.share[i];
  }
  return out;
}

// Object-frame relative velocity of a contact point for free-block motion x.
inline Vec3 relative_velocity(const AssembledStep& a, const Eigen::VectorXd& x, int i,
                              const Pose& object) {
  const SceneContact& sc = a.contacts[i];
  const Vec3 r = sc.point.position - object.translation();
  Vec3 v = x.head<3>() + x.segment<3>(3).cross(r) - sc.owner_velocity;
  if (a.layout.has_closing() && is_finger(sc.owner)) v -= 0.5 * x[6] * sc.point.normal;
  return v;
}

inline lcp::Solution solve_assembled(const AssembledStep& a, const SimState& state,
                                     const SimConfig& cfg, bool* warm = nullptr) {
  if (warm != nullptr) *warm = false;
  for (const std::vector<int>& basis : state.solver_bases) {
    if (auto s = lcp::solve_from_basis(a.problem, basis, cfg.lcp_tol)) {
      if (warm != nullptr) *warm = true;
      return *s;
    }
  }
  lcp::LemkeOptions opt;
  opt.tol = cfg.lcp_tol;
  opt.max_pivots = cfg.max_pivots;
  opt.regularize_on_failure = cfg.regularize_on_degenerate;
  return lcp::solve_lemke(a.problem, opt);
}

inline StepResult step(const SimState& state, const Scene& scene, const SimConfig& cfg) {
  const std::vector<SceneContact> contacts = generate_contacts(scene, state);
  const AssembledStep a = assemble_step(state, contacts, scene, cfg);
  bool warm = false;
  const lcp::Solution sol = solve_assembled(a, state, cfg, &warm);
  if (sol.status != lcp::Status::kSolved) {
    if (!cfg.lcp_dump_dir.empty()) {
      lcp::dump_csv(cfg.lcp_dump_dir + "/lcp_failure_t" + std::to_string(state.time) + ".csv",
                    a.problem, sol);
    }
    throw SolverFailure("contact LCP not solved at t=" + std::to_string(state.time) + " (" +
                            lcp::to_string(sol.status) + ", residual " +
                            std::to_string(sol.residual) + ")",
                        state, sol.status);
  }
  const StepLayout& L = a.layout;
  const Eigen::VectorXd x = sol.z.head(L.free);

  StepResult res;
  res.status = sol.status;
  res.residual = sol.residual;
  res.pivots = sol.iterations;
  res.warm_started = warm;
  res.contacts = contacts;
  res.object_twist = Twist::from_vector(x.head<6>());
  res.closing_rate = L.has_closing() ? x[6] : 0.0;
  res.site_wrenches.assign(scene.sites.size(), Wrench{});
  const Vec3 com = state.object.translation();
  for (int i = 0; i < L.contacts; ++i) {
    const ContactPoint& cp = contacts[i].point;
    const double pn = L.share[i] * sol.z[L.normal(i)];
    Vec3 impulse = pn * cp.normal;
    for (int j = 0; j < L.facets; ++j) {
      impulse += sol.z[L.facet(i, j)] * facet_direction(a.pyramid, cp, j);
    }
    res.point_impulses.push_back(impulse);
    const Vec3 force = impulse / cfg.dt;
    res.point_forces.push_back(force);
    Wrench& w = res.site_wrenches[contacts[i].site];
    w.force += force;
    w.torque += (cp.position - com).cross(force);

    const Vec3 rel = relative_velocity(a, x, i, state.object);
    const Vec3 tangential = rel - rel.dot(cp.normal) * cp.normal;
    res.slip_velocities.push_back(tangential);
    if (rel.dot(cp.normal) > cfg.slip_speed_threshold && pn <= 0.0) {
      res.slip.push_back(Slip::kSeparating);
    } else if (tangential.norm() > cfg.slip_speed_threshold) {
      res.slip.push_back(Slip::kSliding);
    } else {
      res.slip.push_back(Slip::kSticking);
    }
  }

  SimState next = state;
  next.object = integrate_pose(state.object, res.object_twist, cfg.dt);
  next.object_twist = res.object_twist;
  next.gripper = integrate_pose(state.gripper, scene.motion.gripper, cfg.dt);
  next.pusher = integrate_pose(state.pusher, scene.motion.pusher, cfg.dt);
  next.time = state.time + cfg.dt;
  auto& bases = next.solver_bases;
  const auto seen = std::find(bases.begin(), bases.end(), sol.basis);
  if (seen != bases.end()) bases.erase(seen);
  bases.insert(bases.begin(), sol.basis);
  if (static_cast<int>(bases.size()) > cfg.warm_bases) bases.resize(cfg.warm_bases);
  res.state = std::move(next);
  return res;
}

// Net wrench on the object about its COM: gravity plus every site.
inline Wrench net_object_wrench(const StepResult& r, const MassProps& mass, const Vec3& gravity) {
  Wrench w{mass.mass * gravity, Vec3::Zero()};
  for (const Wrench& s : r.site_wrenches) w = w + s;
  return w;
}

struct Trajectory {
  std::vector<SimState> states;  // states[0] is the initial state
  std::vector<StepResult> steps;  // steps[i] advances states[i] to states[i+1]
  bool aborted = false;
  std::string error;
};

inline Trajectory rollout(const Scene& scene, const SimState& initial, double duration,
                          const SimConfig& cfg) {
  cfg.validate();
  if (!(duration > 0.0)) throw std::invalid_argument("rollout: duration must be > 0");
  const int steps = static_cast<int>(std::llround(duration / cfg.dt));
  Trajectory t;
  t.states.reserve(steps + 1);
  t.steps.reserve(steps);
  t.states.push_back(initial);
  if (cfg.consistent_start && cfg.mode == StepMode::kQuasiDynamic) {
    try {
      const StepResult trial = step(initial, scene, cfg);
      t.states.back().object_twist = trial.object_twist;
      t.states.back().solver_bases = trial.state.solver_bases;
    } catch (const SolverFailure& e) {
      t.aborted = true;
      t.error = e.what();
      return t;
    }
  }
  for (int i = 0; i < steps; ++i) {
    try {
      StepResult r = step(t.states.back(), scene, cfg);
      t.states.push_back(r.state);
      t.steps.push_back(std::move(r));
    } catch (const SolverFailure& e) {
      t.aborted = true;
      t.error = e.what();
      break;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Force-resolution bounds.

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

struct PointForceBounds {
  int site = 0;
  Owner owner = Owner::kWorld;
  Vec3 position = Vec3::Zero();
  Slip slip = Slip::kSticking;
  Interval normal;    // N
  Interval tangent1;  // N
  Interval tangent2;  // N
};

struct SiteWrenchBounds {
  std::string name;
  Interval component[6];  // force xyz (N), torque xyz (N*m) about the COM

  double force_spread() const {
    return std::max({component[0].width(), component[1].width(), component[2].width()});
  }
  double torque_spread() const {
    return std::max({component[3].width(), component[4].width(), component[5].width()});
  }
};

struct ForceBounds {
  std::vector<PointForceBounds> points;
  std::vector<SiteWrenchBounds> sites;
  double max_site_force_spread = 0.0;
  double max_site_torque_spread = 0.0;
};

class InfeasibleMotion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Motion of the free block to hold fixed: object twist and finger closing rate.
struct FixedMotion {
  Twist object;
  double closing_rate = 0.0;
};

// Min and max of every per-point force component over all impulse
// distributions consistent with `motion`: the momentum balance, the friction
// pyramids, and complementarity with the slip pattern the motion implies.
inline ForceBounds force_resolution_bounds(const SimState& state, const Scene& scene,
                                           const FixedMotion& motion, const SimConfig& cfg) {
  const std::vector<SceneContact> contacts = generate_contacts(scene, state);
  const AssembledStep a = assemble_step(state, contacts, scene, cfg);
  const StepLayout& L = a.layout;
  const int nc = L.contacts;
  const int ng = L.normals;
  const int k = L.facets;
  const int nv = ng + nc * k;  // forces: normal variables then facets
  Eigen::VectorXd x(L.free);
  x.head<6>() = motion.object.vector();
  if (L.has_closing()) x[6] = motion.closing_rate;

  // Balance, in force units: A' f = (H x - momentum) / dt.
  std::vector<Eigen::VectorXd> eq_rows;
  std::vector<double> eq_rhs;
  std::vector<Eigen::VectorXd> ub_rows;
  std::vector<double> ub_rhs;
  const Eigen::VectorXd balance = (a.H * x - a.momentum) / cfg.dt;
  const Eigen::MatrixXd At = a.A.transpose();
  for (int r = 0; r < L.free; ++r) {
    eq_rows.push_back(At.row(r).transpose());
    eq_rhs.push_back(balance[r]);
  }
  const double vtol = cfg.slip_speed_threshold;
  // Normal separation rate of each normal variable (share-weighted mean).
  const Eigen::VectorXd group_rate = a.A.topRows(ng) * x + a.c.head(ng);
  for (int g = 0; g < ng; ++g) {
    if (group_rate[g] < -vtol) {
      throw InfeasibleMotion("fixed motion penetrates contact group " + std::to_string(g));
    }
    if (group_rate[g] > vtol) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(nv);
      row[g] = 1.0;
      eq_rows.push_back(row);
      eq_rhs.push_back(0.0);
    }
  }
  std::vector<Slip> slips(nc);
  for (int i = 0; i < nc; ++i) {
    const ContactPoint& cp = contacts[i].point;
    const int g = L.group[i];
    const Vec3 rel = relative_velocity(a, x, i, state.object);
    const double normal_rate = rel.dot(cp.normal);
    Eigen::VectorXd cone = Eigen::VectorXd::Zero(nv);
    cone[g] = -cp.mu * L.share[i];
    for (int j = 0; j < k; ++j) cone[ng + i * k + j] = 1.0;
    if (group_rate[g] > vtol) {
      slips[i] = Slip::kSeparating;
      ub_rows.push_back(cone);
      ub_rhs.push_back(0.0);
      continue;
    }
    const Vec3 tangential = rel - normal_rate * cp.normal;
    if (tangential.norm() > vtol) {
      slips[i] = Slip::kSliding;
      eq_rows.push_back(cone);
      eq_rhs.push_back(0.0);
      double best = std::numeric_limits<double>::infinity();
      std::vector<double> rate(k);
      for (int j = 0; j < k; ++j) {
        rate[j] = facet_direction(a.pyramid, cp, j).dot(tangential);
        best = std::min(best, rate[j]);
      }
      for (int j = 0; j < k; ++j) {
        if (rate[j] > best + vtol) {
          Eigen::VectorXd row = Eigen::VectorXd::Zero(nv);
          row[ng + i * k + j] = 1.0;
          eq_rows.push_back(row);
          eq_rhs.push_back(0.0);
        }
      }
    } else {
      slips[i] = Slip::kSticking;
      ub_rows.push_back(cone);
      ub_rhs.push_back(0.0);
    }
  }
  lp::Program prog;
  prog.A_eq.resize(static_cast<int>(eq_rows.size()), nv);
  prog.b_eq.resize(static_cast<int>(eq_rows.size()));
  for (int r = 0; r < static_cast<int>(eq_rows.size()); ++r) {
    prog.A_eq.row(r) = eq_rows[r].transpose();
    prog.b_eq[r] = eq_rhs[r];
  }
  prog.A_ub.resize(static_cast<int>(ub_rows.size()), nv);
  prog.b_ub.resize(static_cast<int>(ub_rows.size()));
  for (int r = 0; r < static_cast<int>(ub_rows.size()); ++r) {
    prog.A_ub.row(r) = ub_rows[r].transpose();
    prog.b_ub[r] = ub_rhs[r];
  }

  // Linear map from the LP variables to a scalar quantity, minimized and
  // maximized in turn.
  auto range = [&](const Eigen::VectorXd& objective) {
    Interval out;
    prog.c = objective;
    const lp::Result lo = lp::solve(prog);
    if (lo.status == lp::Status::kInfeasible) {
      throw InfeasibleMotion("no force distribution is consistent with the fixed motion");
    }
    if (lo.status != lp::Status::kOptimal) {
      throw std::runtime_error(std::string("force bound LP failed: ") + lp::to_string(lo.status));
    }
    prog.c = -objective;
    const lp::Result hi = lp::solve(prog);
    if (hi.status != lp::Status::kOptimal) {
      throw std::runtime_error(std::string("force bound LP failed: ") + lp::to_string(hi.status));
    }
    out.lo = lo.objective;
    out.hi = -hi.objective;
    return out;
  };

  // Row i of these maps gives the force component of point i along a vector.
  auto component = [&](int i, const Vec3& dir) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(nv);
    const ContactPoint& cp = contacts[i].point;
    v[L.group[i]] = L.share[i] * cp.normal.dot(dir);
    for (int j = 0; j < k; ++j) v[ng + i * k + j] = facet_direction(a.pyramid, cp, j).dot(dir);
    return v;
  };

  ForceBounds out;
  for (int i = 0; i < nc; ++i) {
    const ContactPoint& cp = contacts[i].point;
    PointForceBounds b;
    b.site = contacts[i].site;
    b.owner = contacts[i].owner;
    b.position = cp.position;
    b.slip = slips[i];
    b.normal = range(component(i, cp.normal));
    b.tangent1 = range(component(i, cp.tangent1));
    b.tangent2 = range(component(i, cp.tangent2));
    out.points.push_back(b);
  }
  const Vec3 com = state.object.translation();
  for (int s = 0; s < static_cast<int>(scene.sites.size()); ++s) {
    SiteWrenchBounds sb;
    sb.name = scene.sites[s].name;
    for (int c = 0; c < 6; ++c) {
      Eigen::VectorXd obj = Eigen::VectorXd::Zero(nv);
      const Vec3 axis = Vec3::Unit(c % 3);
      for (int i = 0; i < nc; ++i) {
        if (contacts[i].site != s) continue;
        if (c < 3) {
          obj += component(i, axis);
        } else {
          // torque about the COM along axis: (r x f) . axis = f . (axis x r)
          const Vec3 r = contacts[i].point.position - com;
          obj += component(i, axis.cross(r));
        }
      }
      sb.component[c] = range(obj);
    }
    out.max_site_force_spread = std::max(out.max_site_force_spread, sb.force_spread());
    out.max_site_torque_spread = std::max(out.max_site_torque_spread, sb.torque_spread());
    out.sites.push_back(sb);
  }
  return out;
}

}  // namespace prehensile
