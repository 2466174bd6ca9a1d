#include "prehensile/stepper.hpp"

#include <gtest/gtest.h>

#include "prehensile/scenarios.hpp"

namespace prehensile {
namespace {

constexpr double kSide = 0.025;

// A 0.1 kg cube resting on a world-owned patch under its bottom face.
Scene resting_box(PatchKind kind, int points, double mu = 0.5) {
  Scene s;
  s.mass = MassProps::box(0.1, Vec3::Constant(kSide));
  ContactSite site;
  site.name = "table";
  site.owner = Owner::kWorld;
  site.patch.kind = kind;
  site.patch.dimension = kind == PatchKind::kPoint ? 0.0 : 0.02;
  site.patch.center = Vec3::Zero();
  site.patch.normal = Vec3::UnitZ();
  site.patch.axis = Vec3::UnitX();
  site.patch.mu = mu;
  site.points = points;
  site.surface = ObjectSurface::plane(Vec3(0, 0, -kSide / 2), -Vec3::UnitZ());
  s.sites.push_back(site);
  return s;
}

SimState box_state() {
  SimState st;
  st.object = Pose::from_translation(Vec3(0, 0, kSide / 2));
  return st;
}

TEST(SimConfig, RejectsBadValues) {
  SimConfig c;
  EXPECT_NO_THROW(c.validate());
  c.dt = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SimConfig{};
  c.facets = 7;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SimConfig{};
  c.quasi_mass_scale = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(step_mode_from_string("dynamic"), StepMode::kDynamic);
  EXPECT_THROW(step_mode_from_string("fast"), std::invalid_argument);
}

TEST(Layout, UniformPressureSitesShareOneNormal) {
  const ScenarioSpec spec = build_linear_push(find_object("obj4"), 20, 10, 0);
  const SceneSetup setup = build_scene(spec);
  const auto contacts = generate_contacts(setup.scene, setup.initial);
  ASSERT_EQ(contacts.size(), 10u);
  const StepLayout L = make_layout(setup.scene, contacts, 8);
  EXPECT_TRUE(L.has_closing());
  EXPECT_EQ(L.normals, 4);  // two pads plus two pusher points
  EXPECT_DOUBLE_EQ(L.share[0], 0.25);
  EXPECT_DOUBLE_EQ(L.share[9], 1.0);
  EXPECT_EQ(L.size(), 7 + 4 + 10 * 9);
}

TEST(Step, BoxAtRestStaysPut) {
  const Scene scene = resting_box(PatchKind::kDisc, 4);
  const StepResult r = step(box_state(), scene, SimConfig{});
  EXPECT_LT(r.object_twist.vector().norm(), 1e-9);
  const Wrench net = net_object_wrench(r, scene.mass, SimConfig{}.gravity);
  EXPECT_LT(net.force.norm(), 1e-9);
  Vec3 total = Vec3::Zero();
  for (const Vec3& f : r.point_forces) total += f;
  EXPECT_NEAR(total.z(), 0.1 * 9.81, 1e-9);
}

TEST(Step, QuasiDynamicWithoutContactsIsRejected) {
  Scene scene = resting_box(PatchKind::kPoint, 1);
  scene.sites.clear();
  EXPECT_THROW(step(box_state(), scene, SimConfig{}), std::invalid_argument);
}

TEST(Step, DynamicModeFallsFreely) {
  Scene scene = resting_box(PatchKind::kPoint, 1);
  scene.sites.clear();
  SimConfig cfg;
  cfg.mode = StepMode::kDynamic;
  const StepResult r = step(box_state(), scene, cfg);
  EXPECT_NEAR(r.object_twist.linear.z(), -9.81 * cfg.dt, 1e-12);
  EXPECT_NEAR(r.state.object.translation().z(), kSide / 2 - 9.81 * cfg.dt * cfg.dt, 1e-12);
}

TEST(Step, BlockedGraspTransmitsFullFingerFriction) {
  // No gravity: the fingers slide along the object and the pusher carries
  // the whole friction load 2 mu G.
  ScenarioOverrides o;
  o.mu_finger = 0.45;
  const ScenarioSpec spec = build_linear_push(find_object("obj4"), 20, 10, 0, o);
  const SceneSetup setup = build_scene(spec);
  SimConfig cfg;
  cfg.gravity = Vec3::Zero();
  cfg.facets = 8;
  const StepResult r = step(setup.initial, setup.scene, cfg);
  EXPECT_LT(r.object_twist.linear.norm(), 1e-9);
  EXPECT_NEAR(r.site_wrenches[2].force.x(), 2 * 0.45 * 20, 1e-6);
  EXPECT_NEAR(r.site_wrenches[0].force.y(), -20, 1e-6);
  EXPECT_NEAR(r.site_wrenches[1].force.y(), 20, 1e-6);
  for (size_t i = 0; i < r.contacts.size(); ++i) {
    EXPECT_EQ(r.slip[i], is_finger(r.contacts[i].owner) ? Slip::kSliding : Slip::kSticking);
  }
}

TEST(Rollout, QuasiStaticBalanceEveryStep) {
  const ScenarioSpec spec = build_linear_push(find_object("obj4"), 20, 10, 0);
  const SceneSetup setup = build_scene(spec);
  const SimConfig cfg;
  const Trajectory t = rollout(setup.scene, setup.initial, spec.duration, cfg);
  ASSERT_FALSE(t.aborted) << t.error;
  ASSERT_EQ(t.steps.size(), 375u);
  for (const StepResult& r : t.steps) {
    const Wrench net = net_object_wrench(r, setup.scene.mass, cfg.gravity);
    ASSERT_LE(net.force.norm(), 1e-6) << "t=" << r.state.time;
    ASSERT_LE(net.torque.norm(), 1e-8) << "t=" << r.state.time;
  }
}

TEST(Rollout, RepeatedSolvesReuseBases) {
  const ScenarioSpec spec = build_linear_push(find_object("obj4"), 20, 10, 0);
  const SceneSetup setup = build_scene(spec);
  const Trajectory t = rollout(setup.scene, setup.initial, spec.duration, SimConfig{});
  int warm = 0;
  for (const StepResult& r : t.steps) warm += r.warm_started;
  EXPECT_GT(warm, static_cast<int>(0.9 * t.steps.size()));
}

TEST(Rollout, DeterministicAcrossRuns) {
  const ScenarioSpec spec = build_pivot(find_object("obj5"), 22, 15, 5);
  const SceneSetup setup = build_scene(spec);
  const Trajectory a = rollout(setup.scene, setup.initial, 0.5, SimConfig{});
  const Trajectory b = rollout(setup.scene, setup.initial, 0.5, SimConfig{});
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (size_t i = 0; i < a.steps.size(); ++i) {
    ASSERT_EQ(a.steps[i].object_twist.vector(), b.steps[i].object_twist.vector());
    for (size_t s = 0; s < a.steps[i].site_wrenches.size(); ++s) {
      ASSERT_EQ(a.steps[i].site_wrenches[s].vector(), b.steps[i].site_wrenches[s].vector());
    }
  }
}

TEST(Rollout, PatchPointsStayRigid) {
  const ScenarioSpec spec = build_pivot(find_object("obj4"), 20, 10, 0);
  const SceneSetup setup = build_scene(spec);
  const Trajectory t = rollout(setup.scene, setup.initial, spec.duration, SimConfig{});
  ASSERT_FALSE(t.aborted) << t.error;
  auto distances = [&](const std::vector<SceneContact>& cs) {
    std::vector<double> d;
    for (size_t i = 0; i < cs.size(); ++i)
      for (size_t j = i + 1; j < cs.size(); ++j)
        if (cs[i].site == cs[j].site) d.push_back((cs[i].point.position - cs[j].point.position).norm());
    return d;
  };
  const std::vector<double> d0 = distances(t.steps.front().contacts);
  for (const StepResult& r : t.steps) {
    const std::vector<double> d = distances(r.contacts);
    ASSERT_EQ(d.size(), d0.size());
    for (size_t i = 0; i < d.size(); ++i) ASSERT_NEAR(d[i], d0[i], 1e-9);
  }
}

TEST(Rollout, SolverFailureAbortsAndKeepsPrefix) {
  const ScenarioSpec spec = build_linear_push(find_object("obj4"), 20, 10, 0);
  const SceneSetup setup = build_scene(spec);
  SimConfig cfg;
  cfg.max_pivots = 1;
  cfg.warm_bases = 0;
  cfg.regularize_on_degenerate = false;
  const Trajectory t = rollout(setup.scene, setup.initial, 0.1, cfg);
  EXPECT_TRUE(t.aborted);
  EXPECT_NE(t.error.find("LCP"), std::string::npos);
  EXPECT_EQ(t.states.size(), t.steps.size() + 1);
}

TEST(Bounds, SinglePointIsDeterminate) {
  const Scene scene = resting_box(PatchKind::kPoint, 1);
  const ForceBounds b = force_resolution_bounds(box_state(), scene, FixedMotion{}, SimConfig{});
  ASSERT_EQ(b.points.size(), 1u);
  const PointForceBounds& p = b.points[0];
  EXPECT_NEAR(p.normal.lo, 0.981, 1e-9);
  EXPECT_NEAR(p.normal.width(), 0.0, 1e-9);
  EXPECT_NEAR(p.tangent1.width(), 0.0, 1e-9);
  EXPECT_NEAR(p.tangent2.width(), 0.0, 1e-9);
}

TEST(Bounds, DiscUnderNormalLoadSplitsFreely) {
  const Scene scene = resting_box(PatchKind::kDisc, 4);
  const ForceBounds b = force_resolution_bounds(box_state(), scene, FixedMotion{}, SimConfig{});
  const double w = 0.1 * 9.81;
  for (const PointForceBounds& p : b.points) {
    EXPECT_NEAR(p.normal.lo, 0.0, 1e-9);
    EXPECT_NEAR(p.normal.hi, w / 2, 1e-9);
    EXPECT_LE(p.normal.hi, w);
  }
  ASSERT_EQ(b.sites.size(), 1u);
  EXPECT_NEAR(b.sites[0].component[2].lo, w, 1e-9);
  EXPECT_LT(b.max_site_force_spread, 1e-9);
  EXPECT_LT(b.max_site_torque_spread, 1e-9);
}

TEST(Bounds, PenetratingMotionIsInfeasible) {
  const Scene scene = resting_box(PatchKind::kPoint, 1);
  FixedMotion m;
  m.object.linear = Vec3(0, 0, -0.01);
  EXPECT_THROW(force_resolution_bounds(box_state(), scene, m, SimConfig{}), InfeasibleMotion);
}

TEST(Bounds, BlockedPushHasUniqueSiteWrenches) {
  // Above the slide-down threshold the fingers slip straight along the push.
  const ScenarioSpec spec = build_linear_push(find_object("obj4"), 30, 10, 0);
  const SceneSetup setup = build_scene(spec);
  SimConfig cfg;
  cfg.facets = 8;
  const Trajectory t = rollout(setup.scene, setup.initial, 0.2, cfg);
  ASSERT_FALSE(t.aborted) << t.error;
  const size_t mid = t.steps.size() / 2;
  const FixedMotion m{t.steps[mid].object_twist, t.steps[mid].closing_rate};
  const ForceBounds b = force_resolution_bounds(t.states[mid], setup.scene, m, cfg);
  EXPECT_LE(b.max_site_force_spread, 1e-6);
  EXPECT_LE(b.max_site_torque_spread, 1e-8);
  double widest = 0.0;
  for (const PointForceBounds& p : b.points) {
    widest = std::max({widest, p.tangent1.width(), p.tangent2.width()});
  }
  EXPECT_GT(widest, 1e-3);
}

}  // namespace
}  // namespace prehensile
