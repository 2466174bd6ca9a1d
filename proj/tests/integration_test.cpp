#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>

#include "prehensile/dataset.hpp"
#include "prehensile/scenarios.hpp"
#include "prehensile/stepper.hpp"

namespace prehensile {
namespace {

namespace fs = std::filesystem;

struct Case {
  const char* name;
  ScenarioSpec spec;
};

void PrintTo(const Case& c, std::ostream* os) { *os << c.name; }

std::vector<Case> cases() {
  return {{"LinearPush", build_linear_push(find_object("obj4"), 20, 10, 0)},
          {"LinearPushSloped", build_linear_push(find_object("obj3"), 27, 15, 20)},
          {"Pivot", build_pivot(find_object("obj4"), 20, 10, 0)},
          {"PivotOffset", build_pivot(find_object("obj5"), 32, 20, 10)},
          {"Roll", build_roll(find_object("obj1"), 3, 10)},
          {"RollHardGrip", build_roll(find_object("obj2"), 8, 20)}};
}

class Trajectories : public ::testing::TestWithParam<Case> {
 protected:
  void SetUp() override {
    setup_ = build_scene(GetParam().spec);
    traj_ = rollout(setup_.scene, setup_.initial, GetParam().spec.duration, cfg_);
    ASSERT_FALSE(traj_.aborted) << traj_.error;
  }
  SimConfig cfg_;
  SceneSetup setup_;
  Trajectory traj_;
};

// Velocity of the object relative to the contact owner along the contact
// normal is a separation rate: never negative beyond tolerance. Uniform
// pressure patches constrain only the mean over their points.
TEST_P(Trajectories, NoPenetration) {
  const std::vector<ContactSite>& sites = setup_.scene.sites;
  for (size_t s = 0; s < traj_.steps.size(); ++s) {
    const StepResult& r = traj_.steps[s];
    const Vec3 com = traj_.states[s].object.translation();
    std::vector<double> sum(sites.size(), 0.0);
    std::vector<int> count(sites.size(), 0);
    for (const SceneContact& c : r.contacts) {
      Vec3 v = r.object_twist.linear + r.object_twist.angular.cross(c.point.position - com) -
               c.owner_velocity;
      if (is_finger(c.owner)) v -= 0.5 * r.closing_rate * c.point.normal;
      const double rate = v.dot(c.point.normal);
      if (sites[c.site].uniform_pressure) {
        sum[c.site] += rate;
        ++count[c.site];
      } else {
        ASSERT_GE(rate, -1e-6) << "step " << s << " site " << c.site;
      }
    }
    for (size_t k = 0; k < sites.size(); ++k) {
      if (count[k] > 0) ASSERT_GE(sum[k] / count[k], -1e-6) << "step " << s << " site " << k;
    }
  }
}

TEST_P(Trajectories, ForcesInsidePyramidAndDissipative) {
  for (size_t s = 0; s < traj_.steps.size(); ++s) {
    const StepResult& r = traj_.steps[s];
    for (size_t i = 0; i < r.contacts.size(); ++i) {
      const ContactPoint& c = r.contacts[i].point;
      const Vec3& f = r.point_forces[i];
      const double fn = f.dot(c.normal);
      const Vec3 ft = f - fn * c.normal;
      ASSERT_GE(fn, -1e-6) << "step " << s;
      ASSERT_LE(ft.norm(), c.mu * fn + 1e-6) << "step " << s << " point " << i;
      ASSERT_LE(ft.dot(r.slip_velocities[i]), 1e-9) << "step " << s << " point " << i;
    }
  }
}

TEST_P(Trajectories, SlidingPointsSitOnTheirPyramidBoundary) {
  const FrictionPyramid pyr = linearize_cone(1.0, cfg_.facets);
  int sliding = 0;
  for (const StepResult& r : traj_.steps) {
    for (size_t i = 0; i < r.contacts.size(); ++i) {
      if (r.slip[i] != Slip::kSliding) continue;
      const ContactPoint& c = r.contacts[i].point;
      const Vec3& f = r.point_forces[i];
      const double fn = f.dot(c.normal);
      // Support of the force along the slip direction reaches the pyramid edge.
      const Vec3 d = -r.slip_velocities[i].normalized();
      double reach = 0.0;
      for (int j = 0; j < cfg_.facets; ++j) {
        reach = std::max(reach, pyr.direction(j, c.tangent1, c.tangent2).dot(d));
      }
      if (fn < 1e-6) continue;
      ++sliding;
      EXPECT_GE(f.dot(d), c.mu * fn * reach * (1 - 1e-3) - 1e-6);
    }
  }
  EXPECT_GT(sliding, 0);
}

TEST_P(Trajectories, QuasiStaticNetWrenchVanishes) {
  for (const StepResult& r : traj_.steps) {
    const Wrench net = net_object_wrench(r, setup_.scene.mass, cfg_.gravity);
    ASSERT_LE(net.force.norm(), 1e-6) << "t=" << r.state.time;
  }
}

TEST_P(Trajectories, ExportSurvivesDiskRoundTripAndComparesToItself) {
  const fs::path dir = fs::temp_directory_path() / ("prehensile_it_" + std::string(GetParam().name));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const data::TrialLog log = to_trial_log(traj_, setup_.scene, trial_metadata(GetParam().spec));
  data::write_log(dir / "trial.csv", log);
  const data::TrialLog back = data::read_log(dir / "trial.csv");
  EXPECT_EQ(data::serialize(back), data::serialize(log));

  const data::NetWrenchModel model = simulator_sensor_model(GetParam().spec.object);
  for (int i = 0; i < static_cast<int>(back.frames.size()); ++i) {
    ASSERT_LE(data::net_wrench(back, i, model).force.norm(), 1e-6) << "frame " << i;
  }
  const data::ComparisonReport rep = data::compare(log, back);
  EXPECT_EQ(rep.timing_offset, 0.0);
  EXPECT_LE(rep.max_rms, 1e-12);
  EXPECT_EQ(rep.slide_down_delta_mm, 0.0);
  EXPECT_EQ(rep.rotation_delta_rad, 0.0);
  fs::remove_all(dir);
}

TEST_P(Trajectories, BoundsAtAnInteriorStateContainTheNominalForces) {
  const size_t mid = traj_.steps.size() / 2;
  const StepResult& r = traj_.steps[mid];
  const ForceBounds b = force_resolution_bounds(traj_.states[mid], setup_.scene,
                                                {r.object_twist, r.closing_rate}, cfg_);
  ASSERT_EQ(b.points.size(), r.contacts.size());
  for (size_t i = 0; i < b.points.size(); ++i) {
    const ContactPoint& c = r.contacts[i].point;
    const Vec3& f = r.point_forces[i];
    EXPECT_GE(f.dot(c.normal), b.points[i].normal.lo - 1e-6);
    EXPECT_LE(f.dot(c.normal), b.points[i].normal.hi + 1e-6);
    EXPECT_GE(f.dot(c.tangent1), b.points[i].tangent1.lo - 1e-6);
    EXPECT_LE(f.dot(c.tangent1), b.points[i].tangent1.hi + 1e-6);
  }
  for (size_t s = 0; s < b.sites.size(); ++s) {
    for (int k = 0; k < 3; ++k) {
      EXPECT_GE(r.site_wrenches[s].force[k], b.sites[s].component[k].lo - 1e-6);
      EXPECT_LE(r.site_wrenches[s].force[k], b.sites[s].component[k].hi + 1e-6);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Primitives, Trajectories, ::testing::ValuesIn(cases()),
                         [](const auto& info) { return std::string(info.param.name); });

TEST(Pipeline, SweepCsvMatchesIndividualRollouts) {
  GridSpec g;
  g.primitive = Primitive::kRoll;
  g.objects = {"obj1", "obj2"};
  g.grips = {3, 8};
  g.speeds = {10};
  g.params = {0};
  g.runs = 1;
  const SweepReport rep = run_sweep(g, SimConfig{}, 2);
  ASSERT_EQ(rep.succeeded(), 4);
  const std::string csv = sweep_report_csv(rep);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_NE(line.find("slide_down_mm"), std::string::npos);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);

  const ScenarioSpec spec = build_roll(find_object("obj2"), 8, 10);
  const SceneSetup setup = build_scene(spec);
  const RolloutMetrics direct =
      summarize(rollout(setup.scene, setup.initial, spec.duration, SimConfig{}), setup.scene);
  EXPECT_EQ(rep.rows[3].metrics.final_rotation_rad, direct.final_rotation_rad);
  EXPECT_EQ(rep.rows[3].metrics.peak_pusher_fx_N, direct.peak_pusher_fx_N);
}

TEST(Pipeline, SyntheticExperimentAlignsWithSimulation) {
  const ScenarioSpec spec = build_linear_push(find_object("obj4"), 25, 10, 0);
  const SceneSetup setup = build_scene(spec);
  const Trajectory t = rollout(setup.scene, setup.initial, spec.duration, SimConfig{});
  ASSERT_FALSE(t.aborted) << t.error;
  const data::TrialLog sim = to_trial_log(t, setup.scene, trial_metadata(spec));

  // A "measured" log: 60 ms late, 0.3 N sensor bias on the pusher before and
  // during the push, and an extra pre-push window the offset removal can use.
  data::TrialLog exp;
  exp.meta = sim.meta;
  exp.meta.run = 2;
  const double lag = 0.06, lead = 0.2;
  for (int i = 0; i < 50; ++i) {
    data::FrameRecord f = sim.frames.front();
    f.t = 0.004 * i;
    for (int ch = 0; ch < data::kChannels; ++ch) f.wrench[ch].setZero();
    exp.frames.push_back(f);
  }
  for (const data::FrameRecord& s : sim.frames) {
    data::FrameRecord f = s;
    f.t = s.t + lead + lag;
    exp.frames.push_back(f);
  }
  for (auto& f : exp.frames) f.wrench[data::kPusher][0] += 0.3;
  const data::TrialLog cleaned = data::remove_offsets(exp, 0.1);
  const data::ComparisonReport rep = data::compare(sim, cleaned);
  EXPECT_NEAR(rep.timing_offset, lead + lag, 0.008);
  EXPECT_LT(rep.max_rms, 0.05);
  EXPECT_NEAR(rep.slide_down_delta_mm, 0.0, 1e-9);
}

}  // namespace
}  // namespace prehensile
