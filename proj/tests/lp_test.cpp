#include "prehensile/lp.hpp"

#include <gtest/gtest.h>

namespace prehensile::lp {
namespace {

TEST(Simplex, BoxedMaximum) {
  // max x + y s.t. x + 2y <= 4, 3x + y <= 6  -> (1.6, 1.2)
  Program p;
  p.c = Eigen::Vector2d(-1, -1);
  p.A_ub.resize(2, 2);
  p.A_ub << 1, 2, 3, 1;
  p.b_ub = Eigen::Vector2d(4, 6);
  const Result r = solve(p);
  ASSERT_EQ(r.status, Status::kOptimal);
  EXPECT_NEAR(r.x[0], 1.6, 1e-12);
  EXPECT_NEAR(r.x[1], 1.2, 1e-12);
}

TEST(Simplex, EqualityAndRedundantRows) {
  // min x0 s.t. x0 + x1 = 1, 2x0 + 2x1 = 2 -> x0 = 0
  Program p;
  p.c = Eigen::Vector2d(1, 0);
  p.A_eq.resize(2, 2);
  p.A_eq << 1, 1, 2, 2;
  p.b_eq = Eigen::Vector2d(1, 2);
  const Result r = solve(p);
  ASSERT_EQ(r.status, Status::kOptimal);
  EXPECT_NEAR(r.x[0], 0.0, 1e-12);
  EXPECT_NEAR(r.x[1], 1.0, 1e-12);
}

TEST(Simplex, InfeasibleAndUnbounded) {
  Program p;
  p.c = Eigen::VectorXd::Ones(1);
  p.A_eq = Eigen::MatrixXd::Ones(1, 1);
  p.b_eq = -Eigen::VectorXd::Ones(1);
  EXPECT_EQ(solve(p).status, Status::kInfeasible);
  Program u;
  u.c = -Eigen::VectorXd::Ones(1);
  u.A_ub = -Eigen::MatrixXd::Ones(1, 1);
  u.b_ub = Eigen::VectorXd::Ones(1);
  EXPECT_EQ(solve(u).status, Status::kUnbounded);
}

TEST(Simplex, DegenerateVertexDoesNotCycle) {
  // Beale's classic cycling example (cycles under the textbook rule).
  Program p;
  p.c.resize(4);
  p.c << -0.75, 150, -0.02, 6;
  p.A_ub.resize(3, 4);
  p.A_ub << 0.25, -60, -0.04, 9, 0.5, -90, -0.02, 3, 0, 0, 1, 0;
  p.b_ub = Eigen::Vector3d(0, 0, 1);
  const Result r = solve(p);
  ASSERT_EQ(r.status, Status::kOptimal);
  EXPECT_NEAR(r.objective, -0.05, 1e-12);
}

TEST(Presolve, PinnedVariablesAreSubstitutedOut) {
  // x2 = 0 and x3 = 0.5 are pinned by singleton rows; min -x0 over
  // x0 + x1 + x2 + x3 = 2, x0 - x1 <= 0.5 -> x0 = 1, x1 = 0.5
  Program p;
  p.c.setZero(4);
  p.c[0] = -1;
  p.A_eq.resize(3, 4);
  p.A_eq << 1, 1, 1, 1, 0, 0, 1, 0, 0, 0, 0, 2;
  p.b_eq = Eigen::Vector3d(2, 0, 1);
  p.A_ub.resize(1, 4);
  p.A_ub << 1, -1, 0, 0;
  p.b_ub = Eigen::VectorXd::Constant(1, 0.5);
  const Result r = solve(p);
  ASSERT_EQ(r.status, Status::kOptimal);
  EXPECT_NEAR(r.x[0], 1.0, 1e-12);
  EXPECT_NEAR(r.x[1], 0.5, 1e-12);
  EXPECT_EQ(r.x[2], 0.0);
  EXPECT_EQ(r.x[3], 0.5);
  EXPECT_NEAR(r.objective, -1.0, 1e-12);
}

TEST(Presolve, PinsThatViolateBoundsAreInfeasible) {
  Program p;
  p.c = Eigen::Vector2d(1, 1);
  p.A_eq.resize(2, 2);
  p.A_eq << 1, 0, 0, 0;
  p.b_eq = Eigen::Vector2d(-1, 0);
  EXPECT_EQ(solve(p).status, Status::kInfeasible);
  p.b_eq = Eigen::Vector2d(1, 3);  // 0 = 3
  EXPECT_EQ(solve(p).status, Status::kInfeasible);
  p.b_eq = Eigen::Vector2d(1, 0);
  p.A_ub = Eigen::MatrixXd::Identity(2, 2).row(0);
  p.b_ub = Eigen::VectorXd::Constant(1, 0.5);  // x0 = 1 but x0 <= 0.5
  EXPECT_EQ(solve(p).status, Status::kInfeasible);
}

TEST(Simplex, ManyDegenerateZeroRowsStayFast) {
  // Friction-pyramid-like structure: one normal n = 1 and 32 facets with
  // sum <= mu n, most of them pinned to zero, maximizing one facet.
  const int k = 32;
  Program p;
  p.c.setZero(k + 1);
  p.c[1] = -1;
  p.A_eq = Eigen::MatrixXd::Zero(k - 2, k + 1);
  p.b_eq = Eigen::VectorXd::Zero(k - 2);
  p.A_eq(0, 0) = 1;
  p.b_eq[0] = 1;
  for (int j = 4; j <= k; ++j) p.A_eq(j - 3, j) = 1;
  p.A_ub = Eigen::MatrixXd::Ones(1, k + 1);
  p.A_ub(0, 0) = -0.5;
  p.b_ub = Eigen::VectorXd::Zero(1);
  const Result r = solve(p);
  ASSERT_EQ(r.status, Status::kOptimal);
  EXPECT_NEAR(r.x[1], 0.5, 1e-12);
}

}  // namespace
}  // namespace prehensile::lp
