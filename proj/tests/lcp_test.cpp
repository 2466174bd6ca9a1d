#include "prehensile/lcp.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

namespace prehensile::lcp {
namespace {

Problem make(std::initializer_list<std::initializer_list<double>> m,
             std::initializer_list<double> q, int eq = 0) {
  Problem p;
  const int n = static_cast<int>(q.size());
  p.M.resize(n, n);
  int i = 0;
  for (const auto& row : m) {
    int j = 0;
    for (double v : row) p.M(i, j++) = v;
    ++i;
  }
  p.q = Eigen::Map<const VectorXd>(q.begin(), n);
  p.equality_count = eq;
  return p;
}

// Independent oracle for 2x2 problems: try the four complementary bases
// with Cramer's rule.
std::vector<Eigen::Vector2d> brute_force_2x2(const Problem& p) {
  std::vector<Eigen::Vector2d> out;
  const auto& M = p.M;
  const auto& q = p.q;
  auto feasible = [&](const Eigen::Vector2d& z) {
    const Eigen::Vector2d w = M * z + q;
    return z.minCoeff() >= -1e-12 && w.minCoeff() >= -1e-12 &&
           std::abs(z.dot(w)) < 1e-12;
  };
  const Eigen::Vector2d zero = Eigen::Vector2d::Zero();
  if (feasible(zero)) out.push_back(zero);
  if (M(0, 0) != 0) {
    Eigen::Vector2d z(-q[0] / M(0, 0), 0);
    if (feasible(z)) out.push_back(z);
  }
  if (M(1, 1) != 0) {
    Eigen::Vector2d z(0, -q[1] / M(1, 1));
    if (feasible(z)) out.push_back(z);
  }
  const double det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
  if (det != 0) {
    Eigen::Vector2d z((-q[0] * M(1, 1) + q[1] * M(0, 1)) / det,
                      (-q[1] * M(0, 0) + q[0] * M(1, 0)) / det);
    if (feasible(z)) out.push_back(z);
  }
  return out;
}

TEST(Lemke, NonnegativeQGivesZero) {
  const Problem p = make({{2, 1}, {1, 2}}, {0.5, 1.0});
  const Solution s = solve_lemke(p);
  ASSERT_EQ(s.status, Status::kSolved);
  EXPECT_EQ(s.z, VectorXd::Zero(2));
  EXPECT_EQ(s.w, p.q);
}

TEST(Lemke, TwoByTwoMatchesBruteForce) {
  const Problem p = make({{2, 1}, {1, 2}}, {-1, -1});
  const auto oracle = brute_force_2x2(p);
  ASSERT_EQ(oracle.size(), 1u);
  EXPECT_NEAR(oracle[0][0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(oracle[0][1], 1.0 / 3, 1e-15);
  const Solution s = solve_lemke(p);
  ASSERT_EQ(s.status, Status::kSolved);
  EXPECT_NEAR(s.z[0], 1.0 / 3, 1e-12);
  EXPECT_NEAR(s.z[1], 1.0 / 3, 1e-12);
  EXPECT_NEAR(s.w.norm(), 0.0, 1e-12);
}

TEST(Lemke, Scalar) {
  const Solution s = solve_lemke(make({{1}}, {-3}));
  ASSERT_EQ(s.status, Status::kSolved);
  EXPECT_NEAR(s.z[0], 3.0, 1e-12);
  EXPECT_NEAR(s.w[0], 0.0, 1e-12);
}

TEST(Lemke, RayTerminationIsReportedNotReturnedAsSolution) {
  const Solution s = solve_lemke(make({{-1}}, {-1}), {.regularize_on_failure = false});
  EXPECT_EQ(s.status, Status::kRayTermination);
  const Solution r = solve_lemke(make({{-1}}, {-1}));
  EXPECT_NE(r.status, Status::kSolved);
}

TEST(Lemke, MixedProblemEliminatesFreeBlock) {
  // x free: 2x - z + 1 = 0, w = x + z - 2.
  const Problem p = make({{2, -1}, {1, 1}}, {1, -2}, 1);
  const Solution s = solve_lemke(p);
  ASSERT_EQ(s.status, Status::kSolved);
  // Reduced: x = (z - 1) / 2, w = 1.5 z - 2.5 -> z = 5/3, x = 1/3.
  EXPECT_NEAR(s.z[1], 5.0 / 3, 1e-12);
  EXPECT_NEAR(s.z[0], 1.0 / 3, 1e-12);
  EXPECT_NEAR(s.w[0], 0.0, 1e-12);
}

TEST(Pgs, AgreesWithLemkeOnExamples) {
  for (const Problem& p : {make({{2, 1}, {1, 2}}, {0.5, 1.0}),
                           make({{2, 1}, {1, 2}}, {-1, -1}), make({{1}}, {-3})}) {
    const Solution a = solve_lemke(p);
    const Solution b = solve_pgs(p);
    ASSERT_EQ(b.status, Status::kSolved);
    EXPECT_LT((a.z - b.z).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Pgs, NonnegativeQConvergesInOneSweep) {
  const Solution s = solve_pgs(make({{2, 1}, {1, 2}}, {0.5, 1.0}));
  EXPECT_EQ(s.status, Status::kSolved);
  EXPECT_EQ(s.iterations, 1);
  EXPECT_EQ(s.z, VectorXd::Zero(2));
}

TEST(Pgs, DiagonallyDominantRandom) {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    Problem p;
    p.M = MatrixXd::NullaryExpr(10, 10, [&] { return u(rng); });
    for (int i = 0; i < 10; ++i) p.M(i, i) = p.M.row(i).cwiseAbs().sum() + 1.0;
    p.q = VectorXd::NullaryExpr(10, [&] { return u(rng); });
    const Solution b = solve_pgs(p, {.tol = 1e-10, .max_iters = 5000});
    ASSERT_EQ(b.status, Status::kSolved);
    const Solution a = solve_lemke(p);
    ASSERT_EQ(a.status, Status::kSolved);
    EXPECT_LT((a.z - b.z).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Pgs, ZeroDiagonalRejected) {
  EXPECT_THROW(solve_pgs(make({{0, 1}, {-1, 0}}, {1, 1})), std::invalid_argument);
}

TEST(Enumerate, UniqueSolution) {
  const auto all = solve_enumerate(make({{2, 1}, {1, 2}}, {-1, -1}));
  ASSERT_EQ(all.size(), 1u);
  EXPECT_NEAR(all[0].z[0], 1.0 / 3, 1e-12);
}

TEST(Enumerate, DegenerateContinuumHasSeveralBasicSolutions) {
  // Two identical columns plus a zero row/column: any split z0 + z1 = 1 works.
  const Problem p = make({{1, 1, 0}, {1, 1, 0}, {0, 0, 0}}, {-1, -1, 0});
  const auto all = solve_enumerate(p);
  ASSERT_GE(all.size(), 2u);
  for (const auto& s : all) EXPECT_LT((s.w - all[0].w).norm(), 1e-12);
  EXPECT_GT((all[0].z - all[1].z).norm(), 0.5);
}

TEST(Enumerate, NonnegativeQIncludesZero) {
  const auto all = solve_enumerate(make({{2, 1}, {1, 2}}, {0.5, 1.0}));
  bool found = false;
  for (const auto& s : all) found |= s.z.isZero(0.0);
  EXPECT_TRUE(found);
}

TEST(Enumerate, TooLargeRejected) {
  Problem p;
  p.M = MatrixXd::Identity(21, 21);
  p.q = VectorXd::Ones(21);
  EXPECT_THROW(solve_enumerate(p), DimensionError);
}

TEST(Problem, DimensionValidation) {
  Problem p;
  p.M = MatrixXd::Identity(2, 3);
  p.q = VectorXd::Ones(2);
  EXPECT_THROW(p.validate(), DimensionError);
  p.M = MatrixXd::Identity(2, 2);
  p.equality_count = 3;
  EXPECT_THROW(p.validate(), DimensionError);
}

Problem random_pd(std::mt19937& rng) {
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_real_distribution<double> u(-1, 1);
  const int n = dim(rng);
  const MatrixXd a = MatrixXd::NullaryExpr(n, n, [&] { return u(rng); });
  Problem p;
  p.M = a.transpose() * a + 0.1 * MatrixXd::Identity(n, n);
  p.q = VectorXd::NullaryExpr(n, [&] { return u(rng); });
  p.equality_count = std::uniform_int_distribution<int>(0, n - 1)(rng);
  return p;
}

TEST(Properties, SolversAgreeAndCertifyOnRandomPdProblems) {
  std::mt19937 rng(12345);
  for (int trial = 0; trial < 1000; ++trial) {
    const Problem p = random_pd(rng);
    const Solution a = solve_lemke(p);
    const Solution b = solve_pgs(p, {.tol = 1e-12, .max_iters = 100000});
    const auto all = solve_enumerate(p);
    ASSERT_EQ(a.status, Status::kSolved) << trial;
    ASSERT_EQ(b.status, Status::kSolved) << trial;
    ASSERT_EQ(all.size(), 1u) << trial;
    EXPECT_LT((a.z - b.z).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_LT((a.z - all[0].z).cwiseAbs().maxCoeff(), 1e-5);
    for (const Solution* s : {&a, &b, &all[0]}) {
      // Recompute w independently of the solver.
      const VectorXd w = p.M * s->z + p.q;
      const double tol = 1e-9;
      const double scale = 1 + p.q.norm();
      for (int i = 0; i < p.size(); ++i) {
        if (i < p.equality_count) {
          EXPECT_LE(std::abs(w[i]), tol * scale);
        } else {
          EXPECT_GE(s->z[i], -tol);
          EXPECT_GE(w[i], -tol);
        }
      }
      EXPECT_LE(std::abs(s->z.tail(p.complementary_size()).dot(w.tail(p.complementary_size()))),
                tol * scale);
    }
  }
}

TEST(Properties, Deterministic) {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const Problem p = random_pd(rng);
    const Solution a = solve_lemke(p), b = solve_lemke(p);
    EXPECT_EQ(0, std::memcmp(a.z.data(), b.z.data(), sizeof(double) * a.z.size()));
    const Solution c = solve_pgs(p), d = solve_pgs(p);
    EXPECT_EQ(0, std::memcmp(c.z.data(), d.z.data(), sizeof(double) * c.z.size()));
  }
}

TEST(SolveFromBasis, CertifiesKnownBasisAndRejectsWrongOne) {
  const Problem p = make({{2, 1}, {1, 2}}, {-1, -1});
  const auto good = solve_from_basis(p, {0, 1}, 1e-9);
  ASSERT_TRUE(good.has_value());
  EXPECT_NEAR(good->z[0], 1.0 / 3, 1e-12);
  EXPECT_FALSE(solve_from_basis(p, {0}, 1e-9).has_value());
}

TEST(RepairBasis, ExchangesIntoCertifiedBasis) {
  const Problem p = make({{4, 1, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}, {1, 0, 2, -1}, 1);
  const auto fixed = repair_basis(p, {0, 1}, 1e-9);
  ASSERT_TRUE(fixed.has_value());
  EXPECT_EQ(fixed->status, Status::kSolved);
  EXPECT_EQ(fixed->basis, (std::vector<int>{0, 2}));
  EXPECT_NEAR(fixed->z[3], 1.0, 1e-12);
  EXPECT_LE(fixed->residual, 1e-12);
  EXPECT_FALSE(repair_basis(p, {0, 1}, 1e-9, 0).has_value());
}

TEST(DumpCsv, WritesAllBlocks) {
  const Problem p = make({{-1}}, {-1});
  const Solution s = solve_lemke(p, {.regularize_on_failure = false});
  const auto path = std::filesystem::temp_directory_path() / "lcp_dump_test.csv";
  dump_csv(path.string(), p, s);
  std::ifstream f(path);
  std::string all((std::istreambuf_iterator<char>(f)), {});
  EXPECT_NE(all.find("ray_termination"), std::string::npos);
  EXPECT_NE(all.find("# q"), std::string::npos);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace prehensile::lcp
