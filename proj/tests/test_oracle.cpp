#include <random>

#include <gtest/gtest.h>

#include "dulgap/oracle.hpp"
#include "dulgap/wireless.hpp"
#include "support/oracles.hpp"

using namespace dulgap;

namespace {

Matrix profits3x2() {
  Matrix p(3, 2);
  p << 3, 1, 2, 2, 1, 3;
  return p;
}

GapInstance random_unit_instance(std::mt19937_64 &rng, Index I, Index J) {
  std::uniform_int_distribution<int> quota(1, int(I));
  Vector caps(J);
  do {
    for (Index j = 0; j < J; ++j)
      caps(j) = quota(rng);
  } while (caps.sum() < double(I));
  return GapInstance::unit_weight(refcheck::random_matrix(rng, I, J, 0, 10), caps);
}

} // namespace

TEST(Hungarian, DiagonalDominance) {
  Matrix c(2, 2);
  c << 1, 2, 2, 1;
  const Matching m = hungarian(c);
  EXPECT_EQ(m.row_to_col, (std::vector<Index>{0, 1}));
  EXPECT_DOUBLE_EQ(m.cost, 2.0);
}

TEST(Hungarian, RecoversForcedPermutation) {
  std::mt19937_64 rng(1);
  std::vector<Index> perm{3, 0, 4, 1, 2};
  Matrix c = Matrix::Constant(5, 5, 1000.0);
  for (Index r = 0; r < 5; ++r)
    c(r, perm[std::size_t(r)]) = 0.0;
  EXPECT_EQ(hungarian(c).row_to_col, perm);
}

TEST(Hungarian, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(2);
  for (Index n = 1; n <= 7; ++n)
    for (int trial = 0; trial < 30; ++trial) {
      const Matrix c = refcheck::random_matrix(rng, n, n, -5, 5);
      const Matching m = hungarian(c);
      EXPECT_NEAR(m.cost, refcheck::exhaustive_min_permutation(c), 1e-9);
      double recomputed = 0;
      std::vector<bool> used(std::size_t(n), false);
      for (Index r = 0; r < n; ++r) {
        const Index col = m.row_to_col[std::size_t(r)];
        EXPECT_FALSE(used[std::size_t(col)]);
        used[std::size_t(col)] = true;
        recomputed += c(r, col);
      }
      EXPECT_NEAR(recomputed, m.cost, 1e-9);
    }
}

TEST(Hungarian, NoRandomPermutationBeatsIt) {
  std::mt19937_64 rng(3);
  const Matrix c = refcheck::random_matrix(rng, 12, 12, 0, 1);
  const double best = hungarian(c).cost;
  std::vector<Index> perm(12);
  std::iota(perm.begin(), perm.end(), Index{0});
  for (int k = 0; k < 1000; ++k) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double total = 0;
    for (Index r = 0; r < 12; ++r)
      total += c(r, perm[std::size_t(r)]);
    EXPECT_LE(best, total + 1e-12);
  }
}

TEST(Hungarian, RejectsNonSquare) {
  EXPECT_THROW(hungarian(Matrix::Zero(2, 3)), DimensionError);
}

TEST(ExactSolver, QuotaExample) {
  const auto inst = GapInstance::unit_weight(profits3x2(), Vector{{2.0, 1.0}});
  const OracleSolution s = solve_unit_weight_exact(inst);
  EXPECT_DOUBLE_EQ(s.objective, 8.0);
  EXPECT_EQ(s.assignment.choice(), (std::vector<Index>{0, 0, 1}));
  EXPECT_TRUE(check_feasibility(inst, s.assignment, 0.0).feasible());
}

TEST(ExactSolver, UnitQuotaIsLinearSumAssignment) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix p = refcheck::random_matrix(rng, 6, 6, 0, 10);
    const auto s = solve_unit_weight_exact(GapInstance::unit_weight(p, Vector::Ones(6)));
    EXPECT_NEAR(s.objective, -hungarian(-p).cost, 1e-9);
  }
}

TEST(ExactSolver, RealisticSixteenUsersMatchesBruteForce) {
  NetworkConfig cfg = NetworkConfig::defaults(16, 4);
  cfg.bs_quota = 4;
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    const auto inst = association_instance(rate_matrix(sample_topology(cfg, seed), cfg), cfg);
    const auto exact = solve_unit_weight_exact(inst);
    const auto brute = solve_brute_force(inst, 1e10);
    EXPECT_NEAR(exact.objective, brute.objective, 1e-9);
    EXPECT_TRUE(check_feasibility(inst, exact.assignment, 0.0).feasible());
  }
}

TEST(ExactSolver, Errors) {
  EXPECT_THROW(solve_unit_weight_exact(
                   GapInstance::unit_weight(Matrix::Ones(3, 2), Vector::Ones(2))),
               InfeasibleError);
  EXPECT_THROW(solve_unit_weight_exact(GapInstance::unit_weight(
                   Matrix::Ones(2, 2), Vector::Constant(2, 1.5))),
               InvalidArgument);
  EXPECT_THROW(solve_unit_weight_exact(GapInstance(
                   Matrix::Ones(2, 2), Matrix::Constant(2, 2, 2.0), Vector::Ones(2))),
               InvalidArgument);
}

TEST(BruteForce, SmallExamples) {
  Matrix p(2, 2);
  p << 5, 1, 2, 4;
  EXPECT_DOUBLE_EQ(solve_brute_force(GapInstance::unit_weight(p, Vector::Ones(2))).objective,
                   9.0);
  // Item 1 fits nowhere.
  Matrix w = Matrix::Ones(2, 2);
  w.row(1).setConstant(5.0);
  EXPECT_THROW(solve_brute_force(GapInstance(p, w, Vector::Constant(2, 2.0))),
               InfeasibleError);
  EXPECT_THROW(solve_brute_force(GapInstance::unit_weight(Matrix::Ones(20, 4),
                                                          Vector::Constant(4, 5.0))),
               TooLargeError);
}

TEST(BruteForce, GeneralWeightsMatchEnumeration) {
  std::mt19937_64 rng(5);
  int checked = 0;
  while (checked < 200) {
    const Matrix p = refcheck::random_matrix(rng, 5, 3, -1, 5);
    const Matrix w = refcheck::random_matrix(rng, 5, 3, 0.1, 2);
    const Vector c = refcheck::random_matrix(rng, 3, 1, 1, 4).col(0);
    const double expected = refcheck::enumerate_gap_optimum(p, w, c);
    if (!std::isfinite(expected))
      continue;
    ++checked;
    const auto s = solve_brute_force(GapInstance(p, w, c));
    EXPECT_NEAR(s.objective, expected, 1e-9);
    EXPECT_TRUE(check_feasibility(GapInstance(p, w, c), s.assignment, 1e-9).c2_ok());
  }
}

TEST(BruteForce, AgreesWithExactOnRandomUnitInstances) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<Index> items(1, 8), bins(1, 4);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto inst = random_unit_instance(rng, items(rng), bins(rng));
    const auto exact = solve_unit_weight_exact(inst);
    const auto brute = solve_brute_force(inst);
    EXPECT_EQ(exact.objective, brute.objective) << "trial " << trial;
    EXPECT_TRUE(check_feasibility(inst, exact.assignment, 0.0).feasible());
    EXPECT_TRUE(check_feasibility(inst, brute.assignment, 0.0).feasible());
  }
}

TEST(Greedy, RegretTraceExample) {
  const auto inst = GapInstance::unit_weight(profits3x2(), Vector{{2.0, 1.0}});
  const auto s = greedy_baseline(inst);
  EXPECT_DOUBLE_EQ(s.objective, 8.0);
  EXPECT_EQ(s.method, OracleMethod::greedy);
}

TEST(Greedy, UnconstrainedTakesRowMaxima) {
  std::mt19937_64 rng(7);
  const Matrix p = refcheck::random_matrix(rng, 7, 3, 0, 1);
  const auto s = greedy_baseline(GapInstance::unit_weight(p, Vector::Constant(3, 7.0)));
  EXPECT_NEAR(s.objective, p.rowwise().maxCoeff().sum(), 1e-12);
}

TEST(Greedy, NeverBeatsExactAndIsFeasible) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = random_unit_instance(rng, 8, 4);
    const auto g = greedy_baseline(inst);
    EXPECT_LE(g.objective, solve_unit_weight_exact(inst).objective + 1e-12);
    EXPECT_TRUE(check_feasibility(inst, g.assignment, 0.0).feasible());
  }
}
