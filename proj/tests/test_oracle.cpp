#include "gen.hpp"

#include <gtest/gtest.h>

using namespace aslopt;

namespace {

CoiProblem free_chain(int n) {
  return {n, 1.0, Vec::Constant(n, std::numeric_limits<double>::infinity()), Vec::Zero(n), Vec::Zero(n)};
}

}  // namespace

TEST(FiniteDifferences, StepMustBePositive) {
  IntervalDynamics dyn;
  dyn.A.push_back(chain_A(2));
  dyn.b.push_back(chain_b(2));
  EXPECT_THROW(finite_difference_jacobian(dyn, Vec::Zero(2), {1.0}, 0.0), Error);
}

TEST(Threads, EnvironmentCap) {
  EXPECT_EQ(oracle_threads(3), 3);
  setenv("ASLOPT_THREADS", "2", 1);
  EXPECT_EQ(oracle_threads(0), 2);
  setenv("ASLOPT_THREADS", "junk", 1);
  EXPECT_EQ(oracle_threads(0), 1);
  unsetenv("ASLOPT_THREADS");
  EXPECT_EQ(oracle_threads(0), 1);
}

TEST(Oracle, DoubleIntegratorRestToRest) {
  auto p = free_chain(2);
  p.xf(1) = 1.0;
  const auto res = grid_bbs_oracle(to_linear_system(p), p.x0, p.xf);
  ASSERT_TRUE(res.found) << res.message;
  EXPECT_NEAR(res.t_final, 2.0, 1e-3);
  ASSERT_EQ(res.switches, 1);
  EXPECT_NEAR(res.switch_times[0], 1.0, 1e-3);
  EXPECT_EQ(res.arcs[0].behavior.sign, 1);
  EXPECT_TRUE(res.audit.feasible);
}

TEST(Oracle, VelocityBoundNeedsHold) {
  auto p = free_chain(2);
  p.x_max(0) = 0.5;
  p.xf(1) = 1.0;
  const auto sys = to_linear_system(p);
  OracleOptions opt;
  opt.allow_holds = true;
  const auto res = grid_bbs_oracle(sys, p.x0, p.xf, opt);
  ASSERT_TRUE(res.found) << res.message;
  EXPECT_NEAR(res.t_final, 2.5, 1e-3);
  EXPECT_EQ(print_coi_asl(to_coi(p, res.trajectory.law)), "o0 o1 u0");
  // without holds no bang-bang law of three arcs reaches the target inside the bound
  const auto bang = grid_bbs_oracle(sys, p.x0, p.xf);
  EXPECT_FALSE(bang.found);
}

TEST(Oracle, UnconstrainedOptimaHaveAtMostNMinusOneSwitches) {
  gen::Rng rng(101);
  for (int trial = 0; trial < 4; ++trial) {
    const int n = rng.integer(2, 3);
    auto p = free_chain(n);
    p.x0 = rng.vec(n, -1, 1);
    OracleOptions opt;
    opt.max_arcs = n + 2;
    opt.density = 2;
    const auto res = grid_bbs_oracle(to_linear_system(p), p.x0, p.xf, opt);
    ASSERT_TRUE(res.found) << "trial " << trial;
    EXPECT_LE(res.switches, n - 1) << "trial " << trial;
  }
}

TEST(Oracle, OptimumPassesRankTest) {
  gen::Rng rng(103);
  for (int trial = 0; trial < 4; ++trial) {
    auto p = free_chain(3);
    p.x0 = rng.vec(3, -1, 1);
    const auto sys = to_linear_system(p);
    const auto res = grid_bbs_oracle(sys, p.x0, p.xf);
    ASSERT_TRUE(res.found);
    const auto H = build_equality_system(sys, res.trajectory, p.xf);
    EXPECT_TRUE(necessary_condition_test(H, res.trajectory.times).satisfied) << "trial " << trial;
  }
}

TEST(Oracle, RefinementNeverWorsens) {
  auto p = free_chain(3);
  p.x0 << 0.4, -0.8, 0.3;
  const auto sys = to_linear_system(p);
  double prev = std::numeric_limits<double>::infinity();
  for (int rounds = 1; rounds <= 3; ++rounds) {
    OracleOptions opt;
    opt.rounds = rounds;
    const auto res = grid_bbs_oracle(sys, p.x0, p.xf, opt);
    ASSERT_TRUE(res.found);
    EXPECT_LE(res.t_final, prev + 1e-12);
    prev = res.t_final;
  }
}

TEST(Oracle, ThreadCountDoesNotChangeTheAnswer) {
  auto p = free_chain(3);
  p.x0 << -0.5, 0.2, 0.9;
  const auto sys = to_linear_system(p);
  OracleOptions one, three;
  one.threads = 1;
  three.threads = 3;
  const auto a = grid_bbs_oracle(sys, p.x0, p.xf, one), b = grid_bbs_oracle(sys, p.x0, p.xf, three);
  ASSERT_TRUE(a.found && b.found);
  EXPECT_EQ(a.t_final, b.t_final);
  EXPECT_EQ(a.switch_times, b.switch_times);
}

TEST(Oracle, UnreachableReportsNothingFound) {
  // target far outside a tight box
  CoiProblem p{2, 1.0, Vec::Constant(2, 0.1), Vec::Zero(2), Vec::Zero(2)};
  p.xf(1) = 5.0;
  const auto res = grid_bbs_oracle(to_linear_system(p), p.x0, p.xf);
  EXPECT_FALSE(res.found);
  EXPECT_FALSE(res.message.empty());
}
