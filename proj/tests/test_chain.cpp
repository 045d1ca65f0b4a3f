#include "gen.hpp"

#include <gtest/gtest.h>

using namespace aslopt;

namespace {

CoiProblem boxed(int n, double bound = 2.0) {
  return {n, 1.0, Vec::Constant(n, bound), Vec::Zero(n), Vec::Zero(n)};
}

CoiProblem free_chain(int n) {
  return {n, 1.0, Vec::Constant(n, std::numeric_limits<double>::infinity()), Vec::Zero(n), Vec::Zero(n)};
}

}  // namespace

TEST(ChainSystem, ConstraintIndexing) {
  auto p = boxed(3);
  p.x_max(1) = std::numeric_limits<double>::infinity();
  EXPECT_EQ(chain_constraint_index(p, 1, -1), 0);
  EXPECT_EQ(chain_constraint_index(p, 1, 1), 1);
  EXPECT_EQ(chain_constraint_index(p, 2, 1), -1);
  EXPECT_EQ(chain_constraint_index(p, 3, -1), 2);
  EXPECT_EQ(to_linear_system(p).num_constraints(), 4);
}

TEST(Shorthand, ArcSums) {
  const auto b = parse_coi_asl("u0 u1 o0 u2 o0 o1 u0 o0 o1 u0 o0", 4);
  EXPECT_EQ(b.N, 11);
  EXPECT_EQ(b.sigma, 5);
  EXPECT_EQ(b.N - b.sigma, 6);
  EXPECT_TRUE(b.cor2.screen_not_optimal);
  const auto l1 = parse_coi_asl("u0 u1 o0 o1 u0 o2 u0 u1 o0 o1 u0", 4);
  EXPECT_EQ(l1.N - l1.sigma, 5);
  EXPECT_TRUE(l1.cor2.screen_not_optimal);
  const auto l2 = parse_coi_asl("o0 o1 u0 o2 u0 u1 o0 u2 o0 o1 u0", 4);
  EXPECT_EQ(l2.N - l2.sigma, 4);
  EXPECT_EQ(l2.dof, 0);
  EXPECT_FALSE(l2.cor2.screen_not_optimal);
}

TEST(Shorthand, RoundTrip) {
  for (const char* text : {"u0 u1 o0 u2 o0 o1 u0 o0 o1 u0 o0", "o0(o3,2) u0 {(u3,2)} o0", "o0 o1 u0 {(o2,1),(u3,2)} o2 u0"}) {
    const auto law = parse_coi_text(text);
    EXPECT_EQ(print_coi_asl(law), text);
    EXPECT_EQ(print_coi_asl(parse_coi_text(print_coi_asl(law))), text);
  }
  EXPECT_EQ(print_coi_asl(parse_coi_text("  o0   u1\to0 ")), "o0 u1 o0");
}

TEST(Shorthand, ParseErrorsCarryPosition) {
  for (const char* bad : {"o0 x1", "o0 u", "o0 (o1,2", "{(o1,1)} o0", ""}) {
    try {
      parse_coi_text(bad);
      FAIL() << "accepted " << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Parse);
    }
  }
  try {
    parse_coi_text("o0 x1");
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("position 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_coi_asl("o0 u7", 4), Error);
}

TEST(Shorthand, RowsMatchArcSum) {
  // marker-free laws whose first and last arcs are bang arcs: rows = sum |S_i| + n
  const std::pair<const char*, int> cases[] = {{"u0 u1 o0 u2 o0 o1 u0 o0 o1 u0 o0", 4},
                                               {"o0 o1 u0 o2 u0 u1 o0 u2 o0 o1 u0", 4},
                                               {"o0 u0 u1 o0 o1 u0 o0", 5},
                                               {"o0 u0 o0 u0 o0 u0 o0 u0 o0 u0 o0", 5},
                                               {"o0 o1 u0", 2}};
  for (const auto& [text, n] : cases) {
    const auto p = boxed(n, 3.0);
    const auto sys = to_linear_system(p);
    const auto parsed = parse_coi_asl(text, n);
    TimedTrajectory tr;
    tr.law = to_law(p, sys, parsed.law);
    tr.x0 = Vec::Zero(n);
    double t = 0.0;
    for (int i = 0; i < parsed.N; ++i) tr.times.push_back(t += 0.3 + 0.1 * i);
    const auto H = build_equality_system(sys, tr, Vec::Zero(n), {}, false);
    EXPECT_EQ(H.num_rows(), parsed.sigma + n) << text;
  }
}

TEST(Corollary1, Bound) {
  EXPECT_TRUE(corollary1_bound(free_chain(2), 1).admissible);
  EXPECT_FALSE(corollary1_bound(free_chain(2), 2).admissible);
  EXPECT_THROW(corollary1_bound(boxed(2), 1), Error);
}

TEST(Corollary2, ConditionsOnPublishedLaws) {
  // two holds of x2 separated by a single bang arc
  const auto bad = corollary2_conditions({0, 2, 0, 2, 0}, 4);
  EXPECT_FALSE(bad.condition1 && bad.condition2 && bad.condition3);
  const auto ok = corollary2_conditions({0, 1, 0, 0}, 4);
  EXPECT_TRUE(ok.condition1 && ok.condition2 && ok.condition3);
  // the count-only candidate fails the first two premises: arcs 3 and 5 enclose a hold of x2
  const auto l2 = parse_coi_asl("o0 o1 u0 o2 u0 u1 o0 u2 o0 o1 u0", 4).cor2;
  EXPECT_FALSE(l2.condition1);
  EXPECT_FALSE(l2.condition2);
}

TEST(Recursion, FmValues) {
  EXPECT_DOUBLE_EQ(f_m(1.0, 0.5, 0.25, 2), 3.5 * 3.5 - 3 * 2.5 * 2.5 + 3 * 1.75 * 1.75 - 1.25 * 1.25);
  EXPECT_DOUBLE_EQ(f_m(1.0, 0.5, 0.25, 2), 1.125);
  gen::Rng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = rng.uniform(-10, 10), b = rng.uniform(-10, 10), c = rng.uniform(-10, 10);
    const double scale = std::abs(a) + std::abs(b) + std::abs(c);
    EXPECT_LT(std::abs(f_m(a, b, c, 1)), 1e-12 * scale);
    const int m = rng.integer(1, 6);
    EXPECT_LT(std::abs(f_m(a, a, a, m)), 1e-9 * std::pow(4 * std::abs(a), m));
  }
}

TEST(Recursion, Order4Example) {
  const auto st = chattering_step(4, {3.0, 2.0, 1.5});
  ASSERT_EQ(st.status, ChatterStep::Status::Ok);
  EXPECT_NEAR(1.5 - st.tau, (-1.25 + std::sqrt(2.8125)), 1e-14);
  EXPECT_NEAR(1.5 - st.tau, 0.42705, 1e-5);
}

TEST(Recursion, Order4EqualGapsTerminate) {
  EXPECT_EQ(chattering_step(4, {3.0, 2.0, 1.0}).status, ChatterStep::Status::Terminated);
}

TEST(Recursion, Order4ClosedFormRootsTheDeterminant) {
  gen::Rng rng(83);
  for (int trial = 0; trial < 50; ++trial) {
    const double z2 = rng.uniform(0.05, 1.0), z1 = z2 * rng.uniform(1.05, 3.0), t2 = rng.uniform(2.0, 5.0);
    const std::vector<double> w{t2 + z2 + z1, t2 + z2, t2};
    const auto st = chattering_step(4, w);
    ASSERT_EQ(st.status, ChatterStep::Status::Ok);
    const double z = t2 - st.tau;
    EXPECT_NEAR(n4_quadratic(z, z1, z2), 0.0, 1e-12 * z1 * z1 * z1);
    // the determinant changes sign across the closed-form root
    const double h = 1e-6 * z;
    EXPECT_LE(chattering_determinant(4, w, st.tau - h) * chattering_determinant(4, w, st.tau + h), 0.0);
  }
}

TEST(Recursion, Order3TerminatesImmediately) {
  gen::Rng rng(89);
  for (int trial = 0; trial < 50; ++trial) {
    const double t1 = rng.uniform(0.1, 2.0), t0 = t1 + rng.uniform(0.01, 2.0);
    const auto rep = chattering_series_analysis(3, {t0, t1}, 10);
    EXPECT_TRUE(rep.terminated);
    EXPECT_EQ(rep.steps, 0);
  }
}

TEST(Recursion, RatioStep) {
  EXPECT_NEAR(n4_r_recursion(0.5), (7.0 - std::sqrt(45.0)) / 2.0, 1e-15);
  EXPECT_NEAR(n4_r_recursion(0.5), 0.145898, 1e-6);
  EXPECT_THROW(n4_r_recursion(0.0), Error);
  EXPECT_THROW(n4_r_recursion(1.0), Error);
  // r - 4 r^2 + O(r^3)
  const double r = 1e-4;
  EXPECT_NEAR((r - n4_r_recursion(r)) / (r * r), 4.0, 0.01);
}

TEST(Recursion, RatioSeriesMonotoneWithQuarterTail) {
  const auto rep = n4_r_series(0.5, 100000);
  EXPECT_TRUE(rep.monotone);
  EXPECT_NEAR(rep.tail_statistic, 0.25, 0.0025);
  for (size_t i = 1; i < rep.rows.size(); ++i) {
    EXPECT_LT(rep.rows[i].r, rep.rows[i - 1].r);
    EXPECT_GT(rep.rows[i].r, 0.0);
    EXPECT_LT(rep.rows[i].z, rep.rows[i - 1].z);
  }
}

TEST(Recursion, WindowSeriesMatchesRatioSeries) {
  // gaps 1, 0.5 give r_1 = 0.5; the window recursion must follow the closed-form ratios.
  // tau is offset far from zero since the gaps shrink too slowly to sum to a finite limit.
  const auto a = chattering_series_analysis(4, {101.5, 100.5, 100.0}, 30);
  const auto b = n4_r_series(0.5, 32);
  ASSERT_EQ(a.steps, 30);
  for (size_t i = 1; i < a.rows.size(); ++i) EXPECT_NEAR(a.rows[i].r, b.rows[i + 1].r, 1e-9 * b.rows[i + 1].r + 1e-14);
}

TEST(Recursion, GeneralOrderRuns) {
  const auto rep = chattering_series_analysis(5, {4.0, 3.0, 2.2, 1.6}, 20);
  EXPECT_TRUE(rep.steps > 0 || rep.terminated);
  for (size_t i = 1; i < rep.rows.size(); ++i) EXPECT_LT(rep.rows[i].tau, rep.rows[i - 1].tau);
}

TEST(Trajectories, ScurveSeedIsFeasible) {
  const auto seed = chain5_move_seed();
  const auto p = chain5_move_problem();
  const auto sys = to_linear_system(p);
  EXPECT_TRUE(check_feasible(sys, seed).feasible);
  EXPECT_LT((keypoint_states(seed).back() - p.xf).norm(), 1e-9);
  const auto coi = to_coi(p, seed.law);
  EXPECT_EQ(static_cast<int>(coi.arcs.size()) - coi_sigma(p, seed.law) - p.n, 6);
}
