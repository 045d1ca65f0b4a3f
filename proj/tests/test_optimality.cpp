#include "gen.hpp"

#include <gtest/gtest.h>

using namespace aslopt;

namespace {

struct RandomSchedule {
  IntervalDynamics dyn;
  Vec x0;
  std::vector<double> times;
};

RandomSchedule random_schedule(gen::Rng& rng) {
  RandomSchedule s;
  const int n = rng.integer(1, 5), M = rng.integer(1, 8);
  s.x0 = rng.vec(n, -1, 1);
  double t = 0.0;
  for (int m = 0; m < M; ++m) {
    s.dyn.A.push_back(rng.mat_with_norm(n, rng.uniform(0.1, 2.0)));
    s.dyn.b.push_back(rng.vec(n, -1, 1));
    s.times.push_back(t += rng.uniform(0.05, 0.8));
  }
  return s;
}

double max_abs(const KeypointJacobian& D) {
  double m = 0.0;
  for (const auto& row : D)
    for (const auto& v : row) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

// Unconstrained chain trajectory with N arcs and only terminal rows.
EqualitySystem chain_terminal_system(gen::Rng& rng, int n, int N, TimedTrajectory& tr) {
  CoiProblem p{n, 1.0, Vec::Constant(n, std::numeric_limits<double>::infinity()), Vec::Zero(n), Vec::Zero(n)};
  const auto sys = to_linear_system(p);
  tr = gen::bang_bang(rng, sys, N);
  return build_equality_system(sys, tr, gen::end_state(tr));
}

}  // namespace

TEST(KeypointJacobian, CausalAndDiagonal) {
  gen::Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_schedule(rng);
    const auto xs = keypoint_states(s.dyn, s.x0, s.times);
    const auto D = keypoint_jacobian(s.dyn, s.times, xs);
    const int M = static_cast<int>(s.times.size());
    for (int i = 0; i < M; ++i) {
      for (int j = i + 1; j < M; ++j) EXPECT_EQ(D[i][j].norm(), 0.0);
      EXPECT_LT((D[i][i] - (s.dyn.A[i] * xs[i + 1] + s.dyn.b[i])).norm(), 1e-14);
    }
  }
}

TEST(KeypointJacobian, MatchesFiniteDifferences) {
  gen::Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_schedule(rng);
    const auto D = keypoint_jacobian(s.dyn, s.times, keypoint_states(s.dyn, s.x0, s.times));
    const auto F = finite_difference_jacobian(s.dyn, s.x0, s.times, 1e-6);
    double err = 0.0;
    for (size_t i = 0; i < D.size(); ++i)
      for (size_t j = 0; j < D.size(); ++j) err = std::max(err, (D[i][j] - F[i][j]).cwiseAbs().maxCoeff());
    EXPECT_LT(err / std::max(1.0, max_abs(D)), 1e-6) << "trial " << trial;
  }
}

TEST(KeypointJacobian, FiniteDifferenceErrorIsSecondOrder) {
  gen::Rng rng(8);
  auto s = random_schedule(rng);
  while (s.times.size() < 3) s = random_schedule(rng);
  const auto D = keypoint_jacobian(s.dyn, s.times, keypoint_states(s.dyn, s.x0, s.times));
  auto err = [&](double h) {
    const auto F = finite_difference_jacobian(s.dyn, s.x0, s.times, h);
    double e = 0.0;
    for (size_t i = 0; i < D.size(); ++i)
      for (size_t j = 0; j < D.size(); ++j) e = std::max(e, (D[i][j] - F[i][j]).cwiseAbs().maxCoeff());
    return e;
  };
  // tenfold smaller step: roughly hundredfold smaller error while truncation dominates
  EXPECT_LT(err(1e-3), 0.05 * err(1e-2));
  EXPECT_LT(err(1e-5), 1e-8);
}

TEST(KeypointJacobian, DecreasingTimesRejected) {
  gen::Rng rng(4);
  auto s = random_schedule(rng);
  s.times = {0.5, 0.2};
  s.dyn.A.resize(2, s.dyn.A[0]);
  s.dyn.b.resize(2, s.dyn.b[0]);
  std::vector<Vec> xs(3, s.x0);
  EXPECT_THROW(keypoint_jacobian(s.dyn, s.times, xs), Error);
}

TEST(EqualityJacobian, ChainColumnsArePolynomials) {
  gen::Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.integer(2, 4), N = rng.integer(2, 6);
    TimedTrajectory tr;
    const auto H = chain_terminal_system(rng, n, N, tr);
    const Mat J = equality_jacobian(H, tr.times);
    ASSERT_EQ(J.rows(), n);
    for (int i = 0; i + 1 < N; ++i) {
      const double du = tr.law.arcs[i + 1].sign - tr.law.arcs[i].sign;
      const double tau = tr.times.back() - tr.times[i];
      double term = 1.0;
      for (int k = 0; k < n; ++k) {
        // terminal rows are x_k - xf_k; column i is -du * tau^k / k!
        EXPECT_NEAR(J(k, i), -du * term, 1e-10 * std::max(1.0, std::abs(term)));
        term *= tau / (k + 1);
      }
    }
  }
}

TEST(EqualityJacobian, ChatteringPrefixEntries) {
  CoiProblem p{4, 1.0, Vec::Constant(4, 10.0), Vec::Zero(4), Vec::Zero(4)};
  p.x_max(1) = 1.0;
  const auto sys = to_linear_system(p);
  Vec x0 = Vec::Zero(4);
  x0(1) = 1.0;
  const std::vector<double> tau{1.0, 0.6, 0.35, 0.2};
  const auto tr = chattering_prefix(p, sys, tau, 2.0, x0);
  const auto dyn = interval_dynamics(tr.law);
  const auto D = keypoint_jacobian(dyn, tr.times, keypoint_states(tr), tr.t0);
  const auto kps = keypoint_schedule(tr.law);
  int markers = 0;
  for (int k = 0; k < tr.M(); ++k) {
    if (kps[k].kind != Keypoint::Kind::Marker) continue;
    ++markers;
    for (int j = 0; j < k; ++j) {
      if (kps[j].kind == Keypoint::Kind::Marker) continue;
      EXPECT_NEAR(std::abs(D[k][j](0)), 2.0 * p.u_max, 1e-12);
      EXPECT_NEAR(std::abs(D[k][j](1)), 2.0 * p.u_max * (tr.times[k] - tr.times[j]), 1e-12);
    }
  }
  EXPECT_EQ(markers, static_cast<int>(tau.size()) - 2);
}

TEST(Verdict, EmptySystemRejected) {
  EXPECT_THROW(necessary_condition_test(Mat(0, 3)), Error);
}

TEST(Verdict, RestToRestSatisfied) {
  CoiProblem p{2, 1.0, Vec::Constant(2, std::numeric_limits<double>::infinity()), Vec::Zero(2), Vec::Zero(2)};
  const auto sys = to_linear_system(p);
  const auto tr = extract_asl(sys, {{make_unconstrained(sys, 1), 1.0}, {make_unconstrained(sys, -1), 1.0}}, Vec::Zero(2));
  const auto H = build_equality_system(sys, tr, gen::end_state(tr));
  const auto v = necessary_condition_test(H, tr.times);
  EXPECT_EQ(v.rows, 2);
  EXPECT_EQ(v.cols, 2);
  EXPECT_TRUE(v.satisfied);
}

TEST(Verdict, DescentCaseNotSatisfied) {
  const auto ds = chain4_descent_start();
  const Mat J = equality_jacobian(ds.equalities, ds.solved.times);
  const auto v = necessary_condition_test(J);
  EXPECT_EQ(v.rows, 9);
  EXPECT_EQ(v.cols, 11);
  EXPECT_EQ(v.full_rank, 9);
  EXPECT_FALSE(v.satisfied);
  Mat reduced(9, 9);
  for (int k = 0, c = 0; k < 11; ++k)
    if (k != 3 && k != 10) reduced.col(c++) = J.col(k);
  EXPECT_EQ(numerical_rank(reduced, 1e-9), 9);
}

TEST(Verdict, VandermondeRank) {
  gen::Rng rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.integer(2, 3), N = rng.integer(2, 6);
    TimedTrajectory tr;
    const auto H = chain_terminal_system(rng, n, N, tr);
    const auto v = necessary_condition_test(H, tr.times);
    EXPECT_EQ(v.rank, std::min(n, N - 1)) << "n " << n << " N " << N;
    EXPECT_EQ(v.satisfied, N - 1 < n);
  }
}

TEST(Verdict, InvariantUnderRowScalingAndMixing) {
  const auto ds = chain4_descent_start();
  const Mat J = equality_jacobian(ds.equalities, ds.solved.times);
  const auto base = necessary_condition_test(J);
  gen::Rng rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    Mat K = J;
    for (int r = 0; r < K.rows(); ++r) K.row(r) *= std::pow(10.0, rng.uniform(-2, 2));
    // mix rows that share a keypoint
    for (int a = 0; a < K.rows(); ++a)
      for (int b = 0; b < K.rows(); ++b)
        if (a != b && ds.equalities.rows[a].keypoint == ds.equalities.rows[b].keypoint) K.row(a) += rng.uniform(-1, 1) * K.row(b);
    const auto v = necessary_condition_test(K);
    EXPECT_EQ(v.rank, base.rank);
    EXPECT_EQ(v.satisfied, base.satisfied);
  }
}

TEST(ColumnSplit, BasisKeepsLastColumn) {
  const auto ds = chain4_descent_start();
  const Mat J = equality_jacobian(ds.equalities, ds.solved.times);
  const auto s = split_columns(J);
  EXPECT_EQ(s.basis.back(), 10);
  EXPECT_EQ(s.basis.size(), 9u);
  EXPECT_EQ(s.free.size(), 2u);
}
