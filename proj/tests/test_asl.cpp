#include "gen.hpp"

#include <gtest/gtest.h>

using namespace aslopt;

namespace {

CoiProblem double_integrator(double x_max2 = std::numeric_limits<double>::infinity()) {
  CoiProblem p{2, 1.0, Vec(2), Vec::Zero(2), Vec::Zero(2)};
  p.x_max << 5.0, x_max2;
  return p;
}

// + for 1, - for 2, + for 1 from rest: position peaks at 1 in the middle of the second arc.
TimedTrajectory touching_double_integrator(const LinearSystem& sys) {
  return extract_asl(sys, {{make_unconstrained(sys, 1), 1.0}, {make_unconstrained(sys, -1), 2.0}, {make_unconstrained(sys, 1), 1.0}},
                     Vec::Zero(2));
}

}  // namespace

TEST(Tangent, ParabolaVertexIsEvenOrder) {
  const auto p = double_integrator(1.0);
  const auto sys = to_linear_system(p);
  const int upper = chain_constraint_index(p, 2, 1);
  Vec x(2);
  x << 0.0, 1.0;
  const auto t = tangent_condition(sys, make_unconstrained(sys, -1), x, upper);
  EXPECT_EQ(t.kind, TangentResult::Kind::Tangent);
  EXPECT_EQ(t.order, 2);
}

TEST(Tangent, NonzeroVelocityCrosses) {
  const auto p = double_integrator(1.0);
  const auto sys = to_linear_system(p);
  Vec x(2);
  x << 0.3, 1.0;
  const auto t = tangent_condition(sys, make_unconstrained(sys, -1), x, chain_constraint_index(p, 2, 1));
  EXPECT_EQ(t.kind, TangentResult::Kind::Crossing);
  EXPECT_EQ(t.order, 1);
}

TEST(Tangent, AwayFromBoundary) {
  const auto p = double_integrator(1.0);
  const auto sys = to_linear_system(p);
  const auto t = tangent_condition(sys, make_unconstrained(sys, -1), Vec::Zero(2), chain_constraint_index(p, 2, 1));
  EXPECT_EQ(t.kind, TangentResult::Kind::NotTouching);
}

TEST(Tangent, ThirdOrderChainMarker) {
  // at x3 = x_m3 with x2 = 0 and x1 < 0 the ladder of x3 is (x2, x1, u) = (0, -0.5, 1)
  CoiProblem p{4, 1.0, Vec::Constant(4, 10.0), Vec::Zero(4), Vec::Zero(4)};
  p.x_max(2) = 4.0;
  const auto sys = to_linear_system(p);
  Vec x(4);
  x << -0.5, 0.0, 4.0, 1.0;
  const auto t = tangent_condition(sys, make_unconstrained(sys, 1), x, chain_constraint_index(p, 3, 1));
  EXPECT_EQ(t.kind, TangentResult::Kind::Tangent);
  EXPECT_EQ(t.order, 2);
}

TEST(Junction, SameDynamicsRejected) {
  const auto sys = lagged_actuator_system();
  EXPECT_THROW(connection_conditions(sys, make_unconstrained(sys, 1), make_unconstrained(sys, 1), Vec::Zero(4)), Error);
}

TEST(Junction, SignFlipAccepted) {
  const auto sys = lagged_actuator_system();
  EXPECT_TRUE(connection_conditions(sys, make_unconstrained(sys, 1), make_unconstrained(sys, -1), Vec::Zero(4)).satisfied);
}

TEST(Junction, HoldEntryNeedsForcedSign) {
  const auto sys = lagged_actuator_constrained();
  const auto hold = make_constrained(sys, {1});
  Vec x(4);
  x << 0, 0, 0.2, 0.3;  // on x3 + x4 = 0.5 with u = 0.2 on the hold
  EXPECT_TRUE(connection_conditions(sys, make_unconstrained(sys, 1), hold, x).satisfied);
  EXPECT_FALSE(connection_conditions(sys, make_unconstrained(sys, -1), hold, x).satisfied);
  EXPECT_TRUE(connection_conditions(sys, hold, make_unconstrained(sys, -1), x).satisfied);
  EXPECT_FALSE(connection_conditions(sys, hold, make_unconstrained(sys, 1), x).satisfied);
}

TEST(Junction, SaturatedHoldMayExitWithContinuousControl) {
  const auto sys = lagged_actuator_constrained();
  const auto hold = make_constrained(sys, {1});
  Vec x(4);
  x << 0, 0, 1.0, -0.5;  // hold control equals +u_max here
  EXPECT_TRUE(connection_conditions(sys, hold, make_unconstrained(sys, 1), x).satisfied);
}

TEST(EndFeasibility, InteriorIsStrict) {
  const auto sys = lagged_actuator_constrained();
  Vec x = Vec::Zero(4);
  for (Side side : {Side::Left, Side::Right})
    for (const auto& st : end_feasibility(sys, make_unconstrained(sys, 1), x, side)) EXPECT_EQ(st.kind, EndStatus::Kind::Strict);
}

TEST(EndFeasibility, ChainHoldControlStrict) {
  CoiProblem p{4, 1.0, Vec::Constant(4, 2.0), Vec::Zero(4), Vec::Zero(4)};
  const auto sys = to_linear_system(p);
  const auto hold = make_constrained(sys, {chain_constraint_index(p, 2, 1)});
  Vec x = Vec::Zero(4);
  x(1) = 2.0;
  const auto st = end_feasibility(sys, hold, x, Side::Left);
  const int P = sys.num_constraints();
  for (const auto& s : st)
    if (s.constraint >= P) EXPECT_EQ(s.kind, EndStatus::Kind::Strict);
}

TEST(Extract, SingleInteriorArc) {
  const auto sys = lagged_actuator_constrained();
  Vec x0 = Vec::Zero(4);
  const auto tr = extract_asl(sys, {{make_unconstrained(sys, 1), 0.1}}, x0);
  EXPECT_EQ(tr.law.num_arcs(), 1);
  EXPECT_TRUE(tr.law.markers.empty());
  EXPECT_TRUE(tr.law.ends.empty());
  EXPECT_EQ(tr.M(), 1);
}

TEST(Extract, DoubleIntegratorMarker) {
  const auto sys = to_linear_system(double_integrator(1.0));
  const auto tr = touching_double_integrator(sys);
  ASSERT_EQ(tr.law.markers.size(), 1u);
  EXPECT_EQ(tr.law.markers[0].arc, 1);
  EXPECT_EQ(tr.law.markers[0].touches[0].order, 2);
  ASSERT_EQ(tr.M(), 4);
  EXPECT_NEAR(tr.times[1], 2.0, 1e-10);
}

TEST(Extract, CrossingRejected) {
  const auto sys = to_linear_system(double_integrator(0.9));
  EXPECT_THROW(touching_double_integrator(sys), Error);
}

TEST(Extract, LaggedActuatorFeatures) {
  const auto ex = lagged_actuator_example();
  const auto tr = extract_asl(ex.sys, ex.arcs, ex.x0);
  EXPECT_EQ(tr.law.num_arcs(), 8);
  ASSERT_EQ(tr.law.markers.size(), 1u);
  EXPECT_EQ(tr.law.markers[0].arc, 4);
  EXPECT_EQ(tr.law.markers[0].touches[0].constraint, 0);
  ASSERT_EQ(tr.law.ends.size(), 1u);
  EXPECT_EQ(tr.law.ends[0].junction, 5);
  EXPECT_EQ(tr.law.ends[0].touches[0].constraint, ex.sys.num_constraints());  // u <= u_max
}

TEST(Extract, Idempotent) {
  const auto ex = lagged_actuator_example();
  const auto tr = extract_asl(ex.sys, ex.arcs, ex.x0);
  std::vector<ArcSpec> again;
  double prev = 0.0;
  const auto ends = arc_end_columns(tr.law);
  for (int i = 0; i < tr.law.num_arcs(); ++i) {
    again.push_back({tr.law.arcs[i], tr.times[ends[i]] - prev});
    prev = tr.times[ends[i]];
  }
  const auto tr2 = extract_asl(ex.sys, again, ex.x0);
  EXPECT_EQ(tr2.M(), tr.M());
  EXPECT_EQ(tr2.law.markers.size(), tr.law.markers.size());
  EXPECT_EQ(tr2.law.ends.size(), tr.law.ends.size());
  for (int m = 0; m < tr.M(); ++m) EXPECT_NEAR(tr2.times[m], tr.times[m], 1e-10);
}

TEST(EqualitySystem, RestToRestDoubleIntegrator) {
  const auto sys = to_linear_system(double_integrator());
  const auto tr = extract_asl(sys, {{make_unconstrained(sys, 1), 1.0}, {make_unconstrained(sys, -1), 1.0}}, Vec::Zero(2));
  Vec xf(2);
  xf << 0.0, 1.0;
  const auto H = build_equality_system(sys, tr, xf);
  EXPECT_EQ(H.num_rows(), 2);
  EXPECT_EQ(H.M, 2);
}

TEST(EqualitySystem, DescentCaseShape) {
  const auto ds = chain4_descent_start();
  EXPECT_EQ(ds.equalities.num_rows(), 9);
  EXPECT_EQ(ds.equalities.M, 11);
}

TEST(EqualitySystem, RowBoundAndIndependence) {
  const auto ex = lagged_actuator_example();
  const auto tr = extract_asl(ex.sys, ex.arcs, ex.x0);
  const auto H = build_equality_system(ex.sys, tr, ex.xf);
  int features = static_cast<int>(tr.law.markers.size() + tr.law.ends.size());
  for (const auto& a : tr.law.arcs) features += a.constrained();
  EXPECT_LE(H.num_rows(), ex.sys.dim() * (features + 1));
  const Mat J = equality_jacobian(H, tr.times);
  EXPECT_EQ(numerical_rank(J, 1e-9), H.num_rows());
  // without the final-time column the rank drops by one: satisfied
  EXPECT_EQ(necessary_condition_test(J).rank + 1, H.num_rows());
}

TEST(EqualitySystem, StaleTimesRejected) {
  const auto sys = to_linear_system(double_integrator(1.0));
  auto tr = touching_double_integrator(sys);
  tr.times[1] += 1e-3;
  EXPECT_THROW(build_equality_system(sys, tr, Vec::Zero(2)), Error);
}

TEST(Feasibility, LaggedActuatorFeasibleWithZeroMargins) {
  const auto ex = lagged_actuator_example();
  const auto tr = extract_asl(ex.sys, ex.arcs, ex.x0);
  const auto H = build_equality_system(ex.sys, tr, ex.xf);
  const auto rep = check_feasible(ex.sys, tr, &H);
  EXPECT_TRUE(rep.feasible) << rep.diagnosis;
  EXPECT_LT(rep.max_residual, 1e-12);
  EXPECT_NEAR(rep.margins[0].min_margin, 0.0, 1e-9);  // tangency to x1 = -0.7
}

TEST(Feasibility, ShiftedTangencyFlagged) {
  const auto sys = to_linear_system(double_integrator(1.0));
  auto tr = touching_double_integrator(sys);
  const auto H = build_equality_system(sys, tr, Vec::Zero(2));
  tr.times[1] += 0.05;
  const auto rep = check_feasible(sys, tr, &H);
  EXPECT_FALSE(rep.feasible);
  EXPECT_NE(rep.residual_tag.find("marker"), std::string::npos) << rep.residual_tag;
}

TEST(Feasibility, ViolationNamesConstraint) {
  const auto sys = to_linear_system(double_integrator(1.0));
  auto tr = touching_double_integrator(sys);
  // lengthen the first arc and shorten the last: the peak rises above the bound
  tr.times[0] += 0.1;
  const auto rep = check_feasible(sys, tr);
  EXPECT_FALSE(rep.feasible);
  EXPECT_NE(rep.diagnosis.find("constraint 4"), std::string::npos) << rep.diagnosis;
}
