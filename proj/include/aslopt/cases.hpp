#pragma once

// Reference problems used by the CLI repro commands, the tests and the acceptance run.

#include "chain.hpp"
#include "optimizer.hpp"

namespace aslopt {

// ---------- lagged actuator with an integrated input ----------

// x1 <- x2 <- x3 are first-order lags driven by 2u; x4 integrates -u.
inline LinearSystem lagged_actuator_system() {
  LinearSystem sys;
  sys.A = Mat::Zero(4, 4);
  sys.A << -1, 1, 0, 0, 0, -1, 1, 0, 0, 0, -1, 0, 0, 0, 0, 0;
  sys.b = Vec(4);
  sys.b << 0, 0, 2, -1;
  sys.u_max = 1.0;
  return sys;
}

// Adds x1 >= -0.7 (order 3) and x3 + x4 <= 0.5 (order 1).
inline LinearSystem lagged_actuator_constrained() {
  auto sys = lagged_actuator_system();
  Constraint lower;
  lower.c = Vec::Zero(4);
  lower.c(0) = -1.0;
  lower.d = -0.7;
  Constraint sum;
  sum.c = Vec::Zero(4);
  sum.c(2) = 1.0;
  sum.c(3) = 1.0;
  sum.d = -0.5;
  sys.constraints = {lower, sum};
  return sys;
}

struct ExampleTrajectory {
  LinearSystem sys;
  Vec x0;
  Vec xf;  // end state of the arcs below
  std::vector<ArcSpec> arcs;
};

// Eight arcs: - + hold - + hold + -. The fifth arc is tangent to x1 = -0.7 and the
// second hold ends where its control reaches the bound. Built backward from the tangency.
inline ExampleTrajectory lagged_actuator_example(const Tolerances& tol = {}) {
  ExampleTrajectory ex;
  ex.sys = lagged_actuator_constrained();
  ex.x0 = Vec(4);
  ex.x0 << 0.7113500006595966, -2.361247674073539, -0.7742465696726366, 0.6336501513402277;
  const auto neg = make_unconstrained(ex.sys, -1), pos = make_unconstrained(ex.sys, 1);
  const auto hold = make_constrained(ex.sys, {1}, tol);
  const std::vector<double> d{0.09116044986735015, 0.5314206582700026, 0.18685386757065048, 0.5941563497310826,
                              0.37567048741443554, 1.8896971136599952, 0.4515870071647251, 0.3795739333295005};
  const std::vector<SystemBehavior> seq{neg, pos, hold, neg, pos, hold, pos, neg};
  Vec x = ex.x0;
  for (size_t i = 0; i < seq.size(); ++i) {
    ex.arcs.push_back({seq[i], d[i]});
    x = propagate(seq[i].A_hat, seq[i].b_hat, x, d[i]);
  }
  ex.xf = x;
  return ex;
}

// ---------- fourth-order chain, single descent ----------

inline CoiProblem chain4_descent_problem() {
  CoiProblem p;
  p.n = 4;
  p.u_max = 1.0;
  p.x_max = Vec(4);
  p.x_max << 1.0, 1.5, 4.0, 20.0;
  p.x0 = Vec(4);
  p.x0 << 0.75, -0.375, 2.0, 9.0;
  p.xf = Vec(4);
  p.xf << 0.25, 0.5, -2.0, -5.0;
  return p;
}

inline const char* chain4_descent_law() { return "u0 u1 o0 u2 o0 o1 u0 o0 o1 u0 o0"; }

// Hand-picked arc durations; Newton moves them onto the boundary conditions.
inline std::vector<double> chain4_descent_durations() {
  return {1.75, 0.40625, 1.0, 1.0, 1.0, 0.8, 0.5, 0.5, 0.5, 0.75, 0.2};
}

inline constexpr double chain4_descent_tf = 9.8604;

struct DescentStart {
  TimedTrajectory solved;    // Newton from the hand seed, all columns free
  TimedTrajectory start;     // final time pinned, fourth switch at the middle of its feasible interval
  double window_lo = 0.0;    // feasible interval of the fourth switch time
  double window_hi = 0.0;
  int pivot_column = 3;
  EqualitySystem equalities;
};

inline DescentStart chain4_descent_start(const Tolerances& tol = {}) {
  const auto p = chain4_descent_problem();
  const auto sys = to_linear_system(p);
  DescentStart ds;
  TimedTrajectory tr;
  tr.law = to_law(p, sys, parse_coi_asl(chain4_descent_law(), 4).law, tol);
  tr.x0 = p.x0;
  double t = 0.0;
  for (double d : chain4_descent_durations()) tr.times.push_back(t += d);
  ds.equalities = build_equality_system(sys, tr, p.xf, tol, false);
  const auto& H = ds.equalities;
  const int last = tr.M() - 1;
  const int pivot = arc_end_columns(tr.law)[3];
  ds.pivot_column = pivot;

  auto free_run = newton_project(H, tr.times);
  if (!free_run.converged) throw Error(ErrorKind::ProjectionFailure, "hand seed did not converge");
  ds.solved = tr;
  ds.solved.times = free_run.times;

  auto base = free_run.times;
  base[last] = chain4_descent_tf;
  const auto pinned_run = newton_project(H, base, {pivot, last});
  if (!pinned_run.converged) throw Error(ErrorKind::ProjectionFailure, "final time pin did not converge");
  base = pinned_run.times;

  auto solve = [&](double tp) {
    auto tt = base;
    tt[pivot] = tp;
    return newton_project(H, tt, {pivot, last});
  };
  auto feasible = [&](double tp) {
    const auto nr = solve(tp);
    if (!nr.converged) return false;
    TimedTrajectory c = tr;
    c.times = nr.times;
    return check_feasible(sys, c, &H, tol).feasible;
  };
  if (!feasible(base[pivot])) throw Error(ErrorKind::Infeasible, "pinned start is infeasible");
  const double step = 1e-3;
  auto edge = [&](double dir) {
    double in = base[pivot];
    while (feasible(in + dir * step)) in += dir * step;
    double out = in + dir * step;
    for (int k = 0; k < 50; ++k) {
      const double mid = 0.5 * (in + out);
      (feasible(mid) ? in : out) = mid;
    }
    return in;
  };
  ds.window_lo = edge(-1.0);
  ds.window_hi = edge(+1.0);
  const auto mid_run = solve(0.5 * (ds.window_lo + ds.window_hi));
  ds.start = tr;
  ds.start.times = mid_run.times;
  return ds;
}

// ---------- fifth-order chain, unit move of the last state ----------

inline CoiProblem chain5_move_problem() {
  CoiProblem p;
  p.n = 5;
  p.u_max = 1.0;
  p.x_max = Vec(5);
  p.x_max << 0.8, 0.5, 0.5, 0.5, 1.0;
  p.x0 = Vec::Zero(5);
  p.xf = Vec::Zero(5);
  p.xf(4) = 1.0;
  return p;
}

// Nested S-curve seed: feasible, every bound respected, far from optimal.
inline TimedTrajectory chain5_move_seed(const Tolerances& tol = {}) {
  const auto p = chain5_move_problem();
  const auto sys = to_linear_system(p);
  return extract_asl(sys, to_arc_specs(p, sys, scurve_move(5, 1.0, p.x_max, p.u_max), tol), p.x0, tol);
}

}  // namespace aslopt
