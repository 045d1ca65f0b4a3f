#pragma once

#include "optimality.hpp"

#include <optional>

namespace aslopt {

struct NewtonOptions {
  int max_iter = 50;
  double target = 1e-13;  // scaled residual to stop at
  double accept = 1e-10;  // scaled residual accepted as converged
};

struct NewtonResult {
  bool converged = false;
  std::vector<double> times;
  double residual = 0.0;
  int iterations = 0;
};

inline double scaled_residual(const EqualitySystem& H, const std::vector<double>& times) {
  const auto xs = keypoint_states(H.dynamics, H.x0, times, H.t0, true);
  double worst = 0.0;
  for (const auto& row : H.rows) {
    const Vec& x = xs[row.keypoint + 1];
    worst = std::max(worst, std::abs(row.f.dot(x) + row.g) / (row.f.norm() * std::max(1.0, x.norm())));
  }
  return worst;
}

inline bool durations_positive(const std::vector<double>& times, double t0) {
  double prev = t0;
  for (double t : times) {
    if (!(t > prev)) return false;
    prev = t;
  }
  return true;
}

// Minimum-norm Gauss-Newton onto H(t) = 0 over the unpinned columns.
inline NewtonResult newton_project(const EqualitySystem& H, std::vector<double> times, const std::vector<int>& pinned = {},
                                   const NewtonOptions& opt = {}) {
  NewtonResult res;
  const int M = static_cast<int>(times.size());
  std::vector<int> cols;
  for (int j = 0; j < M; ++j)
    if (std::find(pinned.begin(), pinned.end(), j) == pinned.end()) cols.push_back(j);
  if (H.num_rows() == 0) {
    res.converged = durations_positive(times, H.t0);
    res.times = times;
    return res;
  }
  double prev_res = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  for (int it = 0; it < opt.max_iter; ++it) {
    res.residual = scaled_residual(H, times);
    res.iterations = it;
    if (!std::isfinite(res.residual)) break;
    if (res.residual <= opt.target) break;
    if (res.residual > 0.5 * prev_res) {
      if (++stagnant >= 3) break;
    } else {
      stagnant = 0;
    }
    prev_res = res.residual;
    const Vec r = evaluate(H, times, true);
    const Mat J = equality_jacobian(H, times, true);
    Mat Jc(J.rows(), cols.size());
    for (size_t k = 0; k < cols.size(); ++k) Jc.col(k) = J.col(cols[k]);
    const Vec dt = Jc.completeOrthogonalDecomposition().solve(-r);
    if (!all_finite(dt)) break;
    for (size_t k = 0; k < cols.size(); ++k) times[cols[k]] += dt(k);
  }
  res.residual = scaled_residual(H, times);
  res.times = times;
  res.converged = std::isfinite(res.residual) && res.residual <= opt.accept && durations_positive(times, H.t0);
  return res;
}

// ---------- descent ----------

struct OptimizerOptions {
  Tolerances tol;
  NewtonOptions newton;
  int max_iter = 100;
  double initial_step = 1e-2;     // fraction of the shortest interval
  double bisect_rel = 1e-12;      // boundary bracket width relative to t_M
  double collapse_rel = 1e-7;     // arc shorter than this fraction of t_M collapses
  double hold_seed_rel = 1e-9;    // length of a freshly inserted constrained arc
  double junction_rel = 1e-6;     // violation this close to a junction counts as at the junction
  int max_doublings = 60;
  std::function<void(const std::string&)> trace;  // optional progress messages
};

struct IterationRecord {
  int iter = 0;
  double t_final = 0.0;
  int dof = 0;  // M - rows
  int rank = 0;
  int rows = 0;
  int cols = 0;
  std::string action;
};

struct OptimizeResult {
  TimedTrajectory trajectory;
  OptimalityVerdict verdict;
  std::vector<IterationRecord> log;
  bool satisfied = false;
  std::string stop_reason;
};

// Column index of each arc end in the keypoint schedule.
inline std::vector<int> arc_end_columns(const AugmentedSwitchingLaw& law) {
  std::vector<int> out;
  const auto kps = keypoint_schedule(law);
  for (int m = 0; m < static_cast<int>(kps.size()); ++m)
    if (kps[m].kind == Keypoint::Kind::ArcEnd) out.push_back(m);
  return out;
}

inline std::vector<double> arc_durations(const TimedTrajectory& tr) {
  std::vector<double> out;
  double prev = tr.t0;
  for (int c : arc_end_columns(tr.law)) {
    out.push_back(tr.times[c] - prev);
    prev = tr.times[c];
  }
  return out;
}

inline std::vector<ArcSpec> arc_specs(const TimedTrajectory& tr) {
  std::vector<ArcSpec> out;
  const auto d = arc_durations(tr);
  for (int i = 0; i < tr.law.num_arcs(); ++i) out.push_back({tr.law.arcs[i], d[i]});
  return out;
}

// Drops zero-length arcs and merges neighbours running the same law.
inline std::vector<ArcSpec> merge_specs(std::vector<ArcSpec> specs) {
  std::vector<ArcSpec> out;
  for (auto& s : specs) {
    if (!(s.duration > 0.0)) continue;
    if (!out.empty() && out.back().behavior.same_law(s.behavior))
      out.back().duration += s.duration;
    else
      out.push_back(s);
  }
  return out;
}

// d t_M / d t_j along H = 0 with the other free columns held fixed.
inline std::map<int, double> terminal_sensitivities(const Mat& J, const ColumnSplit& split) {
  const int Mp = static_cast<int>(split.basis.size());
  Mat JB(J.rows(), Mp);
  for (int k = 0; k < Mp; ++k) JB.col(k) = J.col(split.basis[k]);
  const auto lu = JB.fullPivLu();
  std::map<int, double> s;
  for (int j : split.free) s[j] = -lu.solve(J.col(j))(Mp - 1);
  return s;
}

namespace detail {

struct LineSearch {
  enum class Boundary { NewtonFailure, Collapse, Violation, Stationary, Unbounded };
  Boundary boundary = Boundary::NewtonFailure;
  std::vector<double> good;
  double moved = 0.0;
  int violated = -1;
  double violation_time = 0.0;
  int shortest_arc = 0;
  bool arc_vanishes = false;  // otherwise a marker reached the end of its arc
};

inline bool same_structure(const TimedTrajectory& a, const TimedTrajectory& b) {
  if (a.law.num_arcs() != b.law.num_arcs() || a.M() != b.M() || a.law.ends.size() != b.law.ends.size()) return false;
  for (int i = 0; i < a.law.num_arcs(); ++i)
    if (!a.law.arcs[i].same_law(b.law.arcs[i])) return false;
  for (size_t k = 0; k < a.law.markers.size(); ++k) {
    if (a.law.markers[k].arc != b.law.markers[k].arc || a.law.markers[k].touches.size() != b.law.markers[k].touches.size())
      return false;
    for (size_t q = 0; q < a.law.markers[k].touches.size(); ++q)
      if (a.law.markers[k].touches[q].constraint != b.law.markers[k].touches[q].constraint ||
          a.law.markers[k].touches[q].order != b.law.markers[k].touches[q].order)
        return false;
  }
  for (size_t k = 0; k < a.law.ends.size(); ++k) {
    if (a.law.ends[k].junction != b.law.ends[k].junction || a.law.ends[k].touches.size() != b.law.ends[k].touches.size())
      return false;
    for (size_t q = 0; q < a.law.ends[k].touches.size(); ++q) {
      const auto &x = a.law.ends[k].touches[q], &y = b.law.ends[k].touches[q];
      if (x.constraint != y.constraint || x.left_order != y.left_order || x.right_order != y.right_order) return false;
    }
  }
  return true;
}

}  // namespace detail

class Optimizer {
 public:
  Optimizer(LinearSystem sys, Vec xf, OptimizerOptions opt = {}) : sys_(std::move(sys)), xf_(std::move(xf)), opt_(opt) {}

  const OptimizerOptions& options() const { return opt_; }

  OptimizeResult run(TimedTrajectory tr) {
    OptimizeResult out;
    int fresh_arc = -1;
    for (int iter = 0;; ++iter) {
      const auto H = build_equality_system(sys_, tr, xf_, opt_.tol);
      const Mat J = equality_jacobian(H, tr.times);
      const auto verdict = necessary_condition_test(J, opt_.tol.rank);
      IterationRecord rec{iter, tr.t_final(), H.M - H.num_rows(), verdict.rank, verdict.rows, verdict.cols, ""};
      out.trajectory = tr;
      out.verdict = verdict;
      if (verdict.satisfied) {
        rec.action = "satisfied";
        out.log.push_back(rec);
        out.satisfied = true;
        out.stop_reason = "necessary condition satisfied";
        return out;
      }
      if (iter >= opt_.max_iter) {
        rec.action = "iteration limit";
        out.log.push_back(rec);
        out.stop_reason = "iteration limit reached";
        return out;
      }
      const auto split = split_columns(J, opt_.tol.rank);
      const auto sens = terminal_sensitivities(J, split);
      std::vector<int> order(split.free);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(sens.at(a)) > std::abs(sens.at(b)); });

      bool advanced = false;
      for (size_t ci = 0; ci < order.size() && !advanced; ++ci) {
        const int j = order[ci];
        const double s = sens.at(j);
        if (s == 0.0) continue;
        const auto ls = line_search(H, tr, split, j, s > 0 ? -1.0 : 1.0, s);
        const bool last_candidate = ci + 1 == order.size();
        note("t" + std::to_string(j + 1) + " s=" + std::to_string(s) + " moved=" + std::to_string(ls.moved) + " boundary=" +
             boundary_name(ls.boundary) + " constraint=" + std::to_string(ls.violated) + " at " + std::to_string(ls.violation_time) +
             " shortest arc " + std::to_string(ls.shortest_arc + 1));
        // a move that only undoes the arc inserted last time is left for other columns
        if (ls.boundary == detail::LineSearch::Boundary::Collapse && ls.arc_vanishes && ls.shortest_arc == fresh_arc &&
            !last_candidate)
          continue;
        TimedTrajectory moved = tr;
        moved.times = ls.good;
        std::string action = "move t" + std::to_string(j + 1);
        auto restructured = restructure(moved, ls, action);
        if (!restructured) {
          if (ls.moved > 0.0 && moved.t_final() < tr.t_final()) {
            tr = moved;
            fresh_arc = -1;
            advanced = true;
          }
          continue;
        }
        tr = restructured->first;
        fresh_arc = restructured->second;
        advanced = true;
        rec.action = action;
      }
      if (!advanced) {
        rec.action = "stalled";
        out.log.push_back(rec);
        out.stop_reason = "no free column yields a feasible improvement";
        return out;
      }
      if (rec.action.empty()) rec.action = "move";
      out.log.push_back(rec);
    }
  }

  // Feasible at the current row set: Newton-converged, positive intervals, audit passes.
  bool feasible(const TimedTrajectory& tr, FeasibilityReport* rep = nullptr) const {
    if (!durations_positive(tr.times, tr.t0)) return false;
    const auto r = check_feasible(sys_, tr, nullptr, opt_.tol);
    if (rep) *rep = r;
    return r.feasible;
  }

 private:
  LinearSystem sys_;
  void note(const std::string& msg) const {
    if (opt_.trace) opt_.trace(msg);
  }
  static std::string boundary_name(detail::LineSearch::Boundary b) {
    using B = detail::LineSearch::Boundary;
    switch (b) {
      case B::NewtonFailure: return "newton-failure";
      case B::Collapse: return "collapse";
      case B::Violation: return "violation";
      case B::Stationary: return "stationary";
      case B::Unbounded: return "unbounded";
    }
    return "?";
  }
  Vec xf_;
  OptimizerOptions opt_;

  detail::LineSearch line_search(const EqualitySystem& H, const TimedTrajectory& tr, const ColumnSplit& split, int j,
                                 double dir, double s0) const {
    using B = detail::LineSearch::Boundary;
    detail::LineSearch ls;
    ls.good = tr.times;
    const double tM = std::max(1.0, std::abs(tr.t_final()));
    double min_int = std::numeric_limits<double>::infinity(), prev = tr.t0;
    for (double t : tr.times) min_int = std::min(min_int, t - prev), prev = t;
    const double tj0 = tr.times[j];

    auto attempt = [&](double off, const std::vector<double>& from, std::vector<double>& solved, B& why,
                       FeasibilityReport& rep) {
      std::vector<double> t = from;
      t[j] = tj0 + dir * off;
      const auto nr = newton_project(H, t, split.free, opt_.newton);
      solved = nr.times;
      if (!nr.converged) {
        const bool solved_ok = std::isfinite(nr.residual) && nr.residual <= opt_.newton.accept;
        why = solved_ok ? B::Collapse : B::NewtonFailure;
        return false;
      }
      TimedTrajectory cand = tr;
      cand.times = nr.times;
      if (!feasible(cand, &rep)) {
        why = B::Violation;
        return false;
      }
      const Mat Jc = equality_jacobian(H, nr.times);
      const double sc = terminal_sensitivities(Jc, split).at(j);
      if (!(sc * s0 > 0.0) || !(nr.times.back() < tr.t_final())) {
        why = B::Stationary;
        return false;
      }
      return true;
    };

    double lo = 0.0, step = opt_.initial_step * min_int, hi = 0.0;
    std::vector<double> solved;
    B why = B::Unbounded;
    FeasibilityReport rep, bad_rep;
    bool bounded = false;
    for (int k = 0; k < opt_.max_doublings; ++k) {
      if (attempt(lo + step, ls.good, solved, why, rep)) {
        ls.good = solved;
        lo += step;
        step *= 2.0;
      } else {
        hi = lo + step;
        bad_rep = rep;
        bounded = true;
        break;
      }
    }
    if (!bounded) {
      ls.boundary = B::Unbounded;
      ls.moved = lo;
      return ls;
    }
    B hi_why = why;
    while (hi - lo > opt_.bisect_rel * tM) {
      const double mid = 0.5 * (lo + hi);
      if (attempt(mid, ls.good, solved, why, rep)) {
        ls.good = solved;
        lo = mid;
      } else {
        hi = mid;
        hi_why = why;
        bad_rep = rep;
      }
    }
    ls.moved = lo;
    ls.boundary = hi_why;
    // a vanishing arc at the good point takes precedence over what failed past it
    TimedTrajectory g = tr;
    g.times = ls.good;
    const auto d = arc_durations(g);
    ls.shortest_arc = static_cast<int>(std::min_element(d.begin(), d.end()) - d.begin());
    ls.arc_vanishes = d[ls.shortest_arc] < opt_.collapse_rel * tM;
    double shortest = std::numeric_limits<double>::infinity(), p = tr.t0;
    for (double t : ls.good) shortest = std::min(shortest, t - p), p = t;
    if (shortest < opt_.collapse_rel * tM) ls.boundary = B::Collapse;
    if (ls.boundary == B::Violation) {
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& mr : bad_rep.margins)
        if (mr.min_margin < worst) {
          worst = mr.min_margin;
          ls.violated = mr.constraint;
          ls.violation_time = mr.time;
        }
    }
    return ls;
  }

  // Newton polish after a structural change: t_M pinned first, then free.
  std::optional<TimedTrajectory> settle(TimedTrajectory tr) const {
    const auto H = build_equality_system(sys_, tr, xf_, opt_.tol, false);
    auto nr = newton_project(H, tr.times, {tr.M() - 1}, opt_.newton);
    if (!nr.converged) nr = newton_project(H, tr.times, {}, opt_.newton);
    if (!nr.converged) {
      note("settle: Newton residual " + std::to_string(nr.residual) + " over " + std::to_string(H.num_rows()) + " rows, " +
           std::to_string(tr.M()) + " columns");
      return std::nullopt;
    }
    tr.times = nr.times;
    FeasibilityReport rep;
    if (!feasible(tr, &rep)) {
      note("settle: audit failed: " + rep.diagnosis);
      return std::nullopt;
    }
    return tr;
  }

  std::optional<TimedTrajectory> reextract(const std::vector<ArcSpec>& specs, const TimedTrajectory& like) const {
    try {
      auto tr = extract_asl(sys_, merge_specs(specs), like.x0, opt_.tol, like.t0);
      if (opt_.trace) {
        std::string msg = "re-extracted " + std::to_string(tr.law.num_arcs()) + " arcs;";
        for (const auto& m : tr.law.markers)
          for (const auto& t : m.touches) msg += " marker on arc " + std::to_string(m.arc + 1) + " " + describe_constraint(sys_, t.constraint) + " order " + std::to_string(t.order) + ";";
        for (const auto& e : tr.law.ends)
          for (const auto& t : e.touches)
            msg += " end at junction " + std::to_string(e.junction + 1) + " " + describe_constraint(sys_, t.constraint) + " orders " +
                   std::to_string(t.left_order) + "/" + std::to_string(t.right_order) + ";";
        note(msg);
      }
      auto settled = settle(tr);
      if (!settled) note("re-extracted trajectory did not settle");
      return settled;
    } catch (const Error& e) {
      note(std::string("re-extraction failed: ") + e.what());
      return std::nullopt;
    }
  }

  // Returns the restructured trajectory and the index of a freshly inserted arc (or -1).
  std::optional<std::pair<TimedTrajectory, int>> restructure(const TimedTrajectory& moved, const detail::LineSearch& ls,
                                                             std::string& action) const {
    using B = detail::LineSearch::Boundary;
    const double tM = std::max(1.0, std::abs(moved.t_final()));
    if (ls.boundary == B::Collapse && !ls.arc_vanishes) {
      const auto tr = reextract(arc_specs(moved), moved);
      if (!tr || detail::same_structure(*tr, moved)) return std::nullopt;
      action = "tangent marker reaches a junction";
      return std::make_pair(*tr, -1);
    }
    if (ls.boundary == B::Collapse) {
      auto specs = arc_specs(moved);
      const int i = ls.shortest_arc;
      specs[i].duration = 0.0;
      auto tr = reextract(specs, moved);
      if (!tr) return std::nullopt;
      action = "collapse arc " + std::to_string(i + 1);
      return std::make_pair(*tr, -1);
    }
    if (ls.boundary == B::Violation && ls.violated >= 0 && ls.violated < sys_.num_constraints()) {
      const int p = ls.violated;
      // junction nearest to the violation
      const auto ends = arc_end_columns(moved.law);
      int junction = -1;
      for (int a = 0; a + 1 < moved.law.num_arcs(); ++a)
        if (std::abs(moved.times[ends[a]] - ls.violation_time) <= opt_.junction_rel * tM) junction = a;
      if (junction >= 0) {
        if (auto ins = insert_hold(moved, junction, p)) {
          action = "insert constrained arc on " + describe_constraint(sys_, p) + " at junction " + std::to_string(junction + 1);
          return std::make_pair(*ins, junction + 1);
        }
      }
      const auto tr = reextract(arc_specs(moved), moved);
      if (!tr || detail::same_structure(*tr, moved)) return std::nullopt;
      action = (junction >= 0 ? "add end-constraint on " : "add tangent marker on ") + describe_constraint(sys_, p);
      return std::make_pair(*tr, -1);
    }
    if (ls.boundary == B::Violation) {
      const auto tr = reextract(arc_specs(moved), moved);
      if (!tr || detail::same_structure(*tr, moved)) return std::nullopt;
      action = "activate " + describe_constraint(sys_, ls.violated);
      return std::make_pair(*tr, -1);
    }
    if (ls.boundary == B::Stationary && ls.moved > 0.0) {
      action += " to a stationary point";
      return std::make_pair(moved, -1);
    }
    return std::nullopt;
  }

  std::optional<TimedTrajectory> insert_hold(const TimedTrajectory& moved, int junction, int p) const {
    SystemBehavior hold;
    try {
      hold = make_constrained(sys_, {p}, opt_.tol);
    } catch (const Error&) {
      return std::nullopt;
    }
    const auto states = keypoint_states(moved);
    const auto ends = arc_end_columns(moved.law);
    const Vec& x = states[ends[junction] + 1];
    const auto& left = moved.law.arcs[junction];
    const auto& right = moved.law.arcs[junction + 1];
    if (left.same_dynamics(hold) || right.same_dynamics(hold)) return std::nullopt;
    if (!connection_conditions(sys_, left, hold, x, opt_.tol).satisfied) return std::nullopt;
    if (!connection_conditions(sys_, hold, right, x, opt_.tol).satisfied) return std::nullopt;
    auto specs = arc_specs(moved);
    const double delta = std::min(opt_.hold_seed_rel * std::max(1.0, moved.t_final()), 0.5 * specs[junction + 1].duration);
    specs[junction + 1].duration -= delta;
    specs.insert(specs.begin() + junction + 1, ArcSpec{hold, delta});
    try {
      auto tr = extract_asl(sys_, specs, moved.x0, opt_.tol, moved.t0);
      return settle(tr);
    } catch (const Error&) {
      return std::nullopt;
    }
  }
};

inline OptimizeResult optimize(const LinearSystem& sys, const TimedTrajectory& seed, const Vec& xf, const OptimizerOptions& opt = {}) {
  return Optimizer(sys, xf, opt).run(seed);
}

}  // namespace aslopt
