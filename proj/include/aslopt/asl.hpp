#pragma once

#include "arcs.hpp"

#include <functional>
#include <limits>
#include <map>

namespace aslopt {

// First nonzero ladder entry; order 0 when it is the value itself.
struct Touch {
  int constraint = -1;
  int order = 0;
};

struct TangentMarker {
  int arc = 0;
  std::vector<Touch> touches;
};

// Orders on each side of the junction; 0 means that side adds no ladder rows.
struct EndTouch {
  int constraint = -1;
  int left_order = 0;
  int right_order = 0;
};

struct AdditionalEndConstraint {
  int junction = 0;  // end of arc `junction`, start of arc `junction + 1`
  std::vector<EndTouch> touches;
};

struct AugmentedSwitchingLaw {
  std::vector<SystemBehavior> arcs;
  std::vector<TangentMarker> markers;  // grouped by arc, in time order
  std::vector<AdditionalEndConstraint> ends;

  int num_arcs() const { return static_cast<int>(arcs.size()); }
  int markers_on(int arc) const {
    int k = 0;
    for (const auto& m : markers) k += (m.arc == arc);
    return k;
  }
};

struct Keypoint {
  enum class Kind { ArcEnd, Marker };
  Kind kind = Kind::ArcEnd;
  int arc = 0;
  int marker = -1;  // index into law.markers
};

inline std::vector<Keypoint> keypoint_schedule(const AugmentedSwitchingLaw& law) {
  std::vector<Keypoint> out;
  for (int i = 0; i < law.num_arcs(); ++i) {
    for (int m = 0; m < static_cast<int>(law.markers.size()); ++m)
      if (law.markers[m].arc == i) out.push_back({Keypoint::Kind::Marker, i, m});
    out.push_back({Keypoint::Kind::ArcEnd, i, -1});
  }
  return out;
}

struct TimedTrajectory {
  AugmentedSwitchingLaw law;
  Vec x0;
  std::vector<double> times;  // t_1 < ... < t_M, t_0 below
  double t0 = 0.0;

  int M() const { return static_cast<int>(times.size()); }
  double t_final() const { return times.empty() ? t0 : times.back(); }
};

// Per-interval dynamics; interval m ends at keypoint m.
struct IntervalDynamics {
  std::vector<Mat> A;
  std::vector<Vec> b;
};

inline IntervalDynamics interval_dynamics(const AugmentedSwitchingLaw& law) {
  IntervalDynamics d;
  for (const auto& k : keypoint_schedule(law)) {
    d.A.push_back(law.arcs[k.arc].A_hat);
    d.b.push_back(law.arcs[k.arc].b_hat);
  }
  return d;
}

inline void check_schedule(const std::vector<double>& times, double t0, bool allow_equal = false) {
  double prev = t0;
  for (size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i])) throw Error(ErrorKind::InvalidInput, "non-finite keypoint time");
    if (times[i] < prev || (!allow_equal && times[i] == prev))
      throw Error(ErrorKind::InvalidInput, "keypoint times must increase (index " + std::to_string(i + 1) + ")");
    prev = times[i];
  }
}

// States x_0 .. x_M at t_0 .. t_M.
inline std::vector<Vec> keypoint_states(const IntervalDynamics& dyn, const Vec& x0, const std::vector<double>& times,
                                        double t0 = 0.0, bool allow_unordered = false) {
  std::vector<Vec> xs{x0};
  double prev = t0;
  for (size_t m = 0; m < times.size(); ++m) {
    const double dt = times[m] - prev;
    if (dt < 0.0 && !allow_unordered) throw Error(ErrorKind::InvalidInput, "negative interval at keypoint " + std::to_string(m + 1));
    const Flow f = flow(dyn.A[m], dyn.b[m], dt, true);
    xs.push_back(f.Phi * xs.back() + f.gamma);
    prev = times[m];
  }
  return xs;
}

inline std::vector<Vec> keypoint_states(const TimedTrajectory& tr) {
  return keypoint_states(interval_dynamics(tr.law), tr.x0, tr.times, tr.t0);
}

// ---------- local classification ----------

inline double ladder_scale(const Vec& c, const Mat& A, const Vec& b, const Vec& x, int r) {
  const double nA = std::max(1.0, operator_norm(A));
  return c.norm() * std::pow(nA, r) * std::max({1.0, x.norm(), b.norm()});
}

// First index r (1-based) with a nonzero ladder entry, or 0 if all vanish through n.
inline int first_nonzero(const Vec& ladder, const Vec& c, const Mat& A, const Vec& b, const Vec& x, double tol) {
  for (int r = 1; r <= ladder.size(); ++r)
    if (std::abs(ladder(r - 1)) > tol * ladder_scale(c, A, b, x, r)) return r;
  return 0;
}

inline double normalized_value(const Constraint& con, const Vec& x) {
  return (con.c.dot(x) + con.d) / (con.c.norm() * std::max(1.0, x.norm()));
}

struct TangentResult {
  enum class Kind { Tangent, Crossing, NotTouching, OnBoundary };
  Kind kind = Kind::NotTouching;
  int order = 0;
};

inline TangentResult tangent_condition(const LinearSystem& sys, const SystemBehavior& s, const Vec& x, int p,
                                       const Tolerances& tol = {}) {
  const int P = sys.num_constraints();
  if (p >= P && !s.constrained())
    throw Error(ErrorKind::InvalidInput, "control tangency needs a constrained arc");
  const auto con = constraint_row(sys, s, p);
  if (!con) throw Error(ErrorKind::InvalidInput, "constraint index out of range");
  const int n = sys.dim();
  if (std::abs(normalized_value(*con, x)) > tol.feas) return {TangentResult::Kind::NotTouching, 0};
  const Vec L = derivative_ladder(con->c, s.A_hat, s.b_hat, x, n);
  const int r = first_nonzero(L, con->c, s.A_hat, s.b_hat, x, tol.ladder);
  if (r == 0) return {TangentResult::Kind::OnBoundary, 0};
  if (r % 2 == 0 && L(r - 1) < 0.0) return {TangentResult::Kind::Tangent, r};
  return {TangentResult::Kind::Crossing, r};
}

struct EndStatus {
  enum class Kind { Strict, Touch, Saturated, Violated };
  int constraint = -1;
  Kind kind = Kind::Strict;
  int order = 0;
};

enum class Side { Left, Right };

// Constraints outside the active set, plus the control bounds on constrained arcs.
inline std::vector<int> inactive_indices(const LinearSystem& sys, const SystemBehavior& s) {
  std::vector<int> out;
  for (int p = 0; p < sys.num_constraints(); ++p)
    if (!std::binary_search(s.active.begin(), s.active.end(), p)) out.push_back(p);
  if (s.constrained()) {
    out.push_back(sys.num_constraints());
    out.push_back(sys.num_constraints() + 1);
  }
  return out;
}

// Right side: state leaves x at the start of s. Left side: state arrives at x at the end of s.
inline EndStatus end_status_one(const LinearSystem& sys, const SystemBehavior& s, const Vec& x, int p, Side side,
                                const Tolerances& tol) {
  const auto con = constraint_row(sys, s, p);
  EndStatus st;
  st.constraint = p;
  const double v = normalized_value(*con, x);
  if (v < -tol.feas) return st;
  if (v > tol.feas) {
    st.kind = EndStatus::Kind::Violated;
    return st;
  }
  const Vec L = derivative_ladder(con->c, s.A_hat, s.b_hat, x, sys.dim());
  const int r = first_nonzero(L, con->c, s.A_hat, s.b_hat, x, tol.ladder);
  if (r == 0) {
    st.kind = EndStatus::Kind::Saturated;
    return st;
  }
  const double signed_entry = side == Side::Right ? L(r - 1) : ((r % 2 == 0) ? L(r - 1) : -L(r - 1));
  st.kind = signed_entry < 0.0 ? EndStatus::Kind::Touch : EndStatus::Kind::Violated;
  st.order = r;
  return st;
}

inline std::vector<EndStatus> end_feasibility(const LinearSystem& sys, const SystemBehavior& s, const Vec& x_end,
                                              Side side, const Tolerances& tol = {}) {
  std::vector<EndStatus> out;
  for (int p : inactive_indices(sys, s)) out.push_back(end_status_one(sys, s, x_end, p, side, tol));
  return out;
}

struct JunctionVerdict {
  bool satisfied = true;
  std::string reason;
  double forced_control = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<int, int>> orders;  // (constraint, r_hat)
};

inline int sgn(double v) { return (v > 0) - (v < 0); }

inline JunctionVerdict connection_conditions(const LinearSystem& sys, const SystemBehavior& s1, const SystemBehavior& s2,
                                             const Vec& x, const Tolerances& tol = {}) {
  if (s1.same_dynamics(s2)) throw Error(ErrorKind::InvalidJunction, "adjacent arcs have identical dynamics");
  JunctionVerdict v;
  const int n = sys.dim();
  auto fail = [&](const std::string& why) {
    v.satisfied = false;
    if (v.reason.empty()) v.reason = why;
  };
  // Ladder of c^T x along (A, b) from x with parity weighting for the left side.
  auto ladder_ok = [&](int p, const Mat& A, const Vec& b, bool left, int min_order) {
    const Vec& c = sys.constraints[p].c;
    const Vec L = derivative_ladder(c, A, b, x, n);
    const int r = first_nonzero(L, c, A, b, x, tol.ladder);
    if (r == 0) {
      fail(constraint_label(p) + " stays on its boundary across the junction");
      return;
    }
    const double e = left ? ((r % 2 == 0) ? L(r - 1) : -L(r - 1)) : L(r - 1);
    if (r < min_order || e >= 0.0) fail(constraint_label(p) + " leaves the feasible side at the junction");
    v.orders.push_back({p, r});
  };

  if (!s1.constrained() && !s2.constrained()) {
    if (s1.sign != -s2.sign) fail("unconstrained arcs must flip the control sign");
    return v;
  }
  if (s1.constrained() && s2.constrained()) {
    for (int p : s1.active)
      if (std::binary_search(s2.active.begin(), s2.active.end(), p))
        fail("adjacent constrained arcs share " + constraint_label(p));
    for (size_t i = 0; i < s1.active.size(); ++i) ladder_ok(s1.active[i], s2.A_hat, s2.b_hat, false, s1.orders[i].order);
    for (size_t i = 0; i < s2.active.size(); ++i) ladder_ok(s2.active[i], s1.A_hat, s1.b_hat, true, s2.orders[i].order);
    return v;
  }
  const bool exit = s1.constrained();
  const SystemBehavior& con = exit ? s1 : s2;
  const SystemBehavior& unc = exit ? s2 : s1;
  int forced = 0;
  for (size_t i = 0; i < con.active.size(); ++i) {
    const auto& o = con.orders[i];
    const int u = exit ? -sgn(o.pivot) : ((o.order % 2 == 1) ? 1 : -1) * sgn(o.pivot);
    if (forced == 0) forced = u;
    if (u != forced) fail("active constraints force opposite controls");
  }
  v.forced_control = forced * sys.u_max;
  int applied = forced;
  if (unc.sign != forced) {
    // control already saturated at the junction: u stays continuous across it
    const double u_con = con.control(x);
    if (std::abs(u_con - unc.sign * sys.u_max) <= tol.feas * std::max(1.0, sys.u_max))
      applied = unc.sign;
    else
      fail(std::string(exit ? "exit" : "entry") + " control must be " + (forced > 0 ? "+u_max" : "-u_max"));
  }
  for (size_t i = 0; i < con.active.size(); ++i)
    ladder_ok(con.active[i], sys.A, applied * sys.u_max * sys.b, !exit, con.orders[i].order);
  return v;
}

// ---------- dense evaluation ----------

struct Sample {
  double t;
  Vec x;
  double u;
  int interval;
};

// Uniform samples on each interval, endpoints included.
inline std::vector<Sample> sample_trajectory(const TimedTrajectory& tr, int per_interval) {
  const auto kps = keypoint_schedule(tr.law);
  const auto dyn = interval_dynamics(tr.law);
  std::vector<Sample> out;
  Vec x = tr.x0;
  double prev = tr.t0;
  for (int m = 0; m < tr.M(); ++m) {
    const auto& arc = tr.law.arcs[kps[m].arc];
    const double dt = tr.times[m] - prev;
    const int K = std::max(1, per_interval);
    const Flow step = flow(dyn.A[m], dyn.b[m], dt / K);
    Vec y = x;
    for (int k = 0; k <= K; ++k) {
      if (k > 0) y = step.Phi * y + step.gamma;
      if (k == 0 && m > 0) continue;
      out.push_back({prev + dt * k / K, y, arc.control(y), m});
    }
    x = propagate(dyn.A[m], dyn.b[m], x, dt);
    prev = tr.times[m];
  }
  return out;
}

inline Vec state_at(const TimedTrajectory& tr, double t) {
  const auto dyn = interval_dynamics(tr.law);
  Vec x = tr.x0;
  double prev = tr.t0;
  for (int m = 0; m < tr.M(); ++m) {
    if (t <= tr.times[m]) return propagate(dyn.A[m], dyn.b[m], x, std::max(0.0, t - prev));
    x = propagate(dyn.A[m], dyn.b[m], x, tr.times[m] - prev);
    prev = tr.times[m];
  }
  return x;
}

// Maximizes g(s) = c^T x(s) + d over s in [lo, hi] starting at x_lo, by bisection
// on the sign of the first derivative; the bracket must contain a sign change.
inline double refine_max(const Mat& A, const Vec& b, const Vec& x_lo, const Vec& c, double lo, double hi, double width) {
  auto slope = [&](double s) {
    const Vec xs = propagate(A, b, x_lo, s - lo);
    return c.dot(A * xs + b);
  };
  double a = lo, z = hi;
  double fa = slope(a);
  for (int it = 0; it < 200 && z - a > width; ++it) {
    const double mid = 0.5 * (a + z);
    const double fm = slope(mid);
    if ((fm > 0.0) == (fa > 0.0)) {
      a = mid;
      fa = fm;
    } else {
      z = mid;
    }
  }
  return 0.5 * (a + z);
}

struct LocalPeak {
  double t;
  Vec x;
  double value;  // normalized
};

// Interior local maxima of a constraint function along one interval.
inline std::vector<LocalPeak> interval_peaks(const Mat& A, const Vec& b, const Vec& x_start, double t_start, double dt,
                                             const Constraint& con, int samples, double refine_above, double width) {
  std::vector<LocalPeak> out;
  if (dt <= 0.0) return out;
  const int K = std::max(8, samples);
  const Flow step = flow(A, b, dt / K);
  std::vector<Vec> xs{x_start};
  for (int k = 1; k <= K; ++k) xs.push_back(step.Phi * xs.back() + step.gamma);
  std::vector<double> g(K + 1);
  for (int k = 0; k <= K; ++k) g[k] = con.c.dot(xs[k]) + con.d;
  auto slope = [&](int k) { return con.c.dot(A * xs[k] + b); };
  for (int k = 0; k < K; ++k) {
    // derivative sign change + -> - inside (k, k+1) marks an interior maximum
    const double s0 = slope(k), s1 = slope(k + 1);
    if (!(s0 > 0.0 && s1 <= 0.0)) continue;
    if (k + 1 == K && s1 == 0.0) continue;
    const double approx = std::max(g[k], g[k + 1]) / (con.c.norm() * std::max(1.0, xs[k].norm()));
    if (approx < refine_above) continue;
    const double lo = t_start + dt * k / K, hi = t_start + dt * (k + 1) / K;
    const double ts = refine_max(A, b, xs[k], con.c, lo, hi, width);
    const Vec x = propagate(A, b, xs[k], ts - lo);
    out.push_back({ts, x, normalized_value(con, x)});
  }
  return out;
}

// True when c^T x + d stays within the feasibility band from x over the next span.
inline bool stays_in_band(const Mat& A, const Vec& b, const Vec& x, double span, const Constraint& con, double feas,
                          int samples = 64) {
  if (span <= 0.0) return true;
  const Flow step = flow(A, b, span / samples);
  Vec y = x;
  for (int k = 1; k <= samples; ++k) {
    y = step.Phi * y + step.gamma;
    if (normalized_value(con, y) < -feas) return false;
  }
  return true;
}

// ---------- extraction ----------

struct ArcSpec {
  SystemBehavior behavior;
  double duration = 0.0;
};

inline TimedTrajectory extract_asl(const LinearSystem& sys, const std::vector<ArcSpec>& spec, const Vec& x0,
                                   const Tolerances& tol = {}, double t0 = 0.0) {
  if (spec.empty()) throw Error(ErrorKind::InvalidInput, "empty arc list");
  const int N = static_cast<int>(spec.size());
  TimedTrajectory tr;
  tr.x0 = x0;
  tr.t0 = t0;
  std::vector<Vec> starts{x0};
  std::vector<double> ends;
  double t = t0;
  for (int i = 0; i < N; ++i) {
    if (!(spec[i].duration > 0.0)) throw Error(ErrorKind::InvalidInput, "arc " + std::to_string(i + 1) + " has non-positive duration");
    tr.law.arcs.push_back(spec[i].behavior);
    starts.push_back(propagate(spec[i].behavior.A_hat, spec[i].behavior.b_hat, starts.back(), spec[i].duration));
    t += spec[i].duration;
    ends.push_back(t);
  }
  for (int i = 0; i + 1 < N; ++i) {
    const auto v = connection_conditions(sys, spec[i].behavior, spec[i + 1].behavior, starts[i + 1], tol);
    if (!v.satisfied)
      throw Error(ErrorKind::Infeasible, "junction " + std::to_string(i + 1) + " at t = " + std::to_string(ends[i]) + ": " + v.reason);
  }
  for (int i = 0; i < N; ++i)
    if (spec[i].behavior.constrained())
      for (const auto& row : spec[i].behavior.rows)
        if (std::abs(row.f.dot(starts[i]) + row.g) > 1e3 * tol.eq * std::max(1.0, starts[i].norm()))
          throw Error(ErrorKind::Infeasible, "arc " + std::to_string(i + 1) + " does not start on its constraint manifold (" + row.tag + ")");

  // interior touches -> markers
  std::vector<std::vector<std::pair<double, TangentMarker>>> per_arc(N);
  for (int i = 0; i < N; ++i) {
    const auto& s = spec[i].behavior;
    const double tstart = i == 0 ? t0 : ends[i - 1];
    const double dt = spec[i].duration;
    const double edge = std::max(1e-9 * dt, 10 * tol.touch_time);
    for (int p : inactive_indices(sys, s)) {
      const auto con = constraint_row(sys, s, p);
      // endpoint values
      for (const Vec& xe : {starts[i], starts[i + 1]}) {
        if (normalized_value(*con, xe) > tol.feas)
          throw Error(ErrorKind::Infeasible, describe_constraint(sys, p) + " violated at a junction of arc " + std::to_string(i + 1));
      }
      for (const auto& pk : interval_peaks(s.A_hat, s.b_hat, starts[i], tstart, dt, *con, tol.touch_samples, -1e-3, tol.touch_time)) {
        if (pk.t - tstart < edge || tstart + dt - pk.t < edge) continue;
        if (pk.value > tol.feas)
          throw Error(ErrorKind::Infeasible, describe_constraint(sys, p) + " violated at t = " + std::to_string(pk.t));
        if (pk.value < -tol.feas) continue;
        // contact that runs into an arc end belongs to that end
        if (stays_in_band(s.A_hat, s.b_hat, pk.x, tstart + dt - pk.t, *con, tol.feas) ||
            stays_in_band(s.A_hat, s.b_hat, starts[i], pk.t - tstart, *con, tol.feas))
          continue;
        const auto tc = tangent_condition(sys, s, pk.x, p, tol);
        if (tc.kind == TangentResult::Kind::Crossing)
          throw Error(ErrorKind::Infeasible, describe_constraint(sys, p) + " crossed at t = " + std::to_string(pk.t));
        if (tc.kind == TangentResult::Kind::OnBoundary)
          throw Error(ErrorKind::InvalidInput, "arc " + std::to_string(i + 1) + " rides the boundary of " + describe_constraint(sys, p) + "; classify it as constrained");
        if (tc.kind != TangentResult::Kind::Tangent) continue;
        // merge touches at the same instant
        bool merged = false;
        for (auto& [tm, mk] : per_arc[i])
          if (std::abs(tm - pk.t) <= 1e3 * tol.touch_time * std::max(1.0, std::abs(tm))) {
            mk.touches.push_back({p, tc.order});
            merged = true;
          }
        if (!merged) per_arc[i].push_back({pk.t, TangentMarker{i, {{p, tc.order}}}});
      }
    }
  }

  // junction touches -> additional end-constraints
  for (int j = 0; j + 1 < N; ++j) {
    const auto& s1 = spec[j].behavior;
    const auto& s2 = spec[j + 1].behavior;
    const Vec& x = starts[j + 1];
    std::set<int> cand;
    for (int p : inactive_indices(sys, s1)) cand.insert(p);
    for (int p : inactive_indices(sys, s2)) cand.insert(p);
    AdditionalEndConstraint ec{j, {}};
    for (int p : cand) {
      const bool in1 = std::binary_search(s1.active.begin(), s1.active.end(), p);
      const bool in2 = std::binary_search(s2.active.begin(), s2.active.end(), p);
      if (in1 || in2) continue;
      EndTouch et{p, 0, 0};
      bool touching = false;
      for (int side = 0; side < 2; ++side) {
        const auto& s = side == 0 ? s1 : s2;
        if (!constraint_row(sys, s, p)) continue;
        const auto st = end_status_one(sys, s, x, p, side == 0 ? Side::Left : Side::Right, tol);
        if (st.kind == EndStatus::Kind::Violated)
          throw Error(ErrorKind::Infeasible, describe_constraint(sys, p) + " violated next to junction " + std::to_string(j + 1));
        if (st.kind == EndStatus::Kind::Touch) {
          touching = true;
          (side == 0 ? et.left_order : et.right_order) = st.order;
        }
        if (st.kind == EndStatus::Kind::Saturated) touching = true;
      }
      if (touching) ec.touches.push_back(et);
    }
    if (!ec.touches.empty()) tr.law.ends.push_back(ec);
  }

  // assemble the schedule
  for (int i = 0; i < N; ++i) {
    auto& v = per_arc[i];
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [tm, mk] : v) {
      tr.law.markers.push_back(mk);
      tr.times.push_back(tm);
    }
    tr.times.push_back(ends[i]);
  }
  return tr;
}

// ---------- equality system ----------

struct EqualityRow {
  int keypoint = 0;  // 0-based column index of the keypoint the row is evaluated at
  Vec f;
  double g = 0.0;
  std::string tag;
};

struct EqualitySystem {
  std::vector<EqualityRow> rows;
  IntervalDynamics dynamics;
  Vec x0;
  double t0 = 0.0;
  int M = 0;

  int num_rows() const { return static_cast<int>(rows.size()); }
};

inline std::vector<AffineRow> ladder_rows(const Constraint& con, const Mat& A, const Vec& b, int count,
                                          const std::string& tag) {
  std::vector<AffineRow> out;
  Eigen::RowVectorXd row = con.c.transpose();  // c^T A^{r-1}
  for (int r = 1; r <= count; ++r) {
    const double off = row.dot(b);
    row = row * A;
    out.push_back({row.transpose(), off, tag + " derivative " + std::to_string(r)});
  }
  return out;
}

inline EqualitySystem build_equality_system(const LinearSystem& sys, const TimedTrajectory& tr, const Vec& xf,
                                            const Tolerances& tol = {}, bool check_stale = true) {
  const int n = sys.dim();
  const auto kps = keypoint_schedule(tr.law);
  if (static_cast<int>(kps.size()) != tr.M())
    throw Error(ErrorKind::InvalidInput, "keypoint count does not match the time vector");
  EqualitySystem H;
  H.dynamics = interval_dynamics(tr.law);
  H.x0 = tr.x0;
  H.t0 = tr.t0;
  H.M = tr.M();
  const int N = tr.law.num_arcs();

  std::map<int, const AdditionalEndConstraint*> ends;
  for (const auto& e : tr.law.ends) ends[e.junction] = &e;

  if (N > 0 && tr.law.arcs[0].constrained())
    for (const auto& row : tr.law.arcs[0].rows)
      if (std::abs(row.f.dot(tr.x0) + row.g) > 1e3 * tol.eq * std::max(1.0, tr.x0.norm()))
        throw Error(ErrorKind::StaleTrajectory, "initial state is off the first arc's manifold (" + row.tag + ")");

  for (int m = 0; m < tr.M(); ++m) {
    const auto& kp = kps[m];
    const auto& arc = tr.law.arcs[kp.arc];
    const std::string arc_name = "arc " + std::to_string(kp.arc + 1);
    std::vector<AffineRow> cand;
    std::vector<Vec> implied;
    if (kp.kind == Keypoint::Kind::Marker) {
      const auto& mk = tr.law.markers[kp.marker];
      for (const auto& tch : mk.touches) {
        const auto con = constraint_row(sys, arc, tch.constraint);
        const std::string tag = "marker on " + arc_name + ": " + describe_constraint(sys, tch.constraint);
        cand.push_back({con->c, con->d, tag + " value"});
        for (auto& r : ladder_rows(*con, arc.A_hat, arc.b_hat, tch.order - 1, tag)) cand.push_back(r);
      }
    } else {
      const bool last = kp.arc == N - 1;
      if (last) {
        for (int k = 0; k < n; ++k) {
          Vec e = Vec::Zero(n);
          e(k) = 1.0;
          cand.push_back({e, -xf(k), "terminal x" + std::to_string(k + 1)});
        }
        if (arc.constrained())
          for (const auto& row : arc.rows)
            if (std::abs(row.f.dot(xf) + row.g) > 1e3 * tol.eq * std::max(1.0, xf.norm()))
              throw Error(ErrorKind::Infeasible, "terminal state is off the last arc's manifold (" + row.tag + ")");
      } else if (arc.constrained()) {
        if (kp.arc == 0) {
          for (const auto& row : arc.rows) implied.push_back(row.f);
        } else {
          for (const auto& row : arc.rows) cand.push_back({row.f, row.g, arc_name + " " + row.tag});
        }
      }
      if (!last && tr.law.arcs[kp.arc + 1].constrained())
        for (const auto& row : tr.law.arcs[kp.arc + 1].rows) implied.push_back(row.f);
      if (!last && ends.count(kp.arc)) {
        const auto& ec = *ends.at(kp.arc);
        const auto& right = tr.law.arcs[kp.arc + 1];
        for (const auto& et : ec.touches) {
          const std::string tag = "end-constraint at junction " + std::to_string(kp.arc + 1) + ": " + describe_constraint(sys, et.constraint);
          auto lc = constraint_row(sys, arc, et.constraint);
          auto rc = constraint_row(sys, right, et.constraint);
          const Constraint con = lc ? *lc : *rc;
          cand.push_back({con.c, con.d, tag + " value"});
          if (lc && et.left_order > 1)
            for (auto& r : ladder_rows(*lc, arc.A_hat, arc.b_hat, et.left_order - 1, tag + " left")) cand.push_back(r);
          if (rc && et.right_order > 1)
            for (auto& r : ladder_rows(*rc, right.A_hat, right.b_hat, et.right_order - 1, tag + " right")) cand.push_back(r);
        }
      }
    }
    for (auto& r : reduce_rows(cand, tol.row_reduce, implied)) H.rows.push_back({m, r.f, r.g, r.tag});
  }

  if (check_stale) {
    const auto xs = keypoint_states(H.dynamics, tr.x0, tr.times, tr.t0);
    for (const auto& row : H.rows) {
      const Vec& x = xs[row.keypoint + 1];
      const double r = row.f.dot(x) + row.g;
      if (std::abs(r) > 1e3 * tol.eq * std::max(1.0, x.norm()))
        throw Error(ErrorKind::StaleTrajectory, row.tag + " has residual " + std::to_string(r));
    }
  }
  return H;
}

inline Vec evaluate(const EqualitySystem& H, const std::vector<double>& times, bool allow_unordered = false) {
  const auto xs = keypoint_states(H.dynamics, H.x0, times, H.t0, allow_unordered);
  Vec r(H.num_rows());
  for (int i = 0; i < H.num_rows(); ++i) r(i) = H.rows[i].f.dot(xs[H.rows[i].keypoint + 1]) + H.rows[i].g;
  return r;
}

// ---------- feasibility audit ----------

struct MarginRecord {
  int constraint = -1;
  double min_margin = std::numeric_limits<double>::infinity();
  double time = 0.0;
};

struct FeasibilityReport {
  bool feasible = true;
  std::vector<MarginRecord> margins;  // state constraints, then u <= u_max, -u <= u_max
  double max_residual = 0.0;
  std::string residual_tag;
  double min_duration = std::numeric_limits<double>::infinity();
  std::string diagnosis;
};

// Normalized margins are -(c^T x + d) / (|c| max(1, |x|)); positive means strictly inside.
inline FeasibilityReport check_feasible(const LinearSystem& sys, const TimedTrajectory& tr, const EqualitySystem* H = nullptr,
                                        const Tolerances& tol = {}) {
  FeasibilityReport rep;
  const int P = sys.num_constraints();
  rep.margins.resize(P + 2);
  for (int p = 0; p < P + 2; ++p) rep.margins[p].constraint = p;
  const auto kps = keypoint_schedule(tr.law);
  if (static_cast<int>(kps.size()) != tr.M()) throw Error(ErrorKind::InvalidInput, "keypoint count mismatch");
  const auto dyn = interval_dynamics(tr.law);
  double prev = tr.t0;
  for (double t : tr.times) {
    rep.min_duration = std::min(rep.min_duration, t - prev);
    prev = t;
  }
  if (rep.min_duration < 0.0) {
    rep.feasible = false;
    rep.diagnosis = "keypoint times decrease";
    return rep;
  }
  const auto xs = keypoint_states(dyn, tr.x0, tr.times, tr.t0);
  prev = tr.t0;
  for (int m = 0; m < tr.M(); ++m) {
    const auto& arc = tr.law.arcs[kps[m].arc];
    const double dt = tr.times[m] - prev;
    // arc length in keypoint units sets the sample budget
    const int samples = std::max(16, tol.touch_samples / std::max(1, tr.law.markers_on(kps[m].arc) + 1));
    for (int p = 0; p < P + 2; ++p) {
      if (p < P && std::binary_search(arc.active.begin(), arc.active.end(), p)) continue;
      const auto con = constraint_row(sys, arc, p);
      if (!con) continue;
      auto record = [&](double t, double margin) {
        if (margin < rep.margins[p].min_margin) rep.margins[p] = {p, margin, t};
      };
      record(prev, -normalized_value(*con, xs[m]));
      record(tr.times[m], -normalized_value(*con, xs[m + 1]));
      if (dt <= 0.0) continue;
      const Flow step = flow(dyn.A[m], dyn.b[m], dt / samples);
      Vec y = xs[m];
      for (int k = 1; k < samples; ++k) {
        y = step.Phi * y + step.gamma;
        record(prev + dt * k / samples, -normalized_value(*con, y));
      }
      for (const auto& pk : interval_peaks(dyn.A[m], dyn.b[m], xs[m], prev, dt, *con, samples, -1e-4, tol.touch_time))
        record(pk.t, -pk.value);
    }
    prev = tr.times[m];
  }
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& mr : rep.margins) {
    if (mr.min_margin < -tol.feas) rep.feasible = false;
    if (mr.min_margin < worst) {
      worst = mr.min_margin;
      if (mr.min_margin < -tol.feas)
        rep.diagnosis = describe_constraint(sys, mr.constraint) + " violated by " + std::to_string(-mr.min_margin) + " at t = " + std::to_string(mr.time);
    }
  }
  if (H) {
    for (const auto& row : H->rows) {
      const Vec& x = xs[row.keypoint + 1];
      const double r = std::abs(row.f.dot(x) + row.g) / (row.f.norm() * std::max(1.0, x.norm()));
      if (r > rep.max_residual) {
        rep.max_residual = r;
        rep.residual_tag = row.tag;
      }
    }
    if (rep.max_residual > tol.eq) {
      if (rep.feasible) rep.diagnosis = "keypoint equality broken: " + rep.residual_tag;
      rep.feasible = false;
    }
  }
  return rep;
}

}  // namespace aslopt
