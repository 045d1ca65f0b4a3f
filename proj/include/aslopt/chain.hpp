#pragma once

#include "asl.hpp"

#include <cctype>
#include <limits>

namespace aslopt {

// Chain of integrators: xdot_1 = u, xdot_k = x_{k-1}; |x_k| <= x_max[k], |u| <= u_max.
struct CoiProblem {
  int n = 0;
  double u_max = 1.0;
  Vec x_max;  // +inf for an absent bound
  Vec x0;
  Vec xf;
};

inline Mat chain_A(int n) {
  Mat A = Mat::Zero(n, n);
  for (int i = 1; i < n; ++i) A(i, i - 1) = 1.0;
  return A;
}

inline Vec chain_b(int n) {
  Vec b = Vec::Zero(n);
  b(0) = 1.0;
  return b;
}

// Constraint index of bound `sign * x_k <= x_max[k]` (k 1-based), or -1 if unbounded.
// Lower bounds take even indices, upper bounds odd ones.
inline int chain_constraint_index(const CoiProblem& prob, int k, int sign) {
  int idx = 0;
  for (int j = 1; j <= prob.n; ++j) {
    if (!std::isfinite(prob.x_max(j - 1))) continue;
    if (j == k) return idx + (sign > 0 ? 1 : 0);
    idx += 2;
  }
  return -1;
}

inline LinearSystem to_linear_system(const CoiProblem& prob) {
  LinearSystem sys;
  sys.A = chain_A(prob.n);
  sys.b = chain_b(prob.n);
  sys.u_max = prob.u_max;
  for (int k = 1; k <= prob.n; ++k) {
    const double m = prob.x_max(k - 1);
    if (!std::isfinite(m)) continue;
    Vec e = Vec::Zero(prob.n);
    e(k - 1) = 1.0;
    sys.constraints.push_back({-e, -m});
    sys.constraints.push_back({e, -m});
  }
  return sys;
}

inline void validate(const CoiProblem& prob) {
  if (prob.n <= 0) throw Error(ErrorKind::InvalidInput, "order must be positive");
  if (prob.x_max.size() != prob.n || prob.x0.size() != prob.n || prob.xf.size() != prob.n)
    throw Error(ErrorKind::InvalidInput, "x_max, x0, xf need n entries");
  if (!(prob.u_max > 0.0)) throw Error(ErrorKind::InvalidInput, "u_max must be positive");
  for (int k = 0; k < prob.n; ++k) {
    if (!(prob.x_max(k) > 0.0)) throw Error(ErrorKind::InvalidInput, "bounds must be positive");
    if (std::abs(prob.x0(k)) > prob.x_max(k) || std::abs(prob.xf(k)) > prob.x_max(k))
      throw Error(ErrorKind::InvalidInput, "boundary states outside the box");
  }
}

// ---------- shorthand notation ----------
// Arcs: o0 / u0 are u = +u_max / -u_max; oK / uK hold x_K at +x_max / -x_max.
// Markers attach to the preceding arc: u0(o3,2). End-constraints sit between arcs: {(o1,1)}.

struct CoiTouch {
  int sign = 1;
  int k = 0;
  int order = 0;
};

struct CoiArc {
  int sign = 1;
  int k = 0;
  std::vector<CoiTouch> markers;
};

struct CoiAsl {
  std::vector<CoiArc> arcs;
  std::vector<std::pair<int, std::vector<CoiTouch>>> ends;  // (junction after arc index, touches)
};

inline std::string coi_symbol(int sign, int k) { return std::string(sign > 0 ? "o" : "u") + std::to_string(k); }

inline std::string print_coi_asl(const CoiAsl& law) {
  std::string out;
  for (size_t i = 0; i < law.arcs.size(); ++i) {
    if (i) out += ' ';
    const auto& a = law.arcs[i];
    out += coi_symbol(a.sign, a.k);
    for (const auto& m : a.markers) out += "(" + coi_symbol(m.sign, m.k) + "," + std::to_string(m.order) + ")";
    for (const auto& [j, touches] : law.ends) {
      if (j != static_cast<int>(i)) continue;
      out += " {";
      for (size_t t = 0; t < touches.size(); ++t) {
        if (t) out += ",";
        out += "(" + coi_symbol(touches[t].sign, touches[t].k) + "," + std::to_string(touches[t].order) + ")";
      }
      out += "}";
    }
  }
  return out;
}

namespace detail {
struct Cursor {
  const std::string& s;
  size_t pos = 0;
  void skip() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::Parse, what + " at position " + std::to_string(pos));
  }
  bool eat(char c) {
    skip();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  int integer() {
    skip();
    size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (start == pos) fail("expected an integer");
    return std::stoi(s.substr(start, pos - start));
  }
  std::pair<int, int> symbol() {
    skip();
    if (pos >= s.size() || (s[pos] != 'o' && s[pos] != 'u')) fail("expected o or u");
    const int sign = s[pos] == 'o' ? 1 : -1;
    ++pos;
    if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos]))) fail("expected a state index");
    return {sign, integer()};
  }
  CoiTouch touch() {
    if (!eat('(')) fail("expected (");
    auto [sg, k] = symbol();
    if (!eat(',')) fail("expected ,");
    const int r = integer();
    if (!eat(')')) fail("expected )");
    return {sg, k, r};
  }
};
}  // namespace detail

inline CoiAsl parse_coi_text(const std::string& text) {
  CoiAsl law;
  detail::Cursor cur{text};
  cur.skip();
  while (cur.pos < text.size()) {
    if (cur.eat('{')) {
      if (law.arcs.empty()) cur.fail("end-constraint before the first arc");
      std::vector<CoiTouch> touches{cur.touch()};
      while (cur.eat(',')) touches.push_back(cur.touch());
      if (!cur.eat('}')) cur.fail("expected }");
      law.ends.push_back({static_cast<int>(law.arcs.size()) - 1, touches});
    } else {
      auto [sg, k] = cur.symbol();
      CoiArc arc{sg, k, {}};
      while (cur.pos < text.size() && text[cur.pos] == '(') arc.markers.push_back(cur.touch());
      law.arcs.push_back(arc);
    }
    cur.skip();
  }
  if (law.arcs.empty()) throw Error(ErrorKind::Parse, "empty switching law");
  return law;
}

struct Cor2Report {
  bool condition1 = true;
  bool condition2 = true;
  bool condition3 = true;
  bool screen_not_optimal = false;  // N - sum > n
};

struct CoiParseResult {
  CoiAsl law;
  int N = 0;
  int sigma = 0;  // sum of |S_i|
  int n = 0;
  int dof = 0;    // N - sigma - n
  Cor2Report cor2;
};

inline Cor2Report corollary2_conditions(const std::vector<int>& order, int n) {
  Cor2Report r;
  const int N = static_cast<int>(order.size());
  auto S = [&](int i) { return order[i - 1]; };  // 1-based
  auto sum = [&](int a, int b) {
    int s = 0;
    for (int k = a; k <= b; ++k) s += S(k);
    return s;
  };
  for (int i = 1; i <= N; ++i)
    for (int j = 1; j < i; ++j)
      if (S(j) >= S(i) && !(sum(j + 1, i) < i - j)) r.condition1 = false;
  for (int i = 1; i <= N; ++i)
    for (int j = i + 1; j <= N; ++j)
      if (S(j) >= S(i) && !(sum(i, j - 1) < j - i)) r.condition2 = false;
  for (int i = 1; i <= N; ++i) {
    if (S(i) == 0) continue;
    bool dominant = true;
    for (int j = i + 1; j <= N; ++j) dominant = dominant && S(j) < S(i);
    if (dominant && !(sum(i, N) <= N - i)) r.condition3 = false;
  }
  int total = 0;
  for (int v : order) total += v;
  r.screen_not_optimal = N - total > n;
  return r;
}

inline CoiParseResult parse_coi_asl(const std::string& text, int n) {
  CoiParseResult res;
  res.law = parse_coi_text(text);
  res.n = n;
  res.N = static_cast<int>(res.law.arcs.size());
  std::vector<int> order;
  for (const auto& a : res.law.arcs) {
    if (a.k < 0 || a.k > n) throw Error(ErrorKind::Parse, "state index " + std::to_string(a.k) + " outside 0.." + std::to_string(n));
    res.sigma += a.k;
    order.push_back(a.k);
  }
  res.dof = res.N - res.sigma - n;
  res.cor2 = corollary2_conditions(order, n);
  return res;
}

inline SystemBehavior coi_behavior(const CoiProblem& prob, const LinearSystem& sys, int sign, int k, const Tolerances& tol = {}) {
  if (k == 0) return make_unconstrained(sys, sign);
  const int idx = chain_constraint_index(prob, k, sign);
  if (idx < 0) throw Error(ErrorKind::InvalidInput, "x" + std::to_string(k) + " is unbounded; cannot hold it");
  return make_constrained(sys, {idx}, tol);
}

inline AugmentedSwitchingLaw to_law(const CoiProblem& prob, const LinearSystem& sys, const CoiAsl& coi, const Tolerances& tol = {}) {
  AugmentedSwitchingLaw law;
  for (size_t i = 0; i < coi.arcs.size(); ++i) {
    const auto& a = coi.arcs[i];
    law.arcs.push_back(coi_behavior(prob, sys, a.sign, a.k, tol));
    if (!a.markers.empty()) {
      TangentMarker m{static_cast<int>(i), {}};
      for (const auto& t : a.markers) {
        const int idx = chain_constraint_index(prob, t.k, t.sign);
        if (idx < 0) throw Error(ErrorKind::InvalidInput, "marker on an unbounded state");
        m.touches.push_back({idx, t.order});
      }
      law.markers.push_back(m);
    }
  }
  for (const auto& [j, touches] : coi.ends) {
    AdditionalEndConstraint e{j, {}};
    for (const auto& t : touches) {
      const int idx = chain_constraint_index(prob, t.k, t.sign);
      if (idx < 0) throw Error(ErrorKind::InvalidInput, "end-constraint on an unbounded state");
      e.touches.push_back({idx, t.order, t.order});
    }
    law.ends.push_back(e);
  }
  return law;
}

// Shorthand of a law built over a chain problem; falls back to "?" for non-chain behaviors.
inline CoiAsl to_coi(const CoiProblem& prob, const AugmentedSwitchingLaw& law) {
  auto decode = [&](int idx, int& sign, int& k) {
    int base = 0;
    for (int j = 1; j <= prob.n; ++j) {
      if (!std::isfinite(prob.x_max(j - 1))) continue;
      if (idx == base || idx == base + 1) {
        k = j;
        sign = idx == base + 1 ? 1 : -1;
        return true;
      }
      base += 2;
    }
    return false;
  };
  CoiAsl out;
  for (int i = 0; i < law.num_arcs(); ++i) {
    const auto& s = law.arcs[i];
    CoiArc a;
    if (!s.constrained()) {
      a.sign = s.sign;
      a.k = 0;
    } else {
      int sign = 1, k = 0;
      decode(s.active.front(), sign, k);
      a.sign = sign;
      a.k = k;
    }
    for (const auto& m : law.markers) {
      if (m.arc != i) continue;
      for (const auto& t : m.touches) {
        int sign = 1, k = 0;
        if (decode(t.constraint, sign, k)) a.markers.push_back({sign, k, t.order});
      }
    }
    out.arcs.push_back(a);
  }
  for (const auto& e : law.ends) {
    std::vector<CoiTouch> ts;
    for (const auto& t : e.touches) {
      int sign = 1, k = 0;
      if (decode(t.constraint, sign, k)) ts.push_back({sign, k, std::max(t.left_order, t.right_order)});
    }
    if (!ts.empty()) out.ends.push_back({e.junction, ts});
  }
  return out;
}

inline int coi_sigma(const CoiProblem& prob, const AugmentedSwitchingLaw& law) {
  int s = 0;
  for (const auto& a : to_coi(prob, law).arcs) s += a.k;
  return s;
}

// ---------- Corollary 1 ----------

struct Cor1Verdict {
  bool admissible = true;  // switches <= n - 1
  int bound = 0;
};

inline Cor1Verdict corollary1_bound(const CoiProblem& prob, int switches) {
  for (int k = 0; k < prob.n; ++k)
    if (std::isfinite(prob.x_max(k))) throw Error(ErrorKind::WrongRegime, "Corollary-1 screen needs all state bounds infinite");
  return {switches <= prob.n - 1, prob.n - 1};
}

// ---------- chattering analysis ----------

inline double f_m(double a, double b, double c, int m) {
  return std::pow(b + 3 * a, m) - 3 * std::pow(3 * b + a, m) + 3 * std::pow(c + 3 * b, m) - std::pow(3 * c + b, m);
}

// f(z; z1, z2) of the order-4 analysis.
inline double n4_quadratic(double z, double z1, double z2) {
  const double q = z1 * z1 + z1 * z2 - z2 * z2;
  return (z1 - z2) * z * z + q * z - z2 * q;
}

// Matrix whose determinant vanishes at the next tau given the window tau_{k-n+1} .. tau_{k-1}.
inline Mat chattering_matrix(int n, const std::vector<double>& window, double tau_k) {
  const int d = n - 2;
  std::vector<double> tau(window);
  tau.push_back(tau_k);
  const int last = static_cast<int>(tau.size()) - 1;  // position of tau_k
  Mat D(d, d);
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j)
      D(i - 1, j - 1) = f_m(tau[last - j - 1], tau[last - j], tau[last - j + 1], i + 1);
  return D;
}

inline double chattering_determinant(int n, const std::vector<double>& window, double tau_k) {
  return chattering_matrix(n, window, tau_k).determinant();
}

struct ChatterStep {
  enum class Status { Ok, Terminated, Degenerate };
  Status status = Status::Ok;
  double tau = 0.0;
  bool multiple_roots = false;
  std::string reason;
};

inline ChatterStep chattering_step(int n, const std::vector<double>& window, int grid = 256, double rel_tol = 1e-13) {
  if (n < 3) throw Error(ErrorKind::Domain, "chattering recursion needs n >= 3");
  if (static_cast<int>(window.size()) != n - 1) throw Error(ErrorKind::InvalidInput, "window needs n - 1 values");
  for (size_t i = 0; i < window.size(); ++i) {
    if (!(window[i] > 0.0)) throw Error(ErrorKind::InvalidInput, "window values must be positive");
    if (i && !(window[i] < window[i - 1])) throw Error(ErrorKind::InvalidInput, "window must decrease strictly");
  }
  const double last = window.back();
  const double z_prev = window[window.size() - 2] - last;
  ChatterStep st;
  auto finish = [&](double tau) {
    st.tau = tau;
    // accumulation at a finite limit needs shrinking gaps
    if (last - tau >= z_prev * (1.0 - 1e-12)) {
      st.status = ChatterStep::Status::Terminated;
      st.reason = "gaps between tangencies stop shrinking";
    }
    return st;
  };
  if (n == 4) {
    const double z1 = window[0] - window[1];
    const double z2 = window[1] - window[2];
    const double a = z1 - z2;
    const double q = z1 * z1 + z1 * z2 - z2 * z2;
    double z = std::numeric_limits<double>::quiet_NaN();
    if (a == 0.0) {
      z = z2;  // linear case: root sits on the boundary z = z2
    } else {
      const double disc = q * q + 4 * a * z2 * q;
      if (disc >= 0.0) {
        const double r1 = (-q + std::sqrt(disc)) / (2 * a), r2 = (-q - std::sqrt(disc)) / (2 * a);
        z = (r1 > 0.0 && r1 < z2) ? r1 : r2;
      }
    }
    if (!(z > 0.0 && z < z2)) {
      st.status = ChatterStep::Status::Terminated;
      st.reason = "no root of the order-4 quadratic strictly inside (0, z_prev)";
      return st;
    }
    if (!(last - z > 0.0)) {
      st.status = ChatterStep::Status::Terminated;
      st.reason = "tau reaches zero";
      return st;
    }
    return finish(last - z);
  }
  std::vector<double> xs(grid + 1), ds(grid + 1);
  bool degenerate = true;
  for (int i = 0; i <= grid; ++i) {
    xs[i] = last * i / grid;
    const Mat D = chattering_matrix(n, window, xs[i]);
    ds[i] = D.determinant();
    double hadamard = 1.0;
    for (int r = 0; r < D.rows(); ++r) hadamard *= D.row(r).norm();
    if (std::abs(ds[i]) > 1e-12 * hadamard) degenerate = false;
  }
  if (degenerate) {
    st.status = ChatterStep::Status::Degenerate;
    st.reason = "determinant vanishes identically on this window";
    return st;
  }
  auto det = [&](double t) { return chattering_determinant(n, window, t); };
  std::vector<double> roots;
  for (int i = 0; i < grid; ++i) {
    double a = xs[i], b = xs[i + 1], fa = ds[i], fb = ds[i + 1];
    if (i == 0 && fa == 0.0) continue;  // tau_k = 0 is not a strict root
    if (fb == 0.0) {
      if (i + 1 < grid) roots.push_back(b);
      continue;
    }
    if ((fa > 0.0) == (fb > 0.0)) continue;
    while (b - a > rel_tol * last) {
      const double m = 0.5 * (a + b), fm = det(m);
      if ((fm > 0.0) == (fa > 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    roots.push_back(0.5 * (a + b));
  }
  if (roots.empty()) {
    st.status = ChatterStep::Status::Terminated;
    st.reason = "no root in (0, tau_prev)";
    return st;
  }
  st.multiple_roots = roots.size() > 1;
  return finish(roots.front());
}

inline double n4_r_recursion(double r) {
  if (!(r > 0.0 && r < 1.0)) throw Error(ErrorKind::Domain, "r must lie in (0, 1)");
  const double B = 3.0 + 1.0 / (r * (1.0 - r));
  // smaller root of r^2 - B r + 1; the roots multiply to 1
  return 2.0 / (B + std::sqrt(B * B - 4.0));
}

struct SeriesRow {
  long k;
  double tau;
  double z;
  double r;
};

struct SeriesReport {
  int n = 0;
  long steps = 0;
  bool terminated = false;
  bool degenerate = false;
  std::string termination;
  bool monotone = true;
  double tail_statistic = std::numeric_limits<double>::quiet_NaN();  // i r_i / (1 - r_i)
  std::vector<std::pair<long, double>> partial_sums;                 // (N, sum of z_i, i <= N)
  std::vector<SeriesRow> rows;
};

// Window-driven iteration of the junction-time recursion.
inline SeriesReport chattering_series_analysis(int n, const std::vector<double>& seed_window, long iterations,
                                               long keep_rows = 1000) {
  SeriesReport rep;
  rep.n = n;
  std::vector<double> tau(seed_window);
  std::vector<double> z;
  for (size_t i = 1; i < tau.size(); ++i) z.push_back(tau[i - 1] - tau[i]);
  for (long it = 0; it < iterations; ++it) {
    const std::vector<double> window(tau.end() - (n - 1), tau.end());
    const auto st = chattering_step(n, window);
    if (st.status != ChatterStep::Status::Ok) {
      rep.terminated = true;
      rep.degenerate = st.status == ChatterStep::Status::Degenerate;
      rep.termination = st.reason;
      break;
    }
    const double zk = tau.back() - st.tau;
    if (!z.empty() && !(zk < z.back())) rep.monotone = false;
    const double rk = z.empty() ? std::numeric_limits<double>::quiet_NaN() : 1.0 - zk / z.back();
    tau.push_back(st.tau);
    z.push_back(zk);
    ++rep.steps;
    if (static_cast<long>(rep.rows.size()) < keep_rows) rep.rows.push_back({static_cast<long>(tau.size()) - 1, st.tau, zk, rk});
  }
  return rep;
}

// Iterates r_{i+1} = g-root(r_i) from r_1, with z_1 = 1 and z_{i+1} = z_i (1 - r_i).
inline SeriesReport n4_r_series(double r1, long iterations, const std::vector<long>& checkpoints = {}, long keep_rows = 1000) {
  SeriesReport rep;
  rep.n = 4;
  double r = r1, z = 1.0, S = 0.0;
  size_t next_cp = 0;
  std::vector<long> cps(checkpoints);
  std::sort(cps.begin(), cps.end());
  for (long i = 1; i <= iterations; ++i) {
    S += z;
    while (next_cp < cps.size() && cps[next_cp] == i) rep.partial_sums.push_back({i, S}), ++next_cp;
    if (static_cast<long>(rep.rows.size()) < keep_rows) rep.rows.push_back({i, std::numeric_limits<double>::quiet_NaN(), z, r});
    rep.tail_statistic = i * r / (1.0 - r);
    rep.steps = i;
    if (i == iterations) break;
    const double rn = n4_r_recursion(r);
    if (!(rn > 0.0 && rn < r)) rep.monotone = false;
    z *= (1.0 - r);
    r = rn;
  }
  return rep;
}

// ---------- trajectories ----------

struct CoiSegment {
  int sign;
  int k;
  double duration;
};

// Rest-to-rest move of x_k by delta with all lower states at rest at both ends.
inline std::vector<CoiSegment> scurve_move(int k, double delta, const Vec& x_max, double u_max) {
  std::vector<CoiSegment> out;
  if (delta == 0.0) return out;
  const int s = delta > 0 ? 1 : -1;
  if (k == 1) return {{s, 0, std::abs(delta) / u_max}};
  auto duration = [&](double p) {
    double T = 0.0;
    for (const auto& seg : scurve_move(k - 1, p, x_max, u_max)) T += seg.duration;
    return T;
  };
  const double pmax = x_max(k - 2);
  double p = pmax, cruise = 0.0;
  if (std::isfinite(pmax) && pmax * duration(pmax) < std::abs(delta)) {
    cruise = (std::abs(delta) - pmax * duration(pmax)) / pmax;
  } else {
    double lo = 0.0, hi = std::isfinite(pmax) ? pmax : 1.0;
    while (!std::isfinite(pmax) && hi * duration(hi) < std::abs(delta)) hi *= 2;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (mid * duration(mid) < std::abs(delta) ? lo : hi) = mid;
    }
    p = 0.5 * (lo + hi);
  }
  auto push = [&](const CoiSegment& seg) {
    if (seg.duration <= 0.0) return;
    if (!out.empty() && out.back().sign == seg.sign && out.back().k == seg.k)
      out.back().duration += seg.duration;
    else
      out.push_back(seg);
  };
  for (const auto& seg : scurve_move(k - 1, s * p, x_max, u_max)) push(seg);
  if (cruise > 0.0) push({s, k - 1, cruise});
  for (const auto& seg : scurve_move(k - 1, -s * p, x_max, u_max)) push(seg);
  return out;
}

inline std::vector<ArcSpec> to_arc_specs(const CoiProblem& prob, const LinearSystem& sys, const std::vector<CoiSegment>& segs,
                                         const Tolerances& tol = {}) {
  std::vector<ArcSpec> out;
  for (const auto& s : segs) out.push_back({coi_behavior(prob, sys, s.sign, s.k, tol), s.duration});
  return out;
}

// Chattering prefix tangent to x_2 = x_max2 at t_{3k} = t_inf - tau_k, switches per the
// quarter rule between consecutive tangencies. Starts on the boundary at t_inf - tau_0.
inline TimedTrajectory chattering_prefix(const CoiProblem& prob, const LinearSystem& sys, const std::vector<double>& tau,
                                         double t_inf, const Vec& x0) {
  if (tau.size() < 2) throw Error(ErrorKind::InvalidInput, "need at least two tangency times");
  const int upper2 = chain_constraint_index(prob, 2, 1);
  if (upper2 < 0) throw Error(ErrorKind::InvalidInput, "x2 must be bounded");
  TimedTrajectory tr;
  tr.x0 = x0;
  tr.t0 = t_inf - tau[0];
  const auto neg = make_unconstrained(sys, -1), pos = make_unconstrained(sys, 1);
  const int K = static_cast<int>(tau.size()) - 1;
  // arcs: (-)(+)(- marker -)(+)(- marker -) ... (+)(-)
  tr.law.arcs.push_back(neg);
  for (int k = 1; k <= K; ++k) {
    const double a = t_inf - tau[k - 1], c = t_inf - tau[k];
    const double t1 = (c + 3 * a) / 4, t2 = (3 * c + a) / 4;
    tr.times.push_back(t1);
    tr.law.arcs.push_back(pos);
    tr.times.push_back(t2);
    tr.law.arcs.push_back(neg);
    if (k < K) {
      tr.law.markers.push_back({static_cast<int>(tr.law.arcs.size()) - 1, {{upper2, 2}}});
      tr.times.push_back(c);
    }
  }
  tr.times.push_back(t_inf - tau[K]);
  return tr;
}

}  // namespace aslopt
