#pragma once

#include "optimizer.hpp"

#include <cstdlib>
#include <thread>

namespace aslopt {

// ---------- finite differences ----------

// Central differences of the keypoint states with respect to each keypoint time.
inline KeypointJacobian finite_difference_jacobian(const IntervalDynamics& dyn, const Vec& x0, const std::vector<double>& times,
                                                   double h, double t0 = 0.0) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidInput, "step must be positive");
  const int M = static_cast<int>(times.size());
  const int n = static_cast<int>(x0.size());
  KeypointJacobian D(M, std::vector<Vec>(M, Vec::Zero(n)));
  for (int j = 0; j < M; ++j) {
    auto tp = times, tm = times;
    tp[j] += h;
    tm[j] -= h;
    const auto xp = keypoint_states(dyn, x0, tp, t0, true);
    const auto xm = keypoint_states(dyn, x0, tm, t0, true);
    for (int i = 0; i < M; ++i) D[i][j] = (xp[i + 1] - xm[i + 1]) / (2.0 * h);
  }
  return D;
}

// ---------- brute-force search ----------

struct OracleOptions {
  int max_arcs = 3;
  int density = 4;  // lattice steps per half-width in the first round
  int rounds = 3;   // each round narrows the duration ratio by 4x around the incumbent
  bool allow_holds = false;  // also enumerate constrained arcs on bounded constraints
  double time_scale = 0.0;   // 0: estimated from the boundary pair
  double terminal_tol = 1e-9;
  int threads = 0;  // 0: ASLOPT_THREADS or 1
  Tolerances tol;
};

struct OracleResult {
  bool found = false;
  double t_final = std::numeric_limits<double>::infinity();
  std::vector<double> switch_times;  // arc end times
  int switches = 0;
  std::vector<ArcSpec> arcs;
  TimedTrajectory trajectory;
  double grid_ratio = 0.0;  // duration lattice ratio of the final round
  int candidates = 0;
  FeasibilityReport audit;
  std::string message;
};

inline int oracle_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ASLOPT_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

namespace detail {

// Behavior sequences with adjacent entries distinct, up to max_arcs long.
inline std::vector<std::vector<SystemBehavior>> oracle_patterns(const LinearSystem& sys, const Vec& x0, const OracleOptions& opt) {
  std::vector<SystemBehavior> alphabet{make_unconstrained(sys, 1), make_unconstrained(sys, -1)};
  if (opt.allow_holds)
    for (int p = 0; p < sys.num_constraints(); ++p) {
      try {
        alphabet.push_back(make_constrained(sys, {p}, opt.tol));
      } catch (const Error&) {
      }
    }
  std::vector<std::vector<SystemBehavior>> out;
  std::vector<int> idx;
  std::function<void()> rec = [&]() {
    if (!idx.empty()) {
      std::vector<SystemBehavior> seq;
      for (int i : idx) seq.push_back(alphabet[i]);
      out.push_back(seq);
    }
    if (static_cast<int>(idx.size()) == opt.max_arcs) return;
    for (int a = 0; a < static_cast<int>(alphabet.size()); ++a) {
      if (!idx.empty()) {
        if (idx.back() == a) continue;
        // holds are separated by bang arcs
        if (alphabet[idx.back()].constrained() && alphabet[a].constrained()) continue;
      }
      if (idx.empty() && alphabet[a].constrained()) {
        bool on = true;
        for (const auto& row : alphabet[a].rows) on = on && std::abs(row.f.dot(x0) + row.g) <= 1e-9 * std::max(1.0, x0.norm());
        if (!on) continue;
      }
      idx.push_back(a);
      rec();
      idx.pop_back();
    }
  };
  rec();
  return out;
}

inline double time_scale_estimate(const LinearSystem& sys, const Vec& x0, const Vec& xf) {
  // crude reach time of a chain: |dx_k| k! / u_max = T^k
  double T = 0.0, fact = 1.0;
  for (int k = 1; k <= sys.dim(); ++k) {
    fact *= k;
    T = std::max(T, std::pow(std::abs(xf(k - 1) - x0(k - 1)) * fact / sys.u_max, 1.0 / k));
  }
  return T > 0.0 ? T : 1.0;
}

}  // namespace detail

inline OracleResult grid_bbs_oracle(const LinearSystem& sys, const Vec& x0, const Vec& xf, const OracleOptions& opt = {}) {
  validate(sys);
  const auto patterns = detail::oracle_patterns(sys, x0, opt);
  const double scale = opt.time_scale > 0.0 ? opt.time_scale : detail::time_scale_estimate(sys, x0, xf);
  OracleResult best;
  best.message = "no feasible candidate at this resolution";

  struct Candidate {
    double tf = std::numeric_limits<double>::infinity();
    int arcs = 0;
    std::vector<double> durations;
    int pattern = -1;
  };
  auto better = [](const Candidate& a, const Candidate& b) {
    const double tie = 1e-9 * std::max(1.0, std::abs(b.tf));
    if (a.tf < b.tf - tie) return true;
    if (a.tf > b.tf + tie) return false;
    if (a.arcs != b.arcs) return a.arcs < b.arcs;
    return a.durations < b.durations;
  };

  // Newton from one lattice seed; returns a feasible candidate or nothing.
  auto solve_seed = [&](int pi, const std::vector<double>& durs) -> std::optional<Candidate> {
    const auto& pat = patterns[pi];
    TimedTrajectory tr;
    tr.x0 = x0;
    double t = 0.0;
    for (size_t i = 0; i < pat.size(); ++i) {
      tr.law.arcs.push_back(pat[i]);
      t += durs[i];
      tr.times.push_back(t);
    }
    try {
      const auto H = build_equality_system(sys, tr, xf, opt.tol, false);
      const auto nr = newton_project(H, tr.times);
      if (!nr.converged || nr.residual > opt.terminal_tol) return std::nullopt;
      std::vector<ArcSpec> specs;
      double prev = 0.0;
      for (size_t i = 0; i < pat.size(); ++i) {
        specs.push_back({pat[i], nr.times[i] - prev});
        prev = nr.times[i];
      }
      const auto ex = extract_asl(sys, specs, x0, opt.tol);
      if (!check_feasible(sys, ex, nullptr, opt.tol).feasible) return std::nullopt;
      Candidate c;
      c.tf = nr.times.back();
      c.arcs = static_cast<int>(pat.size());
      for (const auto& s : specs) c.durations.push_back(s.duration);
      c.pattern = pi;
      return c;
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  const int threads = oracle_threads(opt.threads);
  const int half = std::max(1, opt.density);
  std::vector<Candidate> incumbent(patterns.size());
  double ratio = std::pow(2.0, 2.0 / half);
  int total = 0;
  for (int round = 0; round < std::max(1, opt.rounds); ++round) {
    // jobs: (pattern, lattice seed)
    std::vector<std::pair<int, std::vector<double>>> jobs;
    for (int pi = 0; pi < static_cast<int>(patterns.size()); ++pi) {
      const int N = static_cast<int>(patterns[pi].size());
      std::vector<double> center(N, scale / N);
      if (round > 0) {
        if (incumbent[pi].pattern < 0) continue;
        center = incumbent[pi].durations;
      }
      std::vector<int> k(N, -half);
      while (true) {
        std::vector<double> d(N);
        for (int i = 0; i < N; ++i) d[i] = center[i] * std::pow(ratio, k[i]);
        jobs.push_back({pi, d});
        int pos = 0;
        while (pos < N && ++k[pos] > half) k[pos++] = -half;
        if (pos == N) break;
      }
    }
    total += static_cast<int>(jobs.size());
    std::vector<std::optional<Candidate>> results(jobs.size());
    auto worker = [&](int w) {
      for (size_t q = w; q < jobs.size(); q += threads) results[q] = solve_seed(jobs[q].first, jobs[q].second);
    };
    if (threads <= 1) {
      worker(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
      for (auto& th : pool) th.join();
    }
    for (const auto& r : results)
      if (r && (incumbent[r->pattern].pattern < 0 || better(*r, incumbent[r->pattern]))) incumbent[r->pattern] = *r;
    best.grid_ratio = ratio;
    ratio = std::pow(ratio, 0.25);
  }

  Candidate win;
  for (const auto& c : incumbent)
    if (c.pattern >= 0 && (win.pattern < 0 || better(c, win))) win = c;
  best.candidates = total;
  if (win.pattern < 0) return best;
  best.found = true;
  best.message.clear();
  best.t_final = win.tf;
  double t = 0.0;
  for (size_t i = 0; i < win.durations.size(); ++i) {
    best.arcs.push_back({patterns[win.pattern][i], win.durations[i]});
    t += win.durations[i];
    best.switch_times.push_back(t);
  }
  best.switches = static_cast<int>(win.durations.size()) - 1;
  best.trajectory = extract_asl(sys, best.arcs, x0, opt.tol);
  best.audit = check_feasible(sys, best.trajectory, nullptr, opt.tol);
  return best;
}

}  // namespace aslopt
