#include "aslopt/aslopt.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace aslopt;

namespace {

enum Exit { Ok = 0, Usage = 1, Infeasible = 2, NotSatisfied = 3, NumericalFailure = 4 };

struct Flags {
  std::string config;
  std::string out = ".";
  double tol_rank = 0.0;
  double tol_feas = 0.0;
  int max_iter = -1;
  int grid_density = -1;
};

RunConfig load_config(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : config_from_json(read_json_file(f.config));
  if (f.tol_rank > 0.0) c.tol.rank = f.tol_rank;
  if (f.tol_feas > 0.0) c.tol.feas = f.tol_feas;
  if (f.max_iter >= 0) c.optimizer.max_iter = f.max_iter;
  if (f.grid_density > 0) c.oracle.density = f.grid_density;
  c.optimizer.tol = c.tol;
  c.oracle.tol = c.tol;
  c.out_dir = f.out;
  fs::create_directories(c.out_dir);
  return c;
}

std::string out_path(const RunConfig& c, const std::string& name) { return (fs::path(c.out_dir) / name).string(); }

int exit_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::InvalidInput:
    case ErrorKind::Parse:
    case ErrorKind::Controllability:
    case ErrorKind::Domain:
    case ErrorKind::WrongRegime:
      return Usage;
    case ErrorKind::Infeasible:
    case ErrorKind::InvalidJunction:
    case ErrorKind::Inconsistent:
    case ErrorKind::StaleTrajectory:
      return Infeasible;
    default:
      return NumericalFailure;
  }
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

json verdict_json(const OptimalityVerdict& v, const Problem& pr, const TimedTrajectory& tr) {
  json j = to_json(v);
  if (pr.chain) {
    const auto coi = to_coi(*pr.chain, tr.law);
    j["asl"] = print_coi_asl(coi);
    j["chain_dof"] = static_cast<int>(coi.arcs.size()) - coi_sigma(*pr.chain, tr.law) - pr.chain->n;
  }
  return j;
}

// Samples, canonical trajectory file and margin report.
FeasibilityReport write_trajectory(const RunConfig& c, const Problem& pr, const TimedTrajectory& tr, const std::string& stem) {
  write_text_file(out_path(c, stem + ".csv"), trajectory_csv(tr, c.samples_per_interval));
  write_text_file(out_path(c, stem + ".json"), to_json(tr, &pr).dump(2) + "\n");
  std::optional<EqualitySystem> H;
  try {
    H = build_equality_system(pr.sys, tr, pr.xf, c.tol, false);
  } catch (const Error&) {
  }
  const auto rep = check_feasible(pr.sys, tr, H ? &*H : nullptr, c.tol);
  write_text_file(out_path(c, stem + "_feasibility.json"), to_json(rep, pr.sys).dump(2) + "\n");
  return rep;
}

// ---------- commands ----------

int cmd_simulate(const RunConfig& c, const std::string& problem_file, const std::string& traj_file) {
  const auto pr = problem_from_json(read_json_file(problem_file));
  const auto tr = trajectory_from_json(pr, read_json_file(traj_file), c.tol);
  const auto rep = write_trajectory(c, pr, tr, "trajectory");
  json j = to_json(rep, pr.sys);
  j["t_final"] = tr.t_final();
  j["keypoints"] = tr.M();
  print(j);
  if (!rep.feasible) std::cerr << "infeasible: " << rep.diagnosis << "\n";
  return rep.feasible ? Ok : Infeasible;
}

int cmd_check(const RunConfig& c, const std::string& problem_file, const std::string& traj_file) {
  const auto pr = problem_from_json(read_json_file(problem_file));
  const auto tr = trajectory_from_json(pr, read_json_file(traj_file), c.tol);
  const auto H = build_equality_system(pr.sys, tr, pr.xf, c.tol, false);
  const auto rep = check_feasible(pr.sys, tr, &H, c.tol);
  if (!rep.feasible) {
    print(to_json(rep, pr.sys));
    std::cerr << "infeasible: " << rep.diagnosis << "\n";
    return Infeasible;
  }
  const auto v = necessary_condition_test(H, tr.times, c.tol.rank);
  print(verdict_json(v, pr, tr));
  return v.satisfied ? Ok : NotSatisfied;
}

int cmd_optimize(const RunConfig& c, const std::string& problem_file, const std::string& traj_file, bool trace) {
  const auto pr = problem_from_json(read_json_file(problem_file));
  const auto tr = trajectory_from_json(pr, read_json_file(traj_file), c.tol);
  const auto H = build_equality_system(pr.sys, tr, pr.xf, c.tol, false);
  const auto rep = check_feasible(pr.sys, tr, &H, c.tol);
  if (!rep.feasible) {
    std::cerr << "infeasible seed: " << rep.diagnosis << "\n";
    return Infeasible;
  }
  auto opt = c.optimizer;
  if (trace) opt.trace = [](const std::string& m) { std::cerr << "  " << m << "\n"; };
  const auto res = optimize(pr.sys, tr, pr.xf, opt);
  write_text_file(out_path(c, "iterations.csv"), iteration_csv(res.log));
  write_trajectory(c, pr, res.trajectory, "optimized");
  json j = verdict_json(res.verdict, pr, res.trajectory);
  j["iterations"] = static_cast<int>(res.log.size()) - 1;
  j["t_final_initial"] = tr.t_final();
  j["t_final"] = res.trajectory.t_final();
  j["stop_reason"] = res.stop_reason;
  print(j);
  return res.satisfied ? Ok : NotSatisfied;
}

int cmd_oracle(const RunConfig& c, const std::string& problem_file) {
  const auto pr = problem_from_json(read_json_file(problem_file));
  const auto res = grid_bbs_oracle(pr.sys, pr.x0, pr.xf, c.oracle);
  print(to_json(res, pr.sys));
  if (!res.found) return Infeasible;
  write_trajectory(c, pr, res.trajectory, "oracle");
  return Ok;
}

int cmd_chatter(const RunConfig& c, int n, double r1, long steps, const std::vector<double>& window) {
  SeriesReport rep;
  if (n == 4 && window.empty()) {
    rep = n4_r_series(r1, steps, {steps / 100, steps}, 100000);
  } else {
    if (window.empty()) throw Error(ErrorKind::InvalidInput, "--window is required unless n = 4");
    rep = chattering_series_analysis(n, window, steps, 100000);
  }
  write_text_file(out_path(c, "series.csv"), series_csv(rep.rows));
  json j = {{"n", rep.n}, {"steps", rep.steps}, {"terminated", rep.terminated}, {"degenerate", rep.degenerate},
            {"termination", rep.termination}, {"monotone", rep.monotone}};
  j["tail_statistic"] = std::isfinite(rep.tail_statistic) ? json(rep.tail_statistic) : json(nullptr);
  json ps = json::array();
  for (const auto& [N, S] : rep.partial_sums) ps.push_back({{"N", N}, {"S", S}});
  j["partial_sums"] = ps;
  print(j);
  return rep.degenerate ? NumericalFailure : Ok;
}

// ---------- reference runs ----------

int repro_lagged(const RunConfig& c) {
  const auto ex = lagged_actuator_example(c.tol);
  Problem pr{ex.sys, ex.x0, ex.xf, std::nullopt};
  const auto tr = extract_asl(ex.sys, ex.arcs, ex.x0, c.tol);
  write_text_file(out_path(c, "problem.json"), to_json(pr).dump(2) + "\n");
  const auto rep = write_trajectory(c, pr, tr, "trajectory");
  const auto H = build_equality_system(ex.sys, tr, ex.xf, c.tol);
  const auto v = necessary_condition_test(H, tr.times, c.tol.rank);
  json j = {{"arcs", tr.law.num_arcs()}, {"markers", tr.law.markers.size()}, {"end_constraints", tr.law.ends.size()},
            {"t_final", tr.t_final()}, {"feasible", rep.feasible}, {"verdict", to_json(v)}};
  print(j);
  if (!rep.feasible) return Infeasible;
  return v.satisfied ? Ok : NotSatisfied;
}

int repro_descent(const RunConfig& c) {
  const auto p = chain4_descent_problem();
  Problem pr{to_linear_system(p), p.x0, p.xf, p};
  write_text_file(out_path(c, "problem.json"), to_json(pr).dump(2) + "\n");
  const auto ds = chain4_descent_start(c.tol);
  const Mat J = equality_jacobian(ds.equalities, ds.solved.times);
  const auto v = necessary_condition_test(J, c.tol.rank);
  Mat reduced(J.rows(), J.cols() - 2);
  for (int k = 0, col = 0; k < J.cols(); ++k)
    if (k != ds.pivot_column && k != J.cols() - 1) reduced.col(col++) = J.col(k);
  write_trajectory(c, pr, ds.solved, "solved");
  write_trajectory(c, pr, ds.start, "start");
  auto opt = c.optimizer;
  const auto res = optimize(pr.sys, ds.start, pr.xf, opt);
  write_text_file(out_path(c, "iterations.csv"), iteration_csv(res.log));
  write_trajectory(c, pr, res.trajectory, "optimized");
  const auto ends = arc_end_columns(res.trajectory.law);
  json j = {{"solved_t_final", ds.solved.t_final()},
            {"jacobian_rows", v.rows},
            {"jacobian_cols", v.cols},
            {"rank", v.full_rank},
            {"rank_without_pivot_and_final", numerical_rank(reduced, c.tol.rank)},
            {"start_t_final", ds.start.t_final()},
            {"pivot_window", {ds.window_lo, ds.window_hi}},
            {"pivot_start", ds.start.times[ds.pivot_column]},
            {"result", verdict_json(res.verdict, pr, res.trajectory)},
            {"delta_pivot", res.trajectory.times[ends[3]] - ds.start.times[ds.pivot_column]},
            {"delta_t_final", res.trajectory.t_final() - ds.start.t_final()},
            {"stop_reason", res.stop_reason}};
  print(j);
  return res.satisfied ? Ok : NotSatisfied;
}

int repro_move(const RunConfig& c) {
  const auto p = chain5_move_problem();
  Problem pr{to_linear_system(p), p.x0, p.xf, p};
  write_text_file(out_path(c, "problem.json"), to_json(pr).dump(2) + "\n");
  const auto seed = chain5_move_seed(c.tol);
  write_trajectory(c, pr, seed, "seed");
  const auto res = optimize(pr.sys, seed, pr.xf, c.optimizer);
  write_text_file(out_path(c, "iterations.csv"), iteration_csv(res.log));
  write_trajectory(c, pr, res.trajectory, "optimized");
  const double reduction = 1.0 - res.trajectory.t_final() / seed.t_final();
  json j = verdict_json(res.verdict, pr, res.trajectory);
  j["seed_asl"] = print_coi_asl(to_coi(p, seed.law));
  j["seed_t_final"] = seed.t_final();
  j["t_final"] = res.trajectory.t_final();
  j["reduction"] = reduction;
  j["iterations"] = static_cast<int>(res.log.size()) - 1;
  j["stop_reason"] = res.stop_reason;
  print(j);
  return res.satisfied && reduction >= 0.15 ? Ok : NotSatisfied;
}

int repro_chatter4(const RunConfig& c) {
  const auto rep = n4_r_series(0.5, 1000000, {10000, 100000, 1000000}, 100000);
  write_text_file(out_path(c, "series.csv"), series_csv(rep.rows));
  const auto head = n4_r_series(0.5, 100000);
  double s4 = 0.0, s6 = 0.0;
  for (const auto& [N, S] : rep.partial_sums) {
    if (N == 10000) s4 = S;
    if (N == 1000000) s6 = S;
  }
  json j = {{"r1", 0.5},
            {"tail_statistic_1e5", head.tail_statistic},
            {"tail_statistic_1e6", rep.tail_statistic},
            {"monotone", rep.monotone},
            {"partial_sum_ratio", s6 / s4}};
  print(j);
  return rep.monotone && std::abs(head.tail_statistic - 0.25) <= 0.0025 ? Ok : NotSatisfied;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Switching-time analysis and descent for bang-bang trajectories of single-input linear systems"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("--config", flags.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", flags.out, "output directory");
  app.add_option("--tol-rank", flags.tol_rank, "relative singular value threshold");
  app.add_option("--tol-feas", flags.tol_feas, "normalized constraint margin tolerance");
  app.add_option("--max-iter", flags.max_iter, "descent iteration limit");
  app.add_option("--grid-density", flags.grid_density, "oracle lattice steps per half-width");

  std::string problem_file, traj_file;
  auto* sim = app.add_subcommand("simulate", "integrate a switching law and audit feasibility");
  sim->add_option("problem", problem_file)->required();
  sim->add_option("trajectory", traj_file)->required();
  auto* chk = app.add_subcommand("check", "rank test of the keypoint equality Jacobian");
  chk->add_option("problem", problem_file)->required();
  chk->add_option("trajectory", traj_file)->required();
  bool trace = false;
  auto* opt = app.add_subcommand("optimize", "descend on the final time until the rank test is satisfied");
  opt->add_option("problem", problem_file)->required();
  opt->add_option("trajectory", traj_file)->required();
  opt->add_flag("--trace", trace, "print line-search progress");
  auto* orc = app.add_subcommand("oracle", "brute-force lattice search over short bang-bang laws");
  orc->add_option("problem", problem_file)->required();
  int n = 4;
  double r1 = 0.5;
  long steps = 100000;
  std::vector<double> window;
  auto* cht = app.add_subcommand("chatter", "iterate the chattering junction-time recursion");
  cht->add_option("--n", n, "chain order")->check(CLI::Range(3, 12));
  cht->add_option("--r1", r1, "first gap ratio (order 4 closed form)");
  cht->add_option("--steps", steps, "iterations")->check(CLI::PositiveNumber);
  cht->add_option("--window", window, "decreasing tau seed of n - 1 values")->delimiter(',');
  std::string which;
  auto* rep = app.add_subcommand("repro", "reference runs");
  rep->add_option("case", which,
                  "viiA: lagged actuator example with a tangency and a saturated hold exit; "
                  "viiB: fourth-order chain, one descent from a pinned final time; "
                  "viiC: fifth-order chain, descent from an S-curve seed; "
                  "chatter4: order-4 gap-ratio recursion")
      ->required()
      ->check(CLI::IsMember({"viiA", "viiB", "viiC", "chatter4"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Ok : Usage;
  }

  try {
    const auto cfg = load_config(flags);
    if (*sim) return cmd_simulate(cfg, problem_file, traj_file);
    if (*chk) return cmd_check(cfg, problem_file, traj_file);
    if (*opt) return cmd_optimize(cfg, problem_file, traj_file, trace);
    if (*orc) return cmd_oracle(cfg, problem_file);
    if (*cht) return cmd_chatter(cfg, n, r1, steps, window);
    if (which == "viiA") return repro_lagged(cfg);
    if (which == "viiB") return repro_descent(cfg);
    if (which == "viiC") return repro_move(cfg);
    return repro_chatter4(cfg);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_for(e);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return NumericalFailure;
  }
}
