#pragma once

#include "chain.hpp"
#include "oracle.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>

namespace aslopt {

using json = nlohmann::json;

// ---------- numbers ----------

inline std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json vec_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(std::isfinite(v(i)) ? json(v(i)) : json(nullptr));
  return a;
}

// null entries read as +inf (absent bound)
inline Vec json_vec(const json& j, const std::string& what) {
  if (!j.is_array()) throw Error(ErrorKind::Parse, what + " must be an array");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (j[i].is_null()) v(i) = std::numeric_limits<double>::infinity();
    else if (j[i].is_number()) v(i) = j[i].get<double>();
    else if (j[i].is_string() && (j[i] == "inf" || j[i] == "Infinity")) v(i) = std::numeric_limits<double>::infinity();
    else throw Error(ErrorKind::Parse, what + " holds a non-numeric entry");
  }
  return v;
}

inline json mat_json(const Mat& M) {
  json a = json::array();
  for (int r = 0; r < M.rows(); ++r) a.push_back(vec_json(M.row(r).transpose()));
  return a;
}

inline Mat json_mat(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::Parse, what + " must be a non-empty array of rows");
  const Vec first = json_vec(j[0], what);
  Mat M(j.size(), first.size());
  for (size_t r = 0; r < j.size(); ++r) {
    const Vec row = json_vec(j[r], what);
    if (row.size() != first.size()) throw Error(ErrorKind::Parse, what + " has ragged rows");
    M.row(r) = row.transpose();
  }
  return M;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parse, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
  out << text;
}

// ---------- problems ----------

// A boundary-value problem; `chain` is set when it came from a chain description.
struct Problem {
  LinearSystem sys;
  Vec x0;
  Vec xf;
  std::optional<CoiProblem> chain;
};

inline json to_json(const LinearSystem& sys) {
  json cons = json::array();
  for (const auto& c : sys.constraints) cons.push_back({{"c", vec_json(c.c)}, {"d", c.d}});
  return {{"A", mat_json(sys.A)}, {"b", vec_json(sys.b)}, {"u_max", sys.u_max}, {"constraints", cons}};
}

inline json to_json(const CoiProblem& p) {
  return {{"type", "chain"}, {"n", p.n}, {"u_max", p.u_max}, {"x_max", vec_json(p.x_max)}, {"x0", vec_json(p.x0)}, {"xf", vec_json(p.xf)}};
}

inline CoiProblem coi_from_json(const json& j) {
  CoiProblem p;
  try {
    p.n = j.at("n").get<int>();
    p.u_max = j.value("u_max", 1.0);
    p.x_max = j.contains("x_max") ? json_vec(j.at("x_max"), "x_max") : Vec::Constant(p.n, std::numeric_limits<double>::infinity());
    p.x0 = j.contains("x0") ? json_vec(j.at("x0"), "x0") : Vec::Zero(p.n);
    p.xf = json_vec(j.at("xf"), "xf");
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("chain problem: ") + e.what());
  }
  validate(p);
  return p;
}

inline Problem problem_from_json(const json& j) {
  Problem pr;
  const std::string type = j.value("type", j.contains("A") ? "linear" : "chain");
  if (type == "chain") {
    pr.chain = coi_from_json(j);
    pr.sys = to_linear_system(*pr.chain);
    pr.x0 = pr.chain->x0;
    pr.xf = pr.chain->xf;
  } else if (type == "linear") {
    try {
      pr.sys.A = json_mat(j.at("A"), "A");
      pr.sys.b = json_vec(j.at("b"), "b");
      pr.sys.u_max = j.value("u_max", 1.0);
      for (const auto& c : j.value("constraints", json::array()))
        pr.sys.constraints.push_back({json_vec(c.at("c"), "c"), c.at("d").get<double>()});
      pr.x0 = json_vec(j.at("x0"), "x0");
      pr.xf = json_vec(j.at("xf"), "xf");
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, std::string("linear problem: ") + e.what());
    }
    if (pr.x0.size() != pr.sys.dim() || pr.xf.size() != pr.sys.dim()) throw Error(ErrorKind::InvalidInput, "x0 and xf need n entries");
  } else {
    throw Error(ErrorKind::Parse, "unknown problem type " + type);
  }
  validate(pr.sys);
  return pr;
}

inline json to_json(const Problem& pr) {
  if (pr.chain) return to_json(*pr.chain);
  json j = to_json(pr.sys);
  j["type"] = "linear";
  j["x0"] = vec_json(pr.x0);
  j["xf"] = vec_json(pr.xf);
  return j;
}

// ---------- behaviors and trajectories ----------

inline json to_json(const SystemBehavior& s) {
  json j;
  if (s.constrained()) {
    j["kind"] = "constrained";
    j["active"] = s.active;
    json ords = json::array();
    for (const auto& o : s.orders) ords.push_back({{"constraint", o.index}, {"order", o.order}, {"pivot", o.pivot}});
    j["orders"] = ords;
    j["gain"] = vec_json(s.gain);
  } else {
    j["kind"] = "unconstrained";
    j["sign"] = s.sign;
  }
  json rows = json::array();
  for (const auto& r : s.rows) rows.push_back({{"f", vec_json(r.f)}, {"g", r.g}, {"tag", r.tag}});
  j["rows"] = rows;
  j["A_hat"] = mat_json(s.A_hat);
  j["b_hat"] = vec_json(s.b_hat);
  return j;
}

inline SystemBehavior behavior_from_json(const LinearSystem& sys, const json& j, const Tolerances& tol) {
  const std::string kind = j.value("kind", "unconstrained");
  if (kind == "constrained") return make_constrained(sys, j.at("active").get<std::vector<int>>(), tol);
  if (kind == "unconstrained") return make_unconstrained(sys, j.at("sign").get<int>());
  throw Error(ErrorKind::Parse, "unknown arc kind " + kind);
}

inline json law_json(const AugmentedSwitchingLaw& law) {
  json arcs = json::array();
  for (const auto& s : law.arcs) {
    if (s.constrained()) arcs.push_back({{"kind", "constrained"}, {"active", s.active}});
    else arcs.push_back({{"kind", "unconstrained"}, {"sign", s.sign}});
  }
  json markers = json::array();
  for (const auto& m : law.markers) {
    json ts = json::array();
    for (const auto& t : m.touches) ts.push_back({{"constraint", t.constraint}, {"order", t.order}});
    markers.push_back({{"arc", m.arc}, {"touches", ts}});
  }
  json ends = json::array();
  for (const auto& e : law.ends) {
    json ts = json::array();
    for (const auto& t : e.touches)
      ts.push_back({{"constraint", t.constraint}, {"left_order", t.left_order}, {"right_order", t.right_order}});
    ends.push_back({{"junction", e.junction}, {"touches", ts}});
  }
  return {{"arcs", arcs}, {"markers", markers}, {"ends", ends}};
}

inline json to_json(const TimedTrajectory& tr, const Problem* pr = nullptr) {
  json j = law_json(tr.law);
  if (pr && pr->chain) j["asl"] = print_coi_asl(to_coi(*pr->chain, tr.law));
  j["x0"] = vec_json(tr.x0);
  j["t0"] = tr.t0;
  j["times"] = tr.times;
  return j;
}

// Accepts {asl, times} for chain problems, {arcs, durations} for extraction,
// or the explicit {arcs, markers, ends, times} form written by to_json.
inline TimedTrajectory trajectory_from_json(const Problem& pr, const json& j, const Tolerances& tol = {}) {
  try {
    const Vec x0 = j.contains("x0") ? json_vec(j.at("x0"), "x0") : pr.x0;
    const double t0 = j.value("t0", 0.0);
    if (j.contains("asl")) {
      if (!pr.chain) throw Error(ErrorKind::InvalidInput, "shorthand needs a chain problem");
      const auto coi = parse_coi_asl(j.at("asl").get<std::string>(), pr.chain->n);
      TimedTrajectory tr;
      tr.law = to_law(*pr.chain, pr.sys, coi.law, tol);
      tr.x0 = x0;
      tr.t0 = t0;
      if (j.contains("times")) {
        tr.times = j.at("times").get<std::vector<double>>();
      } else {
        if (!tr.law.markers.empty()) throw Error(ErrorKind::InvalidInput, "markers need explicit keypoint times");
        double t = t0;
        for (double d : j.at("durations").get<std::vector<double>>()) tr.times.push_back(t += d);
      }
      if (tr.M() != static_cast<int>(keypoint_schedule(tr.law).size()))
        throw Error(ErrorKind::InvalidInput, "time count does not match the keypoints of the law");
      return tr;
    }
    const json& arcs = j.at("arcs");
    if (!arcs.is_array() || arcs.empty()) throw Error(ErrorKind::InvalidInput, "empty switching law");
    std::vector<SystemBehavior> behaviors;
    for (const auto& a : arcs) behaviors.push_back(behavior_from_json(pr.sys, a, tol));
    if (j.contains("durations")) {
      const auto d = j.at("durations").get<std::vector<double>>();
      if (d.size() != behaviors.size()) throw Error(ErrorKind::InvalidInput, "one duration per arc");
      std::vector<ArcSpec> specs;
      for (size_t i = 0; i < d.size(); ++i) specs.push_back({behaviors[i], d[i]});
      return extract_asl(pr.sys, specs, x0, tol, t0);
    }
    TimedTrajectory tr;
    tr.law.arcs = behaviors;
    for (const auto& m : j.value("markers", json::array())) {
      TangentMarker mk{m.at("arc").get<int>(), {}};
      for (const auto& t : m.at("touches")) mk.touches.push_back({t.at("constraint").get<int>(), t.at("order").get<int>()});
      tr.law.markers.push_back(mk);
    }
    for (const auto& e : j.value("ends", json::array())) {
      AdditionalEndConstraint ec{e.at("junction").get<int>(), {}};
      for (const auto& t : e.at("touches"))
        ec.touches.push_back({t.at("constraint").get<int>(), t.value("left_order", 0), t.value("right_order", 0)});
      tr.law.ends.push_back(ec);
    }
    tr.x0 = x0;
    tr.t0 = t0;
    tr.times = j.at("times").get<std::vector<double>>();
    if (tr.M() != static_cast<int>(keypoint_schedule(tr.law).size()))
      throw Error(ErrorKind::InvalidInput, "time count does not match the keypoints of the law");
    return tr;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("trajectory: ") + e.what());
  }
}

// ---------- reports ----------

inline json to_json(const OptimalityVerdict& v) {
  return {{"rows", v.rows},
          {"cols", v.cols},
          {"rank", v.rank},
          {"full_rank", v.full_rank},
          {"satisfied", v.satisfied},
          {"marginal", v.marginal},
          {"dof", v.cols - v.rows},
          {"singular_values", vec_json(v.singular_values)},
          {"free_columns", v.free_columns}};
}

inline json to_json(const FeasibilityReport& r, const LinearSystem& sys) {
  json m = json::array();
  for (const auto& mr : r.margins)
    m.push_back({{"constraint", describe_constraint(sys, mr.constraint)},
                 {"min_margin", std::isfinite(mr.min_margin) ? json(mr.min_margin) : json(nullptr)},
                 {"time", mr.time}});
  return {{"feasible", r.feasible},
          {"margins", m},
          {"max_residual", r.max_residual},
          {"residual_tag", r.residual_tag},
          {"min_duration", r.min_duration},
          {"diagnosis", r.diagnosis}};
}

inline json to_json(const OracleResult& r, const LinearSystem& sys) {
  json j = {{"found", r.found}, {"switches", r.switches}, {"switch_times", r.switch_times},
            {"grid_ratio", r.grid_ratio}, {"candidates", r.candidates}, {"message", r.message}};
  j["t_final"] = r.found ? json(r.t_final) : json(nullptr);
  if (r.found) {
    j["audit"] = to_json(r.audit, sys);
    j["law"] = law_json(r.trajectory.law);
  }
  return j;
}

// ---------- CSV ----------

inline std::string trajectory_csv(const TimedTrajectory& tr, int per_interval) {
  std::ostringstream os;
  const int n = static_cast<int>(tr.x0.size());
  os << "t";
  for (int k = 1; k <= n; ++k) os << ",x" << k;
  os << ",u,interval\n";
  for (const auto& s : sample_trajectory(tr, per_interval)) {
    os << fmt17(s.t);
    for (int k = 0; k < n; ++k) os << "," << fmt17(s.x(k));
    os << "," << fmt17(s.u) << "," << (s.interval + 1) << "\n";
  }
  return os.str();
}

inline std::string iteration_csv(const std::vector<IterationRecord>& log) {
  std::ostringstream os;
  os << "iter,t_M,DOF,rank,rows,cols,action\n";
  for (const auto& r : log)
    os << r.iter << "," << fmt17(r.t_final) << "," << r.dof << "," << r.rank << "," << r.rows << "," << r.cols << ",\"" << r.action << "\"\n";
  return os.str();
}

inline std::string series_csv(const std::vector<SeriesRow>& rows) {
  std::ostringstream os;
  os << "k,tau_k,z_k,r_k\n";
  for (const auto& r : rows) os << r.k << "," << fmt17(r.tau) << "," << fmt17(r.z) << "," << fmt17(r.r) << "\n";
  return os.str();
}

// ---------- configuration ----------

struct RunConfig {
  Tolerances tol;
  OptimizerOptions optimizer;
  OracleOptions oracle;
  int samples_per_interval = 200;
  std::string out_dir = ".";
};

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  auto pos = [](double v, const char* name) {
    if (!(v > 0.0)) throw Error(ErrorKind::InvalidInput, std::string(name) + " must be positive");
    return v;
  };
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    c.tol.pivot = pos(t.value("pivot", c.tol.pivot), "pivot");
    c.tol.rank = pos(t.value("rank", c.tol.rank), "rank");
    c.tol.feas = pos(t.value("feas", c.tol.feas), "feas");
    c.tol.eq = pos(t.value("eq", c.tol.eq), "eq");
    c.tol.ladder = pos(t.value("ladder", c.tol.ladder), "ladder");
    c.tol.row_reduce = pos(t.value("row_reduce", c.tol.row_reduce), "row_reduce");
    c.tol.touch_samples = t.value("touch_samples", c.tol.touch_samples);
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    c.optimizer.max_iter = o.value("max_iter", c.optimizer.max_iter);
    c.optimizer.initial_step = pos(o.value("initial_step", c.optimizer.initial_step), "initial_step");
    c.optimizer.collapse_rel = pos(o.value("collapse_rel", c.optimizer.collapse_rel), "collapse_rel");
  }
  if (j.contains("oracle")) {
    const auto& o = j.at("oracle");
    c.oracle.max_arcs = o.value("max_arcs", c.oracle.max_arcs);
    c.oracle.density = o.value("density", c.oracle.density);
    c.oracle.rounds = o.value("rounds", c.oracle.rounds);
    c.oracle.allow_holds = o.value("allow_holds", c.oracle.allow_holds);
  }
  c.samples_per_interval = j.value("samples", c.samples_per_interval);
  c.out_dir = j.value("out", c.out_dir);
  c.optimizer.tol = c.tol;
  c.oracle.tol = c.tol;
  return c;
}

}  // namespace aslopt
