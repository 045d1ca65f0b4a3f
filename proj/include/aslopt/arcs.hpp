#pragma once

#include "linsys.hpp"

#include <optional>
#include <set>
#include <sstream>

namespace aslopt {

// An equality f^T x + g = 0 with a human-readable origin.
struct AffineRow {
  Vec f;
  double g = 0.0;
  std::string tag;
};

// Greedy orthogonal reduction: rows are kept in order while they add rank.
// Residuals are measured against the largest row, so rounding-level rows drop out.
inline std::vector<AffineRow> reduce_rows(const std::vector<AffineRow>& rows, double rel_tol,
                                          const std::vector<Vec>& basis_in = {}) {
  double scale = 0.0;
  for (const auto& b : basis_in) scale = std::max(scale, b.norm());
  for (const auto& row : rows) scale = std::max(scale, row.f.norm());
  std::vector<Vec> Q;
  auto residual = [&](Vec v) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : Q) v -= q.dot(v) * q;
    return v;
  };
  for (const auto& b : basis_in) {
    const double nb = b.norm();
    if (nb == 0.0) continue;
    Vec r = residual(b);
    if (r.norm() > rel_tol * std::max(nb, 1e-3 * scale)) Q.push_back(r / r.norm());
  }
  std::vector<AffineRow> kept;
  for (const auto& row : rows) {
    const double nr = row.f.norm();
    if (nr == 0.0) continue;
    Vec r = residual(row.f);
    if (r.norm() > rel_tol * std::max(nr, 1e-3 * scale)) {
      Q.push_back(r / r.norm());
      kept.push_back(row);
    }
  }
  return kept;
}

inline Mat stack_f(const std::vector<AffineRow>& rows, int n) {
  Mat F(rows.size(), n);
  for (size_t i = 0; i < rows.size(); ++i) F.row(i) = rows[i].f.transpose();
  return F;
}

inline Vec stack_g(const std::vector<AffineRow>& rows) {
  Vec g(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) g(i) = rows[i].g;
  return g;
}

// Least-squares solvability of F x + g = 0.
inline bool rows_consistent(const std::vector<AffineRow>& rows, int n, double rel_tol) {
  if (rows.empty()) return true;
  const Mat F = stack_f(rows, n);
  const Vec g = stack_g(rows);
  const Vec x = F.completeOrthogonalDecomposition().solve(-g);
  const double res = (F * x + g).norm();
  return res <= rel_tol * std::max(g.norm(), 1e-300) || res <= 1e-14;
}

struct SystemBehavior {
  enum class Kind { Unconstrained, Constrained };
  Kind kind = Kind::Unconstrained;
  int sign = 0;             // unconstrained: +1 or -1
  std::vector<int> active;  // constrained: sorted constraint indices
  Mat A_hat;
  Vec b_hat;
  std::vector<AffineRow> rows;  // full-row-rank F x + g = 0
  std::vector<ConstraintOrderInfo> orders;  // one per active constraint
  Vec gain;                 // feedback of the lowest active index
  double u_max = 1.0;

  bool constrained() const { return kind == Kind::Constrained; }
  Mat F() const { return stack_f(rows, static_cast<int>(A_hat.rows())); }
  Vec g() const { return stack_g(rows); }

  double control(const Vec& x) const { return constrained() ? gain.dot(x) : sign * u_max; }

  bool same_dynamics(const SystemBehavior& o, double tol = 1e-12) const {
    return (A_hat - o.A_hat).cwiseAbs().maxCoeff() <= tol && (b_hat - o.b_hat).cwiseAbs().maxCoeff() <= tol;
  }
  bool same_law(const SystemBehavior& o) const {
    return kind == o.kind && sign == o.sign && active == o.active;
  }
};

inline SystemBehavior make_unconstrained(const LinearSystem& sys, int sign) {
  if (sign != 1 && sign != -1) throw Error(ErrorKind::InvalidInput, "sign must be +1 or -1");
  SystemBehavior s;
  s.kind = SystemBehavior::Kind::Unconstrained;
  s.sign = sign;
  s.A_hat = sys.A;
  s.b_hat = sign * sys.u_max * sys.b;
  s.u_max = sys.u_max;
  return s;
}

inline std::string constraint_label(int p) { return "c" + std::to_string(p + 1); }

inline SystemBehavior make_constrained(const LinearSystem& sys, std::vector<int> active, const Tolerances& tol = {}) {
  if (active.empty()) throw Error(ErrorKind::InvalidInput, "empty active set");
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());
  const int n = sys.dim();
  for (int p : active)
    if (p < 0 || p >= sys.num_constraints()) throw Error(ErrorKind::InvalidInput, "active index out of range");

  SystemBehavior s;
  s.kind = SystemBehavior::Kind::Constrained;
  s.active = active;
  s.u_max = sys.u_max;
  for (int p : active) s.orders.push_back(constraint_order(sys, p, tol.pivot));

  auto rows_for = [&](const std::vector<int>& set, const std::vector<ConstraintOrderInfo>& ords) {
    std::vector<AffineRow> rows;
    for (size_t i = 0; i < set.size(); ++i) {
      const int p = set[i];
      const auto& con = sys.constraints[p];
      rows.push_back({con.c, con.d, constraint_label(p) + " value"});
      Eigen::RowVectorXd row = con.c.transpose();
      for (int r = 1; r < ords[i].order; ++r) {
        row = row * sys.A;
        rows.push_back({row.transpose(), 0.0, constraint_label(p) + " derivative " + std::to_string(r)});
      }
    }
    for (size_t i = 0; i < set.size(); ++i) {
      const Mat Ap = sys.A + sys.b * ords[i].gain.transpose();
      for (size_t j = 0; j < set.size(); ++j) {
        Eigen::RowVectorXd row = sys.constraints[set[j]].c.transpose();
        for (int r = 1; r <= n; ++r) {
          row = row * Ap;
          rows.push_back({row.transpose(), 0.0,
                          constraint_label(set[j]) + " closed-loop derivative " + std::to_string(r) + " under " +
                              constraint_label(set[i])});
        }
      }
    }
    return rows;
  };

  const auto all_rows = rows_for(active, s.orders);
  if (!rows_consistent(all_rows, n, tol.consistency)) {
    std::string culprit;
    for (size_t i = 0; i < active.size() && culprit.empty(); ++i)
      for (size_t j = i + 1; j < active.size() && culprit.empty(); ++j) {
        const std::vector<int> pair{active[i], active[j]};
        const std::vector<ConstraintOrderInfo> po{s.orders[i], s.orders[j]};
        if (!rows_consistent(rows_for(pair, po), n, tol.consistency))
          culprit = constraint_label(active[i]) + " and " + constraint_label(active[j]);
      }
    if (culprit.empty()) culprit = "the active set";
    throw Error(ErrorKind::Inconsistent, "equalities of " + culprit + " have no common solution");
  }
  s.rows = reduce_rows(all_rows, n == 0 ? 0 : tol.row_reduce);
  s.gain = s.orders.front().gain;
  s.A_hat = sys.A + sys.b * s.gain.transpose();
  s.b_hat = Vec::Zero(n);
  return s;
}

inline double arc_control(const SystemBehavior& s, const Vec& x) { return s.control(x); }

// Row (c, d) of constraint index p as seen on arc s. Indices P and P+1 are
// u <= u_max and -u <= u_max; they are only state functions on constrained arcs.
inline std::optional<Constraint> constraint_row(const LinearSystem& sys, const SystemBehavior& s, int p) {
  const int P = sys.num_constraints();
  if (p >= 0 && p < P) return sys.constraints[p];
  if (!s.constrained()) return std::nullopt;
  if (p == P) return Constraint{s.gain, -sys.u_max};
  if (p == P + 1) return Constraint{-s.gain, -sys.u_max};
  return std::nullopt;
}

inline std::string describe_constraint(const LinearSystem& sys, int p) {
  const int P = sys.num_constraints();
  if (p == P) return "u <= u_max";
  if (p == P + 1) return "-u <= u_max";
  std::ostringstream os;
  os << "constraint " << (p + 1);
  return os.str();
}

}  // namespace aslopt
