#pragma once

#include "common.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>

namespace aslopt {

// c^T x + d <= 0
struct Constraint {
  Vec c;
  double d = 0.0;
};

struct LinearSystem {
  Mat A;
  Vec b;
  std::vector<Constraint> constraints;
  double u_max = 1.0;

  int dim() const { return static_cast<int>(A.rows()); }
  int num_constraints() const { return static_cast<int>(constraints.size()); }
};

inline double operator_norm(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues()(0);
}

inline Mat controllability_matrix(const Mat& A, const Vec& b) {
  const int n = static_cast<int>(A.rows());
  Mat K(n, n);
  Vec v = b;
  for (int k = 0; k < n; ++k) {
    K.col(k) = v;
    v = A * v;
  }
  return K;
}

inline int numerical_rank(const Mat& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(M);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) >= rel_tol * s(0)) ++r;
  return r;
}

inline bool is_controllable(const Mat& A, const Vec& b, double rel_tol = 1e-10) {
  return numerical_rank(controllability_matrix(A, b), rel_tol) == A.rows();
}

inline void validate(const LinearSystem& sys, double rel_tol = 1e-10) {
  const int n = sys.dim();
  if (n <= 0 || sys.A.cols() != n || sys.b.size() != n)
    throw Error(ErrorKind::InvalidInput, "A must be n x n and b of length n");
  if (!all_finite(sys.A) || !all_finite(sys.b))
    throw Error(ErrorKind::InvalidInput, "non-finite system data");
  if (!(sys.u_max > 0.0)) throw Error(ErrorKind::InvalidInput, "u_max must be positive");
  for (int p = 0; p < sys.num_constraints(); ++p) {
    const auto& con = sys.constraints[p];
    if (con.c.size() != n) throw Error(ErrorKind::InvalidInput, "constraint " + std::to_string(p + 1) + " has wrong length");
    if (con.c.norm() == 0.0) throw Error(ErrorKind::InvalidInput, "constraint " + std::to_string(p + 1) + " has c = 0");
  }
  if (!is_controllable(sys.A, sys.b, rel_tol))
    throw Error(ErrorKind::Controllability, "rank [b, Ab, ...] < n");
}

// Returns true when M^n vanishes, i.e. the exponential is a finite polynomial.
inline bool is_nilpotent(const Mat& M) {
  const int n = static_cast<int>(M.rows());
  if (n == 0) return true;
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  Mat P = M / scale;
  for (int k = 1; k < n; ++k) P = P * (M / scale);
  return P.cwiseAbs().maxCoeff() <= 1e-15;
}

inline Mat matrix_exponential(const Mat& M) {
  if (M.rows() != M.cols()) throw Error(ErrorKind::InvalidInput, "matrix_exponential needs a square matrix");
  if (!all_finite(M)) throw Error(ErrorKind::InvalidInput, "matrix_exponential: non-finite entries");
  const int n = static_cast<int>(M.rows());
  if (n == 0) return M;
  if (is_nilpotent(M)) {
    Mat E = Mat::Identity(n, n);
    Mat term = Mat::Identity(n, n);
    for (int k = 1; k < n; ++k) {
      term = term * M / static_cast<double>(k);
      E += term;
    }
    return E;
  }
  return M.exp();
}

// x(dt) = Phi x(0) + gamma under xdot = A x + b.
struct Flow {
  Mat Phi;
  Vec gamma;
};

// Negative dt runs the flow backwards; only Newton iterates ask for it.
inline Flow flow(const Mat& A, const Vec& b, double dt, bool allow_negative = false) {
  if (dt < 0.0 && !allow_negative) throw Error(ErrorKind::InvalidInput, "negative duration");
  const int n = static_cast<int>(A.rows());
  if (dt == 0.0) return {Mat::Identity(n, n), Vec::Zero(n)};
  Mat aug = Mat::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = A * dt;
  aug.topRightCorner(n, 1) = b * dt;
  const Mat E = matrix_exponential(aug);
  return {E.topLeftCorner(n, n), E.topRightCorner(n, 1)};
}

inline Vec propagate(const Mat& A_hat, const Vec& b_hat, const Vec& x0, double dt) {
  if (dt < 0.0) throw Error(ErrorKind::InvalidInput, "propagate: negative dt");
  if (dt == 0.0) return x0;
  const Flow f = flow(A_hat, b_hat, dt);
  return f.Phi * x0 + f.gamma;
}

struct ConstraintOrderInfo {
  int index = -1;
  int order = 0;
  Vec gain;
  double pivot = 0.0;
};

inline ConstraintOrderInfo constraint_order(const Mat& A, const Vec& b, const Vec& c, double eps_piv = 1e-10) {
  const int n = static_cast<int>(A.rows());
  const double nA = operator_norm(A), nb = b.norm(), nc = c.norm();
  Eigen::RowVectorXd row = c.transpose();  // c^T A^{r-1}
  for (int r = 1; r <= n; ++r) {
    const double v = row.dot(b);
    const double thresh = eps_piv * nc * std::pow(nA, r - 1) * nb;
    if (std::abs(v) > thresh) {
      ConstraintOrderInfo info;
      info.order = r;
      info.pivot = v;
      info.gain = -(row * A).transpose() / v;
      return info;
    }
    row = row * A;
  }
  throw Error(ErrorKind::Controllability, "c^T A^{r-1} b vanishes for all r <= n");
}

inline ConstraintOrderInfo constraint_order(const LinearSystem& sys, int p, double eps_piv = 1e-10) {
  if (p < 0 || p >= sys.num_constraints()) throw Error(ErrorKind::InvalidInput, "constraint index out of range");
  auto info = constraint_order(sys.A, sys.b, sys.constraints[p].c, eps_piv);
  info.index = p;
  return info;
}

// (t^k / k!) for k = 1..m
inline Vec phi_vector(double t, int m) {
  Vec v(m);
  double term = 1.0;
  for (int k = 1; k <= m; ++k) {
    term *= t / k;
    v(k - 1) = term;
  }
  return v;
}

// Entries c^T A^{r-1} (A x + b), r = 1..count: successive time derivatives of c^T x.
inline Vec derivative_ladder(const Vec& c, const Mat& A, const Vec& b, const Vec& x, int count) {
  Vec out(count);
  Vec v = A * x + b;
  for (int r = 0; r < count; ++r) {
    out(r) = c.dot(v);
    v = A * v;
  }
  return out;
}

}  // namespace aslopt
