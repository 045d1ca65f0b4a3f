#pragma once

#include "asl.hpp"

namespace aslopt {

// blocks[i][j] = d x_{i+1} / d t_{j+1}, both 0-based over keypoints 1..M.
using KeypointJacobian = std::vector<std::vector<Vec>>;

inline KeypointJacobian keypoint_jacobian(const IntervalDynamics& dyn, const std::vector<double>& times,
                                          const std::vector<Vec>& states, double t0 = 0.0, bool allow_unordered = false) {
  if (!allow_unordered) check_schedule(times, t0, true);
  const int M = static_cast<int>(times.size());
  if (static_cast<int>(states.size()) != M + 1) throw Error(ErrorKind::InvalidInput, "need states x_0..x_M");
  const int n = static_cast<int>(states[0].size());
  std::vector<Mat> Phi(M);
  double prev = t0;
  for (int m = 0; m < M; ++m) {
    Phi[m] = flow(dyn.A[m], dyn.b[m], times[m] - prev, allow_unordered).Phi;
    prev = times[m];
  }
  KeypointJacobian D(M, std::vector<Vec>(M, Vec::Zero(n)));
  for (int j = 0; j < M; ++j) {
    const Vec& xj = states[j + 1];
    D[j][j] = dyn.A[j] * xj + dyn.b[j];
    if (j + 1 >= M) continue;
    Vec v = (dyn.A[j] - dyn.A[j + 1]) * xj + dyn.b[j] - dyn.b[j + 1];
    for (int i = j + 1; i < M; ++i) {
      v = Phi[i] * v;
      D[i][j] = v;
    }
  }
  return D;
}

inline Mat equality_jacobian(const EqualitySystem& H, const std::vector<double>& times, bool allow_unordered = false) {
  const auto xs = keypoint_states(H.dynamics, H.x0, times, H.t0, allow_unordered);
  const auto D = keypoint_jacobian(H.dynamics, times, xs, H.t0, allow_unordered);
  Mat J = Mat::Zero(H.num_rows(), H.M);
  for (int r = 0; r < H.num_rows(); ++r) {
    const auto& row = H.rows[r];
    for (int j = 0; j <= row.keypoint; ++j) J(r, j) = row.f.dot(D[row.keypoint][j]);
  }
  return J;
}

// Basis of M' columns containing the last one, chosen greedily by pivoted QR
// after projecting out the last column; the complement is the free set.
struct ColumnSplit {
  std::vector<int> basis;  // sorted, last column included
  std::vector<int> free;   // sorted, never the last column
};

inline ColumnSplit split_columns(const Mat& J, double rel_tol = 1e-9) {
  const int rows = static_cast<int>(J.rows()), M = static_cast<int>(J.cols());
  ColumnSplit cs;
  if (M == 0) return cs;
  const Vec last = J.col(M - 1);
  Mat R = J.leftCols(M - 1);
  if (last.norm() > 0.0) {
    const Vec q = last / last.norm();
    R -= q * (q.transpose() * R);
  }
  const int want = std::max(0, rows - 1);
  std::vector<int> chosen;
  if (want > 0 && R.cols() > 0) {
    Eigen::ColPivHouseholderQR<Mat> qr(R);
    qr.setThreshold(rel_tol);
    const int rk = std::min<int>(want, static_cast<int>(qr.rank()));
    for (int k = 0; k < rk; ++k) chosen.push_back(qr.colsPermutation().indices()(k));
  }
  std::vector<bool> in(M, false);
  for (int c : chosen) in[c] = true;
  in[M - 1] = true;
  for (int c = 0; c < M; ++c) (in[c] ? cs.basis : cs.free).push_back(c);
  return cs;
}

struct OptimalityVerdict {
  Mat jacobian;  // M' x (M-1)
  Vec singular_values;
  int rows = 0;
  int cols = 0;  // M, including the dropped last column
  int rank = 0;
  int full_rank = 0;  // rank over all M columns
  bool satisfied = false;
  bool marginal = false;
  std::vector<int> free_columns;
};

inline OptimalityVerdict necessary_condition_test(const Mat& J_full, double eps_rank = 1e-9) {
  if (J_full.rows() == 0 || J_full.cols() == 0) throw Error(ErrorKind::Degenerate, "empty equality system");
  OptimalityVerdict v;
  v.rows = static_cast<int>(J_full.rows());
  v.cols = static_cast<int>(J_full.cols());
  v.jacobian = J_full.leftCols(v.cols - 1);
  if (v.jacobian.cols() > 0) {
    Eigen::JacobiSVD<Mat> svd(v.jacobian);
    v.singular_values = svd.singularValues();
  } else {
    v.singular_values = Vec(0);
  }
  const double smax = v.singular_values.size() ? v.singular_values(0) : 0.0;
  for (int k = 0; k < v.singular_values.size(); ++k) {
    const double s = v.singular_values(k);
    if (smax > 0.0 && s >= eps_rank * smax) ++v.rank;
    if (smax > 0.0 && s >= 0.1 * eps_rank * smax && s <= 10.0 * eps_rank * smax) v.marginal = true;
  }
  v.full_rank = numerical_rank(J_full, eps_rank);
  v.satisfied = v.rank < v.rows;
  v.free_columns = split_columns(J_full, eps_rank).free;
  return v;
}

inline OptimalityVerdict necessary_condition_test(const EqualitySystem& H, const std::vector<double>& times,
                                                  double eps_rank = 1e-9) {
  if (H.num_rows() == 0) throw Error(ErrorKind::Degenerate, "empty equality system");
  return necessary_condition_test(equality_jacobian(H, times), eps_rank);
}

}  // namespace aslopt
