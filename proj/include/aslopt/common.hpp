#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace aslopt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class ErrorKind {
  InvalidInput,
  Controllability,
  Inconsistent,
  InvalidJunction,
  Infeasible,
  StaleTrajectory,
  Degenerate,
  ProjectionFailure,
  Restructure,
  Parse,
  WrongRegime,
  Domain,
  Numerical
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::Controllability: return "controllability-violation";
    case ErrorKind::Inconsistent: return "inconsistent-active-set";
    case ErrorKind::InvalidJunction: return "invalid-junction";
    case ErrorKind::Infeasible: return "infeasible-trajectory";
    case ErrorKind::StaleTrajectory: return "stale-trajectory";
    case ErrorKind::Degenerate: return "degenerate-problem";
    case ErrorKind::ProjectionFailure: return "projection-failure";
    case ErrorKind::Restructure: return "restructure";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::WrongRegime: return "wrong-regime";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Numerical: return "numerical-failure";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Defaults follow the module ledgers; every field is overridable from the CLI config.
struct Tolerances {
  double pivot = 1e-10;        // constraint-order pivot test, relative
  double row_reduce = 1e-10;   // greedy orthogonal row reduction, relative to the largest row
  double consistency = 1e-8;   // least-squares residual / |g|
  double rank = 1e-9;          // numerical rank, relative to sigma_max
  double feas = 1e-8;          // normalized margins
  double eq = 1e-9;            // equality residuals
  double touch_time = 1e-12;   // bisection width for touch times
  double ladder = 1e-8;        // zero test on derivative ladders, relative
  int touch_samples = 512;     // grid per arc for touch detection
};

inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace aslopt
