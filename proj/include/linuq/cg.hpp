#pragma once

#include <functional>
#include <memory>

#include "linuq/matrix_core.hpp"

namespace linuq {

/// Symmetric linear operator v -> Bv, known only through its action.
class LinearOperator {
 public:
  using Apply = std::function<Vector(const Vector&)>;

  LinearOperator(Index dimension, Apply apply)
      : dim_(dimension), apply_(std::move(apply)) {}

  /// Wraps a dense symmetric matrix (kept for tests and the CLI).
  static LinearOperator dense(const Matrix& b);

  Index dimension() const { return dim_; }
  Vector operator()(const Vector& v) const { return apply_(v); }

  /// Probe-based linearity and symmetry check on random-ish vectors.
  bool probe_symmetric(int probes = 3) const;

 private:
  Index dim_;
  Apply apply_;
};

struct CgOptions {
  double residual_tol = 1e-10;  // relative to ||F_0||
  Index max_steps = -1;         // capped at N; -1 means N
  // Full reorthogonalization of residuals; invariant-test runs only.
  bool reorthogonalize = false;
};

/// Full record of a CG (or quasi-Newton) run on Bx = b.
///
/// Column i of `directions` is the step s_{i+1} = x_{i+1} - x_i, column i of
/// `residuals` is F_i = B x_i - b. Y is never stored; its columns are
/// residual differences and its Gram entries follow from `residual_norms`.
struct CgTrace {
  Matrix directions;      // N x M
  Matrix residuals;       // N x (M+1)
  Vector residual_norms;  // M+1
  Vector step_lengths;    // M
  Matrix iterates;        // N x (M+1)
  bool converged = false;
  Index steps = 0;

  Index dimension() const { return residuals.rows(); }
  Matrix y_columns() const;         // residual differences, N x M
  Vector gram_diagonal() const;     // s_i^T y_i = alpha_i ||F_{i-1}||^2
  Vector y_column_norms() const;    // sqrt(||F_i||^2 + ||F_{i-1}||^2)
  TridiagonalMatrix yty() const;    // Y^T Y from the norm recurrences
  CgTrace head(Index m) const;      // restriction to the first m steps
};

/// Hestenes-Stiefel CG with exact line searches, recording the full trace.
/// Throws when a direction exposes non-positive curvature (operator not SPD).
CgTrace cg_solve(const LinearOperator& b, const Vector& rhs, const Vector& x0,
                 const CgOptions& options = {});
CgTrace cg_solve(const LinearOperator& b, const Vector& rhs,
                 const CgOptions& options = {});

/// Inverse-BFGS quasi-Newton iteration with exact line searches and scalar
/// prior mean H_0 = alpha I. Returns the same trace layout as cg_solve; the
/// direction sequence is parallel to CG's.
CgTrace bfgs_directions(const LinearOperator& b, const Vector& rhs,
                        double h0_scale, const CgOptions& options = {});

/// Diagnostic comparison of span{F_0..}, span{s_1..} and the Krylov span.
struct KrylovSpanReport {
  double max_angle_directions = 0.0;  // span(S) vs span(F_0..F_{M-1})
  double max_angle_krylov = 0.0;      // span(S) vs span(F_0, BF_0, ...)
  bool ok(double tol = 1e-6) const {
    return max_angle_directions <= tol && max_angle_krylov <= tol;
  }
};

KrylovSpanReport krylov_span_check(const CgTrace& trace,
                                   const LinearOperator& b);

/// Production-path check of the trace identities (residual orthogonality,
/// S^T Y diagonality, the Y^T Y norm recurrence). Deviations above 1e-6 are
/// warnings, above 1e-3 hard failures; finite-precision runs on
/// ill-conditioned problems drift into the warning band.
struct TraceInvariantReport {
  double residual_orthogonality = 0.0;
  double gram_off_diagonal = 0.0;
  double yty_deviation = 0.0;
  static constexpr double kWarn = 1e-6;
  static constexpr double kFail = 1e-3;
  bool clean() const {
    return residual_orthogonality <= kWarn && gram_off_diagonal <= kWarn &&
           yty_deviation <= kWarn;
  }
  bool acceptable() const {
    return residual_orthogonality <= kFail && gram_off_diagonal <= kFail &&
           yty_deviation <= kFail;
  }
};

TraceInvariantReport check_trace_invariants(const CgTrace& trace);

}  // namespace linuq
