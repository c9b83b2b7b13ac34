#pragma once

#include <memory>
#include <vector>

#include "linuq/cg.hpp"
#include "linuq/matrix_core.hpp"

namespace linuq {

enum class PriorKind { kBfgsCg, kStandardizedNorm };

enum class OmegaMode {
  kRetrospective,        // ||F_{m+1}|| taken from the trace
  kPredictive,           // proxy ||F_m||
  kPredictiveGeometric,  // proxy ||F_m||^2 / ||F_{m-1}||
};

/// Per-step scale samples extracted from the Gram-matrix predictions;
/// length M-1 for an M-step trace. Raw negative values are floored at zero
/// and counted. The series is truncated (and `truncated` set) at the first
/// step whose scaling residual norm falls below 1e-14 ||F_0||, which happens
/// only once a run has fully converged.
struct OmegaSeries {
  Vector values;
  int floored = 0;
  bool truncated = false;
};

OmegaSeries omega_series(const CgTrace& trace,
                         OmegaMode mode = OmegaMode::kRetrospective);

/// Estimation rule turning the series into a single omega^2.
struct OmegaEstimator {
  enum class Rule { kStationary, kLinearTrend, kStructured };

  Rule rule = Rule::kStationary;
  Index horizon = 0;        // LinearTrend: extrapolation target N
  Index head_steps = 0;     // Structured: inflate while current step <= L
  double multiplier = 1.0;  // Structured: inflation factor

  static OmegaEstimator stationary();
  static OmegaEstimator linear_trend(Index horizon);
  static OmegaEstimator structured(Index head_steps, double multiplier);
};

/// Returns omega^2. The current step is implied by the series length
/// (an M-step trace yields M-1 values).
double estimate_omega(const OmegaSeries& series, const OmegaEstimator& rule);

/// Lower bound on lambda_max(B) from trace scalars only: Rayleigh quotients
/// s^T y / s^T s, the norm quotients ||y||^2 / s^T y, and the largest Ritz
/// value of the Lanczos tridiagonal assembled from the CG coefficients.
double lambda_max_estimate(const CgTrace& trace);

/// alpha = safety / lambda_max_estimate, safety in (0,1).
double estimate_alpha(const CgTrace& trace, double safety);

/// Posterior over H built from a CG trace. The mean and the covariance
/// factor W_M are kept in factored form (scaled identity plus low-rank
/// terms); entries are evaluated lazily and dense materialization is guarded
/// to order <= 2048.
class PosteriorModel {
 public:
  struct Marginal {
    double mean = 0.0;
    double variance = 0.0;
  };
  struct Prediction {
    Vector mean;
    Vector marginal_variances;
  };

  PriorKind prior_kind() const { return prior_kind_; }
  double alpha() const { return alpha_; }
  double omega_sq() const { return omega_sq_; }
  Index dimension() const { return n_; }
  Index steps() const { return m_; }
  bool used_dense_fallback() const { return dense_fallback_; }
  const Matrix& fbar() const { return fbar_; }

  Vector apply_mean(const Vector& v) const;
  Vector apply_cov_factor(const Vector& v) const;
  double mean_entry(Index i, Index j) const;
  double cov_factor_entry(Index i, Index j) const;
  Vector cov_factor_diagonal() const;

  Matrix mean_dense() const;
  Matrix cov_factor_dense() const;
  Matrix span_part_dense() const;  // S (S^T Y)^{-1} S^T

  /// W(Omega) = span part + (I - P) Omega (I - P) at Omega = omega^2 I;
  /// every member reproduces the observations (W Y = S). Dense, guarded.
  Matrix w_of_omega_dense(double omega_sq) const;

  /// Marginal of the element H_ij: mean and 0.5 (W_ii W_jj + W_ij^2).
  Marginal element_marginal(Index i, Index j) const;

  /// sqrt(E ||H - H_M||_F^2) = sqrt(0.5 [(tr W_M)^2 + ||W_M||_F^2]),
  /// evaluated from the factors without forming N^2 terms.
  double expected_frobenius_error() const;

  /// Posterior of x = H b_test: mean H_M b_test and the marginal variances
  /// 0.5 (W_ii b^T W b + (W b)_i^2).
  Prediction predict_solution(const Vector& b_test) const;

  /// Same model with a different omega^2 (cores are reused).
  PosteriorModel with_omega(double omega_sq) const;

  friend PosteriorModel bfgs_cg_posterior(std::shared_ptr<const CgTrace> trace,
                                          double omega_sq, double h0_scale);
  friend PosteriorModel standardized_norm_posterior(
      std::shared_ptr<const CgTrace> trace, double alpha, double omega_sq);

 private:
  // W_M = w_iso * I + sum_k V_k Z_k V_k^T; mean = alpha * I + basis terms.
  struct Term {
    Matrix v;
    Matrix z;
    Matrix vz;  // v * z
  };

  static void recompose_omega(PosteriorModel& model);
  double term_entry(const Term& t, Index i, Index j) const;

  PriorKind prior_kind_ = PriorKind::kBfgsCg;
  double alpha_ = 1.0;
  double omega_sq_ = 0.0;
  Index n_ = 0;
  Index m_ = 0;
  bool dense_fallback_ = false;

  Matrix fbar_;         // kept residual columns, normalized
  Matrix fbar_gram_;    // fbar^T fbar
  Term mean_term_;      // low-rank part of the mean
  Term span_term_;      // SN only: [S, U] with blkdiag(Cs, -Kinv) core
  Term fbar_term_;      // -omega^2 * fbar (2I - fbar_gram) fbar^T
  double w_iso_ = 0.0;
};

/// BFGS/CG-implicit posterior: mean from inverse-mode conditioning with the
/// implicit W (W Y = S), covariance factor (I - Fbar Fbar^T) Omega (...).
PosteriorModel bfgs_cg_posterior(std::shared_ptr<const CgTrace> trace,
                                 double omega_sq, double h0_scale = 1.0);

/// Standardized-norm posterior: prior H_0 = alpha I, W = H - alpha I;
/// the Gram Y^T S - alpha Y^T Y is tridiagonal and solved by the Thomas
/// algorithm (equilibrated by the y-column norms).
PosteriorModel standardized_norm_posterior(std::shared_ptr<const CgTrace> trace,
                                           double alpha, double omega_sq);

/// sqrt(0.5 [(tr W)^2 + ||W||_F^2]) for an explicit covariance factor.
double expected_frobenius_error(const Matrix& w_factor);

/// Calibration ratio e_ij^2 = (B0 - B)_ij^2 / E[(B0 - B)_ij^2] for prior
/// covariance factor W (analysis tool; requires ground truth).
double calibration_ratio(const Matrix& b_true, const Matrix& b0,
                         const Matrix& w, Index i, Index j);

/// theta^2 W with theta = lambda_min / (lambda_min - 1); guards
/// lambda_min <= 1 + 1e-6.
Matrix theta_rescale(const Matrix& w, double lambda_min);

}  // namespace linuq
