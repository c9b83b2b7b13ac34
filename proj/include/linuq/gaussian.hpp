#pragma once

#include "linuq/matrix_core.hpp"

namespace linuq {

enum class CovStructure { kKronecker, kSymmetricKronecker };
enum class BeliefMode { kDirect, kInverse };

/// Gaussian belief over an N x N matrix.
///
/// For SymmetricKronecker structure the covariance over vec(B) is
/// cov_factor (*) cov_factor. For Kronecker structure it is
/// cov_left (x) cov_factor (identical factors for a prior; the conditioning
/// on Y = BS only updates the right factor).
struct MatrixGaussian {
  Matrix mean;
  Matrix cov_factor;
  Matrix cov_left;
  CovStructure structure = CovStructure::kSymmetricKronecker;
  BeliefMode mode = BeliefMode::kDirect;
  // Set when the Gram factorization needed a pivoted fallback.
  bool gram_fallback = false;

  static MatrixGaussian prior(const Matrix& mean, const SpdMatrix& w,
                              CovStructure structure,
                              BeliefMode mode = BeliefMode::kDirect);
};

/// Paired projections S, Y with Y = B S (Direct) or S = H Y (Inverse).
/// S must have full column rank in Direct mode, Y in Inverse mode; the
/// constructor rejects rank-deficient inputs naming the offending column.
class ObservationSet {
 public:
  ObservationSet(Matrix s, Matrix y, BeliefMode mode = BeliefMode::kDirect);

  const Matrix& s() const { return s_; }
  const Matrix& y() const { return y_; }
  BeliefMode mode() const { return mode_; }
  Index count() const { return s_.cols(); }
  Index dimension() const { return s_.rows(); }

  ObservationSet head(Index m) const;
  ObservationSet tail(Index m) const;

 private:
  Matrix s_;
  Matrix y_;
  BeliefMode mode_;
};

/// Posterior for the Kronecker prior (asymmetric hypotheses) after Y = BS.
MatrixGaussian posterior_asymmetric(const MatrixGaussian& prior,
                                    const ObservationSet& obs);

/// Posterior for the symmetric-Kronecker prior after Y = BS.
MatrixGaussian posterior_symmetric(const MatrixGaussian& prior,
                                   const ObservationSet& obs);

/// Inverse-mode posterior over H from the same data (roles of S,Y swapped).
MatrixGaussian posterior_inverse(const MatrixGaussian& prior,
                                 const ObservationSet& obs);

/// Exact Gaussian conditioning oracle on y = A^T v, noise-free limit.
///
/// The Gram A^T Sigma A is solved spectrally; eigenvalues at or below
/// 1e-12 * trace/K are truncated (this happens for the structurally singular
/// symmetric-prior Gram) and `regularized` reports that this occurred.
struct DenseConditioned {
  Vector mean;
  Matrix cov;
  bool regularized = false;
};

DenseConditioned dense_condition(const Vector& prior_mean,
                                 const Matrix& prior_cov, const Matrix& a,
                                 const Vector& y);

}  // namespace linuq
