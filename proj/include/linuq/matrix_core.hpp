#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <vector>

namespace linuq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Tolerances shared by the library. Rank/nullspace assertions are relative
/// to the largest eigenvalue of the matrix under test.
constexpr double kRankTol = 1e-10;
constexpr double kSpdPivotTol = 1e-12;
constexpr double kThomasPivotTol = 1e-14;

/// Largest order for which dense N^2 x N^2 operators may be materialized.
/// These are oracle/test paths only; production code works with the N x N
/// factor throughout.
constexpr Index kDenseKroneckerGuard = 32;

/// Symmetric positive definite matrix, certified at construction.
///
/// Symmetry is exact by construction (the lower triangle is mirrored), and
/// definiteness is certified by a Cholesky factorization whose pivots must
/// stay above kSpdPivotTol * max(diag).
class SpdMatrix {
 public:
  explicit SpdMatrix(const Matrix& a);

  Index order() const { return mat_.rows(); }
  const Matrix& matrix() const { return mat_; }
  const Eigen::LLT<Matrix>& llt() const { return llt_; }

  template <typename Derived>
  auto solve(const Eigen::MatrixBase<Derived>& rhs) const {
    return llt_.solve(rhs).eval();
  }

  double operator()(Index i, Index j) const { return mat_(i, j); }

 private:
  Matrix mat_;
  Eigen::LLT<Matrix> llt_;
};

/// Symmetric tridiagonal matrix stored as diagonal + one off-diagonal.
class TridiagonalMatrix {
 public:
  TridiagonalMatrix(Vector diagonal, Vector off_diagonal);

  Index order() const { return diag_.size(); }
  const Vector& diagonal() const { return diag_; }
  const Vector& off_diagonal() const { return off_; }

  Vector multiply(const Vector& x) const;
  Matrix dense() const;

 private:
  Vector diag_;
  Vector off_;
};

/// Result of a tridiagonal solve. `used_dense_fallback` is set when a Thomas
/// pivot fell below tolerance and the system was re-solved with a dense
/// partially pivoted factorization.
struct TridiagonalSolve {
  Matrix solution;
  bool used_dense_fallback = false;
};

// vec(A) with row-major stacking: position i*cols + j holds A(i,j).
Vector vectorize(const Matrix& a);
Matrix unvectorize(const Vector& v, Index rows, Index cols);

/// (A + A^T) / 2. Throws on non-square input.
Matrix symmetrize(const Matrix& a);

/// Action of the symmetric Kronecker product:
/// (W (*) W) vec(K) = vec( (W K W^T + W^T K^T W) / 2 ).
Matrix sym_kron_apply(const Matrix& w, const Matrix& k);

/// Inverse action on a symmetric K, using (W (*) W)^{-1} = W^{-1} (*) W^{-1}.
Matrix sym_kron_solve(const SpdMatrix& w, const Matrix& k);

/// Dense N^2 x N^2 symmetric Kronecker product, entry
/// (iN+j, kN+l) = (W_ik W_jl + W_jk W_il) / 2. Oracle use only; guarded.
Matrix sym_kron_dense(const Matrix& w);

/// Dense N^2 x N^2 symmetrization operator Gamma with
/// Gamma_{ij,kl} = (delta_ik delta_jl + delta_il delta_jk) / 2.
Matrix symmetrizer_dense(Index n);

/// Weighted Frobenius norm ||A||_{F,W} = sqrt(tr(A W^{-1} A^T W^{-1})).
double weighted_frobenius(const Matrix& a, const SpdMatrix& w);

/// Thomas-algorithm solve of T x = rhs (multiple right-hand sides allowed).
/// Falls back to a dense pivoted solve when a pivot drops below
/// kThomasPivotTol * max|entry|.
TridiagonalSolve thomas_solve(const TridiagonalMatrix& t, const Matrix& rhs);

}  // namespace linuq
