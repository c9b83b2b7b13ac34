#include "linuq/matrix_core.hpp"

#include <cmath>
#include <sstream>

namespace linuq {

SpdMatrix::SpdMatrix(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("SpdMatrix: input must be square");
  }
  mat_ = a;
  // Mirror the lower triangle so symmetry is exact, not just approximate.
  for (Index i = 0; i < mat_.rows(); ++i) {
    for (Index j = 0; j < i; ++j) {
      mat_(j, i) = mat_(i, j);
    }
  }
  llt_.compute(mat_);
  const double max_diag = mat_.diagonal().maxCoeff();
  if (llt_.info() != Eigen::Success || max_diag <= 0.0) {
    throw std::invalid_argument("SpdMatrix: Cholesky factorization failed");
  }
  const Matrix& l = llt_.matrixLLT();
  for (Index i = 0; i < mat_.rows(); ++i) {
    const double pivot = l(i, i) * l(i, i);
    if (!(pivot >= kSpdPivotTol * max_diag)) {
      std::ostringstream msg;
      msg << "SpdMatrix: pivot " << pivot << " at index " << i
          << " below tolerance " << kSpdPivotTol * max_diag;
      throw std::invalid_argument(msg.str());
    }
  }
}

TridiagonalMatrix::TridiagonalMatrix(Vector diagonal, Vector off_diagonal)
    : diag_(std::move(diagonal)), off_(std::move(off_diagonal)) {
  if (diag_.size() == 0) {
    throw std::invalid_argument("TridiagonalMatrix: empty diagonal");
  }
  if (off_.size() != diag_.size() - 1) {
    throw std::invalid_argument(
        "TridiagonalMatrix: off-diagonal must have order-1 entries");
  }
}

Vector TridiagonalMatrix::multiply(const Vector& x) const {
  const Index m = order();
  if (x.size() != m) {
    throw std::invalid_argument("TridiagonalMatrix::multiply: size mismatch");
  }
  Vector y = diag_.cwiseProduct(x);
  for (Index i = 0; i + 1 < m; ++i) {
    y(i) += off_(i) * x(i + 1);
    y(i + 1) += off_(i) * x(i);
  }
  return y;
}

Matrix TridiagonalMatrix::dense() const {
  const Index m = order();
  Matrix t = Matrix::Zero(m, m);
  t.diagonal() = diag_;
  for (Index i = 0; i + 1 < m; ++i) {
    t(i, i + 1) = off_(i);
    t(i + 1, i) = off_(i);
  }
  return t;
}

Vector vectorize(const Matrix& a) {
  Vector v(a.size());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      v(i * a.cols() + j) = a(i, j);
    }
  }
  return v;
}

Matrix unvectorize(const Vector& v, Index rows, Index cols) {
  if (v.size() != rows * cols) {
    throw std::invalid_argument("unvectorize: length does not match shape");
  }
  Matrix a(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      a(i, j) = v(i * cols + j);
    }
  }
  return a;
}

Matrix symmetrize(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("symmetrize: input must be square");
  }
  return 0.5 * (a + a.transpose());
}

Matrix sym_kron_apply(const Matrix& w, const Matrix& k) {
  if (w.rows() != w.cols() || k.rows() != k.cols() || w.rows() != k.rows()) {
    throw std::invalid_argument("sym_kron_apply: dimension mismatch");
  }
  return 0.5 * (w * k * w.transpose() + w.transpose() * k.transpose() * w);
}

Matrix sym_kron_solve(const SpdMatrix& w, const Matrix& k) {
  if (k.rows() != w.order() || k.cols() != w.order()) {
    throw std::invalid_argument("sym_kron_solve: dimension mismatch");
  }
  // W^{-1} K W^{-1}, evaluated with two triangular solves.
  const Matrix winv_k = w.solve(k);
  const Matrix result = w.solve(Matrix(winv_k.transpose())).transpose();
  return symmetrize(result);
}

Matrix sym_kron_dense(const Matrix& w) {
  if (w.rows() != w.cols()) {
    throw std::invalid_argument("sym_kron_dense: input must be square");
  }
  const Index n = w.rows();
  if (n > kDenseKroneckerGuard) {
    throw std::invalid_argument("sym_kron_dense: size guard exceeded");
  }
  Matrix out(n * n, n * n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      for (Index k = 0; k < n; ++k) {
        for (Index l = 0; l < n; ++l) {
          out(i * n + j, k * n + l) =
              0.5 * (w(i, k) * w(j, l) + w(j, k) * w(i, l));
        }
      }
    }
  }
  return out;
}

Matrix symmetrizer_dense(Index n) {
  if (n > kDenseKroneckerGuard) {
    throw std::invalid_argument("symmetrizer_dense: size guard exceeded");
  }
  Matrix g = Matrix::Zero(n * n, n * n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      g(i * n + j, i * n + j) += 0.5;
      g(i * n + j, j * n + i) += 0.5;
    }
  }
  return g;
}

double weighted_frobenius(const Matrix& a, const SpdMatrix& w) {
  if (a.rows() != w.order() || a.cols() != w.order()) {
    throw std::invalid_argument("weighted_frobenius: dimension mismatch");
  }
  const Matrix winv_at = w.solve(Matrix(a.transpose()));
  const double sq = w.solve(Matrix(a * winv_at)).trace();
  return std::sqrt(std::max(sq, 0.0));
}

TridiagonalSolve thomas_solve(const TridiagonalMatrix& t, const Matrix& rhs) {
  const Index m = t.order();
  if (rhs.rows() != m) {
    throw std::invalid_argument("thomas_solve: right-hand side size mismatch");
  }
  const Vector& d = t.diagonal();
  const Vector& e = t.off_diagonal();
  double max_entry = d.cwiseAbs().maxCoeff();
  if (m > 1) max_entry = std::max(max_entry, e.cwiseAbs().maxCoeff());
  const double pivot_tol = kThomasPivotTol * max_entry;

  Vector c_star(m > 1 ? m - 1 : 0);
  Matrix x = rhs;
  double pivot = d(0);
  bool breakdown = std::abs(pivot) <= pivot_tol;
  if (!breakdown) {
    x.row(0) /= pivot;
    for (Index i = 1; i < m; ++i) {
      c_star(i - 1) = e(i - 1) / pivot;
      pivot = d(i) - e(i - 1) * c_star(i - 1);
      if (std::abs(pivot) <= pivot_tol) {
        breakdown = true;
        break;
      }
      x.row(i) = (x.row(i) - e(i - 1) * x.row(i - 1)) / pivot;
    }
  }
  if (breakdown) {
    // Near-singular Gram matrix; re-solve densely with partial pivoting.
    TridiagonalSolve out;
    out.solution = t.dense().partialPivLu().solve(rhs);
    out.used_dense_fallback = true;
    return out;
  }
  for (Index i = m - 2; i >= 0; --i) {
    x.row(i) -= c_star(i) * x.row(i + 1);
  }
  return TridiagonalSolve{std::move(x), false};
}

}  // namespace linuq
