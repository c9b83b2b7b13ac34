#pragma once

#include <Eigen/Dense>

#include "linuq/matrix_core.hpp"
#include "linuq/problem_gen.hpp"

namespace linuq::testing {

// Dense Kronecker product in the row-major vec convention used project-wide:
// (A (x) C)_{(ij),(kl)} = A_ik C_jl, so (A (x) C) vec(B) = vec(A B C^T).
inline Matrix kron_dense(const Matrix& a, const Matrix& c) {
  Matrix out(a.rows() * c.rows(), a.cols() * c.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * c.rows(), j * c.cols(), c.rows(), c.cols()) = a(i, j) * c;
    }
  }
  return out;
}

inline Matrix random_square(RandomStream& stream, Index n) {
  Matrix a(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) a(i, j) = stream.gaussian();
  }
  return a;
}

inline Matrix random_symmetric(RandomStream& stream, Index n) {
  return symmetrize(random_square(stream, n));
}

inline SpdMatrix random_spd_matrix(RandomStream& stream, Index n,
                                   double shift = 0.0) {
  const Matrix a = random_square(stream, n);
  const double ridge = shift > 0.0 ? shift : static_cast<double>(n);
  return SpdMatrix(a * a.transpose() + ridge * Matrix::Identity(n, n));
}

}  // namespace linuq::testing
