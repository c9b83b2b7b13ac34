#include "linuq/gaussian.hpp"

#include <sstream>

namespace linuq {

namespace {

constexpr Index kDenseConditionGuard = 1024;

// Solves G X = rhs for symmetric positive (semi)definite G, preferring
// Cholesky and falling back to a pivoted LU when the factorization fails.
Matrix solve_gram(const Matrix& g, const Matrix& rhs, bool* fallback) {
  Eigen::LLT<Matrix> llt(symmetrize(g));
  if (llt.info() == Eigen::Success) {
    return llt.solve(rhs);
  }
  if (fallback != nullptr) *fallback = true;
  return g.partialPivLu().solve(rhs);
}

void check_full_rank(const Matrix& a, const char* what) {
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  qr.setThreshold(kRankTol);
  if (qr.rank() < a.cols()) {
    const auto& perm = qr.colsPermutation().indices();
    std::ostringstream msg;
    msg << what << ": rank deficient (rank " << qr.rank() << " of "
        << a.cols() << "), offending column " << perm(qr.rank());
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

MatrixGaussian MatrixGaussian::prior(const Matrix& mean, const SpdMatrix& w,
                                     CovStructure structure, BeliefMode mode) {
  if (mean.rows() != mean.cols() || mean.rows() != w.order()) {
    throw std::invalid_argument("MatrixGaussian: mean/covariance mismatch");
  }
  if (structure == CovStructure::kSymmetricKronecker &&
      !mean.isApprox(mean.transpose(), 0.0)) {
    throw std::invalid_argument(
        "MatrixGaussian: symmetric-Kronecker prior requires symmetric mean");
  }
  return MatrixGaussian{mean, w.matrix(), w.matrix(), structure, mode, false};
}

ObservationSet::ObservationSet(Matrix s, Matrix y, BeliefMode mode)
    : s_(std::move(s)), y_(std::move(y)), mode_(mode) {
  if (s_.rows() != y_.rows() || s_.cols() != y_.cols()) {
    throw std::invalid_argument("ObservationSet: S and Y shapes differ");
  }
  if (s_.cols() == 0) return;
  if (mode_ == BeliefMode::kDirect) {
    check_full_rank(s_, "ObservationSet S");
  } else {
    check_full_rank(y_, "ObservationSet Y");
  }
}

ObservationSet ObservationSet::head(Index m) const {
  return ObservationSet(s_.leftCols(m), y_.leftCols(m), mode_);
}

ObservationSet ObservationSet::tail(Index m) const {
  return ObservationSet(s_.rightCols(m), y_.rightCols(m), mode_);
}

MatrixGaussian posterior_asymmetric(const MatrixGaussian& prior,
                                    const ObservationSet& obs) {
  if (prior.structure != CovStructure::kKronecker) {
    throw std::invalid_argument("posterior_asymmetric: Kronecker prior required");
  }
  const Matrix& w = prior.cov_factor;
  const Matrix& s = obs.s();
  const Matrix ws = w * s;
  const Matrix gram = s.transpose() * ws;
  const Matrix delta = obs.y() - prior.mean * s;

  MatrixGaussian post = prior;
  const Matrix x = solve_gram(gram, Matrix(ws.transpose()), &post.gram_fallback);
  post.mean = prior.mean + delta * x;   // B0 + (Y - B0 S) G^{-1} S^T W
  post.cov_factor = w - ws * x;         // right factor; left factor stays W
  post.cov_left = prior.cov_left;
  return post;
}

MatrixGaussian posterior_symmetric(const MatrixGaussian& prior,
                                   const ObservationSet& obs) {
  if (prior.structure != CovStructure::kSymmetricKronecker) {
    throw std::invalid_argument(
        "posterior_symmetric: symmetric-Kronecker prior required");
  }
  if (!prior.mean.isApprox(prior.mean.transpose(), 0.0)) {
    throw std::invalid_argument("posterior_symmetric: asymmetric prior mean");
  }
  const Matrix& w = prior.cov_factor;
  const Matrix& s = obs.s();
  const Matrix u = w * s;
  const Matrix gram = s.transpose() * u;
  const Matrix delta = obs.y() - prior.mean * s;

  MatrixGaussian post = prior;
  const Matrix x = solve_gram(gram, Matrix(u.transpose()), &post.gram_fallback);
  const Matrix t1 = delta * x;
  const Matrix core = s.transpose() * delta;  // symmetric when data consistent
  post.mean = symmetrize(prior.mean + t1 + t1.transpose() -
                         x.transpose() * core * x);
  post.cov_factor = symmetrize(w - u * x);
  post.cov_left = post.cov_factor;
  return post;
}

MatrixGaussian posterior_inverse(const MatrixGaussian& prior,
                                 const ObservationSet& obs) {
  if (prior.mode != BeliefMode::kInverse) {
    throw std::invalid_argument("posterior_inverse: prior must be in inverse mode");
  }
  // Same conditioning with the roles of S and Y exchanged.
  ObservationSet swapped(obs.y(), obs.s(), BeliefMode::kDirect);
  MatrixGaussian as_direct = prior;
  as_direct.mode = BeliefMode::kDirect;
  MatrixGaussian post = posterior_symmetric(as_direct, swapped);
  post.mode = BeliefMode::kInverse;
  return post;
}

DenseConditioned dense_condition(const Vector& prior_mean,
                                 const Matrix& prior_cov, const Matrix& a,
                                 const Vector& y) {
  const Index d = prior_mean.size();
  if (d > kDenseConditionGuard) {
    throw std::invalid_argument("dense_condition: dimension guard exceeded");
  }
  if (prior_cov.rows() != d || prior_cov.cols() != d || a.rows() != d ||
      a.cols() != y.size()) {
    throw std::invalid_argument("dense_condition: shape mismatch");
  }
  DenseConditioned out;
  if (y.size() == 0) {
    out.mean = prior_mean;
    out.cov = prior_cov;
    return out;
  }
  const Matrix sa = prior_cov * a;
  const Matrix gram = symmetrize(a.transpose() * sa);
  const Index k = gram.rows();
  const double threshold = 1e-12 * gram.trace() / static_cast<double>(k);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  Vector inv = eig.eigenvalues();
  for (Index i = 0; i < k; ++i) {
    if (inv(i) > threshold) {
      inv(i) = 1.0 / inv(i);
    } else {
      inv(i) = 0.0;  // truncated mode
      out.regularized = true;
    }
  }
  const Matrix gram_pinv =
      eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  const Matrix gain = sa * gram_pinv;
  out.mean = prior_mean + gain * (y - a.transpose() * prior_mean);
  out.cov = symmetrize(prior_cov - gain * sa.transpose());
  return out;
}

}  // namespace linuq
