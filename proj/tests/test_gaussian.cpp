#include "linuq/gaussian.hpp"

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace linuq {
namespace {

using testing::kron_dense;
using testing::random_spd_matrix;
using testing::random_square;
using testing::random_symmetric;

Matrix observation_operator(Index n, const Matrix& s) {
  // A with A^T vec(B) = vec(BS): A = I (x) S.
  return kron_dense(Matrix::Identity(n, n), s);
}

TEST(DenseCondition, FullObservationCollapses) {
  RandomStream stream(1);
  const Index d = 5;
  const SpdMatrix sigma = random_spd_matrix(stream, d);
  const Vector mu = stream.gaussian_vector(d);
  const Vector y = stream.gaussian_vector(d);
  const auto post =
      dense_condition(mu, sigma.matrix(), Matrix::Identity(d, d), y);
  EXPECT_LT((post.mean - y).norm(), 1e-9);
  EXPECT_LT(post.cov.norm(), 1e-8);
}

TEST(DenseCondition, NoObservationsReturnsPrior) {
  RandomStream stream(2);
  const Index d = 4;
  const SpdMatrix sigma = random_spd_matrix(stream, d);
  const Vector mu = stream.gaussian_vector(d);
  const auto post =
      dense_condition(mu, sigma.matrix(), Matrix::Zero(d, 0), Vector::Zero(0));
  EXPECT_EQ(post.mean, mu);
  EXPECT_EQ(post.cov, sigma.matrix());
}

TEST(DenseCondition, MeanSolvesConstrainedLeastSquares) {
  // The posterior mean minimizes ||v - mu||^2_Sigma subject to A^T v = y;
  // oracle via the KKT system.
  RandomStream stream(3);
  const Index d = 6, k = 2;
  const SpdMatrix sigma = random_spd_matrix(stream, d);
  const Vector mu = stream.gaussian_vector(d);
  Matrix a(d, k);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < k; ++j) a(i, j) = stream.gaussian();
  const Vector y = stream.gaussian_vector(k);

  const auto post = dense_condition(mu, sigma.matrix(), a, y);

  Matrix kkt = Matrix::Zero(d + k, d + k);
  kkt.topLeftCorner(d, d) = sigma.solve(Matrix::Identity(d, d));
  kkt.topRightCorner(d, k) = a;
  kkt.bottomLeftCorner(k, d) = a.transpose();
  Vector rhs(d + k);
  rhs.head(d) = sigma.solve(mu);
  rhs.tail(k) = y;
  const Vector sol = kkt.partialPivLu().solve(rhs).head(d);
  EXPECT_LT((post.mean - sol).norm() / sol.norm(), 1e-9);
}

TEST(PosteriorAsymmetric, BroydenRankOne) {
  // W = I, M = 1 reproduces Broyden's rank-1 update.
  RandomStream stream(4);
  const Index n = 5;
  const Matrix b0 = random_square(stream, n);
  const Matrix b_true = random_square(stream, n);
  const Vector s = stream.gaussian_vector(n);
  const Vector y = b_true * s;

  const auto prior = MatrixGaussian::prior(
      b0, SpdMatrix(Matrix::Identity(n, n)), CovStructure::kKronecker);
  const auto post = posterior_asymmetric(prior, ObservationSet(s, y));
  const Matrix broyden = b0 + (y - b0 * s) * s.transpose() / s.squaredNorm();
  EXPECT_LT((post.mean - broyden).norm() / broyden.norm(), 1e-12);
}

TEST(PosteriorAsymmetric, ZeroResidualKeepsMean) {
  RandomStream stream(5);
  const Index n = 4, m = 2;
  const Matrix b0 = random_square(stream, n);
  const SpdMatrix w = random_spd_matrix(stream, n);
  Matrix s(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) s(i, j) = stream.gaussian();
  const auto prior = MatrixGaussian::prior(b0, w, CovStructure::kKronecker);
  const auto post = posterior_asymmetric(prior, ObservationSet(s, b0 * s));
  EXPECT_LT((post.mean - b0).norm(), 1e-10 * b0.norm());
}

TEST(PosteriorAsymmetric, MatchesDenseOracle) {
  RandomStream stream(6);
  const Index n = 4, m = 2;
  const SpdMatrix w = random_spd_matrix(stream, n);
  const Matrix b0 = random_square(stream, n);
  const Matrix b_true = random_square(stream, n);
  Matrix s(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) s(i, j) = stream.gaussian();
  const Matrix y = b_true * s;

  const auto prior = MatrixGaussian::prior(b0, w, CovStructure::kKronecker);
  const auto post = posterior_asymmetric(prior, ObservationSet(s, y));

  const Matrix a = observation_operator(n, s);
  const auto oracle = dense_condition(
      vectorize(b0), kron_dense(w.matrix(), w.matrix()), a, vectorize(y));
  EXPECT_LT((oracle.mean - vectorize(post.mean)).norm() / post.mean.norm(),
            1e-10);
  const Matrix cov = kron_dense(post.cov_left, post.cov_factor);
  EXPECT_LT((oracle.cov - cov).norm() / cov.norm(), 1e-10);
}

TEST(PosteriorSymmetric, FullRankRecoversTruth) {
  RandomStream stream(7);
  const Index n = 6;
  const Matrix b_true = random_symmetric(stream, n);
  const SpdMatrix w = random_spd_matrix(stream, n);
  const Matrix s = random_projections(n, n, stream);
  const auto prior = MatrixGaussian::prior(Matrix::Identity(n, n), w,
                                           CovStructure::kSymmetricKronecker);
  const auto post = posterior_symmetric(prior, ObservationSet(s, b_true * s));
  EXPECT_LT((post.mean - b_true).norm() / b_true.norm(), 1e-8);
}

TEST(PosteriorSymmetric, MatchesDenseOracle) {
  RandomStream stream(8);
  const Index n = 4, m = 2;
  const SpdMatrix w = random_spd_matrix(stream, n);
  const Matrix b0 = random_symmetric(stream, n);
  const Matrix b_true = random_symmetric(stream, n);
  const Matrix s = random_projections(n, m, stream);
  const Matrix y = b_true * s;

  const auto prior =
      MatrixGaussian::prior(b0, w, CovStructure::kSymmetricKronecker);
  const auto post = posterior_symmetric(prior, ObservationSet(s, y));
  EXPECT_LT((post.mean * s - y).norm() / y.norm(), 1e-9);
  EXPECT_EQ(post.mean, Matrix(post.mean.transpose()));

  const Matrix a = observation_operator(n, s);
  const auto oracle = dense_condition(
      vectorize(b0), sym_kron_dense(w.matrix()), a, vectorize(y));
  EXPECT_TRUE(oracle.regularized);  // symmetric data redundancy
  EXPECT_LT((oracle.mean - vectorize(post.mean)).norm() / post.mean.norm(),
            1e-10);
  const Matrix cov = sym_kron_dense(post.cov_factor);
  EXPECT_LT((oracle.cov - cov).norm() / (cov.norm() + 1e-30), 1e-10);
}

TEST(PosteriorSymmetric, CovarianceNullspaceAndRank) {
  RandomStream stream(9);
  const Index n = 6, m = 3;
  const SpdMatrix w = random_spd_matrix(stream, n);
  const Matrix b_true = random_symmetric(stream, n);
  const Matrix s = random_projections(n, m, stream);
  const auto prior = MatrixGaussian::prior(Matrix::Identity(n, n), w,
                                           CovStructure::kSymmetricKronecker);
  const auto post = posterior_symmetric(prior, ObservationSet(s, b_true * s));

  EXPECT_LT((post.cov_factor * s).norm(), 1e-10 * post.cov_factor.norm());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(post.cov_factor);
  const double lmax = eig.eigenvalues().maxCoeff();
  Index rank = 0;
  for (Index i = 0; i < n; ++i) {
    if (eig.eigenvalues()(i) > kRankTol * lmax) ++rank;
  }
  EXPECT_EQ(rank, n - m);
}

TEST(PosteriorSymmetric, MartingaleBatching) {
  RandomStream stream(10);
  const Index n = 6, m = 4;
  const SpdMatrix w = random_spd_matrix(stream, n);
  const Matrix b_true = random_symmetric(stream, n);
  const Matrix s = random_projections(n, m, stream);
  const ObservationSet obs(s, b_true * s);

  const auto prior = MatrixGaussian::prior(Matrix::Identity(n, n), w,
                                           CovStructure::kSymmetricKronecker);
  const auto batch = posterior_symmetric(prior, obs);
  const auto first = posterior_symmetric(prior, obs.head(m / 2));
  const auto second = posterior_symmetric(first, obs.tail(m - m / 2));

  EXPECT_LT((batch.mean - second.mean).norm() / batch.mean.norm(), 1e-9);
  EXPECT_LT((batch.cov_factor - second.cov_factor).norm() /
                (batch.cov_factor.norm() + 1e-30),
            1e-9);
}

TEST(PosteriorSymmetric, ExactWithinSpan) {
  RandomStream stream(11);
  const Index n = 7, m = 3;
  const SpdMatrix w = random_spd_matrix(stream, n);
  const Matrix b_true = random_symmetric(stream, n);
  const Matrix s = random_projections(n, m, stream);
  const auto prior = MatrixGaussian::prior(Matrix::Identity(n, n), w,
                                           CovStructure::kSymmetricKronecker);
  const auto post = posterior_symmetric(prior, ObservationSet(s, b_true * s));
  const Vector coeffs = stream.gaussian_vector(m);
  const Vector v = s * coeffs;
  EXPECT_LT((post.mean * v - b_true * v).norm() / (b_true * v).norm(), 1e-8);
}

TEST(PosteriorSymmetric, RejectsAsymmetricMean) {
  RandomStream stream(12);
  const Index n = 3;
  const SpdMatrix w = random_spd_matrix(stream, n);
  MatrixGaussian prior = MatrixGaussian::prior(
      Matrix::Identity(n, n), w, CovStructure::kSymmetricKronecker);
  prior.mean(0, 1) += 1.0;  // break symmetry after construction
  const Matrix s = random_projections(n, 1, stream);
  const Matrix y = s;
  EXPECT_THROW(posterior_symmetric(prior, ObservationSet(s, y)),
               std::invalid_argument);
}

TEST(ObservationSet, SymmetricTruthGivesSymmetricGram) {
  // With symmetric ground truth, S^T Y = S^T B S is symmetric.
  RandomStream stream(16);
  const Index n = 6, m = 3;
  const Matrix b_true = random_symmetric(stream, n);
  const Matrix s = random_projections(n, m, stream);
  const ObservationSet obs(s, b_true * s);
  const Matrix sy = obs.s().transpose() * obs.y();
  EXPECT_LT((sy - sy.transpose()).norm() / sy.norm(), 1e-8);
}

TEST(ObservationSet, RejectsRankDeficientNamingColumn) {
  Matrix s(3, 2);
  s << 1, 2, 0, 0, 0, 0;  // second column is a multiple of the first
  try {
    ObservationSet obs(s, s);
    FAIL() << "expected rank rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("column"), std::string::npos);
  }
}

TEST(PosteriorInverse, SwapsRoles) {
  RandomStream stream(13);
  const Index n = 4, m = 2;
  const SpdMatrix w = random_spd_matrix(stream, n);
  const Matrix h0 = random_symmetric(stream, n);
  const SpdMatrix b_spd = random_spd_matrix(stream, n);
  const Matrix h_true = b_spd.solve(Matrix::Identity(n, n));
  const Matrix y = random_projections(n, m, stream);
  const Matrix s = h_true * y;

  const auto prior = MatrixGaussian::prior(
      h0, w, CovStructure::kSymmetricKronecker, BeliefMode::kInverse);
  const auto post = posterior_inverse(prior, ObservationSet(s, y, BeliefMode::kInverse));
  EXPECT_LT((post.mean * y - s).norm() / s.norm(), 1e-9);

  // Structural duality: same result as posterior_symmetric on (Y, S).
  auto direct_prior = prior;
  direct_prior.mode = BeliefMode::kDirect;
  const auto swapped = posterior_symmetric(direct_prior, ObservationSet(y, s));
  EXPECT_LT((post.mean - swapped.mean).norm() / swapped.mean.norm(), 1e-12);

  // S = H0 Y leaves the mean unchanged.
  const auto fixed = posterior_inverse(
      prior, ObservationSet(h0 * y, y, BeliefMode::kInverse));
  EXPECT_LT((fixed.mean - h0).norm() / h0.norm(), 1e-10);
}

TEST(PosteriorInverse, MatchesDenseOracle) {
  RandomStream stream(14);
  const Index n = 4, m = 2;
  const SpdMatrix w = random_spd_matrix(stream, n);
  const Matrix h0 = random_symmetric(stream, n);
  const SpdMatrix b_spd = random_spd_matrix(stream, n);
  const Matrix h_true = b_spd.solve(Matrix::Identity(n, n));
  const Matrix y = random_projections(n, m, stream);
  const Matrix s = h_true * y;

  const auto prior = MatrixGaussian::prior(
      h0, w, CovStructure::kSymmetricKronecker, BeliefMode::kInverse);
  const auto post =
      posterior_inverse(prior, ObservationSet(s, y, BeliefMode::kInverse));

  const Matrix a = observation_operator(n, y);
  const auto oracle = dense_condition(
      vectorize(h0), sym_kron_dense(w.matrix()), a, vectorize(s));
  EXPECT_LT((oracle.mean - vectorize(post.mean)).norm() / post.mean.norm(),
            1e-10);
}

// Oracle equivalence across small sizes, mirroring the acceptance sweep.
TEST(PosteriorSymmetric, OracleSweepSmallSizes) {
  RandomStream stream(15);
  for (Index n = 3; n <= 6; ++n) {
    for (Index m = 1; m <= std::min<Index>(3, n - 1); ++m) {
      const SpdMatrix w = random_spd_matrix(stream, n);
      const Matrix b0 = random_symmetric(stream, n);
      const Matrix b_true = random_symmetric(stream, n);
      const Matrix s = random_projections(n, m, stream);
      const Matrix y = b_true * s;
      const auto prior =
          MatrixGaussian::prior(b0, w, CovStructure::kSymmetricKronecker);
      const auto post = posterior_symmetric(prior, ObservationSet(s, y));
      const auto oracle =
          dense_condition(vectorize(b0), sym_kron_dense(w.matrix()),
                          observation_operator(n, s), vectorize(y));
      EXPECT_LT((oracle.mean - vectorize(post.mean)).norm() /
                    vectorize(post.mean).norm(),
                1e-10);
      const Matrix cov = sym_kron_dense(post.cov_factor);
      EXPECT_LT((oracle.cov - cov).norm() / (cov.norm() + 1e-30), 1e-10);
    }
  }
}

}  // namespace
}  // namespace linuq
