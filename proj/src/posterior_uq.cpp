#include "linuq/posterior_uq.hpp"

#include <cmath>
#include <sstream>

namespace linuq {

namespace {

constexpr Index kDenseMaterializeGuard = 2048;

// Residual columns retained for Fbar: all pre-final residuals, plus the
// final one only when the run stopped without converging (it still carries
// a genuine direction then).
Matrix kept_fbar(const CgTrace& trace) {
  const Index m = trace.steps;
  Index keep = m;
  if (!trace.converged && m < trace.dimension() && m > 0) keep = m + 1;
  if (m == 0) keep = 0;
  Matrix fbar(trace.dimension(), keep);
  for (Index i = 0; i < keep; ++i) {
    const double nrm = trace.residual_norms(i);
    if (nrm <= 0.0) {
      throw std::runtime_error("posterior: zero residual norm in trace");
    }
    fbar.col(i) = trace.residuals.col(i) / nrm;
  }
  return fbar;
}

Matrix symmetric_inverse(const Matrix& a, bool* fallback) {
  Eigen::LLT<Matrix> llt(symmetrize(a));
  if (llt.info() == Eigen::Success) {
    return llt.solve(Matrix::Identity(a.rows(), a.cols()));
  }
  if (fallback != nullptr) *fallback = true;
  return a.partialPivLu().solve(Matrix::Identity(a.rows(), a.cols()));
}

double trace_of_product(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b.transpose()).sum();
}

}  // namespace

OmegaSeries omega_series(const CgTrace& trace, OmegaMode mode) {
  const Index m = trace.steps;
  OmegaSeries out;
  out.values.resize(std::max<Index>(m - 1, 0));
  if (m < 2) {
    out.values.resize(0);
    return out;
  }
  const Matrix& s = trace.directions;
  const Matrix& f = trace.residuals;
  const double guard = 1e-14 * trace.residual_norms(0);
  // Denominators s_i^T F_{i-1} of the span-projection sum.
  Vector den(m);
  for (Index i = 0; i < m; ++i) den(i) = s.col(i).dot(f.col(i));
  Index produced = 0;
  for (Index k = 1; k < m; ++k) {
    double scale = 0.0;
    switch (mode) {
      case OmegaMode::kRetrospective:
        scale = trace.residual_norms(k + 1);
        break;
      case OmegaMode::kPredictive:
        scale = trace.residual_norms(k);
        break;
      case OmegaMode::kPredictiveGeometric:
        scale = trace.residual_norms(k) * trace.residual_norms(k) /
                trace.residual_norms(k - 1);
        break;
    }
    if (scale < guard) {
      out.truncated = true;
      break;
    }
    const Vector num = s.leftCols(k).transpose() * f.col(k);
    double acc = 0.0;
    for (Index i = 0; i < k; ++i) acc += num(i) * num(i) / den(i);
    acc -= s.col(k).dot(f.col(k));
    double value = acc / (scale * scale);
    if (value < 0.0) {
      value = 0.0;
      ++out.floored;
    }
    out.values(produced++) = value;
  }
  out.values.conservativeResize(produced);
  return out;
}

OmegaEstimator OmegaEstimator::stationary() { return OmegaEstimator{}; }

OmegaEstimator OmegaEstimator::linear_trend(Index horizon) {
  OmegaEstimator e;
  e.rule = Rule::kLinearTrend;
  e.horizon = horizon;
  return e;
}

OmegaEstimator OmegaEstimator::structured(Index head_steps, double multiplier) {
  OmegaEstimator e;
  e.rule = Rule::kStructured;
  e.head_steps = head_steps;
  e.multiplier = multiplier;
  return e;
}

double estimate_omega(const OmegaSeries& series, const OmegaEstimator& rule) {
  const Index n = series.values.size();
  if (n == 0) {
    throw std::invalid_argument("estimate_omega: empty series");
  }
  const double mean = series.values.mean();
  switch (rule.rule) {
    case OmegaEstimator::Rule::kStationary:
      return mean;
    case OmegaEstimator::Rule::kLinearTrend: {
      if (n < 2) {
        throw std::invalid_argument(
            "estimate_omega: linear trend needs at least 2 points");
      }
      // Least-squares line through (i, value_i), i = 1..n.
      const double ti = 0.5 * static_cast<double>(n + 1);
      double sxx = 0.0, sxy = 0.0;
      for (Index i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i + 1) - ti;
        sxx += dx * dx;
        sxy += dx * (series.values(i) - mean);
      }
      const double a = sxy / sxx;
      const double b = mean - a * ti;
      // Expected largest value, floored at the stationary mean.
      return std::max(a * static_cast<double>(rule.horizon) + b, mean);
    }
    case OmegaEstimator::Rule::kStructured: {
      const Index current_step = n + 1;
      return current_step <= rule.head_steps ? mean * rule.multiplier : mean;
    }
  }
  throw std::logic_error("estimate_omega: unreachable");
}

double lambda_max_estimate(const CgTrace& trace) {
  const Index m = trace.steps;
  if (m == 0) {
    throw std::invalid_argument("lambda_max_estimate: empty trace");
  }
  const Vector d = trace.gram_diagonal();
  double lam = 0.0;
  for (Index i = 0; i < m; ++i) {
    const double ss = trace.directions.col(i).squaredNorm();
    lam = std::max(lam, d(i) / ss);
    const double yy = trace.residual_norms(i + 1) * trace.residual_norms(i + 1) +
                      trace.residual_norms(i) * trace.residual_norms(i);
    lam = std::max(lam, yy / d(i));
  }
  // Largest Ritz value of the Lanczos tridiagonal assembled from the CG
  // coefficients; a lower bound on lambda_max that sharpens quickly.
  Vector diag(m);
  Vector off(std::max<Index>(m - 1, 0));
  for (Index k = 0; k < m; ++k) {
    const double ak = trace.step_lengths(k);
    double beta_prev = 0.0;
    if (k > 0) {
      const double r = trace.residual_norms(k) / trace.residual_norms(k - 1);
      beta_prev = r * r / trace.step_lengths(k - 1);
    }
    diag(k) = 1.0 / ak + beta_prev;
    if (k + 1 < m) {
      off(k) = trace.residual_norms(k + 1) / trace.residual_norms(k) / ak;
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig;
  eig.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
  if (eig.info() == Eigen::Success) {
    lam = std::max(lam, eig.eigenvalues().maxCoeff());
  }
  return lam;
}

double estimate_alpha(const CgTrace& trace, double safety) {
  if (safety <= 0.0 || safety >= 1.0) {
    throw std::invalid_argument("estimate_alpha: safety must be in (0,1)");
  }
  return safety / lambda_max_estimate(trace);
}

PosteriorModel bfgs_cg_posterior(std::shared_ptr<const CgTrace> trace,
                                 double omega_sq, double h0_scale) {
  if (omega_sq < 0.0) {
    throw std::invalid_argument("bfgs_cg_posterior: omega^2 must be >= 0");
  }
  const CgTrace& t = *trace;
  PosteriorModel model;
  model.prior_kind_ = PriorKind::kBfgsCg;
  model.alpha_ = h0_scale;
  model.omega_sq_ = omega_sq;
  model.n_ = t.dimension();
  model.m_ = t.steps;

  model.fbar_ = kept_fbar(t);
  model.fbar_gram_ = model.fbar_.transpose() * model.fbar_;

  if (t.steps > 0) {
    const Matrix& s = t.directions;
    const Matrix y = t.y_columns();
    const Matrix u = s - h0_scale * y;
    const Matrix gram = symmetrize(s.transpose() * y);
    const Matrix core = symmetrize(y.transpose() * u);
    const Matrix gram_inv = symmetric_inverse(gram, &model.dense_fallback_);

    // H_M = a I + [S U] Z [S U]^T with
    // Z = [[-G^{-1} K G^{-1}, G^{-1}], [G^{-1}, 0]].
    const Index m = t.steps;
    Matrix basis(model.n_, 2 * m);
    basis.leftCols(m) = s;
    basis.rightCols(m) = u;
    Matrix z = Matrix::Zero(2 * m, 2 * m);
    z.topLeftCorner(m, m) = -gram_inv * core * gram_inv;
    z.topRightCorner(m, m) = gram_inv;
    z.bottomLeftCorner(m, m) = gram_inv;
    model.mean_term_.v = std::move(basis);
    model.mean_term_.z = symmetrize(z);
    model.mean_term_.vz = model.mean_term_.v * model.mean_term_.z;
  }
  PosteriorModel::recompose_omega(model);
  return model;
}

PosteriorModel standardized_norm_posterior(std::shared_ptr<const CgTrace> trace,
                                           double alpha, double omega_sq) {
  const CgTrace& t = *trace;
  if (omega_sq < 0.0) {
    throw std::invalid_argument(
        "standardized_norm_posterior: omega^2 must be >= 0");
  }
  if (t.steps > 0 && alpha >= 1.0 / lambda_max_estimate(t)) {
    std::ostringstream msg;
    msg << "standardized_norm_posterior: alpha " << alpha
        << " is not below the 1/lambda_max estimate "
        << 1.0 / lambda_max_estimate(t);
    throw std::invalid_argument(msg.str());
  }
  PosteriorModel model;
  model.prior_kind_ = PriorKind::kStandardizedNorm;
  model.alpha_ = alpha;
  model.omega_sq_ = omega_sq;
  model.n_ = t.dimension();
  model.m_ = t.steps;

  model.fbar_ = kept_fbar(t);
  model.fbar_gram_ = model.fbar_.transpose() * model.fbar_;

  if (t.steps > 0) {
    const Index m = t.steps;
    const Matrix& s = t.directions;
    const Matrix y = t.y_columns();
    const Vector d = t.gram_diagonal();
    const Vector ynorm = t.y_column_norms();

    // Equilibrated tridiagonal Gram K~ = D_y^{-1} (Y^T S - a Y^T Y) D_y^{-1}.
    Vector kdiag(m);
    Vector koff(std::max<Index>(m - 1, 0));
    for (Index i = 0; i < m; ++i) {
      const double yy = t.residual_norms(i + 1) * t.residual_norms(i + 1) +
                        t.residual_norms(i) * t.residual_norms(i);
      kdiag(i) = (d(i) - alpha * yy) / (ynorm(i) * ynorm(i));
      if (i + 1 < m) {
        koff(i) = alpha * t.residual_norms(i + 1) * t.residual_norms(i + 1) /
                  (ynorm(i) * ynorm(i + 1));
      }
    }
    const TridiagonalMatrix k_eq(kdiag, koff);
    TridiagonalSolve inv = thomas_solve(k_eq, Matrix::Identity(m, m));
    model.dense_fallback_ = inv.used_dense_fallback;
    const Matrix k_inv = symmetrize(inv.solution);

    Matrix u_eq = s - alpha * y;
    for (Index i = 0; i < m; ++i) u_eq.col(i) /= ynorm(i);

    model.mean_term_.v = std::move(u_eq);
    model.mean_term_.z = k_inv;
    model.mean_term_.vz = model.mean_term_.v * k_inv;

    // Span part of W(Omega) minus the mean's low-rank part:
    // [S, Ueq] blkdiag((S^T Y)^{-1}, -Kinv) [S, Ueq]^T.
    const Matrix gram = symmetrize(s.transpose() * y);
    const Matrix gram_inv = symmetric_inverse(gram, &model.dense_fallback_);
    Matrix basis(model.n_, 2 * m);
    basis.leftCols(m) = s;
    basis.rightCols(m) = model.mean_term_.v;
    Matrix z = Matrix::Zero(2 * m, 2 * m);
    z.topLeftCorner(m, m) = gram_inv;
    z.bottomRightCorner(m, m) = -k_inv;
    model.span_term_.v = std::move(basis);
    model.span_term_.z = std::move(z);
    model.span_term_.vz = model.span_term_.v * model.span_term_.z;
  }
  PosteriorModel::recompose_omega(model);
  return model;
}

void PosteriorModel::recompose_omega(PosteriorModel& model) {
  const double om2 = model.omega_sq_;
  // omega^2 (I - P)(I - P) = omega^2 I - fbar [omega^2 (2I - G_f)] fbar^T.
  if (model.fbar_.cols() > 0) {
    const Index k = model.fbar_.cols();
    model.fbar_term_.v = model.fbar_;
    model.fbar_term_.z =
        -om2 * (2.0 * Matrix::Identity(k, k) - model.fbar_gram_);
    model.fbar_term_.vz = model.fbar_term_.v * model.fbar_term_.z;
  } else {
    model.fbar_term_ = Term{};
  }
  model.w_iso_ = model.prior_kind_ == PriorKind::kBfgsCg
                     ? om2
                     : om2 - model.alpha_;
}

PosteriorModel PosteriorModel::with_omega(double omega_sq) const {
  if (omega_sq < 0.0) {
    throw std::invalid_argument("with_omega: omega^2 must be >= 0");
  }
  PosteriorModel copy = *this;
  copy.omega_sq_ = omega_sq;
  recompose_omega(copy);
  return copy;
}

Vector PosteriorModel::apply_mean(const Vector& v) const {
  if (v.size() != n_) {
    throw std::invalid_argument("apply_mean: dimension mismatch");
  }
  Vector out = alpha_ * v;
  if (mean_term_.v.cols() > 0) {
    out.noalias() += mean_term_.vz * (mean_term_.v.transpose() * v);
  }
  return out;
}

Vector PosteriorModel::apply_cov_factor(const Vector& v) const {
  if (v.size() != n_) {
    throw std::invalid_argument("apply_cov_factor: dimension mismatch");
  }
  Vector out = w_iso_ * v;
  if (prior_kind_ == PriorKind::kStandardizedNorm && span_term_.v.cols() > 0) {
    out.noalias() += span_term_.vz * (span_term_.v.transpose() * v);
  }
  if (fbar_term_.v.cols() > 0) {
    out.noalias() += fbar_term_.vz * (fbar_term_.v.transpose() * v);
  }
  return out;
}

double PosteriorModel::term_entry(const Term& t, Index i, Index j) const {
  if (t.v.cols() == 0) return 0.0;
  return t.vz.row(i).dot(t.v.row(j));
}

double PosteriorModel::mean_entry(Index i, Index j) const {
  double out = (i == j) ? alpha_ : 0.0;
  return out + term_entry(mean_term_, i, j);
}

double PosteriorModel::cov_factor_entry(Index i, Index j) const {
  double out = (i == j) ? w_iso_ : 0.0;
  if (prior_kind_ == PriorKind::kStandardizedNorm) {
    out += term_entry(span_term_, i, j);
  }
  return out + term_entry(fbar_term_, i, j);
}

Vector PosteriorModel::cov_factor_diagonal() const {
  Vector out = Vector::Constant(n_, w_iso_);
  if (prior_kind_ == PriorKind::kStandardizedNorm && span_term_.v.cols() > 0) {
    out += span_term_.vz.cwiseProduct(span_term_.v).rowwise().sum();
  }
  if (fbar_term_.v.cols() > 0) {
    out += fbar_term_.vz.cwiseProduct(fbar_term_.v).rowwise().sum();
  }
  return out;
}

Matrix PosteriorModel::mean_dense() const {
  if (n_ > kDenseMaterializeGuard) {
    throw std::invalid_argument("mean_dense: materialization guard exceeded");
  }
  Matrix out = alpha_ * Matrix::Identity(n_, n_);
  if (mean_term_.v.cols() > 0) {
    out.noalias() += mean_term_.vz * mean_term_.v.transpose();
  }
  return symmetrize(out);
}

Matrix PosteriorModel::cov_factor_dense() const {
  if (n_ > kDenseMaterializeGuard) {
    throw std::invalid_argument(
        "cov_factor_dense: materialization guard exceeded");
  }
  Matrix out = w_iso_ * Matrix::Identity(n_, n_);
  if (prior_kind_ == PriorKind::kStandardizedNorm && span_term_.v.cols() > 0) {
    out.noalias() += span_term_.vz * span_term_.v.transpose();
  }
  if (fbar_term_.v.cols() > 0) {
    out.noalias() += fbar_term_.vz * fbar_term_.v.transpose();
  }
  return symmetrize(out);
}

Matrix PosteriorModel::span_part_dense() const {
  if (n_ > kDenseMaterializeGuard) {
    throw std::invalid_argument(
        "span_part_dense: materialization guard exceeded");
  }
  if (m_ == 0) return Matrix::Zero(n_, n_);
  if (prior_kind_ == PriorKind::kStandardizedNorm) {
    const Index m = m_;
    return symmetrize(span_term_.vz.leftCols(m) *
                      span_term_.v.leftCols(m).transpose());
  }
  // BFGS model: rebuild from the mean basis (S occupies the left block).
  const Matrix& s = mean_term_.v.leftCols(m_);
  bool unused = false;
  const Matrix gram_inv = symmetric_inverse(
      Matrix(s.transpose() * (mean_term_.v.leftCols(m_) -
                              mean_term_.v.rightCols(m_)) / alpha_),
      &unused);
  return symmetrize(s * gram_inv * s.transpose());
}

Matrix PosteriorModel::w_of_omega_dense(double omega_sq) const {
  if (n_ > kDenseMaterializeGuard) {
    throw std::invalid_argument(
        "w_of_omega_dense: materialization guard exceeded");
  }
  Matrix w = span_part_dense();
  const Matrix p = fbar_ * fbar_.transpose();
  const Matrix ip = Matrix::Identity(n_, n_) - p;
  w.noalias() += omega_sq * (ip * ip);
  return symmetrize(w);
}

PosteriorModel::Marginal PosteriorModel::element_marginal(Index i,
                                                          Index j) const {
  if (i < 0 || j < 0 || i >= n_ || j >= n_) {
    throw std::invalid_argument("element_marginal: index out of range");
  }
  Marginal out;
  out.mean = mean_entry(i, j);
  const double wii = cov_factor_entry(i, i);
  const double wjj = cov_factor_entry(j, j);
  const double wij = cov_factor_entry(i, j);
  out.variance = 0.5 * (wii * wjj + wij * wij);
  return out;
}

double PosteriorModel::expected_frobenius_error() const {
  // Gather the active terms of W_M = iso I + sum V_k Z_k V_k^T.
  std::vector<const Term*> terms;
  if (prior_kind_ == PriorKind::kStandardizedNorm && span_term_.v.cols() > 0) {
    terms.push_back(&span_term_);
  }
  if (fbar_term_.v.cols() > 0) terms.push_back(&fbar_term_);

  const double nd = static_cast<double>(n_);
  double tr = w_iso_ * nd;
  double frob2 = w_iso_ * w_iso_ * nd;
  std::vector<Matrix> zg(terms.size());  // Z_k (V_k^T V_k)
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const Matrix g = terms[k]->v.transpose() * terms[k]->v;
    zg[k] = terms[k]->z * g;
    const double t = zg[k].trace();
    tr += t;
    frob2 += 2.0 * w_iso_ * t;
  }
  for (std::size_t k = 0; k < terms.size(); ++k) {
    for (std::size_t l = 0; l < terms.size(); ++l) {
      if (k == l) {
        frob2 += trace_of_product(zg[k], zg[k]);
      } else {
        const Matrix gkl = terms[k]->v.transpose() * terms[l]->v;
        const Matrix m1 = terms[k]->z * gkl;
        const Matrix m2 = terms[l]->z * gkl.transpose();
        frob2 += trace_of_product(m1, m2);
      }
    }
  }
  return std::sqrt(std::max(0.5 * (tr * tr + frob2), 0.0));
}

PosteriorModel::Prediction PosteriorModel::predict_solution(
    const Vector& b_test) const {
  if (b_test.size() != n_) {
    throw std::invalid_argument("predict_solution: dimension mismatch");
  }
  Prediction out;
  out.mean = apply_mean(b_test);
  const Vector wb = apply_cov_factor(b_test);
  const double bwb = b_test.dot(wb);
  const Vector wdiag = cov_factor_diagonal();
  out.marginal_variances =
      0.5 * (wdiag.array() * bwb + wb.array().square()).matrix();
  return out;
}

double expected_frobenius_error(const Matrix& w_factor) {
  const double tr = w_factor.trace();
  const double frob2 = w_factor.squaredNorm();
  return std::sqrt(std::max(0.5 * (tr * tr + frob2), 0.0));
}

double calibration_ratio(const Matrix& b_true, const Matrix& b0,
                         const Matrix& w, Index i, Index j) {
  const double num = (b0(i, j) - b_true(i, j)) * (b0(i, j) - b_true(i, j));
  const double den = 0.5 * (w(i, i) * w(j, j) + w(i, j) * w(i, j));
  if (den <= 0.0) {
    throw std::invalid_argument("calibration_ratio: zero predicted variance");
  }
  return num / den;
}

Matrix theta_rescale(const Matrix& w, double lambda_min) {
  if (lambda_min <= 1.0 + 1e-6) {
    throw std::invalid_argument(
        "theta_rescale: lambda_min must exceed 1 + 1e-6");
  }
  const double theta = lambda_min / (lambda_min - 1.0);
  return (theta * theta) * w;
}

}  // namespace linuq
