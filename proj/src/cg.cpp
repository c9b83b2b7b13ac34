#include "linuq/cg.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>

namespace linuq {

namespace {

// Deterministic pseudo-random probe vectors (no global RNG state).
Vector probe_vector(Index n, std::uint64_t salt) {
  Vector v(n);
  std::uint64_t state = 0x9e3779b97f4a7c15ULL + salt;
  for (Index i = 0; i < n; ++i) {
    state ^= state >> 30;
    state *= 0xbf58476d1ce4e5b9ULL;
    state ^= state >> 27;
    state *= 0x94d049bb133111ebULL;
    state ^= state >> 31;
    v(i) = static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
  }
  return v;
}

void orthogonalize_against(Vector& f, const Matrix& residuals, Index count) {
  for (Index j = 0; j < count; ++j) {
    const auto fo = residuals.col(j);
    const double denom = fo.squaredNorm();
    if (denom > 0.0) f -= (f.dot(fo) / denom) * fo;
  }
}

Matrix orthonormal_basis(const Matrix& x) {
  Eigen::HouseholderQR<Matrix> qr(x);
  Matrix q = qr.householderQ() * Matrix::Identity(x.rows(), x.cols());
  return q;
}

double max_principal_angle(const Matrix& a, const Matrix& b) {
  const Matrix qa = orthonormal_basis(a);
  const Matrix qb = orthonormal_basis(b);
  Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
  const double smin = svd.singularValues().minCoeff();
  return std::acos(std::clamp(smin, -1.0, 1.0));
}

}  // namespace

LinearOperator LinearOperator::dense(const Matrix& b) {
  if (b.rows() != b.cols()) {
    throw std::invalid_argument("LinearOperator::dense: square matrix required");
  }
  auto mat = std::make_shared<Matrix>(b);
  return LinearOperator(b.rows(),
                        [mat](const Vector& v) -> Vector { return *mat * v; });
}

bool LinearOperator::probe_symmetric(int probes) const {
  for (int p = 0; p < probes; ++p) {
    const Vector u = probe_vector(dim_, 2 * p);
    const Vector v = probe_vector(dim_, 2 * p + 1);
    const Vector bu = apply_(u);
    const Vector bv = apply_(v);
    const double scale = bu.norm() * v.norm() + bv.norm() * u.norm() + 1e-300;
    if (std::abs(u.dot(bv) - v.dot(bu)) > 1e-8 * scale) return false;
    // Linearity: B(u+v) = Bu + Bv.
    const Vector sum = apply_(u + v);
    if ((sum - bu - bv).norm() > 1e-10 * (bu.norm() + bv.norm() + 1e-300)) {
      return false;
    }
  }
  return true;
}

Matrix CgTrace::y_columns() const {
  return residuals.rightCols(steps) - residuals.leftCols(steps);
}

Vector CgTrace::gram_diagonal() const {
  Vector d(steps);
  for (Index i = 0; i < steps; ++i) {
    d(i) = step_lengths(i) * residual_norms(i) * residual_norms(i);
  }
  return d;
}

Vector CgTrace::y_column_norms() const {
  Vector n(steps);
  for (Index i = 0; i < steps; ++i) {
    n(i) = std::sqrt(residual_norms(i + 1) * residual_norms(i + 1) +
                     residual_norms(i) * residual_norms(i));
  }
  return n;
}

TridiagonalMatrix CgTrace::yty() const {
  Vector diag(steps);
  Vector off(steps > 0 ? steps - 1 : 0);
  for (Index i = 0; i < steps; ++i) {
    diag(i) = residual_norms(i + 1) * residual_norms(i + 1) +
              residual_norms(i) * residual_norms(i);
    if (i + 1 < steps) {
      off(i) = -residual_norms(i + 1) * residual_norms(i + 1);
    }
  }
  return TridiagonalMatrix(diag, off);
}

CgTrace CgTrace::head(Index m) const {
  if (m > steps) {
    throw std::invalid_argument("CgTrace::head: not enough steps");
  }
  CgTrace t;
  t.directions = directions.leftCols(m);
  t.residuals = residuals.leftCols(m + 1);
  t.residual_norms = residual_norms.head(m + 1);
  t.step_lengths = step_lengths.head(m);
  t.iterates = iterates.leftCols(m + 1);
  t.steps = m;
  t.converged = (m == steps) && converged;
  return t;
}

CgTrace cg_solve(const LinearOperator& b, const Vector& rhs, const Vector& x0,
                 const CgOptions& options) {
  const Index n = b.dimension();
  if (rhs.size() != n || x0.size() != n) {
    throw std::invalid_argument("cg_solve: dimension mismatch");
  }
  if (options.residual_tol < 0.0) {
    throw std::invalid_argument("cg_solve: residual_tol must be >= 0");
  }
  if (!b.probe_symmetric()) {
    throw std::runtime_error("cg_solve: operator failed the symmetry probe");
  }
  const Index cap =
      options.max_steps < 0 ? n : std::min<Index>(options.max_steps, n);

  CgTrace t;
  t.directions.resize(n, cap);
  t.residuals.resize(n, cap + 1);
  t.residual_norms.resize(cap + 1);
  t.step_lengths.resize(cap);
  t.iterates.resize(n, cap + 1);

  Vector x = x0;
  Vector f = b(x) - rhs;
  t.residuals.col(0) = f;
  t.residual_norms(0) = f.norm();
  t.iterates.col(0) = x;
  const double stop = options.residual_tol * t.residual_norms(0);

  Vector p = -f;
  Index m = 0;
  while (m < cap) {
    if (t.residual_norms(m) <= stop) {
      t.converged = true;
      break;
    }
    const Vector bp = b(p);
    const double curvature = p.dot(bp);
    if (curvature <= 0.0) {
      std::ostringstream msg;
      msg << "cg_solve: non-positive curvature " << curvature << " at step "
          << m + 1 << "; operator is not SPD";
      throw std::runtime_error(msg.str());
    }
    const double f_sq = f.squaredNorm();
    const double alpha = f_sq / curvature;
    const Vector s = alpha * p;
    x += s;
    Vector f_next = f + alpha * bp;
    if (options.reorthogonalize) {
      orthogonalize_against(f_next, t.residuals, m + 1);
    }
    t.directions.col(m) = s;
    t.step_lengths(m) = alpha;
    t.iterates.col(m + 1) = x;
    t.residuals.col(m + 1) = f_next;
    t.residual_norms(m + 1) = f_next.norm();
    const double beta = f_next.squaredNorm() / f_sq;
    p = -f_next + beta * p;
    f = f_next;
    ++m;
  }
  if (m == cap && t.residual_norms(m) <= stop) t.converged = true;

  t.steps = m;
  t.directions.conservativeResize(n, m);
  t.residuals.conservativeResize(n, m + 1);
  t.residual_norms.conservativeResize(m + 1);
  t.step_lengths.conservativeResize(m);
  t.iterates.conservativeResize(n, m + 1);
  return t;
}

CgTrace cg_solve(const LinearOperator& b, const Vector& rhs,
                 const CgOptions& options) {
  return cg_solve(b, rhs, Vector::Zero(b.dimension()), options);
}

CgTrace bfgs_directions(const LinearOperator& b, const Vector& rhs,
                        double h0_scale, const CgOptions& options) {
  if (h0_scale <= 0.0) {
    throw std::invalid_argument("bfgs_directions: h0_scale must be positive");
  }
  const Index n = b.dimension();
  const Index cap =
      options.max_steps < 0 ? n : std::min<Index>(options.max_steps, n);

  CgTrace t;
  t.directions.resize(n, cap);
  t.residuals.resize(n, cap + 1);
  t.residual_norms.resize(cap + 1);
  t.step_lengths.resize(cap);
  t.iterates.resize(n, cap + 1);

  Matrix h = h0_scale * Matrix::Identity(n, n);
  Vector x = Vector::Zero(n);
  Vector f = b(x) - rhs;
  t.residuals.col(0) = f;
  t.residual_norms(0) = f.norm();
  t.iterates.col(0) = x;
  const double stop = options.residual_tol * t.residual_norms(0);

  Index m = 0;
  while (m < cap) {
    if (t.residual_norms(m) <= stop) {
      t.converged = true;
      break;
    }
    const Vector d = -(h * f);
    const Vector bd = b(d);
    const double curvature = d.dot(bd);
    if (curvature <= 0.0) {
      throw std::runtime_error("bfgs_directions: non-positive curvature");
    }
    const double alpha = -d.dot(f) / curvature;  // exact line search
    const Vector s = alpha * d;
    x += s;
    Vector f_next = f + alpha * bd;
    if (options.reorthogonalize) {
      orthogonalize_against(f_next, t.residuals, m + 1);
    }
    const Vector y = f_next - f;
    t.directions.col(m) = s;
    t.step_lengths(m) = alpha;
    t.iterates.col(m + 1) = x;
    t.residuals.col(m + 1) = f_next;
    t.residual_norms(m + 1) = f_next.norm();

    // Inverse BFGS update (rank 2, c = s).
    const double sy = s.dot(y);
    const Vector r = s - h * y;
    h += (r * s.transpose() + s * r.transpose()) / sy -
         s * (y.dot(r) / (sy * sy)) * s.transpose();
    h = symmetrize(h);

    f = f_next;
    ++m;
  }
  if (m == cap && t.residual_norms(m) <= stop) t.converged = true;

  t.steps = m;
  t.directions.conservativeResize(n, m);
  t.residuals.conservativeResize(n, m + 1);
  t.residual_norms.conservativeResize(m + 1);
  t.step_lengths.conservativeResize(m);
  t.iterates.conservativeResize(n, m + 1);
  return t;
}

TraceInvariantReport check_trace_invariants(const CgTrace& trace) {
  TraceInvariantReport report;
  const Index m = trace.steps;
  if (m == 0) return report;
  const Index last = trace.converged ? m : m + 1;
  for (Index i = 0; i < last; ++i) {
    for (Index j = 0; j < i; ++j) {
      const double c =
          std::abs(trace.residuals.col(i).dot(trace.residuals.col(j))) /
          (trace.residual_norms(i) * trace.residual_norms(j));
      report.residual_orthogonality = std::max(report.residual_orthogonality, c);
    }
  }
  const Matrix y = trace.y_columns();
  const Matrix sy = trace.directions.transpose() * y;
  const double dmax = sy.diagonal().cwiseAbs().maxCoeff();
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) {
      if (i == j) continue;
      report.gram_off_diagonal =
          std::max(report.gram_off_diagonal, std::abs(sy(i, j)) / dmax);
    }
  }
  const Matrix formula = trace.yty().dense();
  report.yty_deviation = (y.transpose() * y - formula).cwiseAbs().maxCoeff() /
                         formula.cwiseAbs().maxCoeff();
  return report;
}

KrylovSpanReport krylov_span_check(const CgTrace& trace,
                                   const LinearOperator& b) {
  KrylovSpanReport report;
  const Index m = trace.steps;
  if (m == 0) return report;
  const Matrix& s = trace.directions;
  const Matrix f = trace.residuals.leftCols(m);
  report.max_angle_directions = max_principal_angle(s, f);

  Matrix krylov(trace.dimension(), m);
  krylov.col(0) = trace.residuals.col(0);
  for (Index i = 1; i < m; ++i) {
    krylov.col(i) = b(krylov.col(i - 1));
    const double nrm = krylov.col(i).norm();
    if (nrm > 0.0) krylov.col(i) /= nrm;  // keep the power basis scaled
  }
  report.max_angle_krylov = max_principal_angle(s, krylov);
  return report;
}

}  // namespace linuq
