#include "linuq/problem_gen.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace linuq {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

RandomStream RandomStream::derive(std::uint64_t seed,
                                  std::uint64_t experiment_id,
                                  std::uint64_t trial_id,
                                  std::uint64_t purpose) {
  std::uint64_t state = splitmix64(seed);
  state = splitmix64(state ^ (experiment_id * 0xd1342543de82ef95ULL));
  state = splitmix64(state ^ (trial_id * 0xaf251af3b0f025b5ULL));
  state = splitmix64(state ^ (purpose * 0x9e3779b97f4a7c15ULL));
  return RandomStream(state);
}

double RandomStream::uniform() {
  // 53-bit mantissa in [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RandomStream::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return radius * std::cos(angle);
}

double RandomStream::exponential(double scale) {
  double u = uniform();
  while (u <= 0.0) u = uniform();
  return -scale * std::log(u);
}

Vector RandomStream::gaussian_vector(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = gaussian();
  return v;
}

SpectrumSpec SpectrumSpec::uniform(Index n, double lo, double hi) {
  SpectrumSpec s;
  s.kind = Kind::kUniform;
  s.dimension = n;
  s.lo = lo;
  s.hi = hi;
  return s;
}

SpectrumSpec SpectrumSpec::exponential(Index n, double scale) {
  SpectrumSpec s;
  s.kind = Kind::kExponential;
  s.dimension = n;
  s.scale = scale;
  return s;
}

SpectrumSpec SpectrumSpec::structured(Index n, Index head_count,
                                      double head_lo, double head_hi,
                                      double tail_lo, double tail_hi) {
  if (head_count > n) {
    throw std::invalid_argument("SpectrumSpec: head_count exceeds dimension");
  }
  SpectrumSpec s;
  s.kind = Kind::kStructured;
  s.dimension = n;
  s.head_count = head_count;
  s.head_lo = head_lo;
  s.head_hi = head_hi;
  s.tail_lo = tail_lo;
  s.tail_hi = tail_hi;
  return s;
}

std::string SpectrumSpec::to_string() const {
  std::ostringstream out;
  switch (kind) {
    case Kind::kUniform:
      out << "uniform:" << lo << ":" << hi;
      break;
    case Kind::kExponential:
      out << "exponential:" << scale;
      break;
    case Kind::kStructured:
      out << "structured:" << head_count << ":" << head_lo << ":" << head_hi
          << ":" << tail_lo << ":" << tail_hi;
      break;
  }
  return out.str();
}

SpectrumSpec SpectrumSpec::parse(const std::string& text, Index dimension) {
  std::istringstream in(text);
  std::string token;
  std::vector<double> args;
  std::getline(in, token, ':');
  std::string part;
  while (std::getline(in, part, ':')) {
    args.push_back(std::stod(part));
  }
  if (token == "uniform") {
    if (args.size() != 2) {
      throw std::invalid_argument("spectrum: uniform expects lo:hi");
    }
    return uniform(dimension, args[0], args[1]);
  }
  if (token == "exponential" || token == "exp") {
    if (args.size() != 1) {
      throw std::invalid_argument("spectrum: exponential expects scale");
    }
    return exponential(dimension, args[0]);
  }
  if (token == "structured") {
    if (args.size() != 5) {
      throw std::invalid_argument(
          "spectrum: structured expects L:head_lo:head_hi:tail_lo:tail_hi");
    }
    return structured(dimension, static_cast<Index>(args[0]), args[1], args[2],
                      args[3], args[4]);
  }
  throw std::invalid_argument("spectrum: unknown kind '" + token + "'");
}

double SpectrumSpec::draw_eigenvalue(RandomStream& stream, Index idx) const {
  switch (kind) {
    case Kind::kUniform:
      return stream.uniform(lo, hi);
    case Kind::kExponential:
      return stream.exponential(scale);
    case Kind::kStructured:
      return idx < head_count ? stream.uniform(head_lo, head_hi)
                              : stream.uniform(tail_lo, tail_hi);
  }
  throw std::logic_error("draw_eigenvalue: unreachable");
}

Matrix haar_rotation(Index n, RandomStream& stream) {
  if (n < 1) {
    throw std::invalid_argument("haar_rotation: dimension must be positive");
  }
  Matrix q = Matrix::Identity(1, 1);
  for (Index k = 2; k <= n; ++k) {
    // Uniform point on S^{k-1}.
    Vector v = stream.gaussian_vector(k);
    double nrm = v.norm();
    while (nrm == 0.0) {
      v = stream.gaussian_vector(k);
      nrm = v.norm();
    }
    v /= nrm;

    Matrix embedded = Matrix::Identity(k, k);
    embedded.bottomRightCorner(k - 1, k - 1) = q;

    // Plane rotation carrying e_1 to v (determinant +1).
    const double c = v(0);
    Vector w = v;
    w(0) = 0.0;
    for (Index i = 1; i < k; ++i) w(i) = v(i);
    const double s = w.norm();
    if (s < 1e-15) {
      if (c < 0.0) {
        embedded.row(0) *= -1.0;
        embedded.row(1) *= -1.0;
      }
      q = std::move(embedded);
      continue;
    }
    w /= s;
    // R X = X + (c-1)(e1 e1^T + w w^T) X + s (w e1^T - e1 w^T) X,
    // applied as a rank-2 update.
    const Eigen::RowVectorXd top = embedded.row(0);
    const Eigen::RowVectorXd wx = w.transpose() * embedded;
    Matrix rotated = embedded;
    rotated.row(0) += (c - 1.0) * top - s * wx;
    rotated += w * ((c - 1.0) * wx + s * top);
    q = std::move(rotated);
  }
  return q;
}

Matrix haar_rotation(Index n, std::uint64_t seed) {
  RandomStream stream(splitmix64(seed));
  return haar_rotation(n, stream);
}

Matrix haar_rotation_qr_oracle(Index n, RandomStream& stream) {
  Matrix a(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) a(i, j) = stream.gaussian();
  }
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  if (q.determinant() < 0.0) q.col(n - 1) *= -1.0;
  return q;
}

SpdProblem random_spd(const SpectrumSpec& spec, RandomStream& stream) {
  const Index n = spec.dimension;
  SpdProblem out;
  out.eigenvalues.resize(n);
  for (Index i = 0; i < n; ++i) {
    double d = spec.draw_eigenvalue(stream, i);
    while (d < 1e-12) {
      ++out.redrawn_eigenvalues;
      d = spec.draw_eigenvalue(stream, i);
    }
    out.eigenvalues(i) = d;
  }
  const Matrix q = haar_rotation(n, stream);
  out.b = symmetrize(q * out.eigenvalues.asDiagonal() * q.transpose());
  out.h = symmetrize(q * out.eigenvalues.cwiseInverse().asDiagonal() *
                     q.transpose());
  return out;
}

SpdProblem random_spd(const SpectrumSpec& spec, std::uint64_t seed) {
  RandomStream stream(splitmix64(seed));
  return random_spd(spec, stream);
}

Matrix random_projections(Index n, Index m, RandomStream& stream) {
  if (m > n) {
    throw std::invalid_argument("random_projections: M must not exceed N");
  }
  for (int attempt = 0; attempt < 16; ++attempt) {
    Matrix s(n, m);
    for (Index j = 0; j < m; ++j) {
      for (Index i = 0; i < n; ++i) s(i, j) = stream.gaussian();
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(s);
    qr.setThreshold(kRankTol);
    if (qr.rank() == m) return s;
  }
  throw std::runtime_error("random_projections: persistent rank deficiency");
}

Matrix random_projections(Index n, Index m, std::uint64_t seed) {
  RandomStream stream(splitmix64(seed));
  return random_projections(n, m, stream);
}

}  // namespace linuq
