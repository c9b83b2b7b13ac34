#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "linuq/matrix_core.hpp"

namespace linuq {

/// Deterministic random stream. Streams derived for different purposes are
/// independent: the state is seeded through splitmix64 mixing of
/// (seed, experiment id, trial id, purpose), so trials can run in any order
/// or concurrently and still reproduce bit-identically.
///
/// Gaussian variates use an explicit Box-Muller transform rather than
/// std::normal_distribution, whose algorithm is implementation-defined.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  static RandomStream derive(std::uint64_t seed, std::uint64_t experiment_id,
                             std::uint64_t trial_id, std::uint64_t purpose);

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller.
  double gaussian();
  /// Exponential with the given scale (mean).
  double exponential(double scale);

  Vector gaussian_vector(Index n);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Generative recipe for random SPD test matrices.
struct SpectrumSpec {
  enum class Kind { kUniform, kExponential, kStructured };

  Kind kind = Kind::kExponential;
  Index dimension = 200;
  // Uniform law.
  double lo = 0.0;
  double hi = 10.0;
  // Exponential law.
  double scale = 10.0;
  // Structured law: head_count eigenvalues from U(head_lo, head_hi), the rest
  // from U(tail_lo, tail_hi).
  Index head_count = 20;
  double head_lo = 0.0;
  double head_hi = 1e3;
  double tail_lo = 0.0;
  double tail_hi = 10.0;

  static SpectrumSpec uniform(Index n, double lo, double hi);
  static SpectrumSpec exponential(Index n, double scale);
  static SpectrumSpec structured(Index n, Index head_count, double head_lo,
                                 double head_hi, double tail_lo,
                                 double tail_hi);

  /// Compact text form, e.g. "exponential:10", "uniform:0:10",
  /// "structured:20:0:1000:0:10".
  std::string to_string() const;
  static SpectrumSpec parse(const std::string& text, Index dimension);

  /// One eigenvalue draw from the law (position idx matters only for the
  /// structured law).
  double draw_eigenvalue(RandomStream& stream, Index idx) const;
};

struct SpdProblem {
  Matrix b;
  Matrix h;
  Vector eigenvalues;
  int redrawn_eigenvalues = 0;  // count of draws below the positivity floor
};

/// Haar-distributed rotation from SO(N) via the subgroup-algorithm recursion:
/// embed SO(N-1) and apply a plane rotation carrying e_1 to a uniform point
/// on the sphere (determinant +1 by construction).
Matrix haar_rotation(Index n, RandomStream& stream);
Matrix haar_rotation(Index n, std::uint64_t seed);

/// QR-of-Gaussian sampler with sign fix; statistical oracle for tests only.
Matrix haar_rotation_qr_oracle(Index n, RandomStream& stream);

/// B = Q D Q^T and H = Q D^{-1} Q^T with D drawn from the spectrum law.
SpdProblem random_spd(const SpectrumSpec& spec, RandomStream& stream);
SpdProblem random_spd(const SpectrumSpec& spec, std::uint64_t seed);

/// N x M matrix of iid standard normal entries, re-drawn if column-rank
/// deficient.
Matrix random_projections(Index n, Index m, RandomStream& stream);
Matrix random_projections(Index n, Index m, std::uint64_t seed);

}  // namespace linuq
