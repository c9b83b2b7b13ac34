#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "linuq/gaussian.hpp"
#include "linuq/matrix_core.hpp"

namespace linuq {

/// Direction choice for the rank-2 secant update. The named rules fix c as a
/// function of the step s, the observation y and the current estimate; a
/// custom rule may supply its own direction.
struct DennisRule {
  enum class Kind { kSr1, kPsb, kGreenstadt, kDfp, kBfgs, kCustom };

  Kind kind = Kind::kBfgs;
  // c(s, y, B_current) for Kind::kCustom.
  std::function<Vector(const Vector&, const Vector&, const Matrix&)> custom;

  static DennisRule sr1() { return {Kind::kSr1, nullptr}; }
  static DennisRule psb() { return {Kind::kPsb, nullptr}; }
  static DennisRule greenstadt() { return {Kind::kGreenstadt, nullptr}; }
  static DennisRule dfp() { return {Kind::kDfp, nullptr}; }
  static DennisRule bfgs() { return {Kind::kBfgs, nullptr}; }
  static DennisRule with_direction(
      std::function<Vector(const Vector&, const Vector&, const Matrix&)> c) {
    return {Kind::kCustom, std::move(c)};
  }
};

/// Rank-2 update enforcing the secant relation B_new s = y.
/// Returns nullopt (skip signal) when |c^T s| < 1e-12 ||c|| ||s||.
std::optional<Matrix> dennis_update(const Matrix& b, const Vector& s,
                                    const Vector& y, const Vector& c);

/// The rule's direction c. For BFGS the reference matrix is the current
/// estimate unless `strict_initial` asks for the fixed initial B0
/// (one-step analysis variant).
Vector named_direction(const DennisRule& rule, const Vector& s,
                       const Vector& y, const Matrix& b_current,
                       const Matrix& b0, bool strict_initial = false);

struct IteratedEstimate {
  Matrix estimate;
  std::vector<Index> skipped_steps;
};

/// Applies the rule over the observation columns in order.
IteratedEstimate iterate_dennis(const DennisRule& rule, const Matrix& b0,
                                const ObservationSet& obs,
                                bool strict_initial = false);

/// Inverse-mode iteration over H (secant relation s = H y). Rule names keep
/// their classical meaning for updates of H; in particular BFGS uses c = s.
IteratedEstimate inverse_rule(const DennisRule& rule, const Matrix& h0,
                              const ObservationSet& obs);

}  // namespace linuq
