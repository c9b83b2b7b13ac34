#include "linuq/secant.hpp"

#include <cmath>
#include <sstream>

namespace linuq {

namespace {
constexpr double kSkipTol = 1e-12;

Vector inverse_direction(const DennisRule& rule, const Vector& y,
                         const Vector& s, const Matrix& h_current,
                         const Matrix& h0, bool strict_initial) {
  const Matrix& href = strict_initial ? h0 : h_current;
  switch (rule.kind) {
    case DennisRule::Kind::kSr1:
      return s - h_current * y;
    case DennisRule::Kind::kPsb:
      return y;
    case DennisRule::Kind::kGreenstadt:
      return h_current * y;
    case DennisRule::Kind::kBfgs:
      return s;  // classical BFGS update of H
    case DennisRule::Kind::kDfp: {
      const double sy = s.dot(y);
      const double yhy = y.dot(href * y);
      if (sy <= 0.0 || yhy <= 0.0) {
        std::ostringstream msg;
        msg << "inverse DFP direction: curvature violated, s^T y = " << sy;
        throw std::invalid_argument(msg.str());
      }
      return s + std::sqrt(sy / yhy) * (href * y);
    }
    case DennisRule::Kind::kCustom:
      return rule.custom(y, s, h_current);
  }
  throw std::logic_error("inverse_direction: unreachable");
}

}  // namespace

std::optional<Matrix> dennis_update(const Matrix& b, const Vector& s,
                                    const Vector& y, const Vector& c) {
  if (s.norm() == 0.0) {
    throw std::invalid_argument("dennis_update: zero step");
  }
  const double cs = c.dot(s);
  if (std::abs(cs) <= kSkipTol * c.norm() * s.norm()) {
    return std::nullopt;
  }
  const Vector r = y - b * s;
  Matrix out = b + (r * c.transpose() + c * r.transpose()) / cs -
               c * (s.dot(r) / (cs * cs)) * c.transpose();
  return symmetrize(out);
}

Vector named_direction(const DennisRule& rule, const Vector& s,
                       const Vector& y, const Matrix& b_current,
                       const Matrix& b0, bool strict_initial) {
  switch (rule.kind) {
    case DennisRule::Kind::kSr1:
      return y - b_current * s;
    case DennisRule::Kind::kPsb:
      return s;
    case DennisRule::Kind::kGreenstadt:
      return b_current * s;
    case DennisRule::Kind::kDfp:
      return y;
    case DennisRule::Kind::kBfgs: {
      const Matrix& bref = strict_initial ? b0 : b_current;
      const double ys = y.dot(s);
      const double sbs = s.dot(bref * s);
      if (ys <= 0.0 || sbs <= 0.0) {
        std::ostringstream msg;
        msg << "BFGS direction: curvature violated, y^T s = " << ys;
        throw std::invalid_argument(msg.str());
      }
      return y + std::sqrt(ys / sbs) * (bref * s);
    }
    case DennisRule::Kind::kCustom:
      return rule.custom(s, y, b_current);
  }
  throw std::logic_error("named_direction: unreachable");
}

IteratedEstimate iterate_dennis(const DennisRule& rule, const Matrix& b0,
                                const ObservationSet& obs,
                                bool strict_initial) {
  IteratedEstimate out{symmetrize(b0), {}};
  for (Index i = 0; i < obs.count(); ++i) {
    const Vector s = obs.s().col(i);
    const Vector y = obs.y().col(i);
    const Vector c = named_direction(rule, s, y, out.estimate, b0, strict_initial);
    auto next = dennis_update(out.estimate, s, y, c);
    if (next.has_value()) {
      out.estimate = std::move(*next);
    } else {
      out.skipped_steps.push_back(i);
    }
  }
  return out;
}

IteratedEstimate inverse_rule(const DennisRule& rule, const Matrix& h0,
                              const ObservationSet& obs) {
  IteratedEstimate out{symmetrize(h0), {}};
  for (Index i = 0; i < obs.count(); ++i) {
    const Vector s = obs.s().col(i);
    const Vector y = obs.y().col(i);
    const Vector c = inverse_direction(rule, y, s, out.estimate, h0, false);
    auto next = dennis_update(out.estimate, y, s, c);  // secant s = H y
    if (next.has_value()) {
      out.estimate = std::move(*next);
    } else {
      out.skipped_steps.push_back(i);
    }
  }
  return out;
}

}  // namespace linuq
