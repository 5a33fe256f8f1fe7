#ifndef DTUQ_LOSS_HPP
#define DTUQ_LOSS_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>

#include "dtuq/distributions.hpp"
#include "dtuq/format.hpp"

namespace dtuq {

// All three losses vanish at d == phi, i.e. they are regrets: the constant
// minimal-cost term is taken as zero since it never moves an argmin.

/// C0 * (phi - d)^2
struct QuadraticLoss {
  double c0 = 1.0;
};

/// |phi - d| * (C1 if d < phi else C2). C1 prices under-estimation.
struct WeightedAbsoluteLoss {
  double c1 = 1.0;
  double c2 = 1.0;

  /// Posterior quantile order of the Bayes decision.
  double quantile_order() const { return c1 / (c1 + c2); }
};

/// (ln phi - ln d)^2, natural log; phi, d > 0.
struct LogQuadraticLoss {};

using LossSpec = std::variant<QuadraticLoss, WeightedAbsoluteLoss, LogQuadraticLoss>;

inline void validate(const LossSpec& loss) {
  auto ok = [](double c) { return std::isfinite(c) && c > 0.0; };
  std::visit(overloaded{
                 [&](const QuadraticLoss& l) {
                   if (!ok(l.c0)) throw std::invalid_argument("quadratic loss constant C0 must be finite and > 0");
                 },
                 [&](const WeightedAbsoluteLoss& l) {
                   if (!ok(l.c1) || !ok(l.c2))
                     throw std::invalid_argument("weighted absolute loss constants C1, C2 must be finite and > 0");
                 },
                 [](const LogQuadraticLoss&) {},
             },
             loss);
}

inline double loss_eval(const LossSpec& loss, double phi, double d) {
  return std::visit(overloaded{
                        [&](const QuadraticLoss& l) { return l.c0 * (phi - d) * (phi - d); },
                        [&](const WeightedAbsoluteLoss& l) {
                          if (d == phi) return 0.0;
                          return std::abs(phi - d) * (d < phi ? l.c1 : l.c2);
                        },
                        [&](const LogQuadraticLoss&) {
                          if (!(phi > 0.0) || !(d > 0.0))
                            throw std::domain_error("log-quadratic loss requires phi > 0 and d > 0");
                          const double r = std::log(phi) - std::log(d);
                          return r * r;
                        },
                    },
                    loss);
}

/// Opportunity loss C(phi, d) - C(phi, phi).
inline double regret(const LossSpec& loss, double phi, double d) {
  return loss_eval(loss, phi, d) - loss_eval(loss, phi, phi);
}

inline std::string describe(const LossSpec& loss) {
  return std::visit(overloaded{
                        [](const QuadraticLoss& l) { return "quadratic(C0=" + format_real(l.c0) + ")"; },
                        [](const WeightedAbsoluteLoss& l) {
                          return "weighted_absolute(C1=" + format_real(l.c1) + ",C2=" + format_real(l.c2) + ")";
                        },
                        [](const LogQuadraticLoss&) { return std::string("log_quadratic"); },
                    },
                    loss);
}

}  // namespace dtuq

#endif  // DTUQ_LOSS_HPP
