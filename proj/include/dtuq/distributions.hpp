#ifndef DTUQ_DISTRIBUTIONS_HPP
#define DTUQ_DISTRIBUTIONS_HPP

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "dtuq/error.hpp"
#include "dtuq/format.hpp"
#include "dtuq/rng.hpp"

namespace dtuq {

// Parameterizations are fixed here and used everywhere else:
//   Exponential     mean theta:       f(x) = (1/theta) exp(-x/theta)
//   Weibull         scale, shape:     S(x) = exp(-(x/scale)^shape)
//   Gamma           shape, rate:      f ∝ x^(shape-1) exp(-rate x)
//   InverseGamma    shape, scale:     f ∝ x^(-shape-1) exp(-scale/x)
//   TruncatedGamma  Gamma(shape, rate) restricted to x >= lower
//   Beta(0, 0) (or any zero parameter) is an improper prior marker only.

struct Exponential {
  double mean;
};
struct Weibull {
  double scale;
  double shape;
};
struct Bernoulli {
  double prob;
};
struct Normal {
  double mean;
  double variance;
};
struct Gamma {
  double shape;
  double rate;
};
struct InverseGamma {
  double shape;
  double scale;
};
struct TruncatedGamma {
  double shape;
  double rate;
  double lower;
};
struct Beta {
  double a;
  double b;
};

using Distribution =
    std::variant<Exponential, Weibull, Bernoulli, Normal, Gamma, InverseGamma, TruncatedGamma, Beta>;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kQuantileTol = 1e-10;

inline bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

inline void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

inline double gamma_log_pdf(double shape, double rate, double x) {
  if (x < 0.0) return -kInf;
  if (x == 0.0) {
    if (shape == 1.0) return std::log(rate);
    return shape < 1.0 ? kInf : -kInf;
  }
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

}  // namespace detail

/// Throws std::invalid_argument when parameters violate their family's domain.
inline void validate(const Distribution& dist) {
  using detail::positive_finite;
  using detail::require;
  std::visit(
      overloaded{
          [](const Exponential& d) { require(positive_finite(d.mean), "exponential mean must be finite and > 0"); },
          [](const Weibull& d) {
            require(positive_finite(d.scale) && positive_finite(d.shape), "weibull scale and shape must be finite and > 0");
          },
          [](const Bernoulli& d) {
            require(std::isfinite(d.prob) && d.prob >= 0.0 && d.prob <= 1.0, "bernoulli probability must lie in [0, 1]");
          },
          [](const Normal& d) {
            require(std::isfinite(d.mean) && positive_finite(d.variance), "normal variance must be finite and > 0");
          },
          [](const Gamma& d) { require(positive_finite(d.shape) && positive_finite(d.rate), "gamma shape and rate must be finite and > 0"); },
          [](const InverseGamma& d) {
            require(positive_finite(d.shape) && positive_finite(d.scale), "inverse-gamma shape and scale must be finite and > 0");
          },
          [](const TruncatedGamma& d) {
            require(positive_finite(d.shape) && positive_finite(d.rate), "truncated gamma shape and rate must be finite and > 0");
            require(std::isfinite(d.lower) && d.lower >= 0.0, "truncated gamma lower bound must be finite and >= 0");
          },
          [](const Beta& d) {
            require(std::isfinite(d.a) && std::isfinite(d.b) && d.a >= 0.0 && d.b >= 0.0, "beta parameters must be finite and >= 0");
          },
      },
      dist);
}

inline bool is_proper(const Distribution& dist) {
  if (const auto* b = std::get_if<Beta>(&dist)) return b->a > 0.0 && b->b > 0.0;
  return true;
}

inline bool is_continuous(const Distribution& dist) { return !std::holds_alternative<Bernoulli>(dist); }

namespace detail {

inline void require_proper(const Distribution& dist) {
  validate(dist);
  if (!is_proper(dist)) throw std::domain_error("improper distribution has no density");
}

// P[X > lower] for the untruncated parent of a TruncatedGamma.
inline double truncation_mass(const TruncatedGamma& d) {
  return boost::math::gamma_q(d.shape, d.rate * d.lower);
}

}  // namespace detail

/// Support [lower, upper] of a proper family.
inline std::pair<double, double> support(const Distribution& dist) {
  using detail::kInf;
  return std::visit(overloaded{
                        [](const Normal&) { return std::pair{-kInf, kInf}; },
                        [](const Bernoulli&) { return std::pair{0.0, 1.0}; },
                        [](const Beta&) { return std::pair{0.0, 1.0}; },
                        [](const TruncatedGamma& d) { return std::pair{d.lower, kInf}; },
                        [](const auto&) { return std::pair{0.0, kInf}; },
                    },
                    dist);
}

inline double log_pdf(const Distribution& dist, double x) {
  detail::require_proper(dist);
  using detail::kInf;
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  return std::visit(
      overloaded{
          [&](const Exponential& d) { return x < 0.0 ? -kInf : -std::log(d.mean) - x / d.mean; },
          [&](const Weibull& d) {
            if (x < 0.0) return -kInf;
            if (x == 0.0) {
              if (d.shape == 1.0) return -std::log(d.scale);
              return d.shape < 1.0 ? kInf : -kInf;
            }
            const double z = x / d.scale;
            return std::log(d.shape / d.scale) + (d.shape - 1.0) * std::log(z) - std::pow(z, d.shape);
          },
          [&](const Bernoulli& d) {
            if (x == 1.0) return std::log(d.prob);
            if (x == 0.0) return std::log1p(-d.prob);
            return -kInf;
          },
          [&](const Normal& d) {
            const double r = x - d.mean;
            return -0.5 * std::log(2.0 * std::numbers::pi * d.variance) - r * r / (2.0 * d.variance);
          },
          [&](const Gamma& d) { return detail::gamma_log_pdf(d.shape, d.rate, x); },
          [&](const InverseGamma& d) {
            if (x <= 0.0) return -kInf;
            return d.shape * std::log(d.scale) - std::lgamma(d.shape) - (d.shape + 1.0) * std::log(x) - d.scale / x;
          },
          [&](const TruncatedGamma& d) {
            if (x < d.lower) return -kInf;
            return detail::gamma_log_pdf(d.shape, d.rate, x) - std::log(detail::truncation_mass(d));
          },
          [&](const Beta& d) {
            if (x < 0.0 || x > 1.0) return -kInf;
            const double log_norm = std::lgamma(d.a + d.b) - std::lgamma(d.a) - std::lgamma(d.b);
            const double lx = (d.a == 1.0) ? 0.0 : (d.a - 1.0) * std::log(x);
            const double l1x = (d.b == 1.0) ? 0.0 : (d.b - 1.0) * std::log1p(-x);
            return log_norm + lx + l1x;
          },
      },
      dist);
}

inline double cdf(const Distribution& dist, double x) {
  detail::require_proper(dist);
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  return std::visit(overloaded{
                        [&](const Exponential& d) { return x <= 0.0 ? 0.0 : -std::expm1(-x / d.mean); },
                        [&](const Weibull& d) { return x <= 0.0 ? 0.0 : -std::expm1(-std::pow(x / d.scale, d.shape)); },
                        [&](const Bernoulli& d) { return x < 0.0 ? 0.0 : (x < 1.0 ? 1.0 - d.prob : 1.0); },
                        [&](const Normal& d) {
                          return 0.5 * boost::math::erfc(-(x - d.mean) / std::sqrt(2.0 * d.variance));
                        },
                        [&](const Gamma& d) {
                          if (x <= 0.0) return 0.0;
                          if (std::isinf(x)) return 1.0;
                          return boost::math::gamma_p(d.shape, d.rate * x);
                        },
                        [&](const InverseGamma& d) {
                          if (x <= 0.0) return 0.0;
                          if (std::isinf(x)) return 1.0;
                          return boost::math::gamma_q(d.shape, d.scale / x);
                        },
                        [&](const TruncatedGamma& d) {
                          if (x <= d.lower) return 0.0;
                          if (std::isinf(x)) return 1.0;
                          const double mass = detail::truncation_mass(d);
                          return (mass - boost::math::gamma_q(d.shape, d.rate * x)) / mass;
                        },
                        [&](const Beta& d) {
                          if (x <= 0.0) return 0.0;
                          if (x >= 1.0) return 1.0;
                          return boost::math::ibeta(d.a, d.b, x);
                        },
                    },
                    dist);
}

/// log P[X > x], accurate deep in the upper tail where 1 - cdf underflows.
inline double log_survival(const Distribution& dist, double x) {
  detail::require_proper(dist);
  return std::visit(overloaded{
                        [&](const Exponential& d) { return x <= 0.0 ? 0.0 : -x / d.mean; },
                        [&](const Weibull& d) { return x <= 0.0 ? 0.0 : -std::pow(x / d.scale, d.shape); },
                        [&](const auto&) { return std::log1p(-cdf(dist, x)); },
                    },
                    dist);
}

/// P[X > x].
inline double survival(const Distribution& dist, double x) {
  detail::require_proper(dist);
  return std::visit(overloaded{
                        [&](const Exponential&) { return std::exp(log_survival(dist, x)); },
                        [&](const Weibull&) { return std::exp(log_survival(dist, x)); },
                        [&](const Normal& d) {
                          return 0.5 * boost::math::erfc((x - d.mean) / std::sqrt(2.0 * d.variance));
                        },
                        [&](const Gamma& d) {
                          return x <= 0.0 ? 1.0 : boost::math::gamma_q(d.shape, d.rate * x);
                        },
                        [&](const InverseGamma& d) {
                          return x <= 0.0 ? 1.0 : boost::math::gamma_p(d.shape, d.scale / x);
                        },
                        [&](const TruncatedGamma& d) {
                          if (x <= d.lower) return 1.0;
                          return boost::math::gamma_q(d.shape, d.rate * x) / detail::truncation_mass(d);
                        },
                        [&](const auto&) { return 1.0 - cdf(dist, x); },
                    },
                    dist);
}

namespace detail {

// Bracketed bisection on the CDF; used to polish or replace closed forms.
inline double bisect_quantile(const Distribution& dist, double alpha, double guess) {
  auto [lo, hi] = support(dist);
  if (std::isfinite(guess)) {
    if (cdf(dist, guess) >= alpha) {
      hi = guess;
    } else {
      lo = guess;
    }
  }
  if (std::isinf(lo)) {
    double step = 1.0;
    lo = std::isfinite(hi) ? hi - step : -1.0;
    while (cdf(dist, lo) >= alpha) {
      step *= 2.0;
      lo -= step;
    }
  }
  if (std::isinf(hi)) {
    double step = 1.0;
    hi = std::max(lo, 0.0) + step;
    while (cdf(dist, hi) < alpha) {
      step *= 2.0;
      hi = std::max(lo, 0.0) + step;
      if (!std::isfinite(hi)) throw NumericalError("quantile bracket expansion overflowed");
    }
  }
  for (int iter = 0; iter < 2000; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) return hi;
    const double c = cdf(dist, mid);
    if (std::abs(c - alpha) <= kQuantileTol) return mid;
    if (c < alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Lower quantile inf{x : cdf(x) >= alpha}; alpha must lie in (0, 1).
inline double quantile(const Distribution& dist, double alpha) {
  detail::require_proper(dist);
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("quantile order must lie in (0, 1)");

  if (const auto* b = std::get_if<Bernoulli>(&dist)) return alpha <= 1.0 - b->prob ? 0.0 : 1.0;

  double x = std::visit(
      overloaded{
          [&](const Exponential& d) { return -d.mean * std::log1p(-alpha); },
          [&](const Weibull& d) { return d.scale * std::pow(-std::log1p(-alpha), 1.0 / d.shape); },
          [&](const Normal& d) {
            return d.mean - std::sqrt(2.0 * d.variance) * boost::math::erfc_inv(2.0 * alpha);
          },
          [&](const Gamma& d) { return boost::math::gamma_p_inv(d.shape, alpha) / d.rate; },
          [&](const InverseGamma& d) { return d.scale / boost::math::gamma_q_inv(d.shape, alpha); },
          [&](const TruncatedGamma& d) {
            const double tail = (1.0 - alpha) * detail::truncation_mass(d);
            if (!(tail > 0.0)) return std::numeric_limits<double>::quiet_NaN();
            return std::max(d.lower, boost::math::gamma_q_inv(d.shape, tail) / d.rate);
          },
          [&](const Beta& d) { return boost::math::ibeta_inv(d.a, d.b, alpha); },
          [&](const Bernoulli&) { return 0.0; },
      },
      dist);

  if (std::isfinite(x) && std::abs(cdf(dist, x) - alpha) <= detail::kQuantileTol) return x;
  return detail::bisect_quantile(dist, alpha, x);
}

/// Mean of a proper family; +inf when it does not exist.
inline double mean(const Distribution& dist) {
  detail::require_proper(dist);
  return std::visit(overloaded{
                        [](const Exponential& d) { return d.mean; },
                        [](const Weibull& d) { return d.scale * std::tgamma(1.0 + 1.0 / d.shape); },
                        [](const Bernoulli& d) { return d.prob; },
                        [](const Normal& d) { return d.mean; },
                        [](const Gamma& d) { return d.shape / d.rate; },
                        [](const InverseGamma& d) { return d.shape > 1.0 ? d.scale / (d.shape - 1.0) : detail::kInf; },
                        [](const TruncatedGamma& d) {
                          return d.shape / d.rate * boost::math::gamma_q(d.shape + 1.0, d.rate * d.lower) /
                                 detail::truncation_mass(d);
                        },
                        [](const Beta& d) { return d.a / (d.a + d.b); },
                    },
                    dist);
}

namespace detail {

inline double standard_normal(RngStream& rng) {
  // Marsaglia polar method, one variate per call so draws never depend on
  // hidden cached state.
  for (;;) {
    const double u = 2.0 * rng.uniform() - 1.0;
    const double v = 2.0 * rng.uniform() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

// Marsaglia-Tsang for shape >= 1, boosted for shape < 1. Unit rate.
inline double standard_gamma(double shape, RngStream& rng) {
  if (shape < 1.0) {
    const double g = standard_gamma(shape + 1.0, rng);
    return g * std::pow(rng.uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

inline constexpr double kTruncationRejectionFloor = 0.10;

}  // namespace detail

/// One draw; `dist` must already be validated and proper.
inline double draw(const Distribution& dist, RngStream& rng) {
  return std::visit(
      overloaded{
          [&](const Exponential& d) { return -d.mean * std::log(rng.uniform()); },
          [&](const Weibull& d) { return d.scale * std::pow(-std::log(rng.uniform()), 1.0 / d.shape); },
          [&](const Bernoulli& d) { return rng.uniform() < d.prob ? 1.0 : 0.0; },
          [&](const Normal& d) { return d.mean + std::sqrt(d.variance) * detail::standard_normal(rng); },
          [&](const Gamma& d) { return detail::standard_gamma(d.shape, rng) / d.rate; },
          [&](const InverseGamma& d) { return d.scale / detail::standard_gamma(d.shape, rng); },
          [&](const TruncatedGamma& d) {
            if (detail::truncation_mass(d) >= detail::kTruncationRejectionFloor) {
              for (;;) {
                const double x = detail::standard_gamma(d.shape, rng) / d.rate;
                if (x >= d.lower) return x;
              }
            }
            return quantile(dist, rng.uniform());
          },
          [&](const Beta& d) {
            const double x = detail::standard_gamma(d.a, rng);
            const double y = detail::standard_gamma(d.b, rng);
            return x / (x + y);
          },
      },
      dist);
}

/// `count` i.i.d. draws, deterministic in the stream state.
inline std::vector<double> sample(const Distribution& dist, RngStream& rng, std::size_t count) {
  detail::require_proper(dist);
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(draw(dist, rng));
  return out;
}

inline std::string describe(const Distribution& dist) {
  const auto num = format_real;
  return std::visit(overloaded{
                        [&](const Exponential& d) { return "Exponential(mean=" + num(d.mean) + ")"; },
                        [&](const Weibull& d) { return "Weibull(scale=" + num(d.scale) + ", shape=" + num(d.shape) + ")"; },
                        [&](const Bernoulli& d) { return "Bernoulli(p=" + num(d.prob) + ")"; },
                        [&](const Normal& d) { return "Normal(mean=" + num(d.mean) + ", var=" + num(d.variance) + ")"; },
                        [&](const Gamma& d) { return "Gamma(shape=" + num(d.shape) + ", rate=" + num(d.rate) + ")"; },
                        [&](const InverseGamma& d) {
                          return "InverseGamma(shape=" + num(d.shape) + ", scale=" + num(d.scale) + ")";
                        },
                        [&](const TruncatedGamma& d) {
                          return "TruncatedGamma(shape=" + num(d.shape) + ", rate=" + num(d.rate) + ", lower=" + num(d.lower) + ")";
                        },
                        [&](const Beta& d) { return "Beta(" + num(d.a) + ", " + num(d.b) + ")"; },
                    },
                    dist);
}

}  // namespace dtuq

#endif  // DTUQ_DISTRIBUTIONS_HPP
