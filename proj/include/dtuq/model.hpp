#ifndef DTUQ_MODEL_HPP
#define DTUQ_MODEL_HPP

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "dtuq/distributions.hpp"
#include "dtuq/error.hpp"
#include "dtuq/format.hpp"

namespace dtuq {

enum class ModelKind { exponential, weibull, bernoulli, normal };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::exponential:
      return "exponential";
    case ModelKind::weibull:
      return "weibull";
    case ModelKind::bernoulli:
      return "bernoulli";
    case ModelKind::normal:
      return "normal";
  }
  return "unknown";
}

inline ModelKind parse_model_kind(std::string_view name) {
  if (name == "exponential") return ModelKind::exponential;
  if (name == "weibull") return ModelKind::weibull;
  if (name == "bernoulli") return ModelKind::bernoulli;
  if (name == "normal") return ModelKind::normal;
  throw ConfigError("unknown model '" + std::string(name) + "' (expected exponential, weibull, bernoulli or normal)");
}

inline std::size_t dimension(ModelKind kind) {
  return (kind == ModelKind::weibull || kind == ModelKind::normal) ? 2 : 1;
}

/**
 * A point in parameter space. Coordinate order per model:
 *   exponential (mean theta), weibull (scale eta, shape beta),
 *   bernoulli (prob theta), normal (mean mu, variance sigma2).
 */
class ParamPoint {
 public:
  ParamPoint() = default;

  static ParamPoint exponential(double mean) { return ParamPoint({mean, 0.0}, 1); }
  static ParamPoint weibull(double scale, double shape) { return ParamPoint({scale, shape}, 2); }
  static ParamPoint bernoulli(double prob) { return ParamPoint({prob, 0.0}, 1); }
  static ParamPoint normal(double mean, double variance) { return ParamPoint({mean, variance}, 2); }

  static ParamPoint from_coords(ModelKind kind, std::span<const double> coords) {
    if (coords.size() != dimension(kind)) throw std::invalid_argument("coordinate count does not match model dimension");
    return ParamPoint({coords[0], coords.size() > 1 ? coords[1] : 0.0}, coords.size());
  }

  std::size_t size() const noexcept { return size_; }
  double operator[](std::size_t i) const noexcept { return coords_[i]; }
  double& operator[](std::size_t i) noexcept { return coords_[i]; }
  std::span<const double> coords() const noexcept { return {coords_.data(), size_}; }

  bool operator==(const ParamPoint&) const = default;

 private:
  ParamPoint(std::array<double, 2> coords, std::size_t size) : coords_(coords), size_(size) {}

  std::array<double, 2> coords_{};
  std::size_t size_ = 0;
};

/// Sampling density f(.|theta) of the observation model.
inline Distribution distribution_of(ModelKind kind, const ParamPoint& theta) {
  if (theta.size() != dimension(kind)) throw std::invalid_argument("parameter point does not match model dimension");
  switch (kind) {
    case ModelKind::exponential:
      return Exponential{theta[0]};
    case ModelKind::weibull:
      return Weibull{theta[0], theta[1]};
    case ModelKind::bernoulli:
      return Bernoulli{theta[0]};
    case ModelKind::normal:
      return Normal{theta[0], theta[1]};
  }
  throw std::invalid_argument("unknown model kind");
}

inline bool is_valid(ModelKind kind, const ParamPoint& theta) {
  if (theta.size() != dimension(kind)) return false;
  try {
    validate(distribution_of(kind, theta));
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

inline std::string describe(ModelKind kind, const ParamPoint& theta) {
  std::string out(to_string(kind));
  out += "(";
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (i) out += ", ";
    out += format_real(theta[i]);
  }
  return out + ")";
}

/// Observed data x_1..x_n; all values finite.
class ObservationSample {
 public:
  ObservationSample() = default;
  explicit ObservationSample(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_)
      if (!std::isfinite(v)) throw std::invalid_argument("observation sample contains a non-finite value");
  }
  ObservationSample(std::initializer_list<double> values) : ObservationSample(std::vector<double>(values)) {}

  std::size_t n() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  const std::vector<double>& values() const noexcept { return values_; }
  double sum() const noexcept {
    double s = 0.0;
    for (double v : values_) s += v;
    return s;
  }

 private:
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Output transform Y = G(X)

/// Hydraulic rating curve Z_c = Z_v + A * Q^(3/5) and the dyke crest height.
struct DykeGeometry {
  double riverbed_level;    // Z_v (m)
  double rating_constant;   // A (m per (m^3/s)^(3/5))
  double dyke_height;       // h (m)

  void validate() const {
    if (!(rating_constant > 0.0) || !std::isfinite(rating_constant))
      throw std::invalid_argument("dyke rating constant A must be finite and > 0");
    if (!(dyke_height > riverbed_level) || !std::isfinite(dyke_height) || !std::isfinite(riverbed_level))
      throw std::invalid_argument("dyke height must exceed the riverbed level");
  }

  /// Discharge at which the water level reaches the crest.
  double critical_discharge() const {
    return std::pow((dyke_height - riverbed_level) / rating_constant, 5.0 / 3.0);
  }
};

/// Water level for discharge q >= 0.
inline double dyke_output(const DykeGeometry& geom, double q) {
  if (!(q >= 0.0)) throw std::invalid_argument("discharge must be >= 0");
  return geom.riverbed_level + geom.rating_constant * std::pow(q, 0.6);
}

/// p = P[Z_c > h | eta, beta] for Weibull(eta, beta) annual maximal discharges.
inline double flood_probability(const DykeGeometry& geom, double eta, double beta) {
  geom.validate();
  if (!(eta > 0.0) || !(beta > 0.0)) throw std::invalid_argument("weibull scale and shape must be > 0");
  return std::exp(-std::pow(geom.critical_discharge() / eta, beta));
}

/// Rating constant A placing the flood probability at `p` for a dyke of
/// height h over riverbed Z_v under Weibull(eta, beta) discharges.
inline double calibrate_rating_constant(double riverbed_level, double dyke_height, double eta, double beta, double p) {
  return (dyke_height - riverbed_level) / std::pow(eta * std::pow(std::log(1.0 / p), 1.0 / beta), 0.6);
}

/// Reference case: Z_v = 50 m, h = 53.1 m, A calibrated so that W(1000, 2)
/// discharges give p = 0.013.
inline DykeGeometry reference_dyke() {
  constexpr double zv = 50.0;
  constexpr double h = 53.1;
  return DykeGeometry{zv, calibrate_rating_constant(zv, h, 1000.0, 2.0, 0.013), h};
}

struct IdentityMap {};

/// Monotone increasing deterministic map from model variable X to output Y.
using OutputMap = std::variant<IdentityMap, DykeGeometry>;

inline double apply(const OutputMap& g, double x) {
  return std::visit(overloaded{[&](const IdentityMap&) { return x; },
                               [&](const DykeGeometry& d) { return dyke_output(d, x); }},
                    g);
}

/// Generalized inverse: smallest x with G(x) >= y (0 below the range of G).
inline double inverse(const OutputMap& g, double y) {
  return std::visit(overloaded{[&](const IdentityMap&) { return y; },
                               [&](const DykeGeometry& d) {
                                 if (y <= d.riverbed_level) return 0.0;
                                 return std::pow((y - d.riverbed_level) / d.rating_constant, 5.0 / 3.0);
                               }},
                    g);
}

/// Observation family plus output transform.
struct Model {
  ModelKind kind = ModelKind::exponential;
  OutputMap output = IdentityMap{};

  Model() = default;
  Model(ModelKind k) : kind(k) {}  // NOLINT: implicit by design of call sites
  Model(ModelKind k, OutputMap g) : kind(k), output(std::move(g)) {}

  Distribution sampling_distribution(const ParamPoint& theta) const { return distribution_of(kind, theta); }
};

// ---------------------------------------------------------------------------
// Likelihood

/**
 * Log-likelihood of a fixed data set, with the per-model sufficient
 * statistics precomputed so repeated evaluation (importance sampling,
 * MCMC) costs O(1) for exponential / bernoulli / normal and O(n) pow-free
 * exponentials for weibull.
 */
class LogLikelihood {
 public:
  LogLikelihood(ModelKind kind, const ObservationSample& data) : kind_(kind), data_(data.values()) {
    n_ = static_cast<double>(data_.size());
    fast_ = true;
    switch (kind_) {
      case ModelKind::exponential:
        for (double x : data_) {
          if (x < 0.0) fast_ = false;
          sum_ += x;
        }
        break;
      case ModelKind::weibull:
        log_x_.reserve(data_.size());
        for (double x : data_) {
          if (!(x > 0.0)) {
            fast_ = false;
            break;
          }
          log_x_.push_back(std::log(x));
          sum_log_ += log_x_.back();
        }
        break;
      case ModelKind::bernoulli:
        for (double x : data_) {
          if (x == 1.0) {
            successes_ += 1.0;
          } else if (x != 0.0) {
            fast_ = false;
          }
        }
        break;
      case ModelKind::normal:
        for (double x : data_) sum_ += x;
        if (!data_.empty()) {
          const double m = sum_ / n_;
          for (double x : data_) sum_sq_dev_ += (x - m) * (x - m);
        }
        break;
    }
  }

  std::size_t n() const noexcept { return data_.size(); }

  double operator()(const ParamPoint& theta) const {
    const Distribution dist = distribution_of(kind_, theta);
    validate(dist);
    if (data_.empty()) return 0.0;
    if (!fast_) {
      double total = 0.0;
      for (double x : data_) total += log_pdf(dist, x);
      return total;
    }
    switch (kind_) {
      case ModelKind::exponential:
        return -n_ * std::log(theta[0]) - sum_ / theta[0];
      case ModelKind::weibull: {
        const double eta = theta[0];
        const double beta = theta[1];
        const double log_eta = std::log(eta);
        double tail = 0.0;
        for (double lx : log_x_) tail += std::exp(beta * (lx - log_eta));
        return n_ * std::log(beta / eta) + (beta - 1.0) * (sum_log_ - n_ * log_eta) - tail;
      }
      case ModelKind::bernoulli: {
        const double p = theta[0];
        const double failures = n_ - successes_;
        double total = 0.0;
        if (successes_ > 0.0) total += successes_ * std::log(p);
        if (failures > 0.0) total += failures * std::log1p(-p);
        return total;
      }
      case ModelKind::normal: {
        const double mu = theta[0];
        const double var = theta[1];
        const double m = sum_ / n_;
        const double ss = sum_sq_dev_ + n_ * (m - mu) * (m - mu);
        return -0.5 * n_ * std::log(2.0 * std::numbers::pi * var) - ss / (2.0 * var);
      }
    }
    return 0.0;
  }

 private:
  ModelKind kind_;
  std::vector<double> data_;
  std::vector<double> log_x_;
  double n_ = 0.0;
  double sum_ = 0.0;
  double sum_log_ = 0.0;
  double sum_sq_dev_ = 0.0;
  double successes_ = 0.0;
  bool fast_ = true;
};

/// sum_i log f(x_i | theta); 0 for an empty sample (flagged in `diag`).
inline double log_likelihood(ModelKind kind, const ParamPoint& theta, const ObservationSample& data,
                             Diagnostics* diag = nullptr) {
  if (data.empty() && diag) diag->warn("empty sample: log-likelihood is the log of an empty product (0)");
  return LogLikelihood(kind, data)(theta);
}

// ---------------------------------------------------------------------------
// Quantities of interest

class QuantitySpec;

/// phi(theta) = E[h(Y) | theta]; an empty `h` means the identity.
struct MeanOf {
  std::function<double(double)> h;
  std::string label = "identity";
  bool probability_valued = false;
};

/// phi(theta) = P[Y > threshold | theta].
struct Exceedance {
  double threshold;
};

/// phi(theta) = q_alpha(theta), the alpha-quantile of Y.
struct QuantileOf {
  double order;
};

/// phi(theta) = -log10(inner(theta)) for a probability-valued inner quantity.
struct NegLog10Of {
  std::shared_ptr<const QuantitySpec> inner;
};

class QuantitySpec {
 public:
  using Variant = std::variant<MeanOf, Exceedance, QuantileOf, NegLog10Of>;

  QuantitySpec(MeanOf m) : value_(std::move(m)) {}  // NOLINT
  QuantitySpec(Exceedance e) : value_(e) {           // NOLINT
    if (!std::isfinite(e.threshold)) throw std::invalid_argument("exceedance threshold must be finite");
  }
  QuantitySpec(QuantileOf q) : value_(q) {  // NOLINT
    if (!(q.order > 0.0 && q.order < 1.0)) throw std::invalid_argument("quantile order must lie in (0, 1)");
  }
  QuantitySpec(NegLog10Of n) : value_(std::move(n)) {  // NOLINT
    const auto& inner = std::get<NegLog10Of>(value_).inner;
    if (!inner || !inner->is_probability_valued())
      throw std::invalid_argument("NegLog10Of must wrap a probability-valued quantity");
  }

  static QuantitySpec mean() { return MeanOf{}; }
  static QuantitySpec exceedance(double t) { return Exceedance{t}; }
  static QuantitySpec quantile(double alpha) { return QuantileOf{alpha}; }
  static QuantitySpec neg_log10(QuantitySpec inner) {
    return NegLog10Of{std::make_shared<const QuantitySpec>(std::move(inner))};
  }

  const Variant& value() const noexcept { return value_; }

  bool is_probability_valued() const {
    if (std::holds_alternative<Exceedance>(value_)) return true;
    if (const auto* m = std::get_if<MeanOf>(&value_)) return m->probability_valued;
    return false;
  }

  /// MeanOf or Exceedance: phi is an expectation E[h(Y)|theta].
  bool is_expectation() const {
    return std::holds_alternative<MeanOf>(value_) || std::holds_alternative<Exceedance>(value_);
  }

  std::string describe() const {
    return std::visit(overloaded{
                          [](const MeanOf& m) { return "mean(" + m.label + ")"; },
                          [](const Exceedance& e) { return "exceedance(" + format_real(e.threshold) + ")"; },
                          [](const QuantileOf& q) { return "quantile(" + format_real(q.order) + ")"; },
                          [](const NegLog10Of& n) { return "neg_log10(" + n.inner->describe() + ")"; },
                      },
                      value_);
  }

 private:
  Variant value_;
};

namespace detail {

inline constexpr double kMeanQuadratureRelTol = 1e-8;

inline double expect_under(const Distribution& dist, const std::function<double(double)>& integrand) {
  if (const auto* b = std::get_if<Bernoulli>(&dist)) {
    return (1.0 - b->prob) * integrand(0.0) + b->prob * integrand(1.0);
  }
  auto [lo, hi] = support(dist);
  auto f = [&](double x) {
    const double lp = log_pdf(dist, x);
    if (lp == -kInf) return 0.0;
    return integrand(x) * std::exp(lp);
  };
  double error = 0.0;
  double l1 = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 20, kMeanQuadratureRelTol, &error, &l1);
  if (!std::isfinite(value) || error > 10.0 * kMeanQuadratureRelTol * std::max(l1, 1e-300)) {
    throw NumericalError("quadrature did not converge for " + describe(dist) + ": value " + format_real(value) +
                         ", error estimate " + format_real(error));
  }
  return value;
}

}  // namespace detail

/// Exact value of phi(theta) for the given model and output transform.
inline double qoi_eval(const QuantitySpec& spec, const Model& model, const ParamPoint& theta) {
  const Distribution dist = model.sampling_distribution(theta);
  validate(dist);
  const bool identity = std::holds_alternative<IdentityMap>(model.output);
  return std::visit(
      overloaded{
          [&](const MeanOf& m) {
            if (!m.h && identity) return mean(dist);
            const auto& g = model.output;
            if (m.h) return detail::expect_under(dist, [&](double x) { return m.h(apply(g, x)); });
            return detail::expect_under(dist, [&](double x) { return apply(g, x); });
          },
          [&](const Exceedance& e) { return survival(dist, inverse(model.output, e.threshold)); },
          [&](const QuantileOf& q) { return apply(model.output, quantile(dist, q.order)); },
          [&](const NegLog10Of& n) {
            if (const auto* e = std::get_if<Exceedance>(&n.inner->value())) {
              return -log_survival(dist, inverse(model.output, e->threshold)) / std::numbers::ln10;
            }
            return -std::log10(qoi_eval(*n.inner, model, theta));
          },
      },
      spec.value());
}

/// ln phi(theta), evaluated in log space where that avoids underflow.
inline double qoi_log_eval(const QuantitySpec& spec, const Model& model, const ParamPoint& theta) {
  if (const auto* e = std::get_if<Exceedance>(&spec.value())) {
    const Distribution dist = model.sampling_distribution(theta);
    return log_survival(dist, inverse(model.output, e->threshold));
  }
  return std::log(qoi_eval(spec, model, theta));
}

}  // namespace dtuq

#endif  // DTUQ_MODEL_HPP
