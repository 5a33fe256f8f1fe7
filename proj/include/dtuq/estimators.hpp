#ifndef DTUQ_ESTIMATORS_HPP
#define DTUQ_ESTIMATORS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "dtuq/distributions.hpp"
#include "dtuq/error.hpp"
#include "dtuq/inference.hpp"
#include "dtuq/loss.hpp"
#include "dtuq/minimize.hpp"
#include "dtuq/model.hpp"
#include "dtuq/parallel.hpp"
#include "dtuq/rng.hpp"

namespace dtuq {

// ---------------------------------------------------------------------------
// Weighted summaries

/// phi-values with normalized weights; zero-weight draws are dropped.
struct WeightedValues {
  std::vector<double> values;
  std::vector<double> weights;
  std::vector<double> log_values;  // ln phi, filled when every phi > 0

  static WeightedValues equal_weights(std::vector<double> values) {
    WeightedValues wv;
    wv.weights.assign(values.size(), 1.0 / static_cast<double>(values.size()));
    wv.values = std::move(values);
    wv.fill_logs();
    return wv;
  }

  void fill_logs() {
    log_values.clear();
    if (std::all_of(values.begin(), values.end(), [](double v) { return v > 0.0; })) {
      log_values.reserve(values.size());
      for (double v : values) log_values.push_back(std::log(v));
    }
  }
};

/// Weighted lower quantile: smallest value whose cumulative weight >= alpha.
inline double weighted_quantile(const std::vector<double>& values, const std::vector<double>& weights, double alpha) {
  if (values.empty() || values.size() != weights.size()) throw std::invalid_argument("weighted quantile needs matching, nonempty inputs");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("quantile order must lie in (0, 1)");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  // Absorbs rounding in the cumulative sum so equal weights hit k/N exactly.
  constexpr double slack = 1e-12;
  double cum = 0.0;
  for (std::size_t idx : order) {
    cum += weights[idx];
    if (cum >= alpha - slack) return values[idx];
  }
  return values[order.back()];
}

inline double weighted_mean(const std::vector<double>& values, const std::vector<double>& weights) {
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += weights[i] * values[i];
  return acc;
}

/// Evaluates phi at every posterior point carrying positive weight.
inline WeightedValues evaluate_qoi(const QuantitySpec& spec, const Model& model, const WeightedPosterior& post) {
  if (post.kind != model.kind) throw std::invalid_argument("posterior and model kinds differ");
  const std::vector<double> w = post.normalized_weights();
  WeightedValues out;
  out.values.reserve(w.size());
  out.weights.reserve(w.size());
  bool logs_ok = true;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0)) continue;
    const double phi = qoi_eval(spec, model, post.points[i]);
    if (std::isnan(phi)) throw NumericalError("quantity of interest is not evaluable at " + describe(model.kind, post.points[i]));
    out.values.push_back(phi);
    out.weights.push_back(w[i]);
    if (logs_ok) {
      const double lv = qoi_log_eval(spec, model, post.points[i]);
      if (std::isnan(lv) || lv == std::numeric_limits<double>::infinity() || !(phi >= 0.0)) {
        logs_ok = false;
      } else {
        out.log_values.push_back(lv);
      }
    }
  }
  double total = 0.0;
  for (double x : out.weights) total += x;
  for (double& x : out.weights) x /= total;
  if (!logs_ok) out.log_values.clear();
  return out;
}

// ---------------------------------------------------------------------------
// Decision problems and Bayes estimation

/// phi-values under the posterior together with a loss: what Bayes estimation minimizes.
class DecisionProblem {
 public:
  DecisionProblem(const QuantitySpec& spec, LossSpec loss, const WeightedPosterior& post, const Model& model)
      : loss_(loss), sample_(evaluate_qoi(spec, model, post)) {
    validate(loss_);
  }

  DecisionProblem(LossSpec loss, WeightedValues sample) : loss_(loss), sample_(std::move(sample)) {
    validate(loss_);
    if (sample_.values.empty()) throw std::invalid_argument("decision problem needs a nonempty posterior");
  }

  const LossSpec& loss() const noexcept { return loss_; }
  const WeightedValues& sample() const noexcept { return sample_; }

  /// sum_i w_i C(phi_i, d).
  double expected_loss(double d) const {
    const auto& v = sample_.values;
    const auto& w = sample_.weights;
    if (std::holds_alternative<LogQuadraticLoss>(loss_)) {
      require_positive();
      if (!(d > 0.0)) throw std::domain_error("log-quadratic loss requires d > 0");
      const double ld = std::log(d);
      double acc = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double r = sample_.log_values[i] - ld;
        acc += w[i] * r * r;
      }
      return acc;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) acc += w[i] * loss_eval(loss_, v[i], d);
    return acc;
  }

  /// Closed-form Bayes decision for the built-in losses.
  double bayes_estimate() const {
    return std::visit(overloaded{
                          [&](const QuadraticLoss&) { return weighted_mean(sample_.values, sample_.weights); },
                          [&](const WeightedAbsoluteLoss& l) {
                            return weighted_quantile(sample_.values, sample_.weights, l.quantile_order());
                          },
                          [&](const LogQuadraticLoss&) {
                            require_positive();
                            return std::exp(weighted_mean(sample_.log_values, sample_.weights));
                          },
                      },
                      loss_);
  }

  /// Direct golden-section minimization of the expected loss over the
  /// posterior range of phi widened by 10% on each side.
  double bayes_estimate_numeric(double rel_tol = 1e-10) const {
    const auto [mn, mx] = std::minmax_element(sample_.values.begin(), sample_.values.end());
    double lo = *mn;
    double hi = *mx;
    if (lo == hi) return lo;
    const double pad = 0.1 * (hi - lo);
    if (std::holds_alternative<LogQuadraticLoss>(loss_)) {
      require_positive();
      const double llo = std::log(lo);
      const double lhi = std::log(hi);
      const double lpad = 0.1 * (lhi - llo);
      const double best = golden_section_minimize([&](double z) { return expected_loss(std::exp(z)); }, llo - lpad, lhi + lpad,
                                                  rel_tol * 1e-3, 1e-12);
      return std::exp(best);
    }
    return golden_section_minimize([&](double d) { return expected_loss(d); }, lo - pad, hi + pad, rel_tol,
                                   std::max(std::abs(lo), std::abs(hi)) * 1e-3);
  }

 private:
  void require_positive() const {
    if (sample_.log_values.size() != sample_.values.size())
      throw std::domain_error("log-quadratic loss requires phi > 0 at every posterior draw");
  }

  LossSpec loss_;
  WeightedValues sample_;
};

inline double posterior_expected_loss(const DecisionProblem& p, double d) { return p.expected_loss(d); }

inline double bayes_estimate(const DecisionProblem& p) { return p.bayes_estimate(); }

// ---------------------------------------------------------------------------
// Heuristic predictive estimation

struct PredictiveSample {
  std::vector<double> draws;
  std::uint64_t master_seed = 0;
  std::uint64_t stream_index = 0;
};

/**
 * Double Monte-Carlo: resample I parameter draws from the weighted posterior
 * (multinomial), then simulate one output y_i = G(x_i), x_i ~ f(.|theta_i).
 * Output is produced in fixed shards on rng.substream(k).
 */
inline PredictiveSample double_monte_carlo(const Model& model, const WeightedPosterior& post, std::size_t count,
                                           const RngStream& rng, unsigned workers = 1) {
  if (count == 0) throw std::invalid_argument("predictive sample size must be >= 1");
  if (post.kind != model.kind) throw std::invalid_argument("posterior and model kinds differ");
  const std::vector<double> w = post.normalized_weights();
  std::vector<double> cumulative(w.size());
  std::partial_sum(w.begin(), w.end(), cumulative.begin());
  cumulative.back() = 1.0;

  std::vector<Distribution> laws;
  laws.reserve(post.size());
  for (const auto& p : post.points) laws.push_back(model.sampling_distribution(p));

  PredictiveSample out;
  out.master_seed = rng.master_seed();
  out.stream_index = rng.stream_index();
  out.draws.resize(count);
  parallel_for(detail::shard_count(count), workers, [&](std::size_t shard) {
    RngStream local = rng.substream(shard);
    const std::size_t end = std::min(count, (shard + 1) * detail::kShardSize);
    for (std::size_t i = shard * detail::kShardSize; i < end; ++i) {
      const double u = local.uniform();
      auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
      const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), laws.size() - 1);
      out.draws[i] = apply(model.output, draw(laws[idx], local));
    }
  });
  return out;
}

/// Empirical lower alpha-quantile of a predictive sample.
inline double predictive_quantile(const PredictiveSample& sample, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("quantile order must lie in (0, 1)");
  std::vector<double> sorted = sample.draws;
  const std::size_t n = sorted.size();
  std::size_t k = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n) - 1;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
  return sorted[k];
}

struct MeanWithError {
  double mean;
  double std_error;
};

/// Sample mean of h(y) over a predictive sample with its Monte-Carlo error.
inline MeanWithError predictive_mean(const PredictiveSample& sample, const std::function<double(double)>& h = {}) {
  const double n = static_cast<double>(sample.draws.size());
  double s1 = 0.0;
  double s2 = 0.0;
  for (double y : sample.draws) {
    const double v = h ? h(y) : y;
    s1 += v;
    s2 += v * v;
  }
  const double m = s1 / n;
  const double var = n > 1.0 ? std::max(0.0, (s2 - n * m * m) / (n - 1.0)) : 0.0;
  return {m, std::sqrt(var / n)};
}

/// HPE of an expectation-form quantity: the posterior mean of phi. The
/// predictive mean of h(Y) equals it exactly, so no nested simulation is run.
inline double hpe_expectation(const QuantitySpec& spec, const WeightedPosterior& post, const Model& model) {
  if (!spec.is_expectation()) throw std::invalid_argument("use hpe_quantile");
  const WeightedValues wv = evaluate_qoi(spec, model, post);
  return weighted_mean(wv.values, wv.weights);
}

/// HPE of q_alpha: the alpha-quantile of a double Monte-Carlo predictive sample.
inline double hpe_quantile(double alpha, const WeightedPosterior& post, const Model& model, std::size_t count,
                           const RngStream& rng, unsigned workers = 1) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("quantile order must lie in (0, 1)");
  return predictive_quantile(double_monte_carlo(model, post, count, rng, workers), alpha);
}

/// Posterior mean of phi in closed form, where the conjugate law allows one
/// (identity output, mean or exceedance quantities). Empty otherwise.
inline std::optional<double> posterior_mean_closed(const QuantitySpec& spec, const Model& model, const ConjugatePosterior& law) {
  if (!std::holds_alternative<IdentityMap>(model.output)) return std::nullopt;
  const auto* m = std::get_if<MeanOf>(&spec.value());
  const auto* e = std::get_if<Exceedance>(&spec.value());
  if (m && m->h) return std::nullopt;
  if (!m && !e) return std::nullopt;
  if (const auto* be = std::get_if<Beta>(&law); be && model.kind == ModelKind::bernoulli) {
    const double p = be->a / (be->a + be->b);
    if (m) return p;
    if (e->threshold < 0.0) return 1.0;
    return e->threshold < 1.0 ? p : 0.0;
  }
  if (const auto* ig = std::get_if<InverseGamma>(&law); ig && model.kind == ModelKind::exponential) {
    if (m) {
      if (!(ig->shape > 1.0)) return std::nullopt;
      return ig->scale / (ig->shape - 1.0);
    }
    if (e->threshold <= 0.0) return 1.0;
    // E[exp(-t/theta)] under IG(a, b) is the Laplace transform of Gamma(a, b).
    return std::exp(-ig->shape * std::log1p(e->threshold / ig->scale));
  }
  if (const auto* nig = std::get_if<NormalInverseGamma>(&law); nig && model.kind == ModelKind::normal && m) return nig->mu;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Exponential / inverse-gamma closed forms

/// Posterior law of q_alpha = theta ln(1/(1-alpha)): IG(n0 + n, ln(1/(1-alpha)) (S0 + S_n)).
inline InverseGamma quantile_posterior_exponential(const ExpInvGamma& prior, const ObservationSample& data, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("quantile order must lie in (0, 1)");
  const auto post = std::get<InverseGamma>(conjugate_posterior(prior, data));
  return InverseGamma{post.shape, -std::log1p(-alpha) * post.scale};
}

/// Predictive alpha-quantile under the IG posterior:
/// (exp(ln(1/(1-alpha)) / (n0 + n)) - 1) (S0 + S_n).
inline double hpe_quantile_closed(const ExpInvGamma& prior, const ObservationSample& data, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("quantile order must lie in (0, 1)");
  const auto post = std::get<InverseGamma>(conjugate_posterior(prior, data));
  return std::expm1(-std::log1p(-alpha) / post.shape) * post.scale;
}

/// Two exponential configurations whose q_alpha posteriors coincide but whose
/// predictive quantiles differ, so the predictive quantile cannot be any
/// functional of the quantile posterior alone.
struct NotBayesDemo {
  struct Branch {
    double alpha;
    ExpInvGamma prior;  // empty data; prior shape carries the whole sample size
    InverseGamma quantile_posterior;
    double hpe;
    double bayes_quadratic;  // posterior mean of q_alpha
  };
  Branch first;
  Branch second;
  bool posteriors_identical;
  bool hpe_differ;
};

inline NotBayesDemo not_bayes_demo(double shape, double scale) {
  if (!(shape >= 2.0)) throw std::invalid_argument("not_bayes_demo needs N >= 2");
  if (!(scale > 0.0)) throw std::invalid_argument("not_bayes_demo needs scale > 0");
  auto branch = [&](double alpha) {
    const double total = scale / -std::log1p(-alpha);
    const ExpInvGamma prior{shape, total};
    const ObservationSample none;
    const InverseGamma qpost = quantile_posterior_exponential(prior, none, alpha);
    return NotBayesDemo::Branch{alpha, prior, qpost, hpe_quantile_closed(prior, none, alpha), qpost.scale / (qpost.shape - 1.0)};
  };
  NotBayesDemo demo{branch(0.5), branch(0.75), false, false};
  const auto& a = demo.first.quantile_posterior;
  const auto& b = demo.second.quantile_posterior;
  demo.posteriors_identical = a.shape == b.shape && std::abs(a.scale - b.scale) <= 1e-12 * std::abs(a.scale);
  demo.hpe_differ = demo.first.hpe != demo.second.hpe;
  return demo;
}

/// Bayes decision in closed form for conjugate laws where phi is an
/// increasing function of a scalar parameter (identity output): exponential
/// mean, quantile or exceedance under IG, bernoulli mean under Beta.
/// Empty when no closed form is registered.
inline std::optional<double> bayes_estimate_closed(const LossSpec& loss, const QuantitySpec& spec, const Model& model,
                                                   const ConjugatePosterior& law) {
  if (!std::holds_alternative<IdentityMap>(model.output)) return std::nullopt;
  const auto* m = std::get_if<MeanOf>(&spec.value());
  if (m && m->h) return std::nullopt;
  if (const auto* ig = std::get_if<InverseGamma>(&law); ig && model.kind == ModelKind::exponential) {
    const double a = ig->shape;
    const double b = ig->scale;
    // phi(theta) = c * theta for mean and quantile, exp(-t/theta) for exceedance.
    double c = 0.0;
    if (m) {
      c = 1.0;
    } else if (const auto* q = std::get_if<QuantileOf>(&spec.value())) {
      c = -std::log1p(-q->order);
    }
    if (c > 0.0) {
      return std::visit(overloaded{
                            [&](const QuadraticLoss&) -> std::optional<double> {
                              if (!(a > 1.0)) return std::nullopt;
                              return c * b / (a - 1.0);
                            },
                            [&](const WeightedAbsoluteLoss& l) -> std::optional<double> {
                              return c * quantile(Distribution{InverseGamma{a, b}}, l.quantile_order());
                            },
                            [&](const LogQuadraticLoss&) -> std::optional<double> {
                              return c * b * std::exp(-boost::math::digamma(a));
                            },
                        },
                        loss);
    }
    if (const auto* e = std::get_if<Exceedance>(&spec.value()); e && e->threshold > 0.0) {
      const double t = e->threshold;
      return std::visit(overloaded{
                            [&](const QuadraticLoss&) -> std::optional<double> { return std::exp(-a * std::log1p(t / b)); },
                            [&](const WeightedAbsoluteLoss& l) -> std::optional<double> {
                              return std::exp(-t / quantile(Distribution{InverseGamma{a, b}}, l.quantile_order()));
                            },
                            // E[1/theta] = a/b under IG(a, b)
                            [&](const LogQuadraticLoss&) -> std::optional<double> { return std::exp(-t * a / b); },
                        },
                        loss);
    }
    return std::nullopt;
  }
  if (const auto* be = std::get_if<Beta>(&law); be && model.kind == ModelKind::bernoulli && m) {
    return std::visit(overloaded{
                          [&](const QuadraticLoss&) -> std::optional<double> { return be->a / (be->a + be->b); },
                          [&](const WeightedAbsoluteLoss& l) -> std::optional<double> {
                            return quantile(Distribution{*be}, l.quantile_order());
                          },
                          [&](const LogQuadraticLoss&) -> std::optional<double> {
                            return std::exp(boost::math::digamma(be->a) - boost::math::digamma(be->a + be->b));
                          },
                      },
                      loss);
  }
  return std::nullopt;
}

/// Predictive alpha-quantile in closed form for an inverse-gamma law on the
/// exponential mean (identity output). Empty for other combinations.
inline std::optional<double> predictive_quantile_closed(double alpha, const Model& model, const ConjugatePosterior& law) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("quantile order must lie in (0, 1)");
  if (!std::holds_alternative<IdentityMap>(model.output) || model.kind != ModelKind::exponential) return std::nullopt;
  const auto* ig = std::get_if<InverseGamma>(&law);
  if (!ig) return std::nullopt;
  return std::expm1(-std::log1p(-alpha) / ig->shape) * ig->scale;
}

// ---------------------------------------------------------------------------
// Predictive quantile as the Bayes predictor of Y under c_alpha

/// c_alpha(y, d) = |y - d| (alpha 1{d < y} + (1 - alpha) 1{d > y}).
inline double pinball_loss(double alpha, double y, double d) {
  if (d < y) return alpha * (y - d);
  if (d > y) return (1.0 - alpha) * (d - y);
  return 0.0;
}

struct PredictorCheck {
  double hpe;            // empirical predictive alpha-quantile
  double argmin;         // grid minimizer of the average c_alpha
  double tolerance;      // grid step + local order-statistic spacing
  bool agree;
};

/**
 * Scans a uniform grid of candidate decisions d around the predictive
 * alpha-quantile and minimizes the predictive-sample average of c_alpha(y, d).
 */
inline PredictorCheck hpe_as_predictor_check(double alpha, const WeightedPosterior& post, const Model& model, std::size_t count,
                                             const RngStream& rng, unsigned workers = 1, std::size_t grid_points = 4001) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("quantile order must lie in (0, 1)");
  PredictiveSample sample = double_monte_carlo(model, post, count, rng, workers);
  std::vector<double> y = sample.draws;
  std::sort(y.begin(), y.end());
  const std::size_t n = y.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + y[i];

  auto rank = [&](double a) {
    const auto k = static_cast<std::size_t>(std::ceil(a * static_cast<double>(n)));
    return std::clamp<std::size_t>(k, 1, n) - 1;
  };
  const std::size_t kq = rank(alpha);
  const double hpe = y[kq];

  // Mean c_alpha at d, via prefix sums over the sorted sample.
  auto avg_loss = [&](double d) {
    const auto below = static_cast<std::size_t>(std::lower_bound(y.begin(), y.end(), d) - y.begin());
    const double sum_below = prefix[below];
    const double sum_above = prefix[n] - sum_below;
    const double n_below = static_cast<double>(below);
    const double n_above = static_cast<double>(n - below);
    return (alpha * (sum_above - n_above * d) + (1.0 - alpha) * (n_below * d - sum_below)) / static_cast<double>(n);
  };

  const double lo = y[rank(std::max(alpha - 0.05, 0.5 / static_cast<double>(n)))];
  const double hi = y[rank(std::min(alpha + 0.05, 1.0 - 0.5 / static_cast<double>(n)))];
  const std::size_t points = std::max<std::size_t>(grid_points, 3);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  double best_d = lo;
  double best = avg_loss(lo);
  for (std::size_t g = 1; g < points; ++g) {
    const double d = lo + step * static_cast<double>(g);
    const double v = avg_loss(d);
    if (v < best) {
      best = v;
      best_d = d;
    }
  }
  const double spacing = std::max(kq + 1 < n ? y[kq + 1] - y[kq] : 0.0, kq > 0 ? y[kq] - y[kq - 1] : 0.0);
  const double tol = step + spacing;
  return PredictorCheck{hpe, best_d, tol, std::abs(best_d - hpe) <= tol};
}

}  // namespace dtuq

#endif  // DTUQ_ESTIMATORS_HPP
