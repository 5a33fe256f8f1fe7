#ifndef DTUQ_INFERENCE_HPP
#define DTUQ_INFERENCE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dtuq/distributions.hpp"
#include "dtuq/error.hpp"
#include "dtuq/format.hpp"
#include "dtuq/model.hpp"
#include "dtuq/parallel.hpp"
#include "dtuq/rng.hpp"

namespace dtuq {

// ---------------------------------------------------------------------------
// Weighted posterior sample

enum class PosteriorSource { conjugate_exact, importance, metropolis, prior_only };

inline std::string_view to_string(PosteriorSource s) {
  switch (s) {
    case PosteriorSource::conjugate_exact:
      return "conjugate-exact";
    case PosteriorSource::importance:
      return "importance";
    case PosteriorSource::metropolis:
      return "metropolis";
    case PosteriorSource::prior_only:
      return "prior-only";
  }
  return "unknown";
}

/// Kish effective sample size (sum w)^2 / sum w^2 of self-normalized log-weights.
inline double effective_sample_size(const std::vector<double>& log_weights) {
  if (log_weights.empty()) return 0.0;
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(top)) return 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  for (double lw : log_weights) {
    const double w = std::exp(lw - top);
    s1 += w;
    s2 += w * w;
  }
  return s1 * s1 / s2;
}

/**
 * Weighted draws approximating pi(theta | D).
 *
 * log_weights are unnormalized; normalized_weights() rescales them to sum
 * to one. For exact and MCMC draws the weights are uniform (all zero).
 */
struct WeightedPosterior {
  ModelKind kind = ModelKind::exponential;
  std::vector<ParamPoint> points;
  std::vector<double> log_weights;
  double ess = 0.0;
  PosteriorSource source = PosteriorSource::prior_only;
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();  // metropolis only
  Diagnostics diagnostics;

  std::size_t size() const noexcept { return points.size(); }

  std::vector<double> normalized_weights() const {
    if (points.empty() || points.size() != log_weights.size())
      throw std::invalid_argument("weighted posterior must hold equally many points and weights (>= 1)");
    const double top = *std::max_element(log_weights.begin(), log_weights.end());
    if (!std::isfinite(top)) throw NumericalError("weighted posterior has no finite weight");
    std::vector<double> w(log_weights.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = std::exp(log_weights[i] - top);
      total += w[i];
    }
    for (double& x : w) x /= total;
    return w;
  }

  /// Uniformly weighted posterior from equally likely draws.
  static WeightedPosterior uniform(ModelKind kind, std::vector<ParamPoint> draws, PosteriorSource source) {
    WeightedPosterior post;
    post.kind = kind;
    post.log_weights.assign(draws.size(), 0.0);
    post.points = std::move(draws);
    post.ess = static_cast<double>(post.points.size());
    post.source = source;
    return post;
  }

  /// A single point mass (perfect information about theta).
  static WeightedPosterior point_mass(ModelKind kind, const ParamPoint& theta) {
    return uniform(kind, {theta}, PosteriorSource::conjugate_exact);
  }
};

/// Prior (or proposal) as a sampler plus its log-density on parameter space.
struct PriorModel {
  std::function<ParamPoint(RngStream&)> sample;
  std::function<double(const ParamPoint&)> log_pdf;
};

// ---------------------------------------------------------------------------
// Conjugate families

/// Exponential(mean theta) with theta ~ IG(n0, S0).
struct ExpInvGamma {
  double n0;
  double s0;
};

/// Bernoulli(theta) with theta ~ Beta(a, b); a = b = 0 is the improper Haldane prior.
struct BernoulliBeta {
  double a;
  double b;
};

/// Normal(mu, sigma2) with sigma2 ~ IG(a0, b0), mu | sigma2 ~ N(mu0, sigma2 / kappa0).
struct NormalNIG {
  double mu0;
  double kappa0;
  double a0;
  double b0;
};

using ConjugateSpec = std::variant<ExpInvGamma, BernoulliBeta, NormalNIG>;

/// Normal-inverse-gamma law over (mu, sigma2).
struct NormalInverseGamma {
  double mu;
  double kappa;
  double a;
  double b;
};

using ConjugatePosterior = std::variant<InverseGamma, Beta, NormalInverseGamma>;

inline ModelKind model_of(const ConjugateSpec& spec) {
  return std::visit(overloaded{[](const ExpInvGamma&) { return ModelKind::exponential; },
                               [](const BernoulliBeta&) { return ModelKind::bernoulli; },
                               [](const NormalNIG&) { return ModelKind::normal; }},
                    spec);
}

namespace detail {

inline void check_exponential_data(const ObservationSample& data) {
  for (double x : data.values())
    if (x < 0.0) throw std::invalid_argument("exponential data must be >= 0");
}

inline std::pair<double, double> count_bernoulli(const ObservationSample& data) {
  double ones = 0.0;
  double zeros = 0.0;
  for (double x : data.values()) {
    if (x == 1.0) {
      ones += 1.0;
    } else if (x == 0.0) {
      zeros += 1.0;
    } else {
      throw std::invalid_argument("bernoulli data must be 0 or 1, got " + format_real(x));
    }
  }
  return {ones, zeros};
}

}  // namespace detail

/// Closed-form posterior law of the conjugate pair.
inline ConjugatePosterior conjugate_posterior(const ConjugateSpec& spec, const ObservationSample& data) {
  const double n = static_cast<double>(data.n());
  return std::visit(
      overloaded{
          [&](const ExpInvGamma& s) -> ConjugatePosterior {
            if (!(s.n0 > 0.0) || !(s.s0 > 0.0)) throw std::invalid_argument("inverse-gamma prior needs n0 > 0 and S0 > 0");
            detail::check_exponential_data(data);
            return InverseGamma{s.n0 + n, s.s0 + data.sum()};
          },
          [&](const BernoulliBeta& s) -> ConjugatePosterior {
            if (!(s.a >= 0.0) || !(s.b >= 0.0)) throw std::invalid_argument("beta prior needs a >= 0 and b >= 0");
            const auto [ones, zeros] = detail::count_bernoulli(data);
            const double a = s.a + ones;
            const double b = s.b + zeros;
            if (!(a > 0.0))
              throw NumericalError("improper posterior: beta prior a=0 needs at least one success, data has successes=0");
            if (!(b > 0.0))
              throw NumericalError("improper posterior: beta prior b=0 needs at least one failure, data has failures=0");
            return Beta{a, b};
          },
          [&](const NormalNIG& s) -> ConjugatePosterior {
            if (!(s.kappa0 > 0.0) || !(s.a0 > 0.0) || !(s.b0 > 0.0))
              throw std::invalid_argument("normal-inverse-gamma prior needs kappa0, a0, b0 > 0");
            if (data.empty()) return NormalInverseGamma{s.mu0, s.kappa0, s.a0, s.b0};
            const double xbar = data.sum() / n;
            double ss = 0.0;
            for (double x : data.values()) ss += (x - xbar) * (x - xbar);
            const double kappa = s.kappa0 + n;
            return NormalInverseGamma{(s.kappa0 * s.mu0 + n * xbar) / kappa, kappa, s.a0 + 0.5 * n,
                                      s.b0 + 0.5 * ss + s.kappa0 * n * (xbar - s.mu0) * (xbar - s.mu0) / (2.0 * kappa)};
          },
      },
      spec);
}

/// Sampler and density of a conjugate law, viewed as a law on ParamPoint.
inline PriorModel as_prior(const ConjugatePosterior& law) {
  return std::visit(
      overloaded{
          [](const InverseGamma& ig) {
            const Distribution d = ig;
            validate(d);
            return PriorModel{[d](RngStream& rng) { return ParamPoint::exponential(draw(d, rng)); },
                              [d](const ParamPoint& p) { return log_pdf(d, p[0]); }};
          },
          [](const Beta& be) {
            const Distribution d = be;
            if (!is_proper(d)) throw std::domain_error("improper distribution has no density");
            return PriorModel{[d](RngStream& rng) { return ParamPoint::bernoulli(draw(d, rng)); },
                              [d](const ParamPoint& p) { return log_pdf(d, p[0]); }};
          },
          [](const NormalInverseGamma& nig) {
            const Distribution var_law = InverseGamma{nig.a, nig.b};
            return PriorModel{[nig, var_law](RngStream& rng) {
                                const double var = draw(var_law, rng);
                                const double mu = draw(Normal{nig.mu, var / nig.kappa}, rng);
                                return ParamPoint::normal(mu, var);
                              },
                              [nig, var_law](const ParamPoint& p) {
                                if (!(p[1] > 0.0)) return -std::numeric_limits<double>::infinity();
                                return log_pdf(var_law, p[1]) + log_pdf(Normal{nig.mu, p[1] / nig.kappa}, p[0]);
                              }};
          },
      },
      law);
}

/// The prior of a conjugate spec as a law (requires a proper prior).
inline ConjugatePosterior prior_law(const ConjugateSpec& spec) {
  return std::visit(overloaded{[](const ExpInvGamma& s) -> ConjugatePosterior { return InverseGamma{s.n0, s.s0}; },
                               [](const BernoulliBeta& s) -> ConjugatePosterior { return Beta{s.a, s.b}; },
                               [](const NormalNIG& s) -> ConjugatePosterior {
                                 return NormalInverseGamma{s.mu0, s.kappa0, s.a0, s.b0};
                               }},
                    spec);
}

namespace detail {
inline constexpr std::size_t kShardSize = 4096;

inline std::size_t shard_count(std::size_t n) { return (n + kShardSize - 1) / kShardSize; }
}  // namespace detail

/// N exact i.i.d. draws from a conjugate law. Draws are produced in fixed-size
/// shards, shard k on rng.substream(k), so results do not depend on `workers`.
inline WeightedPosterior draw_conjugate(ModelKind kind, const ConjugatePosterior& law, std::size_t count, const RngStream& rng,
                                        unsigned workers = 1) {
  if (count == 0) throw std::invalid_argument("posterior draw count must be >= 1");
  const PriorModel sampler = as_prior(law);
  std::vector<ParamPoint> draws(count);
  parallel_for(detail::shard_count(count), workers, [&](std::size_t shard) {
    RngStream local = rng.substream(shard);
    const std::size_t end = std::min(count, (shard + 1) * detail::kShardSize);
    for (std::size_t i = shard * detail::kShardSize; i < end; ++i) draws[i] = sampler.sample(local);
  });
  return WeightedPosterior::uniform(kind, std::move(draws), PosteriorSource::conjugate_exact);
}

// ---------------------------------------------------------------------------
// Hierarchical Weibull prior: beta ~ Gamma(m, m/beta0) 1{beta > beta_l},
// mu = eta^(-beta) | beta ~ Gamma(shape m, rate b(m, beta)),
// b(m, beta) = t_e^beta / (2^(1/m) - 1), which puts the prior predictive
// median of Q at t_e for every beta.

struct HierarchicalWeibullPrior {
  double m = 1.0;           // virtual data size
  double beta0 = 1.5;       // prior guess on the shape
  double t_e = 0.0;         // prior guess on the median annual maximum
  double beta_lower = 1.0;  // truncation of the shape prior

  /// Median of W(eta0, beta0); the default recipe for t_e.
  static double weibull_median(double eta0, double beta0) { return eta0 * std::pow(std::numbers::ln2, 1.0 / beta0); }

  static HierarchicalWeibullPrior reference() {
    return HierarchicalWeibullPrior{1.0, 1.5, weibull_median(800.0, 1.5), 1.0};
  }

  void validate() const {
    if (!(m > 0.0) || !(beta0 > 0.0) || !(t_e > 0.0) || !(beta_lower >= 0.0) || !std::isfinite(m) || !std::isfinite(beta0) ||
        !std::isfinite(t_e) || !std::isfinite(beta_lower))
      throw std::invalid_argument("hierarchical weibull prior needs m, beta0, t_e > 0 and beta_lower >= 0");
  }

  double log_b(double beta) const { return beta * std::log(t_e) - std::log(std::expm1(std::numbers::ln2 / m)); }

  double b(double beta) const { return std::exp(log_b(beta)); }

  Distribution shape_prior() const { return TruncatedGamma{m, m / beta0, beta_lower}; }

  ParamPoint sample(RngStream& rng) const {
    const double beta = draw(shape_prior(), rng);
    const double log_mu = std::log(detail::standard_gamma(m, rng)) - log_b(beta);
    return ParamPoint::weibull(std::exp(-log_mu / beta), beta);
  }

  /// Joint log-density of (eta, beta), including the Jacobian of mu = eta^-beta.
  double log_pdf(const ParamPoint& p) const {
    const double eta = p[0];
    const double beta = p[1];
    if (!(eta > 0.0) || !(beta > beta_lower) || !std::isfinite(eta) || !std::isfinite(beta))
      return -std::numeric_limits<double>::infinity();
    const double log_eta = std::log(eta);
    const double log_mu = -beta * log_eta;
    const double lb = log_b(beta);
    const double log_gamma = m * lb - std::lgamma(m) + (m - 1.0) * log_mu - std::exp(lb + log_mu);
    return dtuq::log_pdf(shape_prior(), beta) + log_gamma + std::log(beta) - (beta + 1.0) * log_eta;
  }

  PriorModel as_prior() const {
    validate();
    const HierarchicalWeibullPrior self = *this;
    return PriorModel{[self](RngStream& rng) { return self.sample(rng); },
                      [self](const ParamPoint& p) { return self.log_pdf(p); }};
  }
};

// ---------------------------------------------------------------------------
// Maximum likelihood

namespace detail {

struct WeibullProfile {
  std::vector<double> log_x;
  double mean_log = 0.0;
  double max_log = 0.0;

  explicit WeibullProfile(const std::vector<double>& xs) {
    log_x.reserve(xs.size());
    max_log = -std::numeric_limits<double>::infinity();
    for (double x : xs) {
      log_x.push_back(std::log(x));
      mean_log += log_x.back();
      max_log = std::max(max_log, log_x.back());
    }
    mean_log /= static_cast<double>(xs.size());
  }

  // Profile score g(beta) = sum x^b ln x / sum x^b - 1/b - mean(ln x) and g'.
  std::pair<double, double> score(double beta) const {
    double s0 = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    for (double lx : log_x) {
      const double w = std::exp(beta * (lx - max_log));
      s0 += w;
      s1 += w * lx;
      s2 += w * lx * lx;
    }
    const double ratio = s1 / s0;
    const double g = ratio - 1.0 / beta - mean_log;
    const double dg = s2 / s0 - ratio * ratio + 1.0 / (beta * beta);
    return {g, dg};
  }

  double scale_for(double beta) const {
    double s0 = 0.0;
    for (double lx : log_x) s0 += std::exp(beta * (lx - max_log));
    return std::exp(max_log + std::log(s0 / static_cast<double>(log_x.size())) / beta);
  }
};

inline constexpr int kNewtonMaxIter = 100;
inline constexpr double kNewtonTol = 1e-10;
inline constexpr double kShapeBracketLo = 0.01;
inline constexpr double kShapeBracketHi = 100.0;

inline double weibull_shape_mle(const WeibullProfile& prof) {
  double beta = 1.0;
  for (int iter = 0; iter < kNewtonMaxIter; ++iter) {
    const auto [g, dg] = prof.score(beta);
    if (!std::isfinite(g) || !(dg > 0.0)) break;
    const double next = beta - g / dg;
    if (!(next > 0.0) || !std::isfinite(next)) break;
    if (std::abs(next - beta) < kNewtonTol) {
      if (next >= kShapeBracketLo && next <= kShapeBracketHi) return next;
      break;
    }
    beta = next;
  }
  // Bisection fallback; the profile score is increasing in beta.
  double lo = kShapeBracketLo;
  double hi = kShapeBracketHi;
  if (prof.score(lo).first > 0.0 || prof.score(hi).first < 0.0)
    throw NumericalError("shape MLE diverges: profile equation has no root in [0.01, 100]");
  while (hi - lo > kNewtonTol * std::max(1.0, lo)) {
    const double mid = 0.5 * (lo + hi);
    if (prof.score(mid).first < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Maximum likelihood estimate of theta.
inline ParamPoint mle_fit(ModelKind kind, const ObservationSample& data) {
  if (data.empty()) throw NumericalError("MLE undefined for an empty sample");
  const auto& xs = data.values();
  const double n = static_cast<double>(xs.size());
  switch (kind) {
    case ModelKind::exponential: {
      detail::check_exponential_data(data);
      const double m = data.sum() / n;
      if (!(m > 0.0)) throw NumericalError("exponential MLE undefined: sample mean is 0");
      return ParamPoint::exponential(m);
    }
    case ModelKind::bernoulli: {
      const auto [ones, zeros] = detail::count_bernoulli(data);
      return ParamPoint::bernoulli(ones / (ones + zeros));
    }
    case ModelKind::normal: {
      const double m = data.sum() / n;
      double ss = 0.0;
      for (double x : xs) ss += (x - m) * (x - m);
      if (!(ss > 0.0)) throw NumericalError("normal MLE undefined: sample variance is 0");
      return ParamPoint::normal(m, ss / n);
    }
    case ModelKind::weibull: {
      if (xs.size() < 2) throw NumericalError("weibull MLE needs at least two observations");
      for (double x : xs)
        if (!(x > 0.0)) throw std::invalid_argument("weibull data must be > 0");
      if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); }))
        throw NumericalError("shape MLE diverges: all observations are equal");
      const detail::WeibullProfile prof(xs);
      const double beta = detail::weibull_shape_mle(prof);
      return ParamPoint::weibull(prof.scale_for(beta), beta);
    }
  }
  throw std::invalid_argument("unknown model kind");
}

/// Plug-in estimate phi(theta_hat).
inline double plug_in(const QuantitySpec& spec, const Model& model, const ParamPoint& theta_hat) {
  return qoi_eval(spec, model, theta_hat);
}

// ---------------------------------------------------------------------------
// Importance sampling

struct ImportanceOptions {
  std::optional<PriorModel> proposal;  // default: the prior itself
  unsigned workers = 1;
  double ess_warn_fraction = 0.01;
};

/**
 * Self-normalized importance sampling of pi(theta|D) ∝ L(D|theta) pi(theta).
 *
 * Draws come from the proposal (the prior unless overridden) in fixed shards
 * of 4096, shard k on rng.substream(k), concatenated in shard order.
 */
inline WeightedPosterior sample_posterior_is(ModelKind kind, const PriorModel& prior, const ObservationSample& data,
                                             std::size_t count, const RngStream& rng, const ImportanceOptions& opts = {}) {
  if (count < 100) throw std::invalid_argument("importance sampling needs N >= 100 draws");
  const LogLikelihood loglik(kind, data);
  const PriorModel& proposal = opts.proposal ? *opts.proposal : prior;
  const bool corrected = opts.proposal.has_value();

  WeightedPosterior post;
  post.kind = kind;
  post.points.resize(count);
  post.log_weights.resize(count);
  parallel_for(detail::shard_count(count), opts.workers, [&](std::size_t shard) {
    RngStream local = rng.substream(shard);
    const std::size_t end = std::min(count, (shard + 1) * detail::kShardSize);
    for (std::size_t i = shard * detail::kShardSize; i < end; ++i) {
      ParamPoint theta = proposal.sample(local);
      double lw = is_valid(kind, theta) ? loglik(theta) : -std::numeric_limits<double>::infinity();
      if (corrected && std::isfinite(lw)) lw += prior.log_pdf(theta) - proposal.log_pdf(theta);
      if (std::isnan(lw)) lw = -std::numeric_limits<double>::infinity();
      post.points[i] = theta;
      post.log_weights[i] = lw;
    }
  });

  if (data.empty() && !corrected) {
    std::fill(post.log_weights.begin(), post.log_weights.end(), 0.0);
    post.source = PosteriorSource::prior_only;
    post.ess = static_cast<double>(count);
    return post;
  }
  const double top = *std::max_element(post.log_weights.begin(), post.log_weights.end());
  if (!std::isfinite(top)) throw NumericalError("prior–data conflict: zero-likelihood proposal");
  post.source = PosteriorSource::importance;
  post.ess = effective_sample_size(post.log_weights);
  if (post.ess < opts.ess_warn_fraction * static_cast<double>(count))
    post.diagnostics.warn("low importance-sampling ess: " + format_real(post.ess) + " of " + std::to_string(count) + " draws");
  return post;
}

// ---------------------------------------------------------------------------
// Unconstrained coordinates for random-walk proposals

namespace detail {

enum class Link { identity, log, logit };

inline std::array<Link, 2> links(ModelKind kind) {
  switch (kind) {
    case ModelKind::exponential:
      return {Link::log, Link::identity};
    case ModelKind::weibull:
      return {Link::log, Link::log};
    case ModelKind::bernoulli:
      return {Link::logit, Link::identity};
    case ModelKind::normal:
      return {Link::identity, Link::log};
  }
  return {Link::identity, Link::identity};
}

inline double to_free(Link l, double v) {
  switch (l) {
    case Link::log:
      return std::log(v);
    case Link::logit:
      return std::log(v) - std::log1p(-v);
    case Link::identity:
      return v;
  }
  return v;
}

inline double from_free(Link l, double z) {
  switch (l) {
    case Link::log:
      return std::exp(z);
    case Link::logit:
      return 1.0 / (1.0 + std::exp(-z));
    case Link::identity:
      return z;
  }
  return z;
}

// log |d theta / d z| for one coordinate.
inline double log_jacobian(Link l, double z) {
  switch (l) {
    case Link::log:
      return z;
    case Link::logit:
      return -std::log1p(std::exp(-z)) - std::log1p(std::exp(z));
    case Link::identity:
      return 0.0;
  }
  return 0.0;
}

inline constexpr std::size_t kMaxAutocorrLag = 4000;

// Geyer initial-positive-sequence estimate of the integrated autocorrelation.
inline double chain_ess(const std::vector<double>& chain) {
  const std::size_t n = chain.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : chain) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : chain) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  if (!(var > 0.0)) return 1.0;
  auto rho = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += (chain[i] - mean) * (chain[i + lag] - mean);
    return acc / (static_cast<double>(n) * var);
  };
  double tau = -1.0;
  const std::size_t max_lag = std::min<std::size_t>(n, kMaxAutocorrLag);
  for (std::size_t k = 0; 2 * k + 1 < max_lag; ++k) {
    const double pair = rho(2 * k) + rho(2 * k + 1);
    if (!(pair > 0.0)) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / static_cast<double>(n));
  return static_cast<double>(n) / tau;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Random-walk Metropolis

struct MetropolisOptions {
  std::size_t draws = 20000;   // total iterations, burn-in included
  std::size_t burn_in = 2000;
  std::vector<double> step_scales;  // per coordinate, on the unconstrained scale
  ParamPoint initial;
  double ess_warn_fraction = 0.01;
};

/**
 * Random-walk Metropolis on log (positive), logit (probability) or identity
 * transformed coordinates. Returns the post-burn-in chain with uniform
 * weights; ess is the smallest per-coordinate autocorrelation ess.
 */
inline WeightedPosterior sample_posterior_mh(ModelKind kind, const std::function<double(const ParamPoint&)>& prior_log_pdf,
                                             const ObservationSample& data, const MetropolisOptions& opts, RngStream rng) {
  const std::size_t dim = dimension(kind);
  if (opts.burn_in >= opts.draws) throw std::invalid_argument("burn-in must be smaller than the number of draws");
  if (opts.step_scales.size() != dim) throw std::invalid_argument("need one step scale per parameter coordinate");
  for (double s : opts.step_scales)
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("step scales must be finite and > 0");
  if (!is_valid(kind, opts.initial)) throw std::invalid_argument("initial point is outside the parameter space");

  const LogLikelihood loglik(kind, data);
  const auto link = detail::links(kind);
  auto log_target = [&](const std::array<double, 2>& z) {
    std::array<double, 2> c{};
    double jac = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      c[j] = detail::from_free(link[j], z[j]);
      jac += detail::log_jacobian(link[j], z[j]);
    }
    const ParamPoint p = ParamPoint::from_coords(kind, std::span<const double>(c.data(), dim));
    if (!is_valid(kind, p)) return -std::numeric_limits<double>::infinity();
    const double lp = prior_log_pdf(p);
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    const double v = loglik(p) + lp + jac;
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  };

  std::array<double, 2> z{};
  for (std::size_t j = 0; j < dim; ++j) z[j] = detail::to_free(link[j], opts.initial[j]);
  double current = log_target(z);
  if (!std::isfinite(current)) throw NumericalError("metropolis start point has zero posterior density");

  const std::size_t kept = opts.draws - opts.burn_in;
  std::vector<ParamPoint> chain;
  chain.reserve(kept);
  std::array<std::vector<double>, 2> traces;
  for (std::size_t j = 0; j < dim; ++j) traces[j].reserve(kept);
  std::size_t accepted = 0;
  for (std::size_t it = 0; it < opts.draws; ++it) {
    std::array<double, 2> prop = z;
    for (std::size_t j = 0; j < dim; ++j) prop[j] += opts.step_scales[j] * detail::standard_normal(rng);
    const double cand = log_target(prop);
    if (std::isfinite(cand) && std::log(rng.uniform()) < cand - current) {
      z = prop;
      current = cand;
      ++accepted;
    }
    if (it >= opts.burn_in) {
      std::array<double, 2> c{};
      for (std::size_t j = 0; j < dim; ++j) {
        c[j] = detail::from_free(link[j], z[j]);
        traces[j].push_back(z[j]);
      }
      chain.push_back(ParamPoint::from_coords(kind, std::span<const double>(c.data(), dim)));
    }
  }
  if (accepted == 0) throw NumericalError("metropolis sampler accepted no proposals");

  WeightedPosterior post = WeightedPosterior::uniform(kind, std::move(chain), PosteriorSource::metropolis);
  double ess = static_cast<double>(kept);
  for (std::size_t j = 0; j < dim; ++j) ess = std::min(ess, detail::chain_ess(traces[j]));
  post.ess = std::clamp(ess, 1.0, static_cast<double>(kept));
  post.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(opts.draws);
  if (post.ess < opts.ess_warn_fraction * static_cast<double>(kept))
    post.diagnostics.warn("low metropolis ess: " + format_real(post.ess) + " of " + std::to_string(kept) + " draws");
  return post;
}

// ---------------------------------------------------------------------------
// Proposal centred at the MLE

/**
 * Independent-coordinate Student-t(4) proposal on the unconstrained scale,
 * centred at the MLE with scales `inflation` times the curvature-based
 * standard errors of the log-likelihood. An escape hatch for importance
 * sampling when the prior proposal yields a low ess.
 */
inline PriorModel mle_centered_proposal(ModelKind kind, const ObservationSample& data, double inflation = 2.0) {
  const ParamPoint center = mle_fit(kind, data);
  const std::size_t dim = dimension(kind);
  const auto link = detail::links(kind);
  const LogLikelihood loglik(kind, data);

  std::array<double, 2> z0{};
  for (std::size_t j = 0; j < dim; ++j) z0[j] = detail::to_free(link[j], center[j]);
  auto value_at = [&](std::array<double, 2> z) {
    std::array<double, 2> c{};
    for (std::size_t j = 0; j < dim; ++j) c[j] = detail::from_free(link[j], z[j]);
    return loglik(ParamPoint::from_coords(kind, std::span<const double>(c.data(), dim)));
  };
  std::array<double, 2> scale{1.0, 1.0};
  const double f0 = value_at(z0);
  for (std::size_t j = 0; j < dim; ++j) {
    const double h = 1e-4 * std::max(1.0, std::abs(z0[j]));
    auto zp = z0;
    auto zm = z0;
    zp[j] += h;
    zm[j] -= h;
    const double curv = -(value_at(zp) - 2.0 * f0 + value_at(zm)) / (h * h);
    scale[j] = inflation * ((curv > 0.0 && std::isfinite(curv)) ? 1.0 / std::sqrt(curv) : 1.0);
  }

  constexpr double nu = 4.0;
  const double log_t_norm = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi);
  auto sample = [=](RngStream& rng) {
    std::array<double, 2> c{};
    for (std::size_t j = 0; j < dim; ++j) {
      const double g = detail::standard_gamma(0.5 * nu, rng) / (0.5 * nu);
      const double t = detail::standard_normal(rng) / std::sqrt(g);
      c[j] = detail::from_free(link[j], z0[j] + scale[j] * t);
    }
    return ParamPoint::from_coords(kind, std::span<const double>(c.data(), dim));
  };
  auto density = [=](const ParamPoint& p) {
    double total = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double z = detail::to_free(link[j], p[j]);
      const double u = (z - z0[j]) / scale[j];
      total += log_t_norm - std::log(scale[j]) - 0.5 * (nu + 1.0) * std::log1p(u * u / nu);
      total -= detail::log_jacobian(link[j], z);
    }
    return total;
  };
  return PriorModel{sample, density};
}

// ---------------------------------------------------------------------------
// Asymptotic normal approximations (exponential model, I(theta) = 1/theta^2)

enum class ApproxKind { mle_sampling, posterior };

struct NormalApprox {
  double center;
  double variance;
  ApproxKind kind;

  double sd() const { return std::sqrt(variance); }
  double cdf(double x) const { return dtuq::cdf(Normal{center, variance}, x); }
};

namespace detail {

inline double exponential_qoi_derivative(const QuantitySpec& spec, const Model& model, double theta) {
  const bool identity = std::holds_alternative<IdentityMap>(model.output);
  if (identity) {
    if (const auto* m = std::get_if<MeanOf>(&spec.value()); m && !m->h) return 1.0;
    if (const auto* e = std::get_if<Exceedance>(&spec.value())) {
      if (e->threshold <= 0.0) return 0.0;
      return e->threshold / (theta * theta) * std::exp(-e->threshold / theta);
    }
    if (const auto* q = std::get_if<QuantileOf>(&spec.value())) return -std::log1p(-q->order);
    if (const auto* n = std::get_if<NegLog10Of>(&spec.value())) {
      if (const auto* e = std::get_if<Exceedance>(&n->inner->value()); e && e->threshold > 0.0)
        return -e->threshold / (theta * theta * std::numbers::ln10);
    }
  }
  const double h = 1e-5 * theta;
  return (qoi_eval(spec, model, ParamPoint::exponential(theta + h)) -
          qoi_eval(spec, model, ParamPoint::exponential(theta - h))) /
         (2.0 * h);
}

}  // namespace detail

/**
 * N(phi(theta_ref), I^-1(theta_ref) phi'(theta_ref)^2 / n).
 *
 * With kind = mle_sampling, theta_ref is the true parameter and the result
 * approximates the sampling law of the plug-in MLE; with kind = posterior,
 * theta_ref is the MLE and the result approximates the posterior of phi.
 */
inline NormalApprox asymptotic_approx(ApproxKind kind, const Model& model, const ParamPoint& theta_ref,
                                      const QuantitySpec& spec, std::size_t n) {
  if (model.kind != ModelKind::exponential) throw std::invalid_argument("no Fisher information registered");
  if (n == 0) throw std::invalid_argument("asymptotic approximation needs n >= 1");
  const double theta = theta_ref[0];
  if (!(theta > 0.0)) throw std::invalid_argument("exponential mean must be > 0");
  const double inv_fisher = theta * theta;
  const double deriv = detail::exponential_qoi_derivative(spec, model, theta);
  const double var = inv_fisher * deriv * deriv / static_cast<double>(n);
  if (!(var > 0.0) || !std::isfinite(var))
    throw NumericalError("asymptotic variance is not finite and positive (phi' = " + format_real(deriv) + ")");
  return NormalApprox{qoi_eval(spec, model, theta_ref), var, kind};
}

}  // namespace dtuq

#endif  // DTUQ_INFERENCE_HPP
