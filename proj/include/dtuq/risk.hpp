#ifndef DTUQ_RISK_HPP
#define DTUQ_RISK_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dtuq/distributions.hpp"
#include "dtuq/error.hpp"
#include "dtuq/inference.hpp"
#include "dtuq/loss.hpp"
#include "dtuq/model.hpp"
#include "dtuq/parallel.hpp"
#include "dtuq/rng.hpp"

namespace dtuq {

/// A decision rule delta(D). Must be deterministic given (sample, stream).
struct EstimatorHandle {
  std::string name;
  std::function<double(const ObservationSample&, RngStream&)> procedure;
  std::string settings_digest;
};

struct RiskReport {
  std::string estimator;
  double risk = 0.0;
  double mc_std_error = 0.0;
  std::size_t replicates = 0;  // successful replicates
  std::size_t failures = 0;
  std::string loss_digest;
  std::string truth_digest;  // theta_true or prior description
};

struct RiskOptions {
  unsigned workers = 1;
  double max_failure_fraction = 0.01;
};

/// Draws an i.i.d. sample of size n from the sampling law at theta.
inline ObservationSample simulate_sample(const Model& model, const ParamPoint& theta, std::size_t n, RngStream& rng) {
  return ObservationSample(sample(model.sampling_distribution(theta), rng, n));
}

namespace detail {

// Runs `reps` replicates, replicate r on rng.substream(r); each returns the
// realized loss or throws. Failed replicates are dropped and counted.
inline RiskReport run_replicates(const EstimatorHandle& est, std::size_t reps, const RngStream& rng, const RiskOptions& opts,
                                 const std::function<double(RngStream&)>& replicate) {
  if (reps < 2) throw std::invalid_argument("risk estimation needs reps >= 2");
  if (!est.procedure) throw std::invalid_argument("estimator '" + est.name + "' has no procedure");
  std::vector<double> losses(reps, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> ok(reps, 0);
  parallel_for(reps, opts.workers, [&](std::size_t r) {
    RngStream local = rng.substream(r);
    try {
      const double v = replicate(local);
      if (std::isfinite(v)) {
        losses[r] = v;
        ok[r] = 1;
      }
    } catch (const std::exception&) {
      // counted below
    }
  });

  RiskReport rep;
  rep.estimator = est.name;
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    if (!ok[r]) {
      ++rep.failures;
      continue;
    }
    s1 += losses[r];
    s2 += losses[r] * losses[r];
    ++rep.replicates;
  }
  if (static_cast<double>(rep.failures) > opts.max_failure_fraction * static_cast<double>(reps))
    throw NumericalError("estimator '" + est.name + "' failed on " + std::to_string(rep.failures) + " of " +
                         std::to_string(reps) + " replicates");
  if (rep.replicates < 2) throw NumericalError("fewer than 2 successful replicates");
  const double m = static_cast<double>(rep.replicates);
  rep.risk = s1 / m;
  // Two-pass variance keeps the error small when the losses are large and similar.
  double ss = 0.0;
  for (std::size_t r = 0; r < reps; ++r)
    if (ok[r]) ss += (losses[r] - rep.risk) * (losses[r] - rep.risk);
  rep.mc_std_error = std::sqrt(ss / (m - 1.0) / m);
  return rep;
}

}  // namespace detail

/// Frequentist risk E[C(phi(theta), delta(D)) | theta] over replicated data sets.
inline RiskReport frequentist_risk(const EstimatorHandle& est, const Model& model, const ParamPoint& theta_true,
                                   const QuantitySpec& spec, const LossSpec& loss, std::size_t n, std::size_t reps,
                                   const RngStream& rng, const RiskOptions& opts = {}) {
  if (n == 0) throw std::invalid_argument("risk estimation needs n >= 1");
  validate(loss);
  const double phi = qoi_eval(spec, model, theta_true);
  RiskReport rep = detail::run_replicates(est, reps, rng, opts, [&](RngStream& local) {
    const ObservationSample data = simulate_sample(model, theta_true, n, local);
    const double d = est.procedure(data, local);
    return loss_eval(loss, phi, d);
  });
  rep.loss_digest = describe(loss);
  rep.truth_digest = describe(model.kind, theta_true);
  return rep;
}

/// Bayes risk: theta ~ prior, D ~ L(.|theta), average of C(phi(theta), delta(D)).
inline RiskReport bayes_risk(const EstimatorHandle& est, const Model& model, const PriorModel& prior, const QuantitySpec& spec,
                             const LossSpec& loss, std::size_t n, std::size_t reps, const RngStream& rng,
                             const RiskOptions& opts = {}, std::string prior_digest = "prior") {
  if (n == 0) throw std::invalid_argument("risk estimation needs n >= 1");
  if (!prior.sample) throw std::invalid_argument("bayes risk needs a prior sampler");
  validate(loss);
  RiskReport rep = detail::run_replicates(est, reps, rng, opts, [&](RngStream& local) {
    const ParamPoint theta = prior.sample(local);
    const double phi = qoi_eval(spec, model, theta);
    const ObservationSample data = simulate_sample(model, theta, n, local);
    const double d = est.procedure(data, local);
    return loss_eval(loss, phi, d);
  });
  rep.loss_digest = describe(loss);
  rep.truth_digest = std::move(prior_digest);
  return rep;
}

/// sqrt(se_a^2 + se_b^2); treats the two reports as independent.
inline double combined_std_error(const RiskReport& a, const RiskReport& b) {
  return std::hypot(a.mc_std_error, b.mc_std_error);
}

}  // namespace dtuq

#endif  // DTUQ_RISK_HPP
