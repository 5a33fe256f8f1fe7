#ifndef DTUQ_APP_RISK_STUDY_HPP
#define DTUQ_APP_RISK_STUDY_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dtuq/app/config.hpp"
#include "dtuq/app/io.hpp"
#include "dtuq/app/study.hpp"
#include "dtuq/error.hpp"
#include "dtuq/estimators.hpp"
#include "dtuq/risk.hpp"

namespace dtuq::app {

enum class RiskMode { frequentist, bayes };

struct RiskStudy {
  StudyConfig study;
  RiskMode mode = RiskMode::bayes;
  std::vector<std::size_t> sample_sizes;
  std::size_t reps = 10000;
};

/// The "risk" block: {"mode": "bayes"|"frequentist", "n": [..], "reps": R}.
/// Frequentist mode takes theta_true from the top-level "truth" key.
inline RiskStudy parse_risk_study(const Json& j, const std::filesystem::path& base_dir = {}) {
  RiskStudy rs;
  rs.study = parse_study(j, base_dir);
  const Json& r = detail::field(j, "risk", "config");
  const std::string mode = r.contains("mode") ? detail::text(r, "mode", "risk") : "bayes";
  if (mode == "bayes") {
    rs.mode = RiskMode::bayes;
  } else if (mode == "frequentist") {
    rs.mode = RiskMode::frequentist;
    if (!rs.study.truth) throw ConfigError("risk.mode 'frequentist' needs a top-level 'truth' parameter vector");
  } else {
    throw ConfigError("risk.mode must be 'bayes' or 'frequentist'");
  }
  const Json& n = detail::field(r, "n", "risk");
  // nlohmann stores small literals as signed integers, so accept any integer and range-check below.
  auto whole = [](const Json& v) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 1) throw ConfigError("risk.n entries must be positive integers");
    return static_cast<std::size_t>(v.get<std::int64_t>());
  };
  if (n.is_number()) {
    rs.sample_sizes.push_back(whole(n));
  } else if (n.is_array()) {
    for (const auto& v : n) rs.sample_sizes.push_back(whole(v));
  } else {
    throw ConfigError("risk.n must be a positive integer or an array of them");
  }
  for (std::size_t v : rs.sample_sizes)
    if (v == 0) throw ConfigError("risk.n entries must be >= 1");
  if (rs.sample_sizes.empty()) throw ConfigError("risk.n must not be empty");
  rs.reps = detail::count_or(r, "reps", rs.reps, "risk");
  if (rs.reps < 2) throw ConfigError("risk.reps must be >= 2");
  // The hierarchical prior is proper by construction; conjugate ones may not be.
  if (rs.mode == RiskMode::bayes && is_conjugate(rs.study.prior)) {
    try {
      as_prior(prior_law(as_conjugate(rs.study.prior)));
    } catch (const std::exception&) {
      throw ConfigError("risk.mode 'bayes' needs a proper prior to draw theta from");
    }
  }
  return rs;
}

/**
 * Decision rule for (estimator, loss) under the study's prior. The rule
 * returns its decision on the loss's working scale (-log10 phi for
 * neg_log10 losses). Closed forms are used where the conjugate law allows;
 * otherwise a fresh posterior is sampled per data set.
 */
inline EstimatorHandle make_estimator(const StudyConfig& cfg, const std::string& name, const LossEntry& entry,
                                      std::uint64_t seed) {
  const bool neglog = entry.scale == LossScale::neg_log10;
  auto to_work = [neglog](double v) { return neglog ? -std::log10(v) : v; };
  EstimatorHandle h;
  h.name = name;
  h.settings_digest = name + "|" + describe(entry) + "|draws=" + std::to_string(cfg.montecarlo.posterior_draws) +
                      "|seed=" + std::to_string(seed);
  if (name == "mle") {
    h.procedure = [cfg, to_work](const ObservationSample& data, RngStream&) {
      return to_work(plug_in(cfg.quantity, cfg.model, mle_fit(cfg.model.kind, data)));
    };
    return h;
  }
  h.procedure = [cfg, name, entry, to_work, neglog](const ObservationSample& data, RngStream& rng) {
    std::optional<ConjugatePosterior> law;
    if (is_conjugate(cfg.prior) && cfg.montecarlo.sampler != SamplerChoice::importance &&
        cfg.montecarlo.sampler != SamplerChoice::metropolis)
      law = conjugate_posterior(as_conjugate(cfg.prior), data);
    if (law) {
      std::optional<double> closed;
      if (name == "bayes" && !neglog) {
        closed = bayes_estimate_closed(entry.loss, cfg.quantity, cfg.model, *law);
      } else if (name == "hpe") {
        if (cfg.quantity.is_expectation()) {
          closed = posterior_mean_closed(cfg.quantity, cfg.model, *law);
        } else if (const auto* q = std::get_if<QuantileOf>(&cfg.quantity.value())) {
          closed = predictive_quantile_closed(q->order, cfg.model, *law);
        }
      }
      if (closed) return to_work(*closed);
    }
    const PosteriorBuild build = build_posterior(cfg.model, cfg.prior, data, cfg.montecarlo, rng);
    if (name == "hpe") {
      if (cfg.quantity.is_expectation()) return to_work(hpe_expectation(cfg.quantity, build.posterior, cfg.model));
      const auto& q = std::get<QuantileOf>(cfg.quantity.value());
      return to_work(hpe_quantile(q.order, build.posterior, cfg.model, cfg.montecarlo.predictive_draws,
                                  rng.substream(kPredictiveStream)));
    }
    const QuantitySpec working = neglog ? QuantitySpec::neg_log10(cfg.quantity) : cfg.quantity;
    return DecisionProblem(working, entry.loss, build.posterior, cfg.model).bayes_estimate();
  };
  return h;
}

/// One row per (n, estimator, loss). All estimators at a given n see the
/// same replicate data sets (stream RngStream(seed, 100 + size index)).
inline CsvTable run_risk_study(const RiskStudy& rs, unsigned workers = 1) {
  const StudyConfig& cfg = rs.study;
  CsvTable table({"mode", "n", "estimator", "loss", "risk", "mc_std_error", "replicates", "failures", "truth"});
  RiskOptions opts;
  opts.workers = workers;
  std::optional<PriorModel> prior;
  if (rs.mode == RiskMode::bayes) prior = detail::proper_prior(cfg.prior);
  for (std::size_t i = 0; i < rs.sample_sizes.size(); ++i) {
    const std::size_t n = rs.sample_sizes[i];
    const RngStream rng(cfg.seed, 100 + i);
    for (const auto& name : cfg.estimators) {
      for (const auto& entry : cfg.losses) {
        const EstimatorHandle est = make_estimator(cfg, name, entry, cfg.seed);
        const QuantitySpec working = entry.scale == LossScale::neg_log10 ? QuantitySpec::neg_log10(cfg.quantity) : cfg.quantity;
        const RiskReport rep = rs.mode == RiskMode::bayes
                                   ? bayes_risk(est, cfg.model, *prior, working, entry.loss, n, rs.reps, rng, opts)
                                   : frequentist_risk(est, cfg.model, *cfg.truth, working, entry.loss, n, rs.reps, rng, opts);
        table.row()
            .add(rs.mode == RiskMode::bayes ? "bayes" : "frequentist")
            .add(n)
            .add(name)
            .add(describe(entry))
            .add(rep.risk)
            .add(rep.mc_std_error)
            .add(rep.replicates)
            .add(rep.failures)
            .add(rs.mode == RiskMode::bayes ? std::string("prior") : rep.truth_digest);
      }
    }
  }
  return table;
}

}  // namespace dtuq::app

#endif  // DTUQ_APP_RISK_STUDY_HPP
