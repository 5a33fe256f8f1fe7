#ifndef DTUQ_APP_STUDY_HPP
#define DTUQ_APP_STUDY_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dtuq/app/config.hpp"
#include "dtuq/app/io.hpp"
#include "dtuq/error.hpp"
#include "dtuq/estimators.hpp"
#include "dtuq/format.hpp"
#include "dtuq/inference.hpp"
#include "dtuq/loss.hpp"
#include "dtuq/model.hpp"
#include "dtuq/rng.hpp"

namespace dtuq::app {

inline constexpr double kEssHardFloor = 50.0;

// Substream indices under a study's base stream RngStream(seed, 0).
inline constexpr std::uint64_t kDataStream = 0;
inline constexpr std::uint64_t kPosteriorStream = 1;
inline constexpr std::uint64_t kPredictiveStream = 2;
inline constexpr std::uint64_t kMetropolisStream = 3;

struct PosteriorBuild {
  WeightedPosterior posterior;
  std::optional<ConjugatePosterior> law;  // set for conjugate priors
};

namespace detail {

inline PriorModel proper_prior(const PriorSpec& prior) {
  if (const auto* h = std::get_if<HierarchicalWeibullPrior>(&prior)) return h->as_prior();
  try {
    return as_prior(prior_law(as_conjugate(prior)));
  } catch (const std::domain_error&) {
    throw ConfigError("sampling-based inference needs a proper prior; use sampler 'conjugate' or a prior with positive parameters");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("prior: ") + e.what());
  }
}

inline WeightedPosterior metropolis(ModelKind kind, const PriorModel& prior, const ObservationSample& data, std::size_t draws,
                                    const RngStream& rng) {
  RngStream chain_rng = rng;
  ParamPoint start = data.empty() ? prior.sample(chain_rng) : mle_fit(kind, data);
  if (!std::isfinite(prior.log_pdf(start))) {
    // MLE outside the prior support (e.g. below a shape truncation): start from a prior draw.
    start = prior.sample(chain_rng);
  }
  MetropolisOptions opts;
  opts.burn_in = std::max<std::size_t>(draws / 5, 500);
  opts.draws = draws + opts.burn_in;
  const double n = std::max<double>(1.0, static_cast<double>(data.n()));
  const double step = 2.4 / std::sqrt(static_cast<double>(dimension(kind))) / std::sqrt(n);
  opts.step_scales.assign(dimension(kind), step);
  opts.initial = start;
  return sample_posterior_mh(kind, prior.log_pdf, data, opts, chain_rng);
}

}  // namespace detail

/**
 * Posterior for a study: the exact conjugate law when one exists (sampler
 * auto or conjugate), otherwise importance sampling from the prior with a
 * Metropolis fallback when the ess falls below 1% of the draws.
 */
inline PosteriorBuild build_posterior(const Model& model, const PriorSpec& prior, const ObservationSample& data,
                                      const MonteCarloSettings& mc, const RngStream& base, unsigned workers = 1) {
  const RngStream post_rng = base.substream(kPosteriorStream);
  const std::size_t N = mc.posterior_draws;
  PosteriorBuild out;
  const bool conjugate = is_conjugate(prior);
  if (conjugate && (mc.sampler == SamplerChoice::automatic || mc.sampler == SamplerChoice::conjugate)) {
    ConjugatePosterior law;
    try {
      law = conjugate_posterior(as_conjugate(prior), data);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    out.law = law;
    out.posterior = draw_conjugate(model.kind, law, N, post_rng, workers);
    return out;
  }
  const PriorModel pm = detail::proper_prior(prior);
  if (mc.sampler == SamplerChoice::metropolis) {
    out.posterior = detail::metropolis(model.kind, pm, data, N, base.substream(kMetropolisStream));
  } else {
    ImportanceOptions opts;
    opts.workers = workers;
    out.posterior = sample_posterior_is(model.kind, pm, data, N, post_rng, opts);
    if (mc.sampler == SamplerChoice::automatic && out.posterior.ess < opts.ess_warn_fraction * static_cast<double>(N)) {
      const double is_ess = out.posterior.ess;
      out.posterior = detail::metropolis(model.kind, pm, data, N, base.substream(kMetropolisStream));
      out.posterior.diagnostics.warn("importance-sampling ess " + format_real(is_ess) + " below 1% of draws; fell back to metropolis");
    }
  }
  if (out.posterior.ess < kEssHardFloor)
    throw NumericalError("posterior ess " + format_real(out.posterior.ess) + " is below the hard floor of 50; increase " +
                         "montecarlo.posterior_draws or choose a prior that agrees with the data");
  return out;
}

struct EstimateEntry {
  std::string estimator;
  std::string loss;
  double value = 0.0;
  double posterior_expected_loss = 0.0;  // under the posterior, NaN when undefined
  std::optional<double> std_error;       // Monte-Carlo standard error where one applies
  std::string method;
};

struct EstimateReport {
  std::string model;
  std::string quantity;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::optional<ParamPoint> mle;
  std::string posterior_source;
  std::size_t posterior_draws = 0;
  double ess = 0.0;
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
  std::vector<EstimateEntry> entries;
  std::optional<double> truth;
  std::optional<double> wall_clock_seconds;
  Json config;
};

struct StudyOptions {
  unsigned workers = 1;
  bool timing = false;
};

namespace detail {

inline double weighted_sd_error(const WeightedValues& wv, double ess) {
  const double m = weighted_mean(wv.values, wv.weights);
  double var = 0.0;
  for (std::size_t i = 0; i < wv.values.size(); ++i) var += wv.weights[i] * (wv.values[i] - m) * (wv.values[i] - m);
  return std::sqrt(var / std::max(ess, 1.0));
}

// phi-values on the loss's working scale.
inline WeightedValues working_values(const WeightedValues& natural, const WeightedValues& neglog, LossScale scale) {
  return scale == LossScale::neg_log10 ? neglog : natural;
}

}  // namespace detail

inline EstimateReport run_study(const StudyConfig& cfg, const StudyOptions& options = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  EstimateReport rep;
  rep.model = std::string(to_string(cfg.model.kind));
  if (const auto* d = std::get_if<DykeGeometry>(&cfg.model.output))
    rep.model += " -> dyke(Zv=" + format_real(d->riverbed_level) + ",A=" + format_real(d->rating_constant) +
                 ",h=" + format_real(d->dyke_height) + ")";
  rep.quantity = cfg.quantity.describe();
  rep.n = cfg.data.n();
  rep.seed = cfg.seed;
  rep.config = cfg.echo;
  if (cfg.truth) rep.truth = qoi_eval(cfg.quantity, cfg.model, *cfg.truth);

  const auto needs = [&](const char* name) {
    return std::find(cfg.estimators.begin(), cfg.estimators.end(), name) != cfg.estimators.end();
  };

  std::optional<double> mle_value;
  if (needs("mle")) {
    rep.mle = mle_fit(cfg.model.kind, cfg.data);
    mle_value = plug_in(cfg.quantity, cfg.model, *rep.mle);
  }

  const RngStream base(cfg.seed, 0);
  const PosteriorBuild build = build_posterior(cfg.model, cfg.prior, cfg.data, cfg.montecarlo, base, options.workers);
  const WeightedPosterior& post = build.posterior;
  rep.posterior_source = std::string(to_string(post.source));
  rep.posterior_draws = post.size();
  rep.ess = post.ess;
  rep.acceptance_rate = post.acceptance_rate;
  rep.warnings = post.diagnostics.warnings;

  const WeightedValues natural = evaluate_qoi(cfg.quantity, cfg.model, post);
  const bool any_neglog = std::any_of(cfg.losses.begin(), cfg.losses.end(),
                                      [](const LossEntry& e) { return e.scale == LossScale::neg_log10; });
  WeightedValues neglog;
  if (any_neglog) neglog = evaluate_qoi(QuantitySpec::neg_log10(cfg.quantity), cfg.model, post);

  std::optional<double> hpe_value;
  std::optional<double> hpe_se;
  std::string hpe_method;
  if (needs("hpe")) {
    if (cfg.quantity.is_expectation()) {
      std::optional<double> closed;
      if (build.law) closed = posterior_mean_closed(cfg.quantity, cfg.model, *build.law);
      if (closed) {
        hpe_value = *closed;
        hpe_method = "posterior_mean_closed_form";
      } else {
        hpe_value = weighted_mean(natural.values, natural.weights);
        hpe_se = detail::weighted_sd_error(natural, post.ess);
        hpe_method = "posterior_mean";
      }
    } else if (const auto* q = std::get_if<QuantileOf>(&cfg.quantity.value())) {
      std::optional<double> closed;
      if (build.law) closed = predictive_quantile_closed(q->order, cfg.model, *build.law);
      if (closed) {
        hpe_value = *closed;
        hpe_method = "predictive_quantile_closed_form";
      } else {
        hpe_value = hpe_quantile(q->order, post, cfg.model, cfg.montecarlo.predictive_draws, base.substream(kPredictiveStream),
                                 options.workers);
        hpe_method = "predictive_quantile_double_mc";
      }
    }
  }

  for (const auto& name : cfg.estimators) {
    for (const auto& entry : cfg.losses) {
      const DecisionProblem problem(entry.loss, detail::working_values(natural, neglog, entry.scale));
      const auto to_work = [&](double v) { return entry.scale == LossScale::neg_log10 ? -std::log10(v) : v; };
      EstimateEntry e;
      e.estimator = name;
      e.loss = describe(entry);
      if (name == "mle") {
        e.value = *mle_value;
        e.method = "plug_in";
      } else if (name == "hpe") {
        e.value = *hpe_value;
        e.std_error = hpe_se;
        e.method = hpe_method;
      } else {
        e.method = std::visit(overloaded{[](const QuadraticLoss&) { return "posterior_mean"; },
                                         [](const WeightedAbsoluteLoss&) { return "posterior_quantile"; },
                                         [](const LogQuadraticLoss&) { return "posterior_geometric_mean"; }},
                              entry.loss);
        std::optional<double> closed;
        if (build.law && entry.scale == LossScale::natural)
          closed = bayes_estimate_closed(entry.loss, cfg.quantity, cfg.model, *build.law);
        if (closed) {
          e.value = *closed;
          e.method += "_closed_form";
        } else {
          const double d = problem.bayes_estimate();
          e.value = entry.scale == LossScale::neg_log10 ? std::pow(10.0, -d) : d;
          if (entry.scale == LossScale::neg_log10) e.method += "_neg_log10";
          if (std::holds_alternative<QuadraticLoss>(entry.loss) && entry.scale == LossScale::natural)
            e.std_error = detail::weighted_sd_error(natural, post.ess);
        }
      }
      if (!std::isfinite(e.value)) throw NumericalError("estimator '" + name + "' produced a non-finite value under " + e.loss);
      try {
        e.posterior_expected_loss = problem.expected_loss(to_work(e.value));
      } catch (const std::domain_error&) {
        e.posterior_expected_loss = std::numeric_limits<double>::quiet_NaN();
      }
      rep.entries.push_back(std::move(e));
    }
  }
  if (options.timing)
    rep.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Report emission

namespace detail {

// Minimal JSON writer so reals are printed with 17 significant digits.
class JsonOut {
 public:
  void open(char c) {
    sep();
    os_ << c;
    first_ = true;
    ++depth_;
  }
  void close(char c) {
    --depth_;
    os_ << '\n' << std::string(2 * depth_, ' ') << c;
    first_ = false;
  }
  void key(const std::string& k) {
    sep();
    os_ << quote(k) << ": ";
    pending_key_ = true;
  }
  void value(double v) {
    sep();
    os_ << (std::isfinite(v) ? format_real(v) : "null");
  }
  void value(const std::string& s) {
    sep();
    os_ << quote(s);
  }
  void value(std::uint64_t v) {
    sep();
    os_ << v;
  }
  void null() {
    sep();
    os_ << "null";
  }
  void raw(const std::string& text) {
    sep();
    os_ << text;
  }
  std::string str() const { return os_.str() + "\n"; }

 private:
  void sep() {
    if (pending_key_) {
      pending_key_ = false;
      return;
    }
    if (depth_ == 0) return;
    if (!first_) os_ << ',';
    os_ << '\n' << std::string(2 * depth_, ' ');
    first_ = false;
  }

  static std::string quote(const std::string& s) { return Json(s).dump(); }

  std::ostringstream os_;
  int depth_ = 0;
  bool first_ = true;
  bool pending_key_ = false;
};

inline void optional_real(JsonOut& j, const char* k, const std::optional<double>& v) {
  j.key(k);
  if (v) {
    j.value(*v);
  } else {
    j.null();
  }
}

}  // namespace detail

inline std::string report_json(const EstimateReport& r) {
  detail::JsonOut j;
  j.open('{');
  j.key("model");
  j.value(r.model);
  j.key("quantity");
  j.value(r.quantity);
  j.key("n");
  j.value(static_cast<std::uint64_t>(r.n));
  j.key("seed");
  j.value(r.seed);
  j.key("mle");
  if (r.mle) {
    j.open('[');
    for (double c : r.mle->coords()) j.value(c);
    j.close(']');
  } else {
    j.null();
  }
  j.key("posterior");
  j.open('{');
  j.key("source");
  j.value(r.posterior_source);
  j.key("draws");
  j.value(static_cast<std::uint64_t>(r.posterior_draws));
  j.key("ess");
  j.value(r.ess);
  j.key("acceptance_rate");
  j.value(r.acceptance_rate);
  j.key("warnings");
  j.open('[');
  for (const auto& w : r.warnings) j.value(w);
  j.close(']');
  j.close('}');
  detail::optional_real(j, "truth", r.truth);
  j.key("estimates");
  j.open('[');
  for (const auto& e : r.entries) {
    j.open('{');
    j.key("estimator");
    j.value(e.estimator);
    j.key("loss");
    j.value(e.loss);
    j.key("value");
    j.value(e.value);
    j.key("posterior_expected_loss");
    j.value(e.posterior_expected_loss);
    detail::optional_real(j, "std_error", e.std_error);
    j.key("method");
    j.value(e.method);
    j.close('}');
  }
  j.close(']');
  if (r.wall_clock_seconds) detail::optional_real(j, "wall_clock_seconds", r.wall_clock_seconds);
  j.key("config");
  j.raw(r.config.dump());
  j.close('}');
  return j.str();
}

inline CsvTable report_csv(const EstimateReport& r) {
  CsvTable t({"estimator", "loss", "quantity", "value", "posterior_expected_loss", "std_error", "method", "ess",
              "posterior_source", "truth"});
  for (const auto& e : r.entries) {
    t.row()
        .add(e.estimator)
        .add(e.loss)
        .add(r.quantity)
        .add(e.value)
        .add(e.posterior_expected_loss)
        .add(e.std_error ? format_real(*e.std_error) : std::string())
        .add(e.method)
        .add(r.ess)
        .add(r.posterior_source)
        .add(r.truth ? format_real(*r.truth) : std::string());
  }
  return t;
}

/// Writes the report to `path` ("-" for stdout) as json or csv.
inline void emit_report(const EstimateReport& r, const std::string& path, const std::string& format, std::ostream& stdout_stream) {
  if (format == "json") {
    write_text(path, report_json(r), stdout_stream);
  } else if (format == "csv") {
    write_text(path, report_csv(r).str(), stdout_stream);
  } else {
    throw ConfigError("report format must be 'json' or 'csv' (got '" + format + "')");
  }
}

}  // namespace dtuq::app

#endif  // DTUQ_APP_STUDY_HPP
