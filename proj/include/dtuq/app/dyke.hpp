#ifndef DTUQ_APP_DYKE_HPP
#define DTUQ_APP_DYKE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dtuq/app/io.hpp"
#include "dtuq/app/study.hpp"
#include "dtuq/error.hpp"
#include "dtuq/estimators.hpp"
#include "dtuq/inference.hpp"
#include "dtuq/model.hpp"
#include "dtuq/parallel.hpp"
#include "dtuq/rng.hpp"

namespace dtuq::app {

/// n annual maximal discharges from W(eta, beta).
inline ObservationSample simulate_dyke_data(double eta, double beta, std::size_t n, RngStream& rng) {
  if (n == 0) throw std::invalid_argument("dyke sample size must be >= 1");
  return ObservationSample(sample(Weibull{eta, beta}, rng, n));
}

/// Water levels Z_c for a discharge record.
inline std::vector<double> water_levels(const DykeGeometry& geom, const ObservationSample& discharges) {
  std::vector<double> z;
  z.reserve(discharges.n());
  for (double q : discharges.values()) z.push_back(dyke_output(geom, q));
  return z;
}

/// The four flood-probability estimates on one data set.
struct DykeEstimates {
  double p_mle = std::numeric_limits<double>::quiet_NaN();
  double p_hpe = std::numeric_limits<double>::quiet_NaN();
  double p_bay1 = std::numeric_limits<double>::quiet_NaN();  // log-quadratic
  double p_bay2 = std::numeric_limits<double>::quiet_NaN();  // weighted absolute on -log10 p
  double p_posterior_median = std::numeric_limits<double>::quiet_NaN();
  double ess = 0.0;
  std::string posterior_source;
  ParamPoint mle;
};

struct DykeSettings {
  std::size_t replicates = 200;
  std::size_t n = 30;
  double eta = 1000.0;
  double beta = 2.0;
  std::size_t posterior_draws = 100000;
  HierarchicalWeibullPrior prior = HierarchicalWeibullPrior::reference();
  DykeGeometry geometry = reference_dyke();
  WeightedAbsoluteLoss bay2_loss{1.0, 9.0};  // C1 prices under-estimating -log10 p
  unsigned workers = 1;
  double max_failure_fraction = 0.01;
};

/**
 * p_mle (plug-in), p_hpe (posterior mean of p), p_bay1 = exp E[ln p] and
 * p_bay2 = 10^-d with d the Bayes decision on -log10 p. Logs are taken in
 * log space since p underflows for large posterior shapes.
 */
inline DykeEstimates estimate_flood_probability(const ObservationSample& data, const DykeSettings& s, const RngStream& base,
                                                unsigned workers = 1) {
  const Model model(ModelKind::weibull, s.geometry);
  const QuantitySpec p_spec = QuantitySpec::exceedance(s.geometry.dyke_height);
  DykeEstimates out;
  out.mle = mle_fit(ModelKind::weibull, data);
  out.p_mle = plug_in(p_spec, model, out.mle);

  MonteCarloSettings mc;
  mc.posterior_draws = s.posterior_draws;
  const PosteriorBuild build = build_posterior(model, PriorSpec{s.prior}, data, mc, base, workers);
  out.ess = build.posterior.ess;
  out.posterior_source = std::string(to_string(build.posterior.source));

  const WeightedValues p = evaluate_qoi(p_spec, model, build.posterior);
  const WeightedValues neglog = evaluate_qoi(QuantitySpec::neg_log10(p_spec), model, build.posterior);
  out.p_hpe = weighted_mean(p.values, p.weights);
  out.p_bay1 = DecisionProblem(LogQuadraticLoss{}, p).bayes_estimate();
  out.p_bay2 = std::pow(10.0, -DecisionProblem(s.bay2_loss, neglog).bayes_estimate());
  out.p_posterior_median = weighted_quantile(p.values, p.weights, 0.5);
  return out;
}

struct DykeRow {
  std::size_t replicate = 0;
  bool ok = false;
  std::string error;
  DykeEstimates est;
};

struct DykeTable {
  DykeSettings settings;
  double p_true = 0.0;
  std::vector<DykeRow> rows;
  std::size_t failures = 0;
};

/// Replicate r simulates its data set on rng.substream(r).substream(0) and
/// runs inference under rng.substream(r), so rows do not depend on workers.
inline DykeTable run_dyke_replicates(const DykeSettings& s, const RngStream& rng) {
  if (s.replicates == 0) throw std::invalid_argument("dyke study needs replicates >= 1");
  s.geometry.validate();
  s.prior.validate();
  DykeTable table;
  table.settings = s;
  table.p_true = flood_probability(s.geometry, s.eta, s.beta);
  table.rows.resize(s.replicates);
  parallel_for(s.replicates, s.workers, [&](std::size_t r) {
    const RngStream base = rng.substream(r);
    DykeRow& row = table.rows[r];
    row.replicate = r;
    try {
      RngStream data_rng = base.substream(kDataStream);
      const ObservationSample data = simulate_dyke_data(s.eta, s.beta, s.n, data_rng);
      row.est = estimate_flood_probability(data, s, base, 1);
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  for (const auto& row : table.rows) table.failures += row.ok ? 0 : 1;
  if (static_cast<double>(table.failures) > s.max_failure_fraction * static_cast<double>(s.replicates))
    throw NumericalError("dyke study: " + std::to_string(table.failures) + " of " + std::to_string(s.replicates) +
                         " replicates failed; first error: " +
                         std::find_if(table.rows.begin(), table.rows.end(), [](const DykeRow& r) { return !r.ok; })->error);
  return table;
}

inline constexpr double kSafetyThreshold = 1e-2;  // "enlarge the dyke" level
inline constexpr double kRiskAreaThreshold = 1e-3;  // "flood-risk area" level

inline CsvTable dyke_csv(const DykeTable& t) {
  CsvTable csv({"replicate", "n", "status", "p_mle", "p_hpe", "p_bay1", "p_bay2", "p_posterior_median", "p_true", "ess",
                "posterior_source", "mle_eta", "mle_beta", "mle_above_1e-2", "bay2_above_1e-2", "mle_above_1e-3",
                "bay2_above_1e-3"});
  for (const auto& r : t.rows) {
    csv.row().add(r.replicate).add(t.settings.n).add(r.ok ? "ok" : "failed");
    if (r.ok) {
      const auto& e = r.est;
      csv.add(e.p_mle).add(e.p_hpe).add(e.p_bay1).add(e.p_bay2).add(e.p_posterior_median).add(t.p_true).add(e.ess)
          .add(e.posterior_source).add(e.mle[0]).add(e.mle[1])
          .add(e.p_mle > kSafetyThreshold).add(e.p_bay2 > kSafetyThreshold)
          .add(e.p_mle > kRiskAreaThreshold).add(e.p_bay2 > kRiskAreaThreshold);
    } else {
      for (int i = 0; i < 14; ++i) csv.add(i == 5 ? format_real(t.p_true) : std::string(i == 7 ? "" : "nan"));
    }
  }
  return csv;
}

}  // namespace dtuq::app

#endif  // DTUQ_APP_DYKE_HPP
