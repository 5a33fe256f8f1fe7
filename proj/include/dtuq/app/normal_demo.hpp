#ifndef DTUQ_APP_NORMAL_DEMO_HPP
#define DTUQ_APP_NORMAL_DEMO_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "dtuq/estimators.hpp"
#include "dtuq/inference.hpp"
#include "dtuq/model.hpp"
#include "dtuq/rng.hpp"

namespace dtuq::app {

// Weakly informative default: vague location, IG(1, 1) on the variance.
inline constexpr NormalNIG kNormalDemoPrior{0.0, 0.01, 1.0, 1.0};

/// Predictive vs true 5-95% interval and the variance decomposition for one
/// normal data set.
struct NormalDemoResult {
  ObservationSample data;
  double pred_q05 = 0.0;
  double pred_q95 = 0.0;
  double q_se05 = 0.0;  // Monte-Carlo standard errors of the predictive quantiles
  double q_se95 = 0.0;
  double true_q05 = 0.0;
  double true_q95 = 0.0;
  double pred_variance = 0.0;
  double pred_variance_se = 0.0;
  double posterior_mean_variance = 0.0;  // E[sigma^2 | D]
  bool interval_contains = false;
  bool total_variance_holds = false;
};

namespace detail {

// Order-statistic standard error sqrt(a(1-a)/I) / f(q), with the density
// estimated from the spacing of sqrt(I) neighbouring order statistics.
inline double quantile_std_error(const std::vector<double>& sorted, double alpha) {
  const auto n = static_cast<double>(sorted.size());
  const auto k = static_cast<std::ptrdiff_t>(std::ceil(alpha * n)) - 1;
  const auto m = static_cast<std::ptrdiff_t>(std::sqrt(n));
  const auto lo = std::max<std::ptrdiff_t>(0, k - m);
  const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(sorted.size()) - 1, k + m);
  const double density = static_cast<double>(hi - lo) / n / (sorted[hi] - sorted[lo]);
  return std::sqrt(alpha * (1.0 - alpha) / n) / density;
}

}  // namespace detail

/**
 * Draws n observations from N(mean, variance), forms the NIG posterior and
 * simulates the predictive by double Monte-Carlo with `draws` outputs.
 * Containment is strict at 3 standard errors on each side.
 */
inline NormalDemoResult normal_predictive_demo(const RngStream& base, const NormalNIG& prior = kNormalDemoPrior, std::size_t n = 10,
                                               std::size_t draws = 100000, double mean = 10.0, double variance = 1.0) {
  NormalDemoResult r;
  RngStream data_rng = base.substream(0);
  const Distribution truth = Normal{mean, variance};
  r.data = ObservationSample(sample(truth, data_rng, n));
  const auto law = conjugate_posterior(prior, r.data);
  const auto& nig = std::get<NormalInverseGamma>(law);
  r.posterior_mean_variance = nig.b / (nig.a - 1.0);

  const WeightedPosterior post = draw_conjugate(ModelKind::normal, law, draws, base.substream(1));
  PredictiveSample pred = double_monte_carlo(ModelKind::normal, post, draws, base.substream(2));
  std::vector<double> y = pred.draws;
  std::sort(y.begin(), y.end());
  r.pred_q05 = predictive_quantile(pred, 0.05);
  r.pred_q95 = predictive_quantile(pred, 0.95);
  r.q_se05 = detail::quantile_std_error(y, 0.05);
  r.q_se95 = detail::quantile_std_error(y, 0.95);
  r.true_q05 = quantile(truth, 0.05);
  r.true_q95 = quantile(truth, 0.95);
  r.interval_contains = r.pred_q05 + 3.0 * r.q_se05 < r.true_q05 && r.pred_q95 - 3.0 * r.q_se95 > r.true_q95;

  const auto I = static_cast<double>(y.size());
  const MeanWithError m = predictive_mean(pred);
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : y) {
    const double d = (v - m.mean) * (v - m.mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= I;
  m4 /= I;
  r.pred_variance = m2 * I / (I - 1.0);
  r.pred_variance_se = std::sqrt(std::max(0.0, m4 - m2 * m2) / I);
  r.total_variance_holds = r.pred_variance + 3.0 * r.pred_variance_se >= r.posterior_mean_variance;
  return r;
}

}  // namespace dtuq::app

#endif  // DTUQ_APP_NORMAL_DEMO_HPP
