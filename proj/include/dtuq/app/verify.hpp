#ifndef DTUQ_APP_VERIFY_HPP
#define DTUQ_APP_VERIFY_HPP

#include <cmath>
#include <string>
#include <vector>

#include "dtuq/estimators.hpp"
#include "dtuq/format.hpp"
#include "dtuq/inference.hpp"
#include "dtuq/model.hpp"
#include "dtuq/rng.hpp"

namespace dtuq::app {

struct VerifyItem {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  std::string note;
};

struct VerifySettings {
  std::size_t posterior_draws = 100000;
  std::size_t predictive_draws = 1000000;
  unsigned workers = 1;
};

/// The exponential test bed: IG(2, 10) prior, n = 8 observations summing to 90.
inline ExpInvGamma verify_prior() { return ExpInvGamma{2.0, 10.0}; }
inline ObservationSample verify_data() { return ObservationSample{5.0, 7.0, 9.0, 10.0, 11.0, 13.0, 15.0, 20.0}; }

/**
 * Numerical checks of the HPE properties: the expectation identity
 * (exact on the coin, Monte-Carlo on the exponential posterior), the
 * predictive quantile closed form, the equal-posterior / different-HPE pair
 * and the pinball-loss optimality of the predictive quantile.
 */
inline std::vector<VerifyItem> verify_hpe(const RngStream& base, const VerifySettings& s = {}) {
  std::vector<VerifyItem> items;

  {
    const auto law = conjugate_posterior(BernoulliBeta{0.0, 0.0}, ObservationSample{1, 1, 1, 0, 1, 1, 1, 1});
    const double hpe = *posterior_mean_closed(QuantitySpec::mean(), ModelKind::bernoulli, law);
    items.push_back({"hpe_coin_exact", hpe == 7.0 / 8.0, hpe, 7.0 / 8.0, 0.0, "Beta(0,0) prior, data 1,1,1,0,1,1,1,1"});
  }

  const Model model(ModelKind::exponential);
  const auto law = conjugate_posterior(verify_prior(), verify_data());
  const WeightedPosterior post = draw_conjugate(ModelKind::exponential, law, s.posterior_draws, base.substream(1), s.workers);
  const PredictiveSample pred = double_monte_carlo(model, post, s.predictive_draws, base.substream(2), s.workers);

  {
    const double identity = hpe_expectation(QuantitySpec::mean(), post, model);
    const MeanWithError mc = predictive_mean(pred);
    const double tol = 3.0 * mc.std_error;
    items.push_back({"hpe_identity_mean", std::abs(mc.mean - identity) <= tol, mc.mean, identity, tol,
                     "double-MC mean of Y vs posterior mean of theta, IG(10,100)"});
  }
  {
    constexpr double t = 10.0;
    const double identity = hpe_expectation(QuantitySpec::exceedance(t), post, model);
    const MeanWithError mc = predictive_mean(pred, [](double y) { return y > t ? 1.0 : 0.0; });
    const double tol = 3.0 * mc.std_error;
    items.push_back({"hpe_identity_exceedance", std::abs(mc.mean - identity) <= tol, mc.mean, identity, tol,
                     "double-MC P[Y>10] vs posterior mean of exp(-10/theta)"});
  }
  {
    const double closed = hpe_quantile_closed(verify_prior(), verify_data(), 0.5);
    const double mc = predictive_quantile(pred, 0.5);
    items.push_back({"predictive_quantile_closed_form", std::abs(mc - closed) < 0.03, mc, closed, 0.03,
                     "double-MC predictive median vs (2^0.1-1)*100"});
  }
  {
    const NotBayesDemo demo = not_bayes_demo(10.0, 100.0);
    const double diff = demo.second.hpe - demo.first.hpe;
    const double ref1 = std::expm1(std::log(2.0) / 10.0) * 100.0 / std::log(2.0);
    const double ref2 = std::expm1(std::log(4.0) / 10.0) * 100.0 / std::log(4.0);
    const bool ok = demo.posteriors_identical && demo.hpe_differ && std::abs(demo.first.hpe - ref1) < 1e-3 &&
                    std::abs(demo.second.hpe - ref2) < 1e-3 && diff > 0.37;
    items.push_back({"hpe_not_bayes", ok, diff, ref2 - ref1, 1e-3,
                     "identical IG(10,100) quantile posteriors, HPE " + format_real(demo.first.hpe) + " vs " +
                         format_real(demo.second.hpe)});
  }
  {
    const PredictorCheck c = hpe_as_predictor_check(0.5, post, model, s.predictive_draws, base.substream(2), s.workers);
    const double closed = hpe_quantile_closed(verify_prior(), verify_data(), 0.5);
    const bool ok = c.agree && std::abs(c.argmin - closed) < 0.03 + c.tolerance;
    items.push_back({"hpe_pinball_argmin", ok, c.argmin, c.hpe, c.tolerance,
                     "grid argmin of mean c_0.5(y,d) vs predictive median"});
  }
  return items;
}

inline std::string format_verify(const std::vector<VerifyItem>& items) {
  std::string out;
  for (const auto& it : items) {
    out += (it.passed ? "PASS " : "FAIL ") + it.name + " value=" + format_real(it.value) + " reference=" + format_real(it.reference) +
           " tolerance=" + format_real(it.tolerance) + " (" + it.note + ")\n";
  }
  return out;
}

}  // namespace dtuq::app

#endif  // DTUQ_APP_VERIFY_HPP
