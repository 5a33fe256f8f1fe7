#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dtuq/estimators.hpp"
#include "support.hpp"

using namespace dtuq;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const ObservationSample kExpData{5.0, 7.0, 9.0, 10.0, 11.0, 13.0, 15.0, 20.0};
const ExpInvGamma kExpPrior{2.0, 10.0};

WeightedPosterior exact_ig(double a, double b, std::size_t n, std::uint64_t seed) {
  return draw_conjugate(ModelKind::exponential, InverseGamma{a, b}, n, RngStream(seed, 0));
}

WeightedValues random_values(RngStream& rng, std::size_t n) {
  WeightedValues wv;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    wv.values.push_back(std::exp(3.0 * (rng.uniform() - 0.5)));
    wv.weights.push_back(rng.uniform());
    total += wv.weights.back();
  }
  for (double& w : wv.weights) w /= total;
  wv.fill_logs();
  return wv;
}

}  // namespace

TEST_CASE("posterior expected loss examples", "[estimators]") {
  const auto wv = WeightedValues::equal_weights({1.0, 2.0, 3.0});
  CHECK_THAT(DecisionProblem(QuadraticLoss{1.0}, wv).expected_loss(2.0), WithinAbs(2.0 / 3.0, 1e-15));
  CHECK_THAT(DecisionProblem(WeightedAbsoluteLoss{1.0, 1.0}, wv).expected_loss(2.0), WithinAbs(2.0 / 3.0, 1e-15));
  const auto constant = WeightedValues::equal_weights({2.5, 2.5, 2.5});
  CHECK(DecisionProblem(QuadraticLoss{1.0}, constant).expected_loss(2.5) == 0.0);
  CHECK(DecisionProblem(LogQuadraticLoss{}, constant).expected_loss(2.5) == 0.0);
}

TEST_CASE("log-quadratic loss needs positive quantities", "[estimators]") {
  const auto wv = WeightedValues::equal_weights({-1.0, 2.0});
  const DecisionProblem p(LogQuadraticLoss{}, wv);
  CHECK_THROWS_AS(p.expected_loss(1.0), std::domain_error);
  CHECK_THROWS_AS(p.bayes_estimate(), std::domain_error);
}

TEST_CASE("bayes estimate examples", "[estimators]") {
  CHECK(bayes_estimate(DecisionProblem(QuadraticLoss{1.0}, WeightedValues::equal_weights({1.0, 2.0, 3.0}))) == 2.0);
  std::vector<double> hundred;
  for (int i = 1; i <= 100; ++i) hundred.push_back(i);
  CHECK(bayes_estimate(DecisionProblem(WeightedAbsoluteLoss{19.0, 1.0}, WeightedValues::equal_weights(hundred))) == 95.0);
  const DecisionProblem geo(LogQuadraticLoss{}, WeightedValues::equal_weights({0.1, 0.001}));
  CHECK_THAT(geo.bayes_estimate(), WithinRel(0.01, 1e-12));
  CHECK_THAT(geo.bayes_estimate_numeric(), WithinRel(0.01, 1e-6));
}

TEST_CASE("closed-form dispatch agrees with golden-section minimization", "[estimators][property]") {
  RngStream rng(17, 0);
  const std::vector<LossSpec> losses = {QuadraticLoss{1.0}, QuadraticLoss{3.0}, WeightedAbsoluteLoss{1.0, 9.0},
                                        WeightedAbsoluteLoss{3.0, 1.0}, LogQuadraticLoss{}};
  for (int rep = 0; rep < 20; ++rep) {
    const WeightedValues wv = random_values(rng, 50 + rep * 10);
    for (const auto& l : losses) {
      const DecisionProblem p(l, wv);
      INFO(describe(l) << " rep " << rep);
      CHECK_THAT(p.bayes_estimate_numeric(), WithinRel(p.bayes_estimate(), 1e-6));
    }
  }
}

TEST_CASE("log-quadratic estimate never exceeds the posterior mean", "[estimators][property]") {
  RngStream rng(18, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const WeightedValues wv = random_values(rng, 30);
    CHECK(DecisionProblem(LogQuadraticLoss{}, wv).bayes_estimate() < DecisionProblem(QuadraticLoss{}, wv).bayes_estimate());
  }
}

TEST_CASE("symmetric weighted-absolute estimate is the weighted median", "[estimators][property]") {
  RngStream rng(19, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const WeightedValues wv = random_values(rng, 31);
    CHECK(DecisionProblem(WeightedAbsoluteLoss{2.0, 2.0}, wv).bayes_estimate() == weighted_quantile(wv.values, wv.weights, 0.5));
  }
}

TEST_CASE("double Monte-Carlo on a point mass reproduces the sampling law", "[estimators][predictive]") {
  const Model expo(ModelKind::exponential);
  const auto post = WeightedPosterior::point_mass(ModelKind::exponential, ParamPoint::exponential(3.0));
  const PredictiveSample s = double_monte_carlo(expo, post, 100000, RngStream(1, 2));
  CHECK(testsupport::ks_statistic(s.draws, [](double x) { return cdf(Exponential{3.0}, x); }) <
        testsupport::ks_critical(s.draws.size()));
}

TEST_CASE("double Monte-Carlo matches the closed-form predictive median", "[estimators][predictive]") {
  const Model expo(ModelKind::exponential);
  const auto post = exact_ig(10.0, 100.0, 100000, 2);
  const PredictiveSample s = double_monte_carlo(expo, post, 1000000, RngStream(2, 2));
  const double q = hpe_quantile_closed(kExpPrior, kExpData, 0.5);
  const auto below = std::count_if(s.draws.begin(), s.draws.end(), [&](double y) { return y <= q; });
  CHECK_THAT(static_cast<double>(below) / s.draws.size(), WithinAbs(0.5, 0.002));
}

TEST_CASE("prior-only double Monte-Carlo matches the nested-quadrature predictive mean", "[estimators][predictive]") {
  const Model expo(ModelKind::exponential);
  const PriorModel prior = as_prior(InverseGamma{3.0, 6.0});
  const auto post = sample_posterior_is(ModelKind::exponential, prior, ObservationSample{}, 100000, RngStream(3, 1));
  REQUIRE(post.source == PosteriorSource::prior_only);
  const MeanWithError mc = predictive_mean(double_monte_carlo(expo, post, 1000000, RngStream(3, 2)));
  const Distribution ig = InverseGamma{3.0, 6.0};
  auto outer = [&](double theta) {
    const double inner = detail::expect_under(Exponential{theta}, [](double y) { return y; });
    return inner * std::exp(log_pdf(ig, theta));
  };
  const double oracle =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(outer, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-10);
  CHECK_THAT(oracle, WithinRel(3.0, 1e-6));
  CHECK(std::abs(mc.mean - oracle) <= 3.0 * mc.std_error);
}

TEST_CASE("hpe_expectation examples", "[estimators][hpe]") {
  const auto beta_post = draw_conjugate(ModelKind::bernoulli, Beta{7.0, 1.0}, 1000, RngStream(4, 0));
  const double hpe_mc = hpe_expectation(QuantitySpec::mean(), beta_post, Model(ModelKind::bernoulli));
  CHECK_THAT(hpe_mc, WithinAbs(7.0 / 8.0, 0.02));
  CHECK(*posterior_mean_closed(QuantitySpec::mean(), Model(ModelKind::bernoulli), Beta{7.0, 1.0}) == 7.0 / 8.0);

  const auto point = WeightedPosterior::point_mass(ModelKind::exponential, ParamPoint::exponential(4.0));
  CHECK(hpe_expectation(QuantitySpec::exceedance(2.0), point, Model(ModelKind::exponential)) == std::exp(-0.5));

  CHECK_THROWS_WITH(hpe_expectation(QuantitySpec::quantile(0.5), point, Model(ModelKind::exponential)),
                    ContainsSubstring("use hpe_quantile"));
}

TEST_CASE("dyke flood probability: posterior mean equals the predictive exceedance", "[estimators][hpe]") {
  const DykeGeometry geom = reference_dyke();
  const Model model(ModelKind::weibull, geom);
  RngStream data_rng(2013, 0);
  const ObservationSample data(sample(Weibull{1000.0, 2.0}, data_rng, 30));
  const auto post = sample_posterior_is(ModelKind::weibull, HierarchicalWeibullPrior::reference().as_prior(), data, 50000,
                                        RngStream(6, 1));
  const auto spec = QuantitySpec::exceedance(geom.dyke_height);
  const double identity = hpe_expectation(spec, post, model);

  const auto w = post.normalized_weights();
  double direct = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) direct += w[i] * flood_probability(geom, post.points[i][0], post.points[i][1]);
  CHECK_THAT(identity, WithinRel(direct, 1e-10));

  const MeanWithError mc =
      predictive_mean(double_monte_carlo(model, post, 1000000, RngStream(6, 2)), [&](double y) { return y > geom.dyke_height ? 1.0 : 0.0; });
  CHECK(std::abs(mc.mean - identity) <= 3.0 * mc.std_error);
}

TEST_CASE("hpe_quantile examples", "[estimators][hpe]") {
  const Model expo(ModelKind::exponential);
  const auto point = WeightedPosterior::point_mass(ModelKind::exponential, ParamPoint::exponential(3.0));
  CHECK_THAT(hpe_quantile(0.5, point, expo, 100000, RngStream(7, 2)), WithinAbs(3.0 * std::numbers::ln2, 0.04));

  const auto post = exact_ig(10.0, 100.0, 100000, 8);
  CHECK_THAT(hpe_quantile(0.5, post, expo, 1000000, RngStream(8, 2)), WithinAbs(7.177, 0.03));
  CHECK_THAT(hpe_quantile(0.75, post, expo, 1000000, RngStream(8, 3)), WithinAbs(14.87, 0.05));
}

TEST_CASE("predictive quantiles are monotone in the order", "[estimators][property]") {
  const auto post = exact_ig(10.0, 100.0, 10000, 9);
  const PredictiveSample s = double_monte_carlo(Model(ModelKind::exponential), post, 50000, RngStream(9, 2));
  double prev = -std::numeric_limits<double>::infinity();
  for (int k = 1; k < 100; ++k) {
    const double q = predictive_quantile(s, k / 100.0);
    CHECK(q >= prev);
    prev = q;
  }
}

TEST_CASE("quantile posterior and closed-form predictive quantile", "[estimators][closed]") {
  const InverseGamma qp = quantile_posterior_exponential(kExpPrior, kExpData, 0.5);
  CHECK(qp.shape == 10.0);
  CHECK_THAT(qp.scale, WithinAbs(100.0 * std::numbers::ln2, 1e-10));
  CHECK_THAT(qp.scale, WithinAbs(69.3147, 1e-4));
  // Transform of variables: q = theta ln 2 with theta ~ IG(10, 100).
  for (double x : {3.0, 5.0, 7.7, 12.0}) CHECK_THAT(cdf(qp, x), WithinAbs(cdf(InverseGamma{10.0, 100.0}, x / std::numbers::ln2), 1e-12));
  CHECK_THAT(qp.scale / (qp.shape - 1.0), WithinAbs(7.7016, 1e-4));

  CHECK(quantile_posterior_exponential(kExpPrior, kExpData, 1e-9).scale < 1e-6);

  CHECK_THAT(hpe_quantile_closed(kExpPrior, kExpData, 0.5), WithinAbs((std::pow(2.0, 0.1) - 1.0) * 100.0, 1e-10));
  CHECK_THAT(hpe_quantile_closed(kExpPrior, kExpData, 0.5), WithinAbs(7.1773, 1e-4));
  CHECK_THAT(hpe_quantile_closed(kExpPrior, kExpData, 0.75), WithinAbs(14.870, 1e-3));
  // predictive survival (1 + q/S)^-N = 1 - alpha
  const double q = hpe_quantile_closed(kExpPrior, kExpData, 0.75);
  CHECK_THAT(std::pow(1.0 + q / 100.0, -10.0), WithinAbs(0.25, 1e-12));
}

TEST_CASE("closed-form predictive quantile is consistent as n grows", "[estimators][closed]") {
  const double theta = 5.0;
  for (double alpha : {0.1, 0.5, 0.9}) {
    const ObservationSample big(std::vector<double>(200000, theta));
    const double ratio = hpe_quantile_closed(ExpInvGamma{1.0, 1.0}, big, alpha) / (theta * -std::log1p(-alpha));
    CHECK_THAT(ratio, WithinAbs(1.0, 1e-4));
  }
}

TEST_CASE("quadratic Bayes estimate of the median by importance sampling", "[estimators][closed]") {
  const auto post = sample_posterior_is(ModelKind::exponential, as_prior(InverseGamma{2.0, 10.0}), kExpData, 100000, RngStream(10, 1));
  const DecisionProblem p(QuantitySpec::quantile(0.5), QuadraticLoss{1.0}, post, Model(ModelKind::exponential));
  CHECK_THAT(p.bayes_estimate(), WithinAbs(7.7016, 0.02));
  const auto closed = bayes_estimate_closed(QuadraticLoss{1.0}, QuantitySpec::quantile(0.5), Model(ModelKind::exponential),
                                            InverseGamma{10.0, 100.0});
  REQUIRE(closed);
  CHECK_THAT(*closed, WithinAbs(7.701635, 1e-6));
}

TEST_CASE("closed-form Bayes estimates agree with Monte-Carlo decision problems", "[estimators][closed]") {
  const Model expo(ModelKind::exponential);
  const InverseGamma law{10.0, 100.0};
  const auto post = draw_conjugate(ModelKind::exponential, law, 200000, RngStream(11, 1));
  const std::vector<LossSpec> losses = {QuadraticLoss{1.0}, WeightedAbsoluteLoss{1.0, 9.0}, LogQuadraticLoss{}};
  const std::vector<QuantitySpec> specs = {QuantitySpec::mean(), QuantitySpec::quantile(0.9), QuantitySpec::exceedance(10.0)};
  for (const auto& spec : specs) {
    for (const auto& l : losses) {
      const auto closed = bayes_estimate_closed(l, spec, expo, law);
      REQUIRE(closed);
      const double mc = DecisionProblem(spec, l, post, expo).bayes_estimate();
      INFO(spec.describe() << " " << describe(l));
      CHECK_THAT(mc, WithinRel(*closed, 0.01));
    }
  }
  const auto coin = draw_conjugate(ModelKind::bernoulli, Beta{7.0, 1.0}, 200000, RngStream(11, 2));
  for (const auto& l : losses) {
    const auto closed = bayes_estimate_closed(l, QuantitySpec::mean(), Model(ModelKind::bernoulli), Beta{7.0, 1.0});
    REQUIRE(closed);
    CHECK_THAT(DecisionProblem(QuantitySpec::mean(), l, coin, Model(ModelKind::bernoulli)).bayes_estimate(), WithinRel(*closed, 0.01));
  }
}

TEST_CASE("predictive quantile closed form", "[estimators][closed]") {
  const auto q = predictive_quantile_closed(0.5, Model(ModelKind::exponential), InverseGamma{10.0, 100.0});
  REQUIRE(q);
  CHECK_THAT(*q, WithinAbs(hpe_quantile_closed(kExpPrior, kExpData, 0.5), 1e-12));
  CHECK_FALSE(predictive_quantile_closed(0.5, Model(ModelKind::bernoulli), Beta{1.0, 1.0}));
}

TEST_CASE("the predictive quantile is not a Bayes estimator of the quantile", "[estimators][demo]") {
  const NotBayesDemo demo = not_bayes_demo(10.0, 100.0);
  CHECK(demo.posteriors_identical);
  CHECK(demo.hpe_differ);
  CHECK_THAT(demo.first.hpe, WithinAbs(10.354, 1e-3));
  CHECK_THAT(demo.second.hpe, WithinAbs(10.727, 1e-3));
  CHECK(demo.second.hpe - demo.first.hpe > 0.37);
  CHECK_THAT(demo.first.bayes_quadratic, WithinAbs(100.0 / 9.0, 1e-12));
  CHECK(demo.first.bayes_quadratic == demo.second.bayes_quadratic);

  // Both HPEs confirmed through predictive samples drawn from each branch's prior.
  for (const auto* b : {&demo.first, &demo.second}) {
    const auto post = draw_conjugate(ModelKind::exponential, InverseGamma{b->prior.n0, b->prior.s0}, 100000, RngStream(12, 1));
    CHECK_THAT(hpe_quantile(b->alpha, post, Model(ModelKind::exponential), 1000000, RngStream(12, 2)), WithinAbs(b->hpe, 0.06));
  }
}

TEST_CASE("predictive quantile minimizes the pinball loss", "[estimators][predictor]") {
  const Model expo(ModelKind::exponential);
  const auto post = exact_ig(10.0, 100.0, 100000, 13);
  const PredictorCheck median = hpe_as_predictor_check(0.5, post, expo, 1000000, RngStream(13, 2));
  CHECK(median.agree);
  CHECK_THAT(median.argmin, WithinAbs(7.177, 0.03 + median.tolerance));

  const PredictorCheck hi = hpe_as_predictor_check(0.9, post, expo, 200000, RngStream(13, 3));
  const PredictorCheck lo = hpe_as_predictor_check(0.1, post, expo, 200000, RngStream(13, 3));
  CHECK(hi.agree);
  CHECK(lo.agree);
  CHECK(hi.argmin > lo.argmin);
  CHECK(pinball_loss(0.9, 2.0, 1.0) == Catch::Approx(0.9));
  CHECK(pinball_loss(0.9, 1.0, 2.0) == Catch::Approx(0.1));
}

TEST_CASE("HPE expectation identity over random posteriors", "[estimators][property]") {
  const Model expo(ModelKind::exponential);
  RngStream rng(14, 0);
  int pass_mean = 0;
  int pass_exceed = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const double a = 3.0 + 15.0 * rng.uniform();
    const double b = (a - 1.0) * (1.0 + 9.0 * rng.uniform());
    const double t = b / (a - 1.0) * (0.5 + rng.uniform());
    const auto post = draw_conjugate(ModelKind::exponential, InverseGamma{a, b}, 20000, RngStream(14, 100 + k));
    const PredictiveSample s = double_monte_carlo(expo, post, 200000, RngStream(14, 200 + k));
    const MeanWithError m = predictive_mean(s);
    const MeanWithError e = predictive_mean(s, [&](double y) { return y > t ? 1.0 : 0.0; });
    pass_mean += std::abs(m.mean - hpe_expectation(QuantitySpec::mean(), post, expo)) <= 3.0 * m.std_error;
    pass_exceed += std::abs(e.mean - hpe_expectation(QuantitySpec::exceedance(t), post, expo)) <= 3.0 * e.std_error;
  }
  CHECK(pass_mean >= 19);
  CHECK(pass_exceed >= 19);
}

TEST_CASE("double Monte-Carlo is independent of the worker count", "[estimators][determinism]") {
  const auto post = exact_ig(10.0, 100.0, 30000, 15);
  const auto a = double_monte_carlo(Model(ModelKind::exponential), post, 50000, RngStream(15, 2), 1);
  const auto b = double_monte_carlo(Model(ModelKind::exponential), post, 50000, RngStream(15, 2), 3);
  CHECK(a.draws == b.draws);
}
