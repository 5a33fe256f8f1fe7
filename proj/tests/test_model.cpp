#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "dtuq/model.hpp"

using namespace dtuq;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("log-likelihood examples", "[model]") {
  CHECK_THAT(log_likelihood(ModelKind::exponential, ParamPoint::exponential(1.0), {1.0, 1.0}), WithinAbs(-2.0, 1e-12));
  const ObservationSample coin{1, 1, 1, 0, 1, 1, 1, 1};
  CHECK_THAT(log_likelihood(ModelKind::bernoulli, ParamPoint::bernoulli(7.0 / 8.0), coin),
             WithinAbs(7.0 * std::log(7.0 / 8.0) + std::log(1.0 / 8.0), 1e-12));
  CHECK_THAT(log_likelihood(ModelKind::bernoulli, ParamPoint::bernoulli(7.0 / 8.0), coin), WithinAbs(-3.014161, 1e-6));
  CHECK_THAT(log_likelihood(ModelKind::weibull, ParamPoint::weibull(1.0, 1.0), {2.0, 3.0}), WithinAbs(-5.0, 1e-12));
}

TEST_CASE("empty sample gives zero log-likelihood with a diagnostic", "[model]") {
  Diagnostics diag;
  CHECK(log_likelihood(ModelKind::exponential, ParamPoint::exponential(3.0), ObservationSample{}, &diag) == 0.0);
  CHECK_FALSE(diag.empty());
}

TEST_CASE("single-observation likelihood equals the density", "[model][property]") {
  RngStream rng(11, 0);
  for (int i = 0; i < 50; ++i) {
    const double x = 0.01 + 5.0 * rng.uniform();
    const double a = 0.5 + 3.0 * rng.uniform();
    const double b = 0.5 + 3.0 * rng.uniform();
    const ObservationSample one{x};
    CHECK_THAT(std::exp(log_likelihood(ModelKind::exponential, ParamPoint::exponential(a), one)),
               WithinAbs(std::exp(log_pdf(Exponential{a}, x)), 1e-12));
    CHECK_THAT(std::exp(log_likelihood(ModelKind::weibull, ParamPoint::weibull(a, b), one)),
               WithinAbs(std::exp(log_pdf(Weibull{a, b}, x)), 1e-12));
    CHECK_THAT(std::exp(log_likelihood(ModelKind::normal, ParamPoint::normal(a, b), one)),
               WithinAbs(std::exp(log_pdf(Normal{a, b}, x)), 1e-12));
    const double p = rng.uniform();
    const double y = p < 0.5 ? 0.0 : 1.0;
    CHECK_THAT(std::exp(log_likelihood(ModelKind::bernoulli, ParamPoint::bernoulli(p), {y})),
               WithinAbs(std::exp(log_pdf(Bernoulli{p}, y)), 1e-12));
  }
}

TEST_CASE("quantity-of-interest examples", "[model]") {
  const Model expo(ModelKind::exponential);
  CHECK_THAT(qoi_eval(QuantitySpec::exceedance(2.0), expo, ParamPoint::exponential(4.0)), WithinAbs(std::exp(-0.5), 1e-12));
  CHECK_THAT(qoi_eval(QuantitySpec::quantile(0.5), expo, ParamPoint::exponential(1.0)), WithinAbs(std::numbers::ln2, 1e-10));
  // theta chosen so that P[Y > 1] = 0.013
  const double theta = -1.0 / std::log(0.013);
  const auto nl = QuantitySpec::neg_log10(QuantitySpec::exceedance(1.0));
  CHECK_THAT(qoi_eval(nl, expo, ParamPoint::exponential(theta)), WithinAbs(-std::log10(0.013), 1e-12));
  CHECK_THAT(qoi_eval(nl, expo, ParamPoint::exponential(theta)), WithinAbs(1.886, 1e-3));
}

TEST_CASE("quantity specs validate their arguments", "[model]") {
  CHECK_THROWS_AS(QuantitySpec::quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS(QuantitySpec::quantile(1.0), std::invalid_argument);
  CHECK_THROWS_AS(QuantitySpec::neg_log10(QuantitySpec::mean()), std::invalid_argument);
  CHECK(QuantitySpec::exceedance(3.0).is_probability_valued());
  CHECK_FALSE(QuantitySpec::quantile(0.5).is_expectation());
}

TEST_CASE("exceedance and cdf sum to one; quantile matches the distribution", "[model][property]") {
  RngStream rng(12, 0);
  const Model wb(ModelKind::weibull);
  for (int i = 0; i < 100; ++i) {
    const ParamPoint th = ParamPoint::weibull(100.0 + 2000.0 * rng.uniform(), 0.5 + 3.0 * rng.uniform());
    const double t = 3000.0 * rng.uniform();
    CHECK_THAT(qoi_eval(QuantitySpec::exceedance(t), wb, th) + cdf(Weibull{th[0], th[1]}, t), WithinAbs(1.0, 1e-12));
    const double a = 0.01 + 0.98 * rng.uniform();
    CHECK(qoi_eval(QuantitySpec::quantile(a), wb, th) == quantile(Weibull{th[0], th[1]}, a));
  }
}

TEST_CASE("mean of a transformed output uses quadrature", "[model]") {
  MeanOf sq;
  sq.h = [](double y) { return y * y; };
  sq.label = "square";
  // E[X^2] = 2 theta^2 for an exponential
  CHECK_THAT(qoi_eval(QuantitySpec(sq), Model(ModelKind::exponential), ParamPoint::exponential(3.0)), WithinRel(18.0, 1e-7));
}

TEST_CASE("dyke output examples", "[model]") {
  const DykeGeometry g{50.0, 0.031636, 53.1};
  CHECK_THAT(dyke_output(g, 0.0), WithinAbs(50.0, 1e-12));
  CHECK_THAT(dyke_output(g, 2084.0), WithinAbs(53.1, 0.01));
  CHECK_THAT(dyke_output(DykeGeometry{50.0, 1.0, 60.0}, 32.0), WithinAbs(58.0, 1e-12));
  CHECK_THROWS_AS(dyke_output(g, -1.0), std::invalid_argument);
  CHECK_THROWS_AS((DykeGeometry{50.0, 0.0, 53.1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((DykeGeometry{50.0, 1.0, 49.0}.validate()), std::invalid_argument);
}

TEST_CASE("flood probability examples", "[model]") {
  // h - Zv = A * eta^(3/5)  puts the critical discharge at eta
  const DykeGeometry at_eta{50.0, 0.5, 50.0 + 0.5 * std::pow(1000.0, 0.6)};
  CHECK_THAT(flood_probability(at_eta, 1000.0, 2.0), WithinAbs(std::exp(-1.0), 1e-12));
  CHECK_THAT(flood_probability(DykeGeometry{50.0, 0.031636, 53.1}, 1000.0, 2.0), WithinAbs(0.013, 2e-4));
  const DykeGeometry ref = reference_dyke();
  CHECK_THAT(ref.rating_constant, WithinAbs(0.031625, 1e-6));
  CHECK_THAT(flood_probability(ref, 1000.0, 2.0), WithinRel(0.013, 1e-12));
}

TEST_CASE("flood probability by brute-force propagation", "[model]") {
  const DykeGeometry ref = reference_dyke();
  RngStream rng(3, 0);
  const auto q = sample(Weibull{1000.0, 2.0}, rng, 1000000);
  std::size_t hits = 0;
  for (double x : q) hits += dyke_output(ref, x) > ref.dyke_height ? 1 : 0;
  CHECK_THAT(static_cast<double>(hits) / q.size(), WithinAbs(0.013, 0.0004));
}

TEST_CASE("flood probability decreases with dyke height", "[model][property]") {
  double prev = 1.0;
  for (int i = 1; i <= 50; ++i) {
    const DykeGeometry g{50.0, 0.031636, 50.0 + 0.1 * i};
    const double p = flood_probability(g, 1000.0, 2.0);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("exceedance through the dyke map equals flood probability", "[model]") {
  const DykeGeometry ref = reference_dyke();
  const Model m(ModelKind::weibull, ref);
  CHECK_THAT(qoi_eval(QuantitySpec::exceedance(ref.dyke_height), m, ParamPoint::weibull(1000.0, 2.0)), WithinRel(0.013, 1e-12));
}

TEST_CASE("observation samples reject non-finite values", "[model]") {
  CHECK_THROWS_AS(ObservationSample({1.0, std::nan("")}), std::invalid_argument);
  const ObservationSample s{2.0, 4.0, 6.0};
  CHECK(s.n() == 3);
  CHECK(s.sum() == 12.0);
}
