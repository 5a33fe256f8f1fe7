#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include <boost/math/tools/roots.hpp>

#include "dtuq/inference.hpp"

using namespace dtuq;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const ObservationSample kExpData{5.0, 7.0, 9.0, 10.0, 11.0, 13.0, 15.0, 20.0};

struct Moments {
  double mean;
  double var;
  double se_mean;
  double se_var;
};

// Self-normalized weighted moments of coordinate 0 with delta-method errors.
// For uniformly weighted chains the errors are rescaled to the reported ess.
Moments moments(const WeightedPosterior& post) {
  const auto w = post.normalized_weights();
  double m = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) m += w[i] * post.points[i][0];
  double v = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) v += w[i] * (post.points[i][0] - m) * (post.points[i][0] - m);
  double sm = 0.0;
  double sv = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double dev = post.points[i][0] - m;
    sm += w[i] * w[i] * dev * dev;
    sv += w[i] * w[i] * (dev * dev - v) * (dev * dev - v);
  }
  const double inflate = post.source == PosteriorSource::metropolis ? static_cast<double>(post.size()) / post.ess : 1.0;
  return {m, v, std::sqrt(sm * inflate), std::sqrt(sv * inflate)};
}

PriorModel ig_prior(double a, double b) { return as_prior(InverseGamma{a, b}); }

}  // namespace

TEST_CASE("MLE examples", "[inference][mle]") {
  CHECK(mle_fit(ModelKind::exponential, {2.0, 4.0, 6.0})[0] == 4.0);
  CHECK(mle_fit(ModelKind::bernoulli, {1, 1, 1, 0, 1, 1, 1, 1})[0] == 7.0 / 8.0);
  const ParamPoint wb = mle_fit(ModelKind::weibull, {1.0, 2.0, 3.0});
  CHECK_THAT(wb[0], WithinAbs(2.26, 0.02));
  CHECK_THAT(wb[1], WithinAbs(2.74, 0.02));
}

TEST_CASE("MLE errors", "[inference][mle]") {
  CHECK_THROWS_WITH(mle_fit(ModelKind::weibull, {2.0, 2.0, 2.0}), ContainsSubstring("shape MLE diverges"));
  CHECK_THROWS(mle_fit(ModelKind::exponential, ObservationSample{}));
  CHECK_THROWS(mle_fit(ModelKind::weibull, ObservationSample{}));
}

TEST_CASE("Weibull MLE agrees with a dense grid search", "[inference][mle]") {
  const ObservationSample data{1.0, 2.0, 3.0};
  const LogLikelihood ll(ModelKind::weibull, data);
  double best = -std::numeric_limits<double>::infinity();
  double best_eta = 0.0;
  double best_beta = 0.0;
  for (double eta = 0.5; eta <= 5.0; eta += 0.002) {
    for (double beta = 0.5; beta <= 5.0; beta += 0.002) {
      const double v = ll(ParamPoint::weibull(eta, beta));
      if (v > best) {
        best = v;
        best_eta = eta;
        best_beta = beta;
      }
    }
  }
  const ParamPoint fit = mle_fit(ModelKind::weibull, data);
  CHECK_THAT(fit[0], WithinAbs(best_eta, 0.02));
  CHECK_THAT(fit[1], WithinAbs(best_beta, 0.02));
  CHECK(ll(fit) >= best - 1e-9);
}

TEST_CASE("Weibull MLE solves the profile equation", "[inference][mle][property]") {
  RngStream rng(8, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const auto xs = sample(Weibull{1000.0, 0.7 + 3.0 * rng.uniform()}, rng, 30);
    const double beta = mle_fit(ModelKind::weibull, ObservationSample(xs))[1];
    long double s0 = 0.0L;
    long double s1 = 0.0L;
    long double sl = 0.0L;
    const double xmax = *std::max_element(xs.begin(), xs.end());
    for (double x : xs) {
      const long double lx = std::log(static_cast<long double>(x));
      const long double p = std::pow(static_cast<long double>(x / xmax), static_cast<long double>(beta));
      s0 += p;
      s1 += p * lx;
      sl += lx;
    }
    const long double residual = 1.0L / beta + sl / xs.size() - s1 / s0;
    CHECK(std::abs(static_cast<double>(residual)) < 1e-8);
  }
}

TEST_CASE("MLE is invariant under reparameterization", "[inference][mle][property]") {
  // Fit the exponential in its rate parameterization by solving the rate
  // score equation n/lambda - S = 0, then map back to the mean.
  RngStream rng(9, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const ObservationSample data(sample(Exponential{1.0 + 5.0 * rng.uniform()}, rng, 25));
    const double n = static_cast<double>(data.n());
    const double s = data.sum();
    auto score = [&](double lam) { return n / lam - s; };
    const auto [lo, hi] = boost::math::tools::bisect(score, 1e-3, 10.0, boost::math::tools::eps_tolerance<double>(52));
    const double rate = 0.5 * (lo + hi);
    CHECK_THAT(1.0 / rate, WithinRel(mle_fit(ModelKind::exponential, data)[0], 1e-8));
  }
}

TEST_CASE("conjugate posterior examples", "[inference][conjugate]") {
  const auto ig = std::get<InverseGamma>(conjugate_posterior(ExpInvGamma{2.0, 10.0}, kExpData));
  CHECK(ig.shape == 10.0);
  CHECK(ig.scale == 100.0);
  const auto be = std::get<Beta>(conjugate_posterior(BernoulliBeta{0.0, 0.0}, {1, 1, 1, 0, 1, 1, 1, 1}));
  CHECK(be.a == 7.0);
  CHECK(be.b == 1.0);
  CHECK(mean(be) == 7.0 / 8.0);
  const auto prior = std::get<InverseGamma>(conjugate_posterior(ExpInvGamma{1.0, 1.0}, ObservationSample{}));
  CHECK(prior.shape == 1.0);
  CHECK(prior.scale == 1.0);
}

TEST_CASE("improper conjugate posterior names the missing count", "[inference][conjugate]") {
  CHECK_THROWS_AS(conjugate_posterior(BernoulliBeta{0.0, 0.0}, {1, 1, 1}), NumericalError);
  CHECK_THROWS_WITH(conjugate_posterior(BernoulliBeta{0.0, 0.0}, {1, 1, 1}), ContainsSubstring("failures=0"));
  CHECK_THROWS_WITH(conjugate_posterior(BernoulliBeta{0.0, 0.0}, {0, 0}), ContainsSubstring("successes=0"));
}

TEST_CASE("normal-inverse-gamma update", "[inference][conjugate]") {
  const auto nig = std::get<NormalInverseGamma>(conjugate_posterior(NormalNIG{0.0, 1.0, 2.0, 2.0}, {1.0, 3.0}));
  CHECK(nig.kappa == 3.0);
  CHECK_THAT(nig.mu, WithinAbs(4.0 / 3.0, 1e-14));
  CHECK(nig.a == 3.0);
  // b0 + ss/2 + kappa0 n (xbar - mu0)^2 / (2 kappa) = 2 + 1 + 1*2*4/6
  CHECK_THAT(nig.b, WithinAbs(3.0 + 8.0 / 6.0, 1e-14));
}

TEST_CASE("importance sampling examples", "[inference][is]") {
  const WeightedPosterior post = sample_posterior_is(ModelKind::exponential, ig_prior(2.0, 10.0), kExpData, 100000, RngStream(1, 0));
  CHECK(post.source == PosteriorSource::importance);
  CHECK_THAT(moments(post).mean, WithinAbs(100.0 / 9.0, 0.15));

  const WeightedPosterior prior_only =
      sample_posterior_is(ModelKind::exponential, ig_prior(2.0, 10.0), ObservationSample{}, 1000, RngStream(1, 0));
  CHECK(prior_only.source == PosteriorSource::prior_only);
  CHECK(prior_only.ess == 1000.0);
  for (double lw : prior_only.log_weights) CHECK(lw == 0.0);
}

TEST_CASE("importance sampling with zero likelihood everywhere fails", "[inference][is]") {
  CHECK_THROWS_WITH(sample_posterior_is(ModelKind::exponential, ig_prior(2.0, 10.0), {-1.0}, 1000, RngStream(1, 0)),
                    ContainsSubstring("zero-likelihood proposal"));
  CHECK_THROWS_AS(sample_posterior_is(ModelKind::exponential, ig_prior(2.0, 10.0), kExpData, 10, RngStream(1, 0)),
                  std::invalid_argument);
}

TEST_CASE("importance sampling on the dyke prior keeps a usable ess", "[inference][is]") {
  RngStream data_rng(2013, 0);
  const ObservationSample data(sample(Weibull{1000.0, 2.0}, data_rng, 30));
  const WeightedPosterior post = sample_posterior_is(ModelKind::weibull, HierarchicalWeibullPrior::reference().as_prior(), data,
                                                     1000000, RngStream(5, 0));
  CHECK(post.ess > 1000.0);
}

TEST_CASE("importance sampling does not depend on the worker count", "[inference][is][determinism]") {
  ImportanceOptions one;
  ImportanceOptions four;
  four.workers = 4;
  const auto a = sample_posterior_is(ModelKind::exponential, ig_prior(2.0, 10.0), kExpData, 20000, RngStream(3, 1), one);
  const auto b = sample_posterior_is(ModelKind::exponential, ig_prior(2.0, 10.0), kExpData, 20000, RngStream(3, 1), four);
  CHECK(a.points == b.points);
  CHECK(a.log_weights == b.log_weights);
}

TEST_CASE("metropolis examples", "[inference][mh]") {
  const auto prior = as_prior(InverseGamma{3.0, 6.0});
  MetropolisOptions opts;
  opts.draws = 200000;
  opts.burn_in = 5000;
  opts.step_scales = {1.0};
  opts.initial = ParamPoint::exponential(3.0);
  const auto prior_chain = sample_posterior_mh(ModelKind::exponential, prior.log_pdf, ObservationSample{}, opts, RngStream(2, 0));
  CHECK_THAT(moments(prior_chain).mean, WithinAbs(3.0, 0.1));
  CHECK(prior_chain.acceptance_rate > 0.0);
  CHECK(prior_chain.acceptance_rate < 1.0);

  opts.draws = 60000;
  opts.step_scales = {0.6};
  opts.initial = ParamPoint::exponential(10.0);
  const auto chain = sample_posterior_mh(ModelKind::exponential, ig_prior(2.0, 10.0).log_pdf, kExpData, opts, RngStream(2, 1));
  CHECK_THAT(moments(chain).mean, WithinAbs(100.0 / 9.0, 0.2));
}

TEST_CASE("metropolis with a vanishing step reports a low ess", "[inference][mh]") {
  MetropolisOptions opts;
  opts.draws = 20000;
  opts.burn_in = 1000;
  opts.step_scales = {1e-7};
  opts.initial = ParamPoint::exponential(10.0);
  const auto chain = sample_posterior_mh(ModelKind::exponential, ig_prior(2.0, 10.0).log_pdf, kExpData, opts, RngStream(4, 0));
  CHECK(chain.acceptance_rate > 0.99);
  CHECK(chain.ess < 0.01 * chain.size());
  CHECK_FALSE(chain.diagnostics.empty());
}

TEST_CASE("metropolis argument checks", "[inference][mh]") {
  MetropolisOptions opts;
  opts.step_scales = {1.0, 1.0};
  opts.initial = ParamPoint::exponential(1.0);
  CHECK_THROWS_AS(sample_posterior_mh(ModelKind::exponential, ig_prior(2.0, 10.0).log_pdf, kExpData, opts, RngStream(1, 0)),
                  std::invalid_argument);
}

TEST_CASE("samplers agree with the conjugate posterior", "[inference][property]") {
  const double m = 100.0 / 9.0;
  const double v = 100.0 * 100.0 / (81.0 * 8.0);

  const auto is = sample_posterior_is(ModelKind::exponential, ig_prior(2.0, 10.0), kExpData, 100000, RngStream(21, 0));
  const Moments mi = moments(is);
  CHECK(std::abs(mi.mean - m) <= 3.0 * mi.se_mean);
  CHECK(std::abs(mi.var - v) <= 3.0 * mi.se_var);

  MetropolisOptions opts;
  opts.draws = 105000;
  opts.burn_in = 5000;
  opts.step_scales = {0.6};
  opts.initial = ParamPoint::exponential(m);
  const auto mh = sample_posterior_mh(ModelKind::exponential, ig_prior(2.0, 10.0).log_pdf, kExpData, opts, RngStream(21, 1));
  const Moments mm = moments(mh);
  CHECK(std::abs(mm.mean - m) <= 3.0 * mm.se_mean);
  CHECK(std::abs(mm.var - v) <= 3.0 * mm.se_var);
}

TEST_CASE("asymptotic approximation examples", "[inference][asymptotic]") {
  const Model expo(ModelKind::exponential);
  const ParamPoint th = ParamPoint::exponential(4.0);
  CHECK_THAT(asymptotic_approx(ApproxKind::mle_sampling, expo, th, QuantitySpec::mean(), 10).variance, WithinRel(1.6, 1e-12));
  const auto ex = asymptotic_approx(ApproxKind::mle_sampling, expo, th, QuantitySpec::exceedance(2.0), 10);
  CHECK_THAT(ex.variance, WithinRel(0.25 * std::exp(-1.0) / 10.0, 1e-12));
  CHECK_THAT(ex.sd(), WithinAbs(0.0959, 1e-4));
  const auto ex4 = asymptotic_approx(ApproxKind::mle_sampling, expo, th, QuantitySpec::exceedance(2.0), 40);
  CHECK_THAT(ex.sd() / ex4.sd(), WithinAbs(2.0, 1e-12));
  CHECK_THROWS_WITH(asymptotic_approx(ApproxKind::posterior, Model(ModelKind::weibull), ParamPoint::weibull(1, 1),
                                      QuantitySpec::mean(), 10),
                    ContainsSubstring("no Fisher information registered"));
}

TEST_CASE("posterior normal approximation is close to the exact posterior at n = 200", "[inference][asymptotic]") {
  RngStream rng(200, 0);
  const ObservationSample data(sample(Exponential{4.0}, rng, 200));
  const Distribution exact = InverseGamma{0.001 + 200.0, 0.001 + data.sum()};
  const ParamPoint mle = mle_fit(ModelKind::exponential, data);
  const NormalApprox approx = asymptotic_approx(ApproxKind::posterior, Model(ModelKind::exponential), mle, QuantitySpec::mean(), 200);
  double gap = 0.0;
  for (int k = -600; k <= 600; ++k) {
    const double x = approx.center + approx.sd() * k / 100.0;
    gap = std::max(gap, std::abs(cdf(exact, x) - approx.cdf(x)));
  }
  CHECK(gap < 0.03);
}

TEST_CASE("hierarchical prior puts the prior predictive median at t_e", "[inference][prior]") {
  const HierarchicalWeibullPrior prior = HierarchicalWeibullPrior::reference();
  CHECK_THAT(prior.t_e, WithinAbs(626.6, 0.05));
  // Conditionally on beta: P[Q <= t_e | beta] = 1 - (b / (b + t_e^beta))^m = 1/2.
  for (double beta : {1.1, 1.5, 2.0, 3.0}) {
    const double b = prior.b(beta);
    CHECK_THAT(1.0 - std::pow(b / (b + std::pow(prior.t_e, beta)), prior.m), WithinAbs(0.5, 1e-12));
  }
  RngStream rng(31, 0);
  std::size_t below = 0;
  constexpr std::size_t n = 200000;
  for (std::size_t i = 0; i < n; ++i) {
    const ParamPoint th = prior.sample(rng);
    if (draw(Weibull{th[0], th[1]}, rng) <= prior.t_e) ++below;
  }
  CHECK_THAT(static_cast<double>(below) / n, WithinAbs(0.5, 0.005));
}

TEST_CASE("hierarchical prior shape marginal", "[inference][prior]") {
  // Marginal of beta from the joint sampler vs the truncated-gamma cdf.
  const HierarchicalWeibullPrior prior = HierarchicalWeibullPrior::reference();
  RngStream rng(32, 0);
  std::size_t hits = 0;
  constexpr std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) hits += prior.sample(rng)[1] < 2.0 ? 1 : 0;
  CHECK_THAT(static_cast<double>(hits) / n, WithinAbs(cdf(prior.shape_prior(), 2.0), 0.006));
  CHECK(prior.log_pdf(ParamPoint::weibull(1000.0, 0.9)) == -std::numeric_limits<double>::infinity());
}
