// Exponential lifetimes with an inverse-gamma prior: plug-in, predictive and
// Bayes estimates of the median lifetime, by closed form and by simulation.

#include <cstdio>

#include "dtuq/dtuq.hpp"

int main() {
  using namespace dtuq;
  const ObservationSample data{5.0, 7.0, 9.0, 10.0, 11.0, 13.0, 15.0, 20.0};
  const ExpInvGamma prior{2.0, 10.0};
  const Model model(ModelKind::exponential);
  const auto median = QuantitySpec::quantile(0.5);

  const ParamPoint mle = mle_fit(model.kind, data);
  const auto law = conjugate_posterior(prior, data);
  const auto& ig = std::get<InverseGamma>(law);
  std::printf("posterior IG(%g, %g), mle theta = %g\n", ig.shape, ig.scale, mle[0]);
  std::printf("plug-in median        %.6f\n", plug_in(median, model, mle));
  std::printf("predictive median     %.6f (closed form)\n", hpe_quantile_closed(prior, data, 0.5));

  const RngStream rng(2024, 0);
  const WeightedPosterior post = draw_conjugate(model.kind, law, 100000, rng.substream(1));
  std::printf("predictive median     %.6f (double Monte-Carlo, 1e6 draws)\n",
              hpe_quantile(0.5, post, model, 1000000, rng.substream(2)));

  for (const LossSpec& loss : {LossSpec{QuadraticLoss{}}, LossSpec{WeightedAbsoluteLoss{1.0, 9.0}}, LossSpec{LogQuadraticLoss{}}}) {
    const DecisionProblem problem(median, loss, post, model);
    std::printf("bayes %-28s %.6f (closed %.6f)\n", describe(loss).c_str(), problem.bayes_estimate(),
                *bayes_estimate_closed(loss, median, model, law));
  }
  return 0;
}
