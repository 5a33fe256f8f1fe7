// Plot-ready CSV of the normal predictive demo: for each seed, the predictive
// 5%/95% quantiles against those of the true N(10, 1), and the predictive
// variance against E[sigma^2 | D].
//
//   normal_predictive [seeds=20] > normal_predictive.csv

#include <cstdlib>
#include <iostream>

#include "dtuq/app/io.hpp"
#include "dtuq/app/normal_demo.hpp"

int main(int argc, char** argv) {
  using namespace dtuq;
  const std::size_t seeds = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 20;
  app::CsvTable csv({"seed", "pred_q05", "pred_q05_se", "true_q05", "pred_q95", "pred_q95_se", "true_q95", "pred_variance",
                     "pred_variance_se", "posterior_mean_sigma2", "interval_contains", "total_variance_holds"});
  for (std::size_t s = 0; s < seeds; ++s) {
    const app::NormalDemoResult r = app::normal_predictive_demo(RngStream(s, 0));
    csv.row().add(s).add(r.pred_q05).add(r.q_se05).add(r.true_q05).add(r.pred_q95).add(r.q_se95).add(r.true_q95);
    csv.add(r.pred_variance).add(r.pred_variance_se).add(r.posterior_mean_variance).add(r.interval_contains).add(r.total_variance_holds);
  }
  csv.write(std::cout);
  return 0;
}
