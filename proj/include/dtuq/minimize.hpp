#ifndef DTUQ_MINIMIZE_HPP
#define DTUQ_MINIMIZE_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace dtuq {

/// Golden-section search for a minimizer of a unimodal f on [lo, hi].
/// Stops when the bracket is narrower than rel_tol * max(|x|, abs_floor).
template <class F>
double golden_section_minimize(F&& f, double lo, double hi, double rel_tol = 1e-10, double abs_floor = 1e-300,
                               int max_iter = 500) {
  if (!(lo <= hi)) throw std::invalid_argument("golden-section bracket must satisfy lo <= hi");
  constexpr double inv_phi = 1.0 / std::numbers::phi;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  for (int iter = 0; iter < max_iter; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= rel_tol * std::max(std::abs(mid), abs_floor)) break;
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

}  // namespace dtuq

#endif  // DTUQ_MINIMIZE_HPP
