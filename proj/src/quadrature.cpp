#include "fragmc/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace fragmc {

QuadratureResult integrate(const std::function<double(double)>& f, double lo,
                           double hi, double rel_tol) {
  QuadratureResult r;
  if (!(hi > lo)) return r;
  rel_tol = std::max(rel_tol, 1e-11);
  double err = 0.0;
  r.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, lo, hi, 15, rel_tol, &err);
  r.error_estimate = err;
  return r;
}

double integrate_cell(const std::function<double(double)>& f, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return boost::math::quadrature::gauss<double, 15>::integrate(f, lo, hi);
}

QuadratureResult integrate_piecewise(const std::function<double(double)>& f,
                                     double lo, double hi,
                                     const std::vector<double>& breakpoints,
                                     double rel_tol) {
  std::vector<double> knots;
  knots.push_back(lo);
  for (double x : breakpoints) {
    if (x > lo && x < hi) knots.push_back(x);
  }
  knots.push_back(hi);
  std::sort(knots.begin(), knots.end());
  QuadratureResult total;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const QuadratureResult piece = integrate(f, knots[i], knots[i + 1], rel_tol);
    total.value += piece.value;
    total.error_estimate += piece.error_estimate;
  }
  return total;
}

}  // namespace fragmc
