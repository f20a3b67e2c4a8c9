#pragma once

#include <functional>
#include <vector>

namespace fragmc {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

/// Adaptive Gauss–Kronrod integration of f over [lo, hi]. Tolerances below
/// 1e-11 are clamped: the error estimator cannot certify tighter bounds and
/// recursion would run to full depth.
QuadratureResult integrate(const std::function<double(double)>& f, double lo,
                           double hi, double rel_tol = 1e-10);

/// One fixed 15-point Gauss rule, no adaptivity; for narrow cells of smooth
/// integrands where a single application is already exact to rounding.
double integrate_cell(const std::function<double(double)>& f, double lo, double hi);

/// Same, but splits the interval at the given breakpoints first (for
/// integrands with known kinks or jumps, e.g. indicator test functions).
QuadratureResult integrate_piecewise(const std::function<double(double)>& f,
                                     double lo, double hi,
                                     const std::vector<double>& breakpoints,
                                     double rel_tol = 1e-10);

}  // namespace fragmc
