#pragma once

#include <functional>

namespace specsense::quadrature {

struct Result {
  double value = 0.0;
  double error_estimate = 0.0;
  int intervals = 0;
};

/// Globally adaptive 15-point Gauss-Kronrod integration on [a, b].
Result integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-13, double abs_tol = 0.0,
                 int max_intervals = 4000);

/// Integral over [a, inf) through the substitution t = a + s / (1 - s).
Result integrate_to_infinity(const std::function<double(double)>& f, double a,
                             double rel_tol = 1e-13, double abs_tol = 0.0,
                             int max_intervals = 4000);

}  // namespace specsense::quadrature
