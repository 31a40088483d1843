#pragma once

#include <functional>

namespace dynauction::numeric {

// Adaptive Simpson quadrature of f over [a, b] to an absolute tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol = 1e-10, int max_depth = 40);

struct Maximum {
  double x = 0.0;
  double value = 0.0;
};

// Golden-section search for the maximum of a unimodal f on [a, b].
Maximum golden_section_max(const std::function<double(double)>& f, double a, double b,
                           double x_tol = 1e-10);

}  // namespace dynauction::numeric
