#pragma once

#include <span>

namespace eti {

// I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

// P(T > t) for Student's t with df degrees of freedom (df may be fractional).
double student_t_sf(double t, double df);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

// Unequal-variance t-test. Each sample needs at least two values. When both
// variances are zero: equal means give t = 0, p = 1; different means give
// p = 0 with t = +/-inf.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct CiPoint {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int n = 0;
};

// mean +/- 1.96 * s / sqrt(n). Throws DomainError for fewer than two values.
CiPoint mean_ci95(std::span<const double> values);

}  // namespace eti
