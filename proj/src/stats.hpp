// Small-sample statistics for A/B comparison reports: mean with a
// 95% Student-t confidence half-width, and Welch's unequal-variance
// t-test. The t distribution is evaluated through the regularized
// incomplete beta function so there is no dependency beyond libm.
#pragma once

#include <vector>

namespace ivy {

// Regularized incomplete beta I_x(a,b), via the continued fraction
// (modified Lentz). Domain: a>0, b>0, 0<=x<=1.
double incomplete_beta(double a, double b, double x);

// CDF of Student's t with df degrees of freedom (df > 0).
double student_t_cdf(double t, double df);

// Two-sided quantile: returns q such that P(|T| <= q) = level.
double student_t_quantile_two_sided(double level, double df);

struct MeanCi {
  int n = 0;
  double mean = 0.0;
  double ci_half = 0.0;  // 95% half-width; 0 when n < 2
};

MeanCi mean_ci95(const std::vector<double>& xs);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

// Welch's t-test for a difference in means. Both samples need n >= 2.
// When both variances are zero the test degenerates: p = 1 if the
// means agree, else p = 0.
WelchResult welch_t_test(const std::vector<double>& a,
                         const std::vector<double>& b);

}  // namespace ivy
