#pragma once

#include <vector>

namespace neurospike {

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-tailed
};

// Regularized incomplete beta function I_x(a, b), continued fraction with
// modified Lentz evaluation.
double incomplete_beta(double a, double b, double x);

// Two-tailed p-value of Student's t with df degrees of freedom.
double student_t_two_tailed(double t, double df);

// Welch's unequal-variance two-sample t-test with Welch-Satterthwaite df.
// Both samples need >= 2 observations. If both variances are zero the test
// degenerates: p = 1 for equal means, p -> 0 otherwise.
TTestResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b);

// Paired two-tailed t-test on equal-length samples (df = n-1).
TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

double sample_mean(const std::vector<double>& xs);
// Unbiased (n-1 denominator) standard deviation.
double sample_sd(const std::vector<double>& xs);

}  // namespace neurospike
